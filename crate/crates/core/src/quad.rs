//! Numerical integration engines behind every evidence, normalization and
//! marginalization computation: tensor Gauss-Legendre, adaptive subdivision,
//! and seeded Monte Carlo, plus exact polygon/interval geometry for
//! piecewise-constant integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coords::BoxDomain;
use crate::error::{AuditError, Result};
use crate::scalar::{cst, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    TensorGauss,
    AdaptiveSubdivision,
    MonteCarlo,
}

/// Engine configuration; appears verbatim in scenario files.
/// Tolerances and budgets are plain f64/u64 metadata regardless of the
/// scalar type the integrand runs at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub engine: EngineKind,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Per-axis node count for the tensor rule (also the starting degree for
    /// the adaptive engine's panels).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub degree: Option<usize>,
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(AuditError::Validation("quadrature tolerances must be > 0".into()));
        }
        if self.max_evals < 100 {
            return Err(AuditError::Validation("max_evals must be at least 100".into()));
        }
        if self.engine == EngineKind::MonteCarlo && self.seed.is_none() {
            return Err(AuditError::Validation(
                "seed is mandatory for monte_carlo".into(),
            ));
        }
        Ok(())
    }

    pub fn tensor(degree: usize) -> Self {
        QuadratureSpec {
            engine: EngineKind::TensorGauss,
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            max_evals: 20_000_000,
            seed: None,
            degree: Some(degree),
        }
    }

    pub fn monte_carlo(seed: u64, max_evals: u64) -> Self {
        QuadratureSpec {
            engine: EngineKind::MonteCarlo,
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            max_evals,
            seed: Some(seed),
            degree: None,
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            engine: EngineKind::AdaptiveSubdivision,
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            max_evals: 20_000_000,
            seed: None,
            degree: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<F: Scalar> {
    pub value: F,
    pub err_est: F,
    pub evals: u64,
    /// false when the engine ran out of budget and returned its best estimate
    pub converged: bool,
}

/// Fixed-order pairwise summation; reduction order is independent of any
/// parallel evaluation order upstream.
pub fn pairwise_sum<F: Scalar>(xs: &[F]) -> F {
    match xs.len() {
        0 => F::zero(),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre<F: Scalar>(n: usize) -> (Vec<F>, Vec<F>) {
    assert!(n >= 1);
    let mut nodes = vec![F::zero(); n];
    let mut weights = vec![F::zero(); n];
    let nf = cst::<F>(n as f64);
    for i in 0..(n + 1) / 2 {
        let mut x = cst::<F>(
            (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos(),
        );
        let mut dp = F::zero();
        for _ in 0..100 {
            // evaluate P_n and P_{n-1} by upward recurrence
            let mut p0 = F::one();
            let mut p1 = x;
            for k in 2..=n {
                let kf = cst::<F>(k as f64);
                let p2 = ((cst::<F>(2.0) * kf - F::one()) * x * p1 - (kf - F::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = (p1, p0);
            dp = nf * (x * pn - pn1) / (x * x - F::one());
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < cst(1e-16) {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = cst::<F>(2.0) / ((F::one() - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn tensor_pass<F: Scalar>(
    f: &(dyn Fn(&[F]) -> F + Sync),
    b: &BoxDomain<F>,
    degree: usize,
) -> Result<TensorPass<F>> {
    tensor_pass_probed(f, b, degree, &[])
}

/// Like `tensor_pass`, with extra zero-weight probe points folded into the
/// spread/bimodality statistics; probes near the faces catch jumps hiding
/// in the blind margin outside the outermost quadrature nodes.
fn tensor_pass_probed<F: Scalar>(
    f: &(dyn Fn(&[F]) -> F + Sync),
    b: &BoxDomain<F>,
    degree: usize,
    probes: &[Vec<F>],
) -> Result<TensorPass<F>> {
    let dim = b.dim();
    let (nodes, weights) = gauss_legendre::<F>(degree);
    let half = cst::<F>(0.5);
    let mids: Vec<F> = (0..dim).map(|i| (b.lo[i] + b.hi[i]) * half).collect();
    let halfw: Vec<F> = (0..dim).map(|i| (b.hi[i] - b.lo[i]) * half).collect();
    let scale: F = halfw.iter().fold(F::one(), |a, &h| a * h);

    let total = degree.pow(dim as u32) as u64;
    let mut idx = vec![0usize; dim];
    let mut x = vec![F::zero(); dim];
    let mut terms: Vec<F> = Vec::with_capacity(total as usize);
    let mut samples: Vec<F> = Vec::with_capacity(total as usize);
    let mut vmin = F::infinity();
    let mut vmax = F::neg_infinity();
    for _ in 0..total {
        let mut w = F::one();
        for (d, &i) in idx.iter().enumerate() {
            x[d] = mids[d] + halfw[d] * nodes[i];
            w *= weights[i];
        }
        let v = f(&x);
        if v.is_nan() {
            return Err(AuditError::NaNEncountered);
        }
        vmin = vmin.min(v);
        vmax = vmax.max(v);
        samples.push(v);
        terms.push(w * v);
        // odometer increment
        for d in 0..dim {
            idx[d] += 1;
            if idx[d] < degree {
                break;
            }
            idx[d] = 0;
        }
    }
    for pt in probes {
        let v = f(pt);
        if v.is_nan() {
            return Err(AuditError::NaNEncountered);
        }
        vmin = vmin.min(v);
        vmax = vmax.max(v);
        samples.push(v);
    }
    // bimodal = no sample falls in the middle half of the value range,
    // the signature of a discontinuity crossing the box
    let spread = vmax - vmin;
    let bimodal = if spread > F::zero() {
        let lo_band = vmin + spread * cst::<F>(0.25);
        let hi_band = vmax - spread * cst::<F>(0.25);
        !samples.iter().any(|&v| v > lo_band && v < hi_band)
    } else {
        false
    };
    Ok(TensorPass {
        value: pairwise_sum(&terms) * scale,
        vmin,
        vmax,
        bimodal,
        evals: total,
    })
}

struct TensorPass<F: Scalar> {
    value: F,
    vmin: F,
    vmax: F,
    bimodal: bool,
    evals: u64,
}

fn integrate_tensor<F: Scalar>(
    f: &(dyn Fn(&[F]) -> F + Sync),
    b: &BoxDomain<F>,
    q: &QuadratureSpec,
) -> Result<QuadResult<F>> {
    let degree = q.degree.unwrap_or(32).max(2);
    let lo_degree = (degree / 2).max(1);
    let hi = tensor_pass(f, b, degree)?;
    let lo = tensor_pass(f, b, lo_degree)?;
    Ok(QuadResult {
        value: hi.value,
        err_est: (hi.value - lo.value).abs(),
        evals: hi.evals + lo.evals,
        converged: true,
    })
}

struct Region<F: Scalar> {
    err: F,
    /// refinement-priority bonus for boxes whose samples spread widely
    /// (possible discontinuity); never enters the reported error
    nudge: F,
    /// spread·volume majorant for boxes flagged as jump-crossing; the
    /// integral is not accepted until every such bound is inside tolerance
    certain: F,
    seq: u64,
    lo: Vec<F>,
    hi: Vec<F>,
    value: F,
}

impl<F: Scalar> Region<F> {
    fn priority(&self) -> F {
        self.err + self.nudge
    }
}

impl<F: Scalar> PartialEq for Region<F> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl<F: Scalar> Eq for Region<F> {}
impl<F: Scalar> PartialOrd for Region<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<F: Scalar> Ord for Region<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap by priority, ties broken by insertion order for
        // determinism
        self.priority()
            .partial_cmp(&other.priority())
            .unwrap_or(Ordering::Equal)
            .then(other.seq.cmp(&self.seq))
    }
}

fn integrate_adaptive<F: Scalar>(
    f: &(dyn Fn(&[F]) -> F + Sync),
    b: &BoxDomain<F>,
    q: &QuadratureSpec,
) -> Result<QuadResult<F>> {
    let d_lo = 4usize;
    let d_hi = q.degree.unwrap_or(8).max(d_lo + 1);
    let mut evals = 0u64;
    let mut seq = 0u64;
    let mut heap: BinaryHeap<Region<F>> = BinaryHeap::new();

    // The companion estimate evaluates the low-order rule on the two halves
    // of the widest axis: its nodes never coincide with the high-order
    // rule's, so discontinuities cannot silently agree.
    let assess = |lo: &[F], hi: &[F], seq: u64, evals: &mut u64| -> Result<Region<F>> {
        let sub = BoxDomain::new(lo.to_vec(), hi.to_vec());
        let vol = sub.volume();
        let center = sub.center();
        let mut probes: Vec<Vec<F>> = vec![center.clone()];
        for d in 0..sub.dim() {
            let mut pl = center.clone();
            pl[d] = lo[d];
            let mut ph = center.clone();
            ph[d] = hi[d];
            probes.push(pl);
            probes.push(ph);
        }
        let hi_pass = tensor_pass_probed(f, &sub, d_hi, &probes)?;
        let (vh, vmin, vmax, nh) = (
            hi_pass.value,
            hi_pass.vmin,
            hi_pass.vmax,
            hi_pass.evals + probes.len() as u64,
        );
        let mut axis = 0;
        let mut width = hi[0] - lo[0];
        for i in 1..lo.len() {
            if hi[i] - lo[i] > width {
                width = hi[i] - lo[i];
                axis = i;
            }
        }
        let mid = (lo[axis] + hi[axis]) * cst::<F>(0.5);
        let lo_pass = tensor_pass(f, &sub, d_lo)?;
        let vl = lo_pass.value;
        *evals += nh + lo_pass.evals;
        let err = if lo[axis] < mid && mid < hi[axis] {
            let mut hi_left = hi.to_vec();
            hi_left[axis] = mid;
            let mut lo_right = lo.to_vec();
            lo_right[axis] = mid;
            let l1 = tensor_pass(f, &BoxDomain::new(lo.to_vec(), hi_left), d_lo)?;
            let l2 = tensor_pass(f, &BoxDomain::new(lo_right, hi.to_vec()), d_lo)?;
            *evals += l1.evals + l2.evals;
            // two independent companions: a jump can zero one of these
            // functionals for an unlucky position, not both
            (vh - l1.value - l2.value).abs() + cst::<F>(0.5) * (vh - vl).abs()
        } else {
            // sliver at float resolution: only the plain companion remains
            (vh - vl).abs()
        };
        let spread_vol = (vmax - vmin) * vol;
        // a jump-crossing box owes its full spread·volume as certain error;
        // smooth boxes keep only a tie-breaking refinement bonus
        let certain = if hi_pass.bimodal { spread_vol } else { F::zero() };
        let nudge = if hi_pass.bimodal {
            spread_vol
        } else {
            spread_vol * cst::<F>(1e-3)
        };
        Ok(Region {
            err,
            nudge,
            certain,
            seq,
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            value: vh,
        })
    };

    // Forced initial partition so narrow features cannot hide between the
    // nodes of a single coarse panel.
    let splits_per_axis: usize = match b.dim() {
        1 => 8,
        2 => 4,
        _ => 2,
    };
    let mut total_value = F::zero();
    let mut total_err = F::zero();
    let mut certain_sum = F::zero();
    {
        let dim = b.dim();
        let mut idx = vec![0usize; dim];
        let cells = splits_per_axis.pow(dim as u32);
        for _ in 0..cells {
            let mut lo = Vec::with_capacity(dim);
            let mut hi = Vec::with_capacity(dim);
            for d in 0..dim {
                let w = (b.hi[d] - b.lo[d]) / cst::<F>(splits_per_axis as f64);
                lo.push(b.lo[d] + w * cst::<F>(idx[d] as f64));
                hi.push(b.lo[d] + w * cst::<F>((idx[d] + 1) as f64));
            }
            let r = assess(&lo, &hi, seq, &mut evals)?;
            seq += 1;
            total_value += r.value;
            total_err += r.err;
            certain_sum += r.certain;
            heap.push(r);
            for d in 0..dim {
                idx[d] += 1;
                if idx[d] < splits_per_axis {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
    // deterministic final reduction: re-sum regions in insertion order
    let finish = |heap: &BinaryHeap<Region<F>>, evals: u64, converged: bool| {
        let mut rs: Vec<(u64, F, F)> = heap.iter().map(|r| (r.seq, r.value, r.err)).collect();
        rs.sort_by_key(|r| r.0);
        let vals: Vec<F> = rs.iter().map(|r| r.1).collect();
        let errs: Vec<F> = rs.iter().map(|r| r.2).collect();
        let worst_certain = heap
            .iter()
            .map(|r| r.certain)
            .fold(F::zero(), |a, c| a.max(c));
        QuadResult {
            value: pairwise_sum(&vals),
            err_est: pairwise_sum(&errs).max(worst_certain),
            evals,
            converged,
        }
    };
    // The per-box estimate can be optimistic on discontinuities, so a box
    // tolerance pass is only accepted once the value also stops drifting
    // across a doubling of the evaluation count; the measured drift is
    // folded into the reported error.
    let mut checkpoint: Option<(F, u64)> = None;
    loop {
        let tol = cst::<F>(q.abs_tol).max(cst::<F>(q.rel_tol) * total_value.abs());
        // jump-crossing boxes carry certain spread·volume error; never
        // accept while any of them could exceed tolerance on its own
        let jumps_resolved = certain_sum <= tol
            || heap
                .iter()
                .map(|r| r.certain)
                .fold(F::zero(), |a, c| a.max(c))
                <= tol;
        if total_err <= tol && jumps_resolved {
            match checkpoint {
                None => checkpoint = Some((total_value, evals)),
                Some((v0, e0)) if evals >= 2 * e0 => {
                    let drift = (total_value - v0).abs();
                    if drift <= tol {
                        let mut out = finish(&heap, evals, true);
                        out.err_est = out.err_est.max(drift);
                        return Ok(out);
                    }
                    checkpoint = Some((total_value, evals));
                }
                Some(_) => {}
            }
        }
        if evals >= q.max_evals {
            return Ok(finish(&heap, evals, false));
        }
        let worst = heap.pop().expect("heap never empty");
        if !(worst.priority() > F::zero()) {
            // nothing left with estimable error: no further progress possible
            let tol = cst::<F>(q.abs_tol).max(cst::<F>(q.rel_tol) * total_value.abs());
            let converged = total_err <= tol && certain_sum <= tol;
            heap.push(worst);
            return Ok(finish(&heap, evals, converged));
        }
        // split along the widest axis
        let mut axis = 0;
        let mut width = worst.hi[0] - worst.lo[0];
        for i in 1..worst.lo.len() {
            let w = worst.hi[i] - worst.lo[i];
            if w > width {
                width = w;
                axis = i;
            }
        }
        let mid = (worst.lo[axis] + worst.hi[axis]) * cst::<F>(0.5);
        if !(worst.lo[axis] < mid && mid < worst.hi[axis]) {
            // bisection exhausted the float grid: freeze the sliver
            total_err -= worst.err;
            certain_sum -= worst.certain;
            let mut frozen = worst;
            frozen.err = F::zero();
            frozen.nudge = F::zero();
            frozen.certain = F::zero();
            heap.push(frozen);
            continue;
        }
        total_value -= worst.value;
        total_err -= worst.err;
        certain_sum -= worst.certain;
        let mut hi_left = worst.hi.clone();
        hi_left[axis] = mid;
        let mut lo_right = worst.lo.clone();
        lo_right[axis] = mid;
        seq += 1;
        let left = assess(&worst.lo, &hi_left, seq, &mut evals)?;
        seq += 1;
        let right = assess(&lo_right, &worst.hi, seq, &mut evals)?;
        total_value += left.value + right.value;
        total_err += left.err + right.err;
        certain_sum += left.certain + right.certain;
        heap.push(left);
        heap.push(right);
    }
}

fn integrate_monte_carlo<F: Scalar>(
    f: &(dyn Fn(&[F]) -> F + Sync),
    b: &BoxDomain<F>,
    q: &QuadratureSpec,
) -> Result<QuadResult<F>> {
    use rand::{Rng, SeedableRng};
    let seed = q.seed.expect("validated: monte_carlo requires a seed");
    let dim = b.dim();
    let vol = b.volume();
    const CHUNK: u64 = 16_384;
    let n_chunks = (q.max_evals / CHUNK).max(1);

    // Each chunk owns an independent, index-derived generator, so results do
    // not depend on worker count or scheduling.
    let sums: Vec<(f64, f64, u64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                seed.wrapping_add(chunk.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            );
            let mut s = 0.0f64;
            let mut s2 = 0.0f64;
            let mut x = vec![F::zero(); dim];
            for _ in 0..CHUNK {
                for d in 0..dim {
                    let u: f64 = rng.gen();
                    x[d] = b.lo[d] + (b.hi[d] - b.lo[d]) * cst::<F>(u);
                }
                let v = f(&x).to_f64().unwrap_or(f64::NAN);
                s += v;
                s2 += v * v;
            }
            (s, s2, CHUNK)
        })
        .collect();

    let parts: Vec<F> = sums.iter().map(|&(s, _, _)| cst::<F>(s)).collect();
    let total: F = pairwise_sum(&parts);
    if total.is_nan() {
        return Err(AuditError::NaNEncountered);
    }
    let n: u64 = sums.iter().map(|&(_, _, c)| c).sum();
    let nf = n as f64;
    let sum2: f64 = sums.iter().map(|&(_, s2, _)| s2).sum();
    let mean = total.to_f64().unwrap() / nf;
    let var = (sum2 / nf - mean * mean).max(0.0);
    let err = cst::<F>((var / nf).sqrt()) * vol;
    Ok(QuadResult {
        value: total / cst::<F>(nf) * vol,
        err_est: err,
        evals: n,
        converged: true,
    })
}

/// Integrate `f` over the box `b` under the given spec.
pub fn integrate<F: Scalar>(
    f: &(dyn Fn(&[F]) -> F + Sync),
    b: &BoxDomain<F>,
    q: &QuadratureSpec,
) -> Result<QuadResult<F>> {
    q.validate()?;
    match q.engine {
        EngineKind::TensorGauss => integrate_tensor(f, b, q),
        EngineKind::AdaptiveSubdivision => integrate_adaptive(f, b, q),
        EngineKind::MonteCarlo => integrate_monte_carlo(f, b, q),
    }
}

/// Signed shoelace area of a simple polygon with ordered vertices.
pub fn polygon_area<F: Scalar>(verts: &[[F; 2]]) -> F {
    let n = verts.len();
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let j = (i + 1) % n;
        terms.push(verts[i][0] * verts[j][1] - verts[j][0] * verts[i][1]);
    }
    pairwise_sum(&terms) * cst::<F>(0.5)
}

/// Exact integral of a constant over a simple polygon (shoelace area times
/// the constant); avoids quadrature noise on indicator discontinuities.
pub fn integrate_indicator_polytope<F: Scalar>(c: F, verts: &[[F; 2]]) -> Result<F> {
    let area = polygon_area(verts).abs();
    if area < cst(1e-14) {
        return Err(AuditError::DegeneratePolygon);
    }
    Ok(c * area)
}

/// Intersection of closed intervals; errors when empty.
pub fn interval_intersection<F: Scalar>(intervals: &[(F, F)]) -> Result<(F, F)> {
    let mut lo = F::neg_infinity();
    let mut hi = F::infinity();
    for &(a, b) in intervals {
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    if lo > hi {
        return Err(AuditError::EmptyIntersection);
    }
    Ok((lo, hi))
}
