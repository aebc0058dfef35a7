//! Posterior construction by graph restriction (Formulation-2 style) and
//! naive lower-dimensional conditionals. The subspace conditionals here are
//! deliberately parameterization-dependent: that dependence is the effect
//! under audit, not a defect to be fixed.

use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::coords::BoxDomain;
use crate::density::Density;
use crate::error::{AuditError, Result};
use crate::forward::ForwardModel;
use crate::quad::{pairwise_sum, QuadratureSpec};
use crate::scalar::{cst, Scalar};

/// A line t ↦ point + t·direction inside a box domain.
#[derive(Debug, Clone)]
pub struct AffineLine<F: Scalar> {
    pub point: Vec<F>,
    pub direction: Vec<F>,
}

impl<F: Scalar> AffineLine<F> {
    pub fn at(&self, t: F) -> Vec<F> {
        self.point
            .iter()
            .zip(&self.direction)
            .map(|(&p, &d)| p + t * d)
            .collect()
    }

    /// Parameter range over which the line stays inside `b` (slab clipping).
    pub fn clip_to(&self, b: &BoxDomain<F>) -> Result<(F, F)> {
        let mut t0 = F::neg_infinity();
        let mut t1 = F::infinity();
        for i in 0..b.dim() {
            let d = self.direction[i];
            if d.abs() < cst(1e-300) {
                if self.point[i] < b.lo[i] || self.point[i] > b.hi[i] {
                    return Err(AuditError::EmptySupport);
                }
                continue;
            }
            let a = (b.lo[i] - self.point[i]) / d;
            let c = (b.hi[i] - self.point[i]) / d;
            t0 = t0.max(a.min(c));
            t1 = t1.min(a.max(c));
        }
        if !(t0 < t1) {
            return Err(AuditError::EmptySupport);
        }
        Ok((t0, t1))
    }
}

/// Unnormalized posterior q(m) = prior_d(g(m)) · prior_m(m) on the model
/// support; normalization is deferred to `Density::normalize`.
pub fn graph_posterior<F: Scalar>(
    prior_d: &Density<F>,
    prior_m: &Density<F>,
    fm: &ForwardModel<F>,
) -> Result<Density<F>> {
    if fm.m_dim != prior_m.dim() {
        return Err(AuditError::DimensionMismatch {
            expected: prior_m.dim(),
            got: fm.m_dim,
        });
    }
    if fm.d_dim != prior_d.dim() {
        return Err(AuditError::DimensionMismatch {
            expected: prior_d.dim(),
            got: fm.d_dim,
        });
    }
    let pd = prior_d.clone();
    let pm = prior_m.clone();
    let g = fm.clone();
    let support = prior_m.support().clone();
    Ok(Density::new(
        support,
        format!("post[{}|{}]", prior_m.name(), fm.name()),
        Arc::new(move |m: &[F]| pd.eval(&g.apply(m)) * pm.eval(m)),
        None,
    ))
}

/// The naive conditional of `p` along an affine line: `p` evaluated on the
/// line and renormalized in the line parameter. Parameterization-dependent
/// by construction.
pub fn restrict_to_affine<F: Scalar>(p: &Density<F>, line: &AffineLine<F>) -> Result<Density<F>> {
    if line.point.len() != p.dim() || line.direction.len() != p.dim() {
        return Err(AuditError::DimensionMismatch {
            expected: p.dim(),
            got: line.point.len(),
        });
    }
    let (t0, t1) = line.clip_to(p.support())?;
    let pc = p.clone();
    let lc = line.clone();
    let raw = Density::new(
        BoxDomain::new(vec![t0], vec![t1]),
        format!("{}|line", p.name()),
        Arc::new(move |t: &[F]| pc.eval(&lc.at(t[0]))),
        None,
    );
    match raw.normalize(&QuadratureSpec::default()) {
        Ok(d) => Ok(d),
        Err(AuditError::NonIntegrable(_)) => Err(AuditError::EmptySupport),
        Err(e) => Err(e),
    }
}

/// Max over the grid of |log(c1/c2)| after grid-normalizing both densities;
/// zero means the two conditionals agree.
pub fn disagreement_score<F: Scalar>(c1: &Density<F>, c2: &Density<F>, grid: &[F]) -> F {
    let v1 = grid.iter().map(|&t| c1.eval(&[t])).collect::<Vec<_>>();
    let v2 = grid.iter().map(|&t| c2.eval(&[t])).collect::<Vec<_>>();
    let z1 = trapezoid(grid, &v1);
    let z2 = trapezoid(grid, &v2);
    let mut worst = F::zero();
    for i in 0..grid.len() {
        let a = v1[i] / z1;
        let b = v2[i] / z2;
        if a == F::zero() && b == F::zero() {
            continue;
        }
        if a <= F::zero() || b <= F::zero() {
            return F::infinity();
        }
        worst = worst.max((a / b).ln().abs());
    }
    worst
}

fn trapezoid<F: Scalar>(xs: &[F], ys: &[F]) -> F {
    let half = cst::<F>(0.5);
    let terms: Vec<F> = (1..xs.len())
        .map(|i| (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]) * half)
        .collect();
    pairwise_sum(&terms)
}

/// Conditional along a line obtained as the ε→0 limit of averages over an
/// ε-thickened tube, with linear Richardson extrapolation over `eps_seq`
/// (decreasing). The thickening is Euclidean in the coordinates `p` lives
/// in: push `p` through a reparameterization first to thicken in another
/// metric — the result depends on that choice by design.
pub struct TubeSpec<'a, F: Scalar> {
    pub eps_seq: &'a [F],
    pub samples_per_section: usize,
    pub seed: u64,
}

pub fn tube_limit_conditional<F: Scalar>(
    p: &Density<F>,
    line: &AffineLine<F>,
    spec: &TubeSpec<'_, F>,
    grid_n: usize,
) -> Result<Density<F>> {
    assert!(spec.eps_seq.len() >= 2, "need at least two tube widths");
    for w in spec.eps_seq.windows(2) {
        assert!(w[1] < w[0], "eps sequence must decrease");
    }
    let dim = p.dim();
    let (t0, t1) = line.clip_to(p.support())?;
    let normals = orthonormal_complement(&line.direction);
    let eps_max = spec.eps_seq[0];

    // Cross-section average at parameter t and width eps: seeded, stratified
    // sampling in the normal directions (one uniform draw per stratum keeps
    // the variance of indicator edges at O(1/n²) instead of O(1/n)).
    let section = |t: F, eps: F, nsec: usize, salt: u64| -> F {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed ^ salt);
        let center = line.at(t);
        let mut acc: Vec<F> = Vec::with_capacity(nsec);
        for s in 0..nsec {
            let mut x = center.clone();
            for (axis, n) in normals.iter().enumerate() {
                let u: f64 = if axis == 0 {
                    2.0 * ((s as f64 + rng.gen::<f64>()) / nsec as f64) - 1.0
                } else {
                    rng.gen_range(-1.0..1.0)
                };
                let off = eps * cst::<F>(u);
                for d in 0..dim {
                    x[d] = x[d] + off * n[d];
                }
            }
            acc.push(p.eval(&x));
        }
        pairwise_sum(&acc) / cst::<F>(nsec as f64)
    };

    // Pass 1: cheap scan of the full clipped range to locate where the
    // conditional actually lives; the line typically crosses a support box
    // far wider than the feasible corridor.
    let coarse_n = (4 * grid_n).max(64);
    let eps_small = *spec.eps_seq.last().unwrap();
    let coarse_ts: Vec<F> = (0..coarse_n)
        .map(|i| t0 + (t1 - t0) * cst::<F>(i as f64 / (coarse_n - 1) as f64))
        .collect();
    let coarse: Vec<F> = coarse_ts
        .iter()
        .enumerate()
        .map(|(i, &t)| section(t, eps_small, (spec.samples_per_section / 8).max(64), 0x5EED ^ i as u64))
        .collect();
    let peak = coarse.iter().fold(F::zero(), |a, &v| a.max(v));
    if !(peak > F::zero()) {
        return Err(AuditError::EmptySupport);
    }
    let live: Vec<usize> = (0..coarse_n)
        .filter(|&i| coarse[i] > peak * cst::<F>(1e-9))
        .collect();
    let live_lo = coarse_ts[*live.first().unwrap()];
    let live_hi = coarse_ts[*live.last().unwrap()];
    let lo = (live_lo - eps_max).max(t0);
    let hi = (live_hi + eps_max).min(t1);

    // Pass 2: full-budget averages on the live range for every width.
    let ts: Vec<F> = (0..grid_n)
        .map(|i| lo + (hi - lo) * cst::<F>(i as f64 / (grid_n - 1) as f64))
        .collect();
    let nsec = spec.samples_per_section;
    let c_eps: Vec<Vec<F>> = spec
        .eps_seq
        .iter()
        .enumerate()
        .map(|(j, &eps)| {
            ts.iter()
                .enumerate()
                .map(|(i, &t)| section(t, eps, nsec, ((j as u64) << 32) ^ i as u64))
                .collect()
        })
        .collect();

    // Linear Richardson on the smallest pair: c_eps = c0 + a·eps.
    // Convergence demands that the extrapolation be corroborated either by
    // the next-coarser pair or by a vanishing slope (averages already on a
    // plateau). Judged away from the corridor ends, where finite-ε tube
    // averages are boundary-biased by construction.
    let k = spec.eps_seq.len();
    let extrap = |ja: usize, jb: usize, i: usize| -> F {
        let (ea, eb) = (spec.eps_seq[ja], spec.eps_seq[jb]);
        (c_eps[jb][i] * ea - c_eps[ja][i] * eb) / (ea - eb)
    };
    let scale = c_eps[k - 1]
        .iter()
        .fold(F::zero(), |a, &v| a.max(v))
        + cst::<F>(1e-30);
    let noise_floor = cst::<F>(6.0 / (nsec as f64).sqrt());
    let threshold = cst::<F>(1e-4).max(noise_floor);
    // Judge convergence inside the live corridor, at least one tube width
    // away from its ends; fall back to smaller shrinks when the corridor is
    // shorter than the widest tubes.
    let band = [eps_max, spec.eps_seq[k - 2], F::zero()]
        .iter()
        .map(|&s| (live_lo + s, live_hi - s))
        .find(|b| b.0 < b.1)
        .unwrap_or((live_lo, live_hi));
    let mut vals = Vec::with_capacity(grid_n);
    let mut cauchy_worst = F::zero();
    let mut band_seen = false;
    for i in 0..grid_n {
        let last = extrap(k - 2, k - 1, i);
        let in_band = ts[i] >= band.0 && ts[i] <= band.1;
        if in_band {
            band_seen = true;
            let pair_gap = if k >= 3 {
                (last - extrap(k - 3, k - 2, i)).abs() / scale
            } else {
                F::infinity()
            };
            let slope_gap = (c_eps[k - 1][i] - c_eps[k - 2][i]).abs() / scale;
            cauchy_worst = cauchy_worst.max(pair_gap.min(slope_gap));
        }
        vals.push(last.max(F::zero()));
    }
    if band_seen && cauchy_worst > threshold {
        return Err(AuditError::NoConvergence(crate::scalar::to_f64(cauchy_worst)));
    }

    let z = trapezoid(&ts, &vals);
    if !(z > F::zero()) {
        return Err(AuditError::EmptySupport);
    }
    let table = GridDensity {
        ts: ts.clone(),
        vals,
    };
    Ok(Density::new(
        BoxDomain::new(vec![lo], vec![hi]),
        format!("{}|tube", p.name()),
        Arc::new(move |t: &[F]| table.interp(t[0])),
        Some(z),
    ))
}

struct GridDensity<F: Scalar> {
    ts: Vec<F>,
    vals: Vec<F>,
}

impl<F: Scalar> GridDensity<F> {
    fn interp(&self, t: F) -> F {
        let n = self.ts.len();
        if t <= self.ts[0] {
            return self.vals[0];
        }
        if t >= self.ts[n - 1] {
            return self.vals[n - 1];
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.ts[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = (t - self.ts[lo]) / (self.ts[hi] - self.ts[lo]);
        self.vals[lo] * (F::one() - w) + self.vals[hi] * w
    }
}

/// Orthonormal basis of the complement of `dir` (Gram-Schmidt over the
/// standard basis).
fn orthonormal_complement<F: Scalar>(dir: &[F]) -> Vec<Vec<F>> {
    let dim = dir.len();
    let norm = dir
        .iter()
        .fold(F::zero(), |a, &d| a + d * d)
        .sqrt();
    let unit: Vec<F> = dir.iter().map(|&d| d / norm).collect();
    let mut basis: Vec<Vec<F>> = vec![unit];
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut e = vec![F::zero(); dim];
        e[i] = F::one();
        for b in &basis {
            let dot = e.iter().zip(b).fold(F::zero(), |a, (&x, &y)| a + x * y);
            for d in 0..dim {
                e[d] = e[d] - dot * b[d];
            }
        }
        let n = e.iter().fold(F::zero(), |a, &x| a + x * x).sqrt();
        if n > cst(1e-9) {
            basis.push(e.iter().map(|&x| x / n).collect());
        }
    }
    basis.remove(0);
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords;

    /// The two-block travel-time setup: each datum is the transit time of
    /// one ray, d_i = 1/v_i; velocity prior uniform on [1,2]², data prior
    /// uniform on [1/1.5, 1/1.35]².
    fn tomo_setup() -> (Density<f64>, Density<f64>, ForwardModel<f64>) {
        let prior_m = Density::uniform(BoxDomain::new(vec![1.0, 1.0], vec![2.0, 2.0]), "vel");
        let prior_d = Density::uniform(
            BoxDomain::new(vec![1.0 / 1.5, 1.0 / 1.5], vec![1.0 / 1.35, 1.0 / 1.35]),
            "times",
        );
        let g = ForwardModel::new(
            2,
            2,
            "g_v",
            Arc::new(|v: &[f64]| vec![1.0 / v[0], 1.0 / v[1]]),
        );
        (prior_d, prior_m, g)
    }

    #[test]
    fn velocity_posterior_is_flat_on_feasible_set() {
        let (pd, pm, g) = tomo_setup();
        let post = graph_posterior(&pd, &pm, &g).unwrap();
        let a = post.eval_raw(&[1.4, 1.45]);
        let b = post.eval_raw(&[1.37, 1.49]);
        assert!(a > 0.0 && (a - b).abs() < 1e-12);
        assert_eq!(post.eval_raw(&[1.1, 1.1]), 0.0); // outside data band
    }

    #[test]
    fn zero_model_prior_kills_posterior() {
        let (pd, _, g) = tomo_setup();
        let zero = Density::new(
            BoxDomain::new(vec![1.0, 1.0], vec![2.0, 2.0]),
            "zero",
            Arc::new(|_: &[f64]| 0.0),
            None,
        );
        let post = graph_posterior(&pd, &zero, &g).unwrap();
        for &x in &[[1.4f64, 1.4], [1.45, 1.38]] {
            assert_eq!(post.eval_raw(&x), 0.0);
        }
    }

    #[test]
    fn velocity_route_conditional_is_constant() {
        let (pd, pm, g) = tomo_setup();
        let post = graph_posterior(&pd, &pm, &g).unwrap();
        let line = AffineLine {
            point: vec![0.0, 0.0],
            direction: vec![1.0, 1.0],
        };
        let cond = restrict_to_affine(&post, &line).unwrap();
        let mut vals = vec![];
        for i in 0..200 {
            let t = 1.36 + 0.13 * i as f64 / 199.0;
            vals.push(cond.eval(&[t]));
        }
        let (lo, hi) = vals
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(hi / lo - 1.0 < 1e-9, "ratio {}", hi / lo);
    }

    #[test]
    fn slowness_route_conditional_grows_like_v_squared() {
        let (pd, pm, g) = tomo_setup();
        let post = graph_posterior(&pd, &pm, &g).unwrap();
        let rec2 = coords::reciprocal::<f64>(2);
        let post_s = post.pushforward(&rec2).unwrap();
        let line_s = AffineLine {
            point: vec![0.0, 0.0],
            direction: vec![1.0, 1.0],
        };
        let cond_s = restrict_to_affine(&post_s, &line_s).unwrap();
        // back to v₁ through the 1-D reciprocal
        let back = cond_s.pushforward(&coords::reciprocal::<f64>(1)).unwrap();
        let r = back.eval_raw(&[1.5]) / back.eval_raw(&[1.35]);
        let expect = (1.5f64 / 1.35).powi(2);
        assert!((r - expect).abs() < 1e-6, "{r} vs {expect}");
    }

    #[test]
    fn axis_conditional_of_product_matches_factor() {
        // conditional of an independent product along an axis line equals
        // the corresponding factor
        let gx = Density::gaussian_diag(&[0.0], &[0.3], "gx");
        let gy = Density::gaussian_diag(&[0.5], &[0.2], "gy");
        let joint = Density::product(&[gx.clone(), gy]).unwrap();
        let line = AffineLine {
            point: vec![0.0, 0.5],
            direction: vec![1.0, 0.0],
        };
        let cond = restrict_to_affine(&joint, &line).unwrap();
        for &t in &[-0.5f64, -0.1, 0.0, 0.2, 0.6] {
            let a = cond.eval(&[t]);
            let b = gx.eval(&[t]);
            assert!((a - b).abs() < 1e-6, "{a} vs {b} at {t}");
        }
    }

    #[test]
    fn disagreement_zero_against_itself() {
        let c = Density::uniform(BoxDomain::new(vec![0.0], vec![1.0]), "c");
        let grid: Vec<f64> = (0..100).map(|i| 0.005 + 0.99 * i as f64 / 99.0).collect();
        assert_eq!(disagreement_score(&c, &c, &grid), 0.0);
    }

    #[test]
    fn disagreement_scale_invariant() {
        let c1 = Density::new(
            BoxDomain::new(vec![0.0], vec![1.0]),
            "c1",
            Arc::new(|_: &[f64]| 1.0),
            None,
        );
        let c2 = Density::new(
            BoxDomain::new(vec![0.0], vec![1.0]),
            "c2",
            Arc::new(|_: &[f64]| 1.0 + 1e-12),
            None,
        );
        let grid: Vec<f64> = (0..64).map(|i| 0.01 + 0.98 * i as f64 / 63.0).collect();
        assert!(disagreement_score(&c1, &c2, &grid) < 1e-10);
    }

    #[test]
    fn disagreement_constant_vs_v_squared() {
        let flat = Density::uniform(BoxDomain::new(vec![1.35], vec![1.5]), "flat");
        let vsq = Density::new(
            BoxDomain::new(vec![1.35], vec![1.5]),
            "vsq",
            Arc::new(|x: &[f64]| x[0] * x[0]),
            None,
        );
        let grid: Vec<f64> = (0..200).map(|i| 1.35 + 0.15 * i as f64 / 199.0).collect();
        let s = disagreement_score(&flat, &vsq, &grid);
        assert!(s > 0.01, "score {s}");
        // closed form: the worst log-ratio stays below log(1.5²/1.35²)
        assert!(s < (1.5f64 * 1.5 / (1.35 * 1.35)).ln());
    }

    #[test]
    fn tube_conditional_euclidean_velocity_is_flat() {
        let (pd, pm, g) = tomo_setup();
        let post = graph_posterior(&pd, &pm, &g).unwrap();
        let line = AffineLine {
            point: vec![0.0, 0.0],
            direction: vec![1.0, 1.0],
        };
        let spec = TubeSpec {
            eps_seq: &[0.1, 0.05, 0.025],
            samples_per_section: 4000,
            seed: 99,
        };
        let cond = tube_limit_conditional(&post, &line, &spec, 41).unwrap();
        // interior flatness
        let a = cond.eval(&[1.40]);
        let b = cond.eval(&[1.45]);
        assert!((a / b - 1.0).abs() < 3e-3, "{a} vs {b}");
    }

    #[test]
    fn tube_conditional_in_slowness_metric_reproduces_v_squared() {
        let (pd, pm, g) = tomo_setup();
        let post = graph_posterior(&pd, &pm, &g).unwrap();
        let post_s = post.pushforward(&coords::reciprocal::<f64>(2)).unwrap();
        let line_s = AffineLine {
            point: vec![0.0, 0.0],
            direction: vec![1.0, 1.0],
        };
        let spec = TubeSpec {
            eps_seq: &[0.02, 0.01, 0.005],
            samples_per_section: 20000,
            seed: 7,
        };
        let cond_s = tube_limit_conditional(&post_s, &line_s, &spec, 31).unwrap();
        let back = cond_s.pushforward(&coords::reciprocal::<f64>(1)).unwrap();
        // compare shape against v² at two interior velocities
        let (va, vb): (f64, f64) = (1.38, 1.47);
        let r = back.eval_raw(&[vb]) / back.eval_raw(&[va]);
        let expect = (vb / va) * (vb / va);
        assert!((r / expect - 1.0).abs() < 3e-3, "{r} vs {expect}");
    }

    #[test]
    fn tube_axis_aligned_independent_case() {
        let gx = Density::gaussian_diag(&[0.0], &[0.3], "gx");
        let gy = Density::gaussian_diag(&[0.5], &[0.2], "gy");
        let joint = Density::product(&[gx.clone(), gy]).unwrap();
        let line = AffineLine {
            point: vec![0.0, 0.5],
            direction: vec![1.0, 0.0],
        };
        let spec = TubeSpec {
            eps_seq: &[0.05, 0.025],
            samples_per_section: 8000,
            seed: 3,
        };
        let cond = tube_limit_conditional(&joint, &line, &spec, 41).unwrap();
        // ratio test against the marginal factor
        let r: f64 = cond.eval(&[0.3]) / cond.eval(&[0.0]);
        let expect: f64 = gx.eval(&[0.3]) / gx.eval(&[0.0]);
        assert!((r / expect - 1.0).abs() < 2e-2, "{r} vs {expect}");
    }

    #[test]
    fn restrict_misses_support() {
        let p = Density::uniform(BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]), "u");
        let line = AffineLine {
            point: vec![5.0, 0.0],
            direction: vec![0.0, 1.0],
        };
        assert!(matches!(
            restrict_to_affine(&p, &line),
            Err(AuditError::EmptySupport)
        ));
    }
}
