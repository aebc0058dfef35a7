//! MAP / maximum-density point estimation: coarse grid scan followed by a
//! derivative-free simplex polish on −log density, plus the audit showing
//! that modes do not survive non-volume-preserving reparameterizations.

use crate::coords::{BoxDomain, Diffeo};
use crate::density::Density;
use crate::error::{AuditError, Result};
use crate::scalar::{cst, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeMethod {
    Analytic,
    GridPolish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Converged,
    /// The maximum is attained on a plateau; the argmax reported is the
    /// centroid of the top grid cells.
    Plateau,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeResult<F: Scalar> {
    pub argmax: Vec<F>,
    pub value: F,
    pub method: ModeMethod,
    pub converged: Convergence,
}

pub const DEFAULT_GRID: usize = 64;

/// Grid scan (default 64 per axis) then Nelder-Mead on −log density.
pub fn find_mode<F: Scalar>(
    p: &Density<F>,
    b: &BoxDomain<F>,
    grid_per_axis: usize,
) -> Result<ModeResult<F>> {
    let dim = b.dim();
    let n = grid_per_axis.max(3);
    let mut best = F::neg_infinity();
    let mut cells: Vec<(Vec<F>, F)> = Vec::new();
    let mut idx = vec![0usize; dim];
    let total = n.pow(dim as u32);
    for _ in 0..total {
        let x: Vec<F> = (0..dim)
            .map(|d| {
                let frac = (idx[d] as f64 + 0.5) / n as f64;
                b.lo[d] + (b.hi[d] - b.lo[d]) * cst::<F>(frac)
            })
            .collect();
        let v = p.eval(&x);
        if !v.is_finite() {
            return Err(AuditError::NonFinite(
                x.iter().map(|&c| crate::scalar::to_f64(c)).collect(),
            ));
        }
        if v > best {
            best = v;
        }
        cells.push((x, v));
        for d in 0..dim {
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
        }
    }
    if !(best > F::zero()) {
        return Err(AuditError::EmptySupport);
    }
    let plateau_tol = best * cst::<F>(1e-12);
    let top: Vec<&(Vec<F>, F)> = cells
        .iter()
        .filter(|(_, v)| (best - *v) <= plateau_tol)
        .collect();
    // a handful of exact ties is symmetry, not flatness; polish from the
    // tie centroid in that case
    if top.len() >= 4 {
        // flat top: report the centroid of maximal cells
        let mut centroid = vec![F::zero(); dim];
        for (x, _) in &top {
            for d in 0..dim {
                centroid[d] += x[d];
            }
        }
        let k = cst::<F>(top.len() as f64);
        for c in centroid.iter_mut() {
            *c /= k;
        }
        let value = p.eval(&centroid);
        return Ok(ModeResult {
            argmax: centroid,
            value,
            method: ModeMethod::GridPolish,
            converged: Convergence::Plateau,
        });
    }

    let start = {
        let mut c = vec![F::zero(); dim];
        for (x, _) in &top {
            for d in 0..dim {
                c[d] += x[d];
            }
        }
        let k = cst::<F>(top.len() as f64);
        for v in c.iter_mut() {
            *v /= k;
        }
        c
    };
    let obj = |x: &[F]| -> F {
        if !b.contains(x) {
            return F::infinity();
        }
        let v = p.eval(x);
        if v <= F::zero() {
            F::infinity()
        } else {
            -v.ln()
        }
    };
    let step: Vec<F> = (0..dim)
        .map(|d| (b.hi[d] - b.lo[d]) / cst::<F>(2.0 * n as f64))
        .collect();
    // stop once the simplex collapses below 1e-9 in position
    let tol_pos = cst::<F>(1e-9)
        * (F::one() + start.iter().fold(F::zero(), |a, &x| a.max(x.abs())));
    let (argmax, iterations_hit) = nelder_mead(&obj, &start, &step, tol_pos, 8000);
    let value = p.eval(&argmax);
    Ok(ModeResult {
        argmax,
        value,
        method: ModeMethod::GridPolish,
        converged: if iterations_hit {
            Convergence::MaxIter
        } else {
            Convergence::Converged
        },
    })
}

/// Maximum (normalized) density value on the box.
pub fn max_value<F: Scalar>(p: &Density<F>, b: &BoxDomain<F>) -> Result<F> {
    Ok(find_mode(p, b, DEFAULT_GRID)?.value)
}

/// Downhill simplex minimization; `tol_pos` bounds the simplex diameter at
/// termination. Returns (argmin, hit_max_iter).
pub fn nelder_mead<F: Scalar>(
    f: &dyn Fn(&[F]) -> F,
    start: &[F],
    step: &[F],
    tol_pos: F,
    max_iter: usize,
) -> (Vec<F>, bool) {
    let dim = start.len();
    let (alpha, gamma, rho, sigma) = (cst::<F>(1.0), cst::<F>(2.0), cst::<F>(0.5), cst::<F>(0.5));
    let mut simplex: Vec<Vec<F>> = vec![start.to_vec()];
    for i in 0..dim {
        let mut p = start.to_vec();
        p[i] += step[i];
        simplex.push(p);
    }
    let mut scores: Vec<F> = simplex.iter().map(|p| f(p)).collect();
    let mut hit_max = true;
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| {
            scores[a]
                .partial_cmp(&scores[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];
        if simplex_diameter(&simplex) < tol_pos {
            hit_max = false;
            break;
        }
        let mut centroid = vec![F::zero(); dim];
        for &i in order.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += simplex[i][d];
            }
        }
        let nf = cst::<F>(dim as f64);
        for c in centroid.iter_mut() {
            *c /= nf;
        }
        let reflect: Vec<F> = (0..dim)
            .map(|d| centroid[d] + alpha * (centroid[d] - simplex[worst][d]))
            .collect();
        let fr = f(&reflect);
        if fr < scores[best] {
            let expand: Vec<F> = (0..dim)
                .map(|d| centroid[d] + gamma * (reflect[d] - centroid[d]))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[worst] = expand;
                scores[worst] = fe;
            } else {
                simplex[worst] = reflect;
                scores[worst] = fr;
            }
        } else if fr < scores[second_worst] {
            simplex[worst] = reflect;
            scores[worst] = fr;
        } else {
            let contract: Vec<F> = (0..dim)
                .map(|d| centroid[d] + rho * (simplex[worst][d] - centroid[d]))
                .collect();
            let fc = f(&contract);
            if fc < scores[worst] {
                simplex[worst] = contract;
                scores[worst] = fc;
            } else {
                let best_pt = simplex[best].clone();
                for i in 0..=dim {
                    if i == best {
                        continue;
                    }
                    for d in 0..dim {
                        simplex[i][d] = best_pt[d] + sigma * (simplex[i][d] - best_pt[d]);
                    }
                    scores[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=dim {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    (simplex[best].clone(), hit_max)
}

fn simplex_diameter<F: Scalar>(simplex: &[Vec<F>]) -> F {
    let mut d = F::zero();
    for i in 0..simplex.len() {
        for j in i + 1..simplex.len() {
            let mut s = F::zero();
            for k in 0..simplex[i].len() {
                s = s.max((simplex[i][k] - simplex[j][k]).abs());
            }
            d = d.max(s);
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeAudit<F: Scalar> {
    pub pass: bool,
    /// argmax of p on the original box
    pub mode_original: Vec<F>,
    /// argmax of pushforward(p, t), expressed back in original coordinates
    pub mode_via_reparam: Vec<F>,
    /// p at `mode_original` — the maximum density value found directly
    pub value_original: F,
    /// p at `mode_via_reparam` — the density value the reparameterized
    /// route claims for its best point
    pub value_via_reparam: F,
    /// maximum of the pushforward density itself, for reference
    pub pushforward_max: F,
}

/// Compare the argmax of `p` with the back-mapped argmax of
/// `pushforward(p, t)`; FAIL (pass = false) is expected whenever `t` does
/// not preserve volume.
pub fn mode_invariance_audit<F: Scalar>(
    p: &Density<F>,
    t: &Diffeo<F>,
    b: &BoxDomain<F>,
    grid_per_axis: usize,
) -> Result<ModeAudit<F>> {
    let direct = find_mode(p, b, grid_per_axis)?;
    let q = p.pushforward(t)?;
    // search the pushforward over the image of the original search box
    let corners_box = {
        let tmp = Density::uniform(b.clone(), "searchbox");
        tmp.pushforward(t)?.support().clone()
    };
    let via = find_mode(&q, &corners_box, grid_per_axis)?;
    let back = t.apply_inverse(&via.argmax)?;
    let tol = cst::<F>(1e-4);
    let pass = direct
        .argmax
        .iter()
        .zip(&back)
        .all(|(&a, &c)| (a - c).abs() <= tol * (F::one() + a.abs()));
    let value_via = p.eval(&back);
    Ok(ModeAudit {
        pass,
        mode_original: direct.argmax,
        mode_via_reparam: back,
        value_original: direct.value,
        value_via_reparam: value_via,
        pushforward_max: via.value,
    })
}
