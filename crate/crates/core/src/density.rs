//! Densities over box domains: pointwise evaluation, normalization,
//! products over disjoint axis blocks, and pushforward under
//! reparameterizations via the Jacobian rule.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coords::{BoxDomain, Diffeo};
use crate::error::{AuditError, Result};
use crate::forward::ForwardModel;
use crate::quad::{self, QuadratureSpec};
use crate::scalar::{cst, Scalar};

type EvalFn<F> = Arc<dyn Fn(&[F]) -> F + Send + Sync>;

/// A probability density over an axis-aligned box, evaluable pointwise.
/// Densities are pure values: immutable, cheap to clone, no caching.
#[derive(Clone)]
pub struct Density<F: Scalar> {
    dim: usize,
    support: BoxDomain<F>,
    eval_unnorm: EvalFn<F>,
    /// Integral of `eval_unnorm` over the support, when known.
    norm_const: Option<F>,
    name: String,
}

impl<F: Scalar> std::fmt::Debug for Density<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Density")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("norm_const", &self.norm_const.map(crate::scalar::to_f64))
            .finish()
    }
}

impl<F: Scalar> Density<F> {
    pub fn new(
        support: BoxDomain<F>,
        name: impl Into<String>,
        eval_unnorm: EvalFn<F>,
        norm_const: Option<F>,
    ) -> Self {
        Density {
            dim: support.dim(),
            support,
            eval_unnorm,
            norm_const,
            name: name.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &BoxDomain<F> {
        &self.support
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_normalized(&self) -> bool {
        self.norm_const.is_some()
    }

    pub fn norm_const(&self) -> Option<F> {
        self.norm_const
    }

    /// Unnormalized value; zero outside the support (boundaries count as
    /// inside).
    pub fn eval_raw(&self, x: &[F]) -> F {
        if !self.support.contains(x) {
            return F::zero();
        }
        let v = (self.eval_unnorm)(x);
        if v.is_nan() {
            F::zero()
        } else {
            v
        }
    }

    /// Normalized value when the normalization constant is known, otherwise
    /// the unnormalized value together with `false`.
    pub fn eval_flagged(&self, x: &[F]) -> (F, bool) {
        let raw = self.eval_raw(x);
        match self.norm_const {
            Some(z) => (raw / z, true),
            None => (raw, false),
        }
    }

    pub fn eval(&self, x: &[F]) -> F {
        self.eval_flagged(x).0
    }

    /// Push the density forward through `t`: q(y) = p(t⁻¹(y))·|det J_{t⁻¹}(y)|.
    ///
    /// The support becomes the componentwise min/max box of the transformed
    /// corners, which bounds the image for the per-axis-monotone registry
    /// maps; non-monotone maps need `pushforward_with_support`.
    pub fn pushforward(&self, t: &Diffeo<F>) -> Result<Density<F>> {
        let support = image_box(&self.support, t)?;
        self.pushforward_with_support(t, support)
    }

    pub fn pushforward_with_support(
        &self,
        t: &Diffeo<F>,
        support: BoxDomain<F>,
    ) -> Result<Density<F>> {
        if t.dim() != self.dim {
            return Err(AuditError::DimensionMismatch {
                expected: self.dim,
                got: t.dim(),
            });
        }
        let p = self.clone();
        let inv = t.inverse();
        let eval: EvalFn<F> = Arc::new(move |y: &[F]| {
            let x = match inv.apply(y) {
                Ok(x) => x,
                Err(_) => return F::zero(),
            };
            let j = match inv.jac_det_abs(y) {
                Ok(j) => j,
                Err(_) => return F::zero(),
            };
            p.eval_raw(&x) * j
        });
        Ok(Density {
            dim: self.dim,
            support,
            eval_unnorm: eval,
            // mass is preserved, so the normalizer carries over
            norm_const: self.norm_const,
            name: format!("{}#{}", self.name, t.name()),
        })
    }

    /// Compute the normalization constant by quadrature and store it.
    pub fn normalize(&self, q: &QuadratureSpec) -> Result<Density<F>> {
        let me = self.clone();
        let f = move |x: &[F]| me.eval_raw(x);
        let r = quad::integrate(&f, &self.support, q)?;
        let z = r.value;
        if !z.is_finite() || z <= F::zero() {
            return Err(AuditError::NonIntegrable(format!(
                "normalizer came out {z} for '{}'",
                self.name
            )));
        }
        let mut out = self.clone();
        out.norm_const = Some(z);
        Ok(out)
    }

    /// Joint density of independent factors on concatenated axis blocks.
    pub fn product(factors: &[Density<F>]) -> Result<Density<F>> {
        if factors.is_empty() {
            return Err(AuditError::DimensionMismatch { expected: 1, got: 0 });
        }
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for f in factors {
            lo.extend_from_slice(&f.support.lo);
            hi.extend_from_slice(&f.support.hi);
        }
        let support = BoxDomain::new(lo, hi);
        let parts: Vec<Density<F>> = factors.to_vec();
        let eval: EvalFn<F> = Arc::new(move |x: &[F]| {
            let mut acc = F::one();
            let mut off = 0;
            for p in &parts {
                acc *= p.eval_raw(&x[off..off + p.dim]);
                off += p.dim;
            }
            acc
        });
        let norm_const = factors
            .iter()
            .map(|f| f.norm_const)
            .try_fold(F::one(), |acc, z| z.map(|z| acc * z));
        let name = factors
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join("×");
        Ok(Density {
            dim: support.dim(),
            support,
            eval_unnorm: eval,
            norm_const,
            name,
        })
    }

    // ---- built-in families ----

    /// Constant on a box, normalized (norm_const = volume).
    pub fn uniform(support: BoxDomain<F>, name: impl Into<String>) -> Self {
        let vol = support.volume();
        Density::new(support, name, Arc::new(|_x: &[F]| F::one()), Some(vol))
    }

    /// Product of independent Gaussians, truncated at ±8σ (mass error below
    /// 1e-15, beneath every tolerance in use).
    pub fn gaussian_diag(mean: &[F], sigma: &[F], name: impl Into<String>) -> Self {
        let eight = cst::<F>(8.0);
        let lo = mean
            .iter()
            .zip(sigma)
            .map(|(&m, &s)| m - eight * s)
            .collect();
        let hi = mean
            .iter()
            .zip(sigma)
            .map(|(&m, &s)| m + eight * s)
            .collect();
        let support = BoxDomain::new(lo, hi);
        let mu = mean.to_vec();
        let sd = sigma.to_vec();
        let half = cst::<F>(0.5);
        let eval: EvalFn<F> = Arc::new(move |x: &[F]| {
            let mut e = F::zero();
            for i in 0..x.len() {
                let z = (x[i] - mu[i]) / sd[i];
                e += z * z;
            }
            (-half * e).exp()
        });
        let root_2pi = (cst::<F>(2.0) * F::PI()).sqrt();
        let z = sigma
            .iter()
            .fold(F::one(), |acc, &s| acc * s * root_2pi);
        Density::new(support, name, eval, Some(z))
    }

    /// Product of independent log-normals on the positive orthant.
    pub fn lognormal_product(mu: &[F], sigma: &[F], name: impl Into<String>) -> Self {
        let eight = cst::<F>(8.0);
        let lo: Vec<F> = mu
            .iter()
            .zip(sigma)
            .map(|(&m, &s)| (m - eight * s).exp())
            .collect();
        let hi: Vec<F> = mu
            .iter()
            .zip(sigma)
            .map(|(&m, &s)| (m + eight * s).exp())
            .collect();
        let support = BoxDomain::new(lo, hi);
        let mus = mu.to_vec();
        let sds = sigma.to_vec();
        let half = cst::<F>(0.5);
        let eval: EvalFn<F> = Arc::new(move |x: &[F]| {
            let mut acc = F::one();
            for i in 0..x.len() {
                if x[i] <= F::zero() {
                    return F::zero();
                }
                let z = (x[i].ln() - mus[i]) / sds[i];
                acc *= (-half * z * z).exp() / x[i];
            }
            acc
        });
        let root_2pi = (cst::<F>(2.0) * F::PI()).sqrt();
        let z = sigma.iter().fold(F::one(), |acc, &s| acc * s * root_2pi);
        Density::new(support, name, eval, Some(z))
    }

    /// Gaussian band of width σ around the graph x₂ = g(x₁) inside `support`
    /// (first `g.m_dim` axes are the base block). With amplitude 1 the mass
    /// is ≈ 1 up to boundary truncation.
    pub fn tube(
        support: BoxDomain<F>,
        g: ForwardModel<F>,
        sigma: F,
        amplitude: F,
        name: impl Into<String>,
    ) -> Self {
        let k = g.m_dim;
        let codim = support.dim() - k;
        let two_pi = cst::<F>(2.0) * F::PI();
        // amplitude / (2πσ²)^{codim/2}
        let front = amplitude / (two_pi * sigma * sigma).powi(codim as i32).sqrt();
        let half = cst::<F>(0.5);
        let s2 = sigma * sigma;
        let eval: EvalFn<F> = Arc::new(move |x: &[F]| {
            let base = &x[..k];
            let rest = &x[k..];
            let gx = g.apply(base);
            let mut d2 = F::zero();
            for i in 0..rest.len() {
                let d = rest[i] - gx[i];
                d2 += d * d;
            }
            front * (-half * d2 / s2).exp()
        });
        Density::new(support, name, eval, None)
    }
}

/// Componentwise min/max box of the transformed corners.
fn image_box<F: Scalar>(b: &BoxDomain<F>, t: &Diffeo<F>) -> Result<BoxDomain<F>> {
    let dim = b.dim();
    let mut lo = vec![F::infinity(); dim];
    let mut hi = vec![F::neg_infinity(); dim];
    // corners plus the center; the center catches boxes straddling an
    // interior singularity (e.g. reciprocal across zero)
    for mask in 0..=(1usize << dim) {
        let probe: Vec<F> = if mask == 1 << dim {
            b.center()
        } else {
            (0..dim)
                .map(|i| if mask & (1 << i) != 0 { b.hi[i] } else { b.lo[i] })
                .collect()
        };
        let y = t.apply(&probe).map_err(|e| {
            AuditError::Domain(format!(
                "support crosses a singularity of {}: {e}",
                t.name()
            ))
        })?;
        for i in 0..dim {
            lo[i] = lo[i].min(y[i]);
            hi[i] = hi[i].max(y[i]);
        }
    }
    // guard against collapsed axes (e.g. a fixed coordinate)
    for i in 0..dim {
        if !(lo[i] < hi[i]) {
            let pad = cst::<F>(1e-12) * (F::one() + lo[i].abs());
            lo[i] = lo[i] - pad;
            hi[i] = hi[i] + pad;
        }
    }
    Ok(BoxDomain::new(lo, hi))
}

/// Declarative density description for scenario files. Tube densities name a
/// forward model resolved by the scenario layer.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityFamily {
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    GaussianDiag {
        mean: Vec<f64>,
        sigma: Vec<f64>,
    },
    LognormalProduct {
        mu: Vec<f64>,
        sigma: Vec<f64>,
    },
    Tube {
        lo: Vec<f64>,
        hi: Vec<f64>,
        forward: String,
        sigma: f64,
        amplitude: f64,
    },
}

impl DensityFamily {
    pub fn validate(&self) -> Result<()> {
        let positive = |s: &[f64], what: &str| {
            if s.iter().any(|&v| v <= 0.0) {
                Err(AuditError::Validation(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        match self {
            DensityFamily::UniformBox { lo, hi } | DensityFamily::Tube { lo, hi, .. } => {
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    return Err(AuditError::Validation("invalid box bounds".into()));
                }
                if let DensityFamily::Tube { sigma, amplitude, .. } = self {
                    positive(&[*sigma, *amplitude], "tube sigma/amplitude")?;
                }
                Ok(())
            }
            DensityFamily::GaussianDiag { mean, sigma } => {
                if mean.len() != sigma.len() {
                    return Err(AuditError::Validation("mean/sigma length mismatch".into()));
                }
                positive(sigma, "gaussian sigma")
            }
            DensityFamily::LognormalProduct { mu, sigma } => {
                if mu.len() != sigma.len() {
                    return Err(AuditError::Validation("mu/sigma length mismatch".into()));
                }
                positive(sigma, "lognormal sigma")
            }
        }
    }
}
