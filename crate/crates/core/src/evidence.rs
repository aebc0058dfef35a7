//! Evidences (marginal likelihoods), Bayes factors, the AIC, and
//! invariance audits of the evidence under model-space and data-space
//! reparameterizations.

use crate::coords::Diffeo;
use crate::density::Density;
use crate::error::{AuditError, Result};
use crate::forward::ForwardModel;
use crate::quad::{self, QuadratureSpec};
use crate::scalar::{cst, to_f64, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceResult<F: Scalar> {
    pub value: F,
    pub err_est: F,
    pub evals: u64,
    pub engine: QuadratureSpec,
    pub hyper_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesFactorReport<F: Scalar> {
    pub numerator: EvidenceResult<F>,
    pub denominator: EvidenceResult<F>,
    pub factor: F,
    pub favored: String,
}

/// Marginal likelihood ∫ prior_d(g(m))·prior_m(m) dm over the model support.
pub fn evidence<F: Scalar>(
    prior_d: &Density<F>,
    prior_m: &Density<F>,
    fm: &ForwardModel<F>,
    q: &QuadratureSpec,
    hyper_label: impl Into<String>,
) -> Result<EvidenceResult<F>> {
    if fm.m_dim != prior_m.dim() || fm.d_dim != prior_d.dim() {
        return Err(AuditError::DimensionMismatch {
            expected: prior_m.dim(),
            got: fm.m_dim,
        });
    }
    if !prior_m.is_normalized() {
        return Err(AuditError::Validation(format!(
            "model prior '{}' must be normalized before an evidence integral",
            prior_m.name()
        )));
    }
    let pd = prior_d.clone();
    let pm = prior_m.clone();
    let g = fm.clone();
    let f = move |m: &[F]| pd.eval(&g.apply(m)) * pm.eval(m);
    let r = quad::integrate(&f, prior_m.support(), q)?;
    Ok(EvidenceResult {
        value: r.value,
        err_est: r.err_est,
        evals: r.evals,
        engine: q.clone(),
        hyper_label: hyper_label.into(),
    })
}

/// Ratio of evidences; |factor−1| < 1e-9 reports a tie.
pub fn bayes_factor<F: Scalar>(
    numerator: EvidenceResult<F>,
    denominator: EvidenceResult<F>,
) -> Result<BayesFactorReport<F>> {
    if denominator.value <= F::zero() {
        return Err(AuditError::DivideByZero);
    }
    let factor = numerator.value / denominator.value;
    let favored = if (factor - F::one()).abs() < cst(1e-9) {
        "tie".to_string()
    } else if factor > F::one() {
        numerator.hyper_label.clone()
    } else {
        denominator.hyper_label.clone()
    };
    Ok(BayesFactorReport {
        numerator,
        denominator,
        factor,
        favored,
    })
}

/// Akaike information criterion, 2k − 2·ln(maximum likelihood).
pub fn aic<F: Scalar>(k: u32, max_likelihood: F) -> Result<F> {
    if !(max_likelihood > F::zero()) {
        return Err(AuditError::NonPositiveLikelihood(to_f64(max_likelihood)));
    }
    Ok(cst::<F>(2.0 * k as f64) - cst::<F>(2.0) * max_likelihood.ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceVerdict<F: Scalar> {
    pub pass: bool,
    pub original: EvidenceResult<F>,
    pub reparameterized: EvidenceResult<F>,
    pub tolerance: F,
}

/// Change of variables in model space must leave the evidence alone:
/// recompute it with the pushed-forward model prior and g∘t⁻¹ and compare
/// within 3 combined error estimates.
pub fn audit_model_reparam_invariance<F: Scalar>(
    prior_d: &Density<F>,
    prior_m: &Density<F>,
    fm: &ForwardModel<F>,
    t_model: &Diffeo<F>,
    q: &QuadratureSpec,
) -> Result<InvarianceVerdict<F>> {
    let original = evidence(prior_d, prior_m, fm, q, "original")?;
    let pm_t = prior_m.pushforward(t_model)?;
    let fm_t = fm.after_inverse(t_model)?;
    let reparameterized = evidence(prior_d, &pm_t, &fm_t, q, "model_reparam")?;
    let tolerance = cst::<F>(3.0) * (original.err_est + reparameterized.err_est)
        + cst::<F>(1e-12) * original.value.abs();
    let pass = (original.value - reparameterized.value).abs() <= tolerance;
    Ok(InvarianceVerdict {
        pass,
        original,
        reparameterized,
        tolerance,
    })
}

/// Change of variables in data space: the same comparison, with the data
/// prior pushed forward and the forward map post-composed. For
/// overdetermined problems this audit is expected to FAIL — that failure is
/// the phenomenon under study.
pub fn audit_data_reparam_invariance<F: Scalar>(
    prior_d: &Density<F>,
    prior_m: &Density<F>,
    fm: &ForwardModel<F>,
    t_data: &Diffeo<F>,
    q: &QuadratureSpec,
) -> Result<InvarianceVerdict<F>> {
    let original = evidence(prior_d, prior_m, fm, q, "original")?;
    let pd_t = prior_d.pushforward(t_data)?;
    let fm_t = fm.then(t_data)?;
    let reparameterized = evidence(&pd_t, prior_m, &fm_t, q, "data_reparam")?;
    let tolerance = cst::<F>(3.0) * (original.err_est + reparameterized.err_est)
        + cst::<F>(1e-12) * original.value.abs();
    let pass = (original.value - reparameterized.value).abs() <= tolerance;
    Ok(InvarianceVerdict {
        pass,
        original,
        reparameterized,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::{self, BoxDomain};
    use std::sync::Arc;

    fn transdim_cart(k: usize) -> (Density<f64>, Density<f64>, ForwardModel<f64>) {
        let prior_d = Density::uniform(
            BoxDomain::cube_around(&[3.1, 5.8, 1.1], 0.4),
            "data_cube",
        );
        if k == 2 {
            let prior_m =
                Density::uniform(BoxDomain::new(vec![0.0, 0.0], vec![2.0, 2.0]), "r2");
            let g = ForwardModel::from_matrix(
                "g2",
                vec![vec![2.0, 1.0], vec![4.0, 2.0], vec![1.0, 0.0]],
            );
            (prior_d, prior_m, g)
        } else {
            let prior_m = Density::uniform(BoxDomain::new(vec![0.0], vec![2.0]), "r1");
            let g = ForwardModel::from_matrix("g1", vec![vec![2.0], vec![4.0], vec![1.0]]);
            (prior_d, prior_m, g)
        }
    }

    #[test]
    fn k1_evidence_by_quadrature_matches_geometry() {
        let (pd, pm, g) = transdim_cart(1);
        let e = evidence(&pd, &pm, &g, &QuadratureSpec::default(), "k1").unwrap();
        let expect = (1.0 / 0.512) * 0.15 * 0.5;
        assert!(
            (e.value - expect).abs() < 1e-4,
            "{} vs {expect}",
            e.value
        );
    }

    #[test]
    fn zero_width_data_box_gives_zero() {
        // a data prior whose band misses the forward image entirely
        let pd = Density::uniform(BoxDomain::cube_around(&[50.0, 50.0, 50.0], 0.1), "far");
        let (_, pm, g) = transdim_cart(1);
        let e = evidence(&pd, &pm, &g, &QuadratureSpec::default(), "k1").unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn point_mass_limit_recovers_likelihood() {
        // prior_m a tiny box around m₀ → evidence ≈ prior_d(g(m₀))
        let (pd, _, g) = transdim_cart(1);
        let m0 = 1.4;
        let tiny = Density::uniform(BoxDomain::new(vec![m0 - 5e-4], vec![m0 + 5e-4]), "pt");
        let e = evidence(&pd, &tiny, &g, &QuadratureSpec::default(), "pt").unwrap();
        let expect = pd.eval(&g.apply(&[m0]));
        assert!((e.value - expect).abs() / expect < 1e-3);
    }

    #[test]
    fn bayes_factor_favors_and_ties() {
        let mk = |v: f64, label: &str| EvidenceResult {
            value: v,
            err_est: 0.0,
            evals: 0,
            engine: QuadratureSpec::default(),
            hyper_label: label.into(),
        };
        let r = bayes_factor(mk(0.3125, "k2"), mk(0.146484375, "k1")).unwrap();
        assert!((r.factor - 2.1333333333).abs() < 1e-9);
        assert_eq!(r.favored, "k2");
        let t = bayes_factor(mk(1.0, "a"), mk(1.0, "b")).unwrap();
        assert_eq!(t.favored, "tie");
        assert!(bayes_factor(mk(1.0, "a"), mk(0.0, "b")).is_err());
    }

    #[test]
    fn aic_values() {
        assert!((aic(1, 1.0f64).unwrap() - 2.0).abs() < 1e-15);
        assert!((aic(2, std::f64::consts::E).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            aic(1, 0.0f64),
            Err(AuditError::NonPositiveLikelihood(_))
        ));
    }

    #[test]
    fn model_reparam_identity_passes_trivially() {
        let (pd, pm, g) = transdim_cart(1);
        let v = audit_model_reparam_invariance(
            &pd,
            &pm,
            &g,
            &coords::identity(1),
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(v.pass);
    }

    #[test]
    fn model_reparam_smooth_case_passes_under_cubic() {
        // smooth scenario: Gaussian data prior so quadrature converges fast
        let pd = Density::gaussian_diag(&[3.1, 5.8, 1.1], &[0.5, 0.5, 0.5], "gd");
        let pm = Density::uniform(BoxDomain::new(vec![0.5, 0.5], vec![1.8, 1.8]), "pm");
        let g = ForwardModel::from_matrix(
            "g2",
            vec![vec![2.0, 1.0], vec![4.0, 2.0], vec![1.0, 0.0]],
        );
        let v = audit_model_reparam_invariance(
            &pd,
            &pm,
            &g,
            &coords::cube_all(2),
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(
            v.pass,
            "orig {} vs reparam {} (tol {})",
            v.original.value, v.reparameterized.value, v.tolerance
        );
    }

    #[test]
    fn data_reparam_tan_fails_on_overdetermined_case() {
        // overdetermined linear problem (3 data, 2 parameters): tan on the
        // first datum changes the evidence at fixed sigma. The first datum
        // sits at 0.9 so the whole uncertainty box stays inside tan's branch.
        let sigma = 0.4;
        let pd = Density::uniform(BoxDomain::cube_around(&[0.9, 1.1, 0.9], sigma), "cd");
        let pm = Density::uniform(BoxDomain::new(vec![0.0, 0.0], vec![2.0, 2.0]), "cm");
        let g = ForwardModel::new(
            2,
            3,
            "g_h",
            Arc::new(|m: &[f64]| vec![m[1], m[0], 0.5 * m[0]]),
        );
        let v = audit_data_reparam_invariance(
            &pd,
            &pm,
            &g,
            &coords::tan_axis0(3),
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(!v.pass, "data reparam unexpectedly left evidence unchanged");
        let delta = (v.original.value - v.reparameterized.value).abs();
        assert!(
            delta > 10.0 * (v.original.err_est + v.reparameterized.err_est),
            "delta {delta} too small"
        );
    }
}
