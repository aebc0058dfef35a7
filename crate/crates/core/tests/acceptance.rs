//! Acceptance suite: every exit criterion in one place, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them all).
//!
//! Two sub-assertions are expected-FAIL and pinned as such: the published
//! analysis is internally contradictory there, and the honest computed
//! values are asserted instead (details in the repository notes). If either
//! quantity ever drifts from its pinned honest value, these tests break.

use std::sync::Arc;

use bayes_audit::condition::{self, AffineLine};
use bayes_audit::coords::{self, BoxDomain};
use bayes_audit::density::Density;
use bayes_audit::evidence;
use bayes_audit::forward::ForwardModel;
use bayes_audit::hier::{self, HierCase, HierCaseId, OptimFlag};
use bayes_audit::modal;
use bayes_audit::quad::{self, EngineKind, QuadratureSpec};
use bayes_audit::scenario;
use bayes_audit::transdim::{self, TransdimCase};

struct Checker {
    label: &'static str,
    failures: Vec<String>,
    expected_failures: Vec<String>,
}

impl Checker {
    fn new(label: &'static str) -> Self {
        Checker {
            label,
            failures: Vec::new(),
            expected_failures: Vec::new(),
        }
    }

    fn check(&mut self, what: &str, ok: bool, detail: String) {
        if ok {
            println!("  [ok]   {what}: {detail}");
        } else {
            println!("  [FAIL] {what}: {detail}");
            self.failures.push(format!("{what}: {detail}"));
        }
    }

    /// An assertion the source analysis makes impossible; it must fail, and
    /// the honest replacement value is pinned elsewhere in the same
    /// criterion.
    fn check_expected_red(&mut self, what: &str, ok: bool, detail: String) {
        if ok {
            println!("  [UNEXPECTED PASS] {what}: {detail}");
            self.failures.push(format!(
                "{what} unexpectedly passed; the documented contradiction no longer holds: {detail}"
            ));
        } else {
            println!("  [FAIL — expected, documented contradiction] {what}: {detail}");
            self.expected_failures.push(what.to_string());
        }
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() {
            if self.expected_failures.is_empty() {
                "PASS".to_string()
            } else {
                format!(
                    "PASS (with {} documented expected-FAIL assertions)",
                    self.expected_failures.len()
                )
            }
        } else {
            "FAIL".to_string()
        };
        println!("criterion {}: {verdict}", self.label);
        assert!(
            self.failures.is_empty(),
            "criterion {} failed:\n{}",
            self.label,
            self.failures.join("\n")
        );
    }
}

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
fn criterion_1_tomography_conditional_flip() {
    let mut c = Checker::new("1 (tomography conditional flip)");
    let (pd, pm, g) = tomo_setup();
    let post = condition::graph_posterior(&pd, &pm, &g).unwrap();
    let line = AffineLine {
        point: vec![0.0, 0.0],
        direction: vec![1.0, 1.0],
    };
    let cond_v = condition::restrict_to_affine(&post, &line).unwrap();
    let grid: Vec<f64> = (0..200)
        .map(|i| 1.3501 + (1.4999 - 1.3501) * i as f64 / 199.0)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&t| cond_v.eval(&[t])).collect();
    let (lo, hi) = vals
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    c.check(
        "velocity-route conditional constant",
        hi / lo - 1.0 < 1e-9,
        format!("max/min − 1 = {:.3e}", hi / lo - 1.0),
    );

    let post_s = post.pushforward(&coords::reciprocal::<f64>(2)).unwrap();
    let cond_s = condition::restrict_to_affine(&post_s, &line).unwrap();
    let back = cond_s.pushforward(&coords::reciprocal::<f64>(1)).unwrap();
    let bvals: Vec<f64> = grid.iter().map(|&t| back.eval(&[t])).collect();
    let n = grid.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in grid.iter().zip(&bvals) {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    c.check(
        "slowness-route conditional ∝ v²",
        (slope - 2.0).abs() <= 1e-3,
        format!("log-log slope {slope:.6}"),
    );

    let score = condition::disagreement_score(&cond_v, &back, &grid);
    c.check(
        "routes disagree",
        score > 0.01,
        format!("disagreement score {score:.5}"),
    );
    c.finish();
}

#[test]
fn criterion_2_map_flip() {
    let mut c = Checker::new("2 (MAP flip)");
    let f = Density::lognormal_product(&[1.0, 1.0], &[1.0, 1.0], "f");
    let b = BoxDomain::new(vec![0.05, 0.05], vec![6.0, 6.0]);
    let audit =
        modal::mode_invariance_audit(&f, &coords::hyperbolic_trho(), &b, modal::DEFAULT_GRID)
            .unwrap();
    let e_half = 0.5f64.exp();
    c.check(
        "direct mode at (1,1)",
        (audit.mode_original[0] - 1.0f64).abs() <= 1e-3
            && (audit.mode_original[1] - 1.0f64).abs() <= 1e-3,
        format!("({:.6}, {:.6})", audit.mode_original[0], audit.mode_original[1]),
    );
    c.check(
        "hyperbolic-route mode at (1.6487, 1.6487)",
        (audit.mode_via_reparam[0] - e_half).abs() <= 1e-3
            && (audit.mode_via_reparam[1] - e_half).abs() <= 1e-3,
        format!(
            "({:.6}, {:.6})",
            audit.mode_via_reparam[0], audit.mode_via_reparam[1]
        ),
    );
    c.check(
        "max density value, direct route",
        (audit.value_original - 0.0585).abs() <= 5e-4,
        format!("{:.6}", audit.value_original),
    );
    c.check(
        "max density value, hyperbolic route",
        (audit.value_via_reparam - 0.0456).abs() <= 5e-4,
        format!("{:.6}", audit.value_via_reparam),
    );
    c.check("audit exposes the flip", !audit.pass, format!("pass = {}", audit.pass));
    c.finish();
}

#[test]
fn criterion_3_hierarchical_sigma_contradiction() {
    let mut c = Checker::new("3 (hierarchical σ contradiction)");
    let cart = HierCase::paper(HierCaseId::Cart);
    let (s1, f1) = hier::optimize_sigma(&cart, (0.05, 3.0)).unwrap();
    let closed = 2.0 * (cart.b * cart.d_obs[2] - cart.c * cart.d_obs[1]) / (cart.b + cart.c);
    c.check(
        "σ₁ = 0.466667 ± 1e-5",
        (s1 - 0.466667).abs() <= 1e-5 && f1 == OptimFlag::Interior,
        format!("σ₁ = {s1:.8}"),
    );
    c.check(
        "closed form 2(bd₃−cd₂)/(b+c) exact to 1e-12",
        (closed - 0.4666666666666666).abs() <= 1e-12,
        format!("{closed:.16}"),
    );

    let tan = HierCase::paper(HierCaseId::Tan);
    let (s2, f2) = hier::optimize_sigma(&tan, (0.05, 3.0)).unwrap();
    c.check(
        "σ₂ = 1.02932 ± 1e-3",
        (s2 - 1.02932).abs() <= 1e-3 && f2 == OptimFlag::Interior,
        format!("σ₂ = {s2:.6}"),
    );

    let square = HierCase::paper(HierCaseId::Square);
    let (s3, f3) = hier::optimize_sigma(&square, (0.05, 3.0)).unwrap();
    c.check(
        "σ₃ boundary-singular at 1.5",
        (s3 - 1.5).abs() <= 1e-9 && f3 == OptimFlag::BoundarySingular,
        format!("σ₃ = {s3} ({f3:?})"),
    );
    for (a, b, la, lb) in [(s1, s2, "σ₁", "σ₂"), (s1, s3, "σ₁", "σ₃"), (s2, s3, "σ₂", "σ₃")] {
        c.check(
            &format!("|{la}−{lb}| > 0.3"),
            (a - b).abs() > 0.3,
            format!("{:.4}", (a - b).abs()),
        );
    }
    c.finish();
}

#[test]
fn criterion_4_decision_flip() {
    let mut c = Checker::new("4 (decision flip)");
    let cart = HierCase::paper(HierCaseId::Cart);
    let tan = HierCase::paper(HierCaseId::Tan);
    let (s1, _) = hier::optimize_sigma(&cart, (0.05, 3.0)).unwrap();
    let (s2, _) = hier::optimize_sigma(&tan, (0.05, 3.0)).unwrap();

    let tail1 = hier::posterior_tail(&cart, s1, 1.6).unwrap();
    c.check("Case 1: P(test parameter > 1.6) = 0 exactly", tail1 == 0.0, format!("{tail1}"));
    let hi = hier::m1_support_hi(&cart, s1);
    c.check(
        "Case 1 support bound 1.566667 ± 1e-6",
        (hi - 1.566667).abs() <= 1e-6,
        format!("{hi:.8}"),
    );

    let norm = hier::m2_normalizer(&tan, s2).unwrap();
    c.check(
        "Case 2 posterior normalization constant 1.689 ± 0.005",
        (norm - 1.689).abs() <= 5e-3,
        format!("{norm:.6}"),
    );

    let tail2 = hier::posterior_tail(&tan, s2, 1.6).unwrap();
    // The stated 0.107 cannot coexist with the 1.689 normalizer and the
    // 1.566667 support bound: the cos²-marginal tail is 0.4123 and the
    // test-parameter marginal is uniform with tail 0.2217. The honest value
    // is pinned; the stated one is asserted and expected to fail.
    c.check_expected_red(
        "Case 2: P(test parameter > 1.6) = 0.107 ± 0.002",
        (tail2 - 0.107).abs() <= 2e-3,
        format!("observed {tail2:.6}"),
    );
    c.check(
        "Case 2 tail honest value pinned (uniform marginal)",
        (tail2 - 0.221662).abs() <= 1e-4,
        format!("{tail2:.6}"),
    );
    let m2t = hier::m2_tail(&tan, s2, 1.6).unwrap();
    c.check(
        "Case 2 cos²-marginal tail pinned",
        (m2t - 0.412266).abs() <= 1e-3,
        format!("{m2t:.6}"),
    );
    c.finish();
}

#[test]
fn criterion_5_transdimensional_flip() {
    let mut c = Checker::new("5 (trans-dimensional flip)");
    let case = TransdimCase::default();
    let e1 = transdim::evidence_cartesian(&case, 1).unwrap();
    let e2 = transdim::evidence_cartesian(&case, 2).unwrap();
    c.check(
        "Cartesian k=1 evidence 0.146484375 exact to 1e-9",
        (e1.value - 0.146484375).abs() <= 1e-9,
        format!("{:.10}", e1.value),
    );
    // 0.234375/0.146484375 = 1.6, which contradicts the required Bayes
    // factor 2.1333; the source's own closed form gives 0.3125, and that
    // value is pinned below.
    c.check_expected_red(
        "Cartesian k=2 evidence 0.234375 exact to 1e-9",
        (e2.value - 0.234375).abs() <= 1e-9,
        format!("observed {:.10}", e2.value),
    );
    c.check(
        "Cartesian k=2 evidence honest value pinned (closed form)",
        (e2.value - 0.3125).abs() <= 1e-9,
        format!("{:.10}", e2.value),
    );
    let bf_cart = evidence::bayes_factor(e2, e1).unwrap();
    c.check(
        "Cartesian Bayes factor 2.133333 ± 1e-6",
        (bf_cart.factor - 2.133333333333).abs() <= 1e-6,
        format!("{:.9}", bf_cart.factor),
    );

    let q = QuadratureSpec::default();
    let s1 = transdim::evidence_spherical(&case, 1, &q).unwrap();
    let s2 = transdim::evidence_spherical(&case, 2, &q).unwrap();
    let scale = (2.0 * case.sigma).powi(3);
    let k1_expect = 2439.0 / 800.0 * (21.0f64 / 5.0).sqrt() / (scale * case.dm);
    c.check(
        "spherical k=1 matches (2439/800)√(21/5) scaling to 1e-9",
        (s1.value - k1_expect).abs() <= 1e-9 * k1_expect,
        format!("{:.12}", s1.value),
    );
    let k2_scaled = s2.value * scale * case.dm * case.dm;
    c.check(
        "spherical k=2 matches 8.58922077 scaling within 1e-4 relative",
        (k2_scaled - 8.58922077).abs() / 8.58922077 <= 1e-4,
        format!("{k2_scaled:.8}"),
    );
    let bf_sph = evidence::bayes_factor(s2, s1).unwrap();
    c.check(
        "spherical Bayes factor 0.68734901 ± 1e-4",
        (bf_sph.factor - 0.68734901).abs() <= 1e-4,
        format!("{:.8}", bf_sph.factor),
    );
    let flip = transdim::bayes_flip(&case, &q).unwrap();
    c.check("flip boolean", flip.flip, format!("cart favors {}, spherical favors {}", flip.cartesian.favored, flip.spherical.favored));
    c.finish();
}

#[test]
fn criterion_6_appendix_integral_oracle() {
    let mut c = Checker::new("6 (closed-form integral oracle)");
    let case = TransdimCase::default();
    let oracle = transdim::appendix_e_oracle();
    let scale = (2.0 * case.sigma).powi(3) * case.dm * case.dm;

    // full-budget mode
    let mut q = QuadratureSpec::default();
    q.rel_tol = 1e-8;
    let full = transdim::evidence_spherical(&case, 2, &q).unwrap();
    let rel = (full.value * scale - oracle).abs() / oracle;
    c.check(
        "quadrature vs closed form within 1e-5 relative (default budget)",
        rel <= 1e-5,
        format!("relative gap {rel:.3e}"),
    );

    // reduced 30-second mode at 1e-3
    let mut cheap = QuadratureSpec::default();
    cheap.rel_tol = 1e-3;
    cheap.max_evals = 200_000;
    let fast = transdim::evidence_spherical(&case, 2, &cheap).unwrap();
    let rel_fast = (fast.value * scale - oracle).abs() / oracle;
    c.check(
        "reduced mode within 1e-3 relative",
        rel_fast <= 1e-3,
        format!("relative gap {rel_fast:.3e}"),
    );
    c.finish();
}

#[test]
fn criterion_7_acausality() {
    let mut c = Checker::new("7 (acausality)");
    let t1 = hier::discrete_hyper_marginals(0.5, 0.5, 1.0);
    let t2 = hier::discrete_hyper_marginals(0.5, 0.5, 2.0);
    c.check(
        "normalized p(λ|d) moves by > 1e-3 between k=1 and k=2",
        (t1.lambda_norm[0] - t2.lambda_norm[0]).abs() > 1e-3,
        format!("Δ = {:.6}", (t1.lambda_norm[0] - t2.lambda_norm[0]).abs()),
    );
    c.check(
        "normalized p(δ|d) moves by > 1e-3",
        (t1.delta_norm[0] - t2.delta_norm[0]).abs() > 1e-3,
        format!("Δ = {:.6}", (t1.delta_norm[0] - t2.delta_norm[0]).abs()),
    );

    // closed form vs quadrature oracle within 1e-4
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut oracle = 0.0;
    for del in [1.0f64, 2.0] {
        let f = move |m: &[f64]| {
            0.25 / (two_pi * del)
                * (-0.5 * (m[0] * m[0] + m[0] * m[0] / (del * del))).exp()
        };
        let b = BoxDomain::new(vec![-40.0], vec![40.0]);
        oracle += quad::integrate(&f, &b, &QuadratureSpec::default())
            .unwrap()
            .value;
    }
    c.check(
        "closed form agrees with the quadrature oracle within 1e-4",
        (t1.lambda_unnorm[0] - oracle).abs() <= 1e-4,
        format!("gap {:.3e}", (t1.lambda_unnorm[0] - oracle).abs()),
    );

    let m1 = hier::gaussian_hyper_grid_argmax(1.0, 0.05, 3.0, 0.005).unwrap();
    let m2 = hier::gaussian_hyper_grid_argmax(2.0, 0.05, 3.0, 0.005).unwrap();
    let moved = (m1.0 - m2.0).abs().max((m1.1 - m2.1).abs());
    c.check(
        "Gaussian-case grid argmax moves by > 0.05",
        moved > 0.05,
        format!("move {moved:.3}"),
    );
    c.finish();
}

#[test]
fn criterion_8_non_uniqueness() {
    let mut c = Checker::new("8 (non-uniqueness constructions)");
    // tube reproduces a user-specified naive evidence within 2%
    use bayes_audit::construct;
    let g = ForwardModel::new(1, 1, "ridge", Arc::new(|x: &[f64]| vec![0.5 + 0.1 * x[0]]));
    let target = 0.37;
    let s = construct::sigma_for_evidence(2, 1, 1.0, 1.0, target);
    let tube = Density::tube(
        BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]),
        g,
        s,
        1.0,
        "tube",
    );
    let line_integral = quad::integrate(
        &move |x: &[f64]| tube.eval_raw(&[x[0], 0.5 + 0.1 * x[0]]),
        &BoxDomain::new(vec![0.0], vec![1.0]),
        &QuadratureSpec::default(),
    )
    .unwrap()
    .value;
    c.check(
        "tube hits the prescribed naive evidence within 2%",
        (line_integral / target - 1.0).abs() <= 0.02,
        format!("{line_integral:.5} vs {target}"),
    );

    // transport pushes uniform onto 2u·2v with sup error < 5e-3
    let f = Density::uniform(BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]), "u");
    let gt = Density::new(
        BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]),
        "4uv",
        Arc::new(|x: &[f64]| 4.0 * x[0] * x[1] + 1e-12),
        Some(1.0),
    );
    let t = construct::triangular_transport(&f, &gt, construct::DEFAULT_TRANSPORT_GRID).unwrap();
    let pushed = f.pushforward(&t).unwrap();
    let mut sup = 0.0f64;
    for i in 0..50 {
        for j in 0..50 {
            let y = [0.05 + 0.9 * i as f64 / 49.0, 0.05 + 0.9 * j as f64 / 49.0];
            sup = sup.max((pushed.eval(&y) - gt.eval(&y)).abs());
        }
    }
    c.check(
        "triangular transport sup error < 5e-3",
        sup < 5e-3,
        format!("sup {sup:.2e}"),
    );

    // composite: data reparameterization driving the k=2 evidence to a target
    let report = scenario::run(&scenario::find("construct:any_evidence").unwrap()).unwrap();
    for label in ["achieved_over_target_a", "achieved_over_target_b"] {
        let row = report.rows.iter().find(|r| r.name == label).unwrap();
        c.check(
            &format!("any-evidence composite within 2% ({label})"),
            (row.observed - 1.0).abs() <= 0.02,
            format!("ratio {:.4}", row.observed),
        );
    }
    c.finish();
}

#[test]
fn criterion_9_property_suites() {
    let mut c = Checker::new("9 (property suites)");

    // pushforward mass conservation across (family, diffeo) pairs
    let pairs: Vec<(Density<f64>, coords::Diffeo<f64>)> = vec![
        (
            Density::uniform(BoxDomain::new(vec![1.0, 1.0], vec![2.0, 2.0]), "u2"),
            coords::reciprocal(2),
        ),
        (
            Density::uniform(BoxDomain::new(vec![0.5, 0.5], vec![1.5, 1.5]), "u2b"),
            coords::cube_all(2),
        ),
        (
            Density::gaussian_diag(&[0.3], &[0.1], "g1"),
            coords::tan_axis0(1),
        ),
        (
            Density::gaussian_diag(&[0.5, -0.2], &[0.4, 0.3], "g2"),
            coords::identity(2),
        ),
        (
            Density::lognormal_product(&[0.0], &[0.25], "ln1"),
            coords::square_axis0(1),
        ),
    ];
    for (p, t) in &pairs {
        let q = p.pushforward(t).unwrap();
        let spec = QuadratureSpec::default();
        let mp = quad::integrate(
            &{
                let p = p.clone();
                move |x: &[f64]| p.eval_raw(x)
            },
            p.support(),
            &spec,
        )
        .unwrap()
        .value;
        let mq = quad::integrate(
            &{
                let q = q.clone();
                move |x: &[f64]| q.eval_raw(x)
            },
            q.support(),
            &spec,
        )
        .unwrap()
        .value;
        c.check(
            &format!("mass conserved for {} under {}", p.name(), t.name()),
            (mp - mq).abs() < 1e-3,
            format!("|Δ| = {:.2e}", (mp - mq).abs()),
        );
        // round-trip pointwise
        let back = q.pushforward(&t.inverse()).unwrap();
        let mid = p.support().center();
        let (a, b) = (p.eval_raw(&mid), back.eval_raw(&mid));
        c.check(
            &format!("round-trip pointwise for {} under {}", p.name(), t.name()),
            (a - b).abs() <= 1e-6 * a.abs().max(1e-30),
            format!("{a:.9} vs {b:.9}"),
        );
    }

    // model-space evidence invariance (PASS expected)
    let pd = Density::uniform(BoxDomain::cube_around(&[3.1, 5.8, 1.1], 0.4), "cube");
    let pm1 = Density::uniform(BoxDomain::new(vec![0.05], vec![2.0]), "r1");
    let v = evidence::audit_model_reparam_invariance(
        &pd,
        &pm1,
        &transdim::g1(),
        &coords::cube_all(1),
        &QuadratureSpec::default(),
    )
    .unwrap();
    c.check(
        "model-space evidence invariance, k=1 scenario",
        v.pass,
        format!("{:.9} vs {:.9}", v.original.value, v.reparameterized.value),
    );
    let pm2 = Density::uniform(BoxDomain::new(vec![0.05, 0.05], vec![2.0, 2.0]), "r2");
    let mc = QuadratureSpec::monte_carlo(2026, 4_000_000);
    let v2 = match evidence::audit_model_reparam_invariance(
        &pd,
        &pm2,
        &transdim::g2(),
        &coords::cube_all(2),
        &mc,
    ) {
        Ok(v) => v,
        Err(e) => panic!("k2 MC audit errored: {e}"),
    };
    c.check(
        "model-space evidence invariance, k=2 scenario (seeded MC)",
        v2.pass,
        format!("{:.6} vs {:.6}", v2.original.value, v2.reparameterized.value),
    );

    // data-space evidence non-invariance on the hierarchical pair
    let cart = HierCase::paper(HierCaseId::Cart);
    let tan = HierCase::paper(HierCaseId::Tan);
    let s1 = 0.4666666666666666;
    let e_cart = hier::evidence_profile(&cart, s1).unwrap();
    let e_tan = hier::evidence_profile(&tan, s1).unwrap();
    c.check(
        "data-space evidence non-invariance (closed forms differ)",
        (e_cart - e_tan).abs() > 10.0 * 1e-12,
        format!("{e_cart:.9} vs {e_tan:.9}"),
    );

    // Jacobian analytic vs finite differences
    let h = coords::hyperbolic_trho::<f64>();
    let mut worst = 0.0f64;
    for &x in &[[0.7f64, 1.3], [1.0, 1.0], [1.9, 0.6], [0.51, 1.97]] {
        let analytic = h.jac_det_abs(&x).unwrap();
        let fd = coords::det(&coords::fd_jacobian(&|y: &[f64]| h.apply(y), &x, None).unwrap())
            .abs();
        worst = worst.max((analytic - fd).abs() / analytic);
    }
    c.check(
        "analytic vs finite-difference Jacobians within 1e-6",
        worst <= 1e-6,
        format!("worst relative gap {worst:.2e}"),
    );

    // quadrature engine cross-agreement
    let f = |x: &[f64]| (3.0 * x[0]).exp() * (1.0 + x[1] * x[1]);
    let b = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]);
    let gq = quad::integrate(&f, &b, &QuadratureSpec::tensor(24)).unwrap();
    let mq = quad::integrate(&f, &b, &QuadratureSpec::monte_carlo(7, 1_000_000)).unwrap();
    c.check(
        "tensor vs Monte Carlo within 3 combined error estimates",
        (gq.value - mq.value).abs() <= 3.0 * (gq.err_est + mq.err_est + 1e-12),
        format!("{:.8} vs {:.8}", gq.value, mq.value),
    );

    // replay determinism, byte for byte
    let mut drift = Vec::new();
    for id in ["transdim:cart", "transdim:sph", "hier:tan", "acausal:discrete"] {
        let s = scenario::find(id).unwrap();
        let a = scenario::run(&s).unwrap().to_json();
        let bb = scenario::run(&s).unwrap().to_json();
        if a != bb {
            drift.push(id);
        }
    }
    c.check(
        "replay determinism (byte-identical reports)",
        drift.is_empty(),
        format!("drift: {drift:?}"),
    );
    c.finish();
}

#[test]
fn monte_carlo_engine_requires_declared_seed() {
    // quadrature-spec invariant surfaced at the acceptance level
    let mut q = QuadratureSpec::default();
    q.engine = EngineKind::MonteCarlo;
    assert!(q.validate().is_err());
}
