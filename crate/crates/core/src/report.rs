//! Report model: per-request result rows, golden comparisons, and
//! invariance verdicts, serializable deterministically.

use serde::{Deserialize, Serialize};

use crate::quad::QuadratureSpec;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub observed: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub err_est: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerdictRow {
    pub name: String,
    pub pass: bool,
    pub value_original: f64,
    pub value_reparameterized: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AuditReport {
    pub schema: u32,
    pub scenario: String,
    pub seed: u64,
    pub engine: QuadratureSpec,
    pub rows: Vec<ReportRow>,
    pub verdicts: Vec<VerdictRow>,
    /// true when every golden comparison passed its tolerance
    pub passed: bool,
    /// request-level errors recorded without aborting the remaining requests
    pub errors: Vec<String>,
    /// diagnostic only: excluded from serialization so replays stay
    /// byte-identical
    #[serde(skip)]
    pub wall_ms: u128,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario: {}  (seed {})\n", self.scenario, self.seed));
        for r in &self.rows {
            match (r.expected, r.tol, r.delta, r.pass) {
                (Some(e), Some(t), Some(d), Some(p)) => {
                    out.push_str(&format!(
                        "{}: {:.10} {:.10} {:.3e} {:.3e} {}\n",
                        r.name,
                        r.observed,
                        e,
                        d,
                        t,
                        if p { "PASS" } else { "FAIL" }
                    ));
                }
                _ => out.push_str(&format!("{}: {:.10}\n", r.name, r.observed)),
            }
        }
        for v in &self.verdicts {
            out.push_str(&format!(
                "audit {}: {} (orig {:.10}, reparam {:.10}, tol {:.3e})\n",
                v.name,
                if v.pass { "PASS" } else { "FAIL" },
                v.value_original,
                v.value_reparameterized,
                v.tolerance
            ));
        }
        for e in &self.errors {
            out.push_str(&format!("error: {e}\n"));
        }
        out.push_str(&format!(
            "result: {}\n",
            if self.passed { "PASS" } else { "FAIL" }
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,observed,expected,tol,delta,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.name,
                fmt_opt(Some(r.observed)),
                fmt_opt(r.expected),
                fmt_opt(r.tol),
                fmt_opt(r.delta),
                r.pass.map(|p| if p { "PASS" } else { "FAIL" }).unwrap_or("")
            ));
        }
        out
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}
