//! Large-sample diagnostics: distances between distributions, per-dataset
//! comparisons of the posterior with its normal limit, coverage experiments
//! and report serialization.

mod check;
mod coverage;
mod distance;

pub use check::{bvm_a_check, bvm_beta_check, event_quantile_grid, marginal_ks, BetaCheck, HazardCheck};
pub use coverage::{coverage_experiment, replication_seed, ChainConfig, CoverageReport, MIN_REPLICATIONS};
pub use distance::{
    density_csv, kernel_density, ks_statistic, l1_density_distance, normal_cdf, normal_pdf, DensityEstimate,
    KsReference,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pass/fail thresholds recorded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Upper bound on every KS distance.
    pub ks: f64,
    /// Upper bound on the relative covariance error of `√n(A − Â)`.
    pub cov_rel_err: f64,
    /// The mean gap must not exceed `mean_gap_factor / n`.
    pub mean_gap_factor: f64,
    /// Lower bound on the chain's effective sample size.
    pub min_ess: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { ks: 0.05, cov_rel_err: 0.15, mean_gap_factor: 5.0, min_ess: 1000.0 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [self.ks, self.cov_rel_err, self.mean_gap_factor, self.min_ess];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("thresholds must be positive and finite: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub prior: String,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvmReport {
    pub meta: Meta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hazard: Option<HazardCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageReport>,
}

impl BvmReport {
    /// True when every verdict present passes. Coverage runs have no verdict
    /// and always pass here.
    pub fn passed(&self) -> bool {
        self.beta.as_ref().is_none_or(|b| b.verdict) && self.hazard.as_ref().is_none_or(|h| h.verdict)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Serializes a report. JSON keeps the field order of the types above; CSV
/// flattens it to `section,field,index,value` rows.
pub fn emit_report(report: &BvmReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let value = serde_json::to_value(report).expect("report serializes");
            let mut out = String::from("section,field,index,value\n");
            if let serde_json::Value::Object(sections) = value {
                for (section, body) in sections {
                    let serde_json::Value::Object(fields) = body else { continue };
                    for (field, v) in fields {
                        flatten(&mut out, &section, &field, &v);
                    }
                }
            }
            out
        }
    }
}

fn flatten(out: &mut String, section: &str, field: &str, v: &serde_json::Value) {
    match v {
        serde_json::Value::Array(items) => {
            for (k, item) in items.iter().enumerate() {
                out.push_str(&format!("{section},{field},{k},{item}\n"));
            }
        }
        serde_json::Value::Object(inner) => {
            for (k, item) in inner {
                flatten(out, section, &format!("{field}.{k}"), item);
            }
        }
        serde_json::Value::String(s) => out.push_str(&format!("{section},{field},,\"{}\"\n", s.replace('"', "\"\""))),
        other => out.push_str(&format!("{section},{field},,{other}\n")),
    }
}

/// Parses a JSON report produced by [`emit_report`].
pub fn parse_report(text: &str) -> Result<BvmReport> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> BvmReport {
        BvmReport {
            meta: Meta { n: 100, p: 1, seed: 9, prior: "beta(c=1, lambda=1)".into(), thresholds: Thresholds::default() },
            beta: Some(BetaCheck { ks: vec![0.0123], l1: Some(0.07), mahalanobis_ks: None, ess: vec![1500.5], verdict: true }),
            hazard: Some(HazardCheck { grid: vec![0.1, 0.2], mean_gap: 1e-3, cov_rel_err: 0.1, verdict: true }),
            coverage: None,
        }
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let first = emit_report(&report(), ReportFormat::Json);
        let second = emit_report(&parse_report(&first).unwrap(), ReportFormat::Json);
        assert_eq!(first, second);
        let v: serde_json::Value = serde_json::from_str(&first).unwrap();
        for key in ["n", "p", "seed", "prior", "thresholds"] {
            assert!(v["meta"].get(key).is_some(), "{key}");
        }
        assert!(v["beta"]["ks"].is_array());
        assert!(v["hazard"]["grid"].is_array());
        assert!(v.get("coverage").is_none());
    }

    #[test]
    fn csv_has_one_row_per_scalar() {
        let csv = emit_report(&report(), ReportFormat::Csv);
        assert!(csv.starts_with("section,field,index,value\n"));
        assert!(csv.contains("beta,ks,0,0.0123\n"));
        assert!(csv.contains("meta,thresholds.ks,,0.05\n"));
        assert!(csv.contains("hazard,grid,1,0.2\n"));
    }

    #[test]
    fn thresholds_must_be_positive() {
        assert!(Thresholds::default().validate().is_ok());
        assert!(Thresholds { ks: 0.0, ..Default::default() }.validate().is_err());
    }
}
