use nalgebra::DMatrix;
use serde::Serialize;

use super::SurvivalDataset;

/// Relative singular-value tolerance for the design rank check.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Violation {
    /// Two or more uncensored records share a time (no-ties surrogate).
    TiedEvents { time: f64, count: usize },
    /// The centered design matrix is rank deficient (non-collinearity surrogate).
    CollinearDesign { rank: usize, p: usize },
    /// Covariate norms are not finite (boundedness surrogate).
    UnboundedCovariates,
    NoRecords,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationVerdict {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl ValidationVerdict {
    pub fn describe(&self) -> String {
        if self.passed {
            return "dataset passes all checks".into();
        }
        self.violations
            .iter()
            .map(|v| match v {
                Violation::TiedEvents { time, count } => {
                    format!("{count} uncensored records tied at time {time}")
                }
                Violation::CollinearDesign { rank, p } => {
                    format!("centered covariate design has rank {rank} < p = {p}")
                }
                Violation::UnboundedCovariates => "covariate norms are not finite".into(),
                Violation::NoRecords => "dataset is empty".into(),
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Checks the regularity conditions the posterior theory relies on.
pub fn validate_dataset(ds: &SurvivalDataset) -> ValidationVerdict {
    let mut violations = Vec::new();
    if ds.is_empty() {
        violations.push(Violation::NoRecords);
        return ValidationVerdict { passed: false, violations };
    }

    let mut event_times: Vec<f64> =
        (0..ds.len()).filter(|&i| ds.is_event(i)).map(|i| ds.time(i)).collect();
    event_times.sort_by(f64::total_cmp);
    let mut k = 0;
    while k < event_times.len() {
        let mut m = k + 1;
        while m < event_times.len() && event_times[m] == event_times[k] {
            m += 1;
        }
        if m - k > 1 {
            violations.push(Violation::TiedEvents { time: event_times[k], count: m - k });
        }
        k = m;
    }

    if !ds.max_covariate_norm().is_finite() {
        violations.push(Violation::UnboundedCovariates);
    }

    let p = ds.p();
    if p > 0 {
        let rank = centered_rank(ds);
        if rank < p {
            violations.push(Violation::CollinearDesign { rank, p });
        }
    }

    ValidationVerdict { passed: violations.is_empty(), violations }
}

/// Rank of the column-centered design; centering makes a constant column,
/// which the partial likelihood cannot identify, count as degenerate.
fn centered_rank(ds: &SurvivalDataset) -> usize {
    let n = ds.len();
    let p = ds.p();
    let mut design = DMatrix::from_row_slice(n, p, ds.covariate_matrix());
    for mut col in design.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let sv = design.singular_values();
    let largest = sv.max();
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * largest).count()
}
