//! Right-censored proportional-hazards data: storage, CSV ingestion,
//! regularity checks, risk sets and synthetic generation.

mod risk;
mod simulate;
mod validate;

pub use risk::RiskSets;
pub use simulate::{simulate_ph_data, BaselineHazard, CensoringLaw, CovariateLaw, TrueModelSpec};
pub use validate::{validate_dataset, ValidationVerdict, Violation};

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Right-censored observations `(time, status, covariates)`.
///
/// Records are kept in input order. Structural invariants (positive finite
/// times, consistent finite covariates, `tau >= max time`) are enforced on
/// construction; the regularity conditions of the model are checked
/// separately by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    status: Vec<bool>,
    covariates: Vec<f64>,
    p: usize,
    tau: f64,
}

impl SurvivalDataset {
    /// `covariates` is row-major with `p` entries per record. `tau` defaults
    /// to the largest observed time.
    pub fn new(
        times: Vec<f64>,
        status: Vec<bool>,
        covariates: Vec<f64>,
        p: usize,
        tau: Option<f64>,
    ) -> Result<Self> {
        let n = times.len();
        if status.len() != n {
            return Err(Error::InvalidData(format!(
                "{} times but {} status indicators",
                n,
                status.len()
            )));
        }
        if covariates.len() != n * p {
            return Err(Error::InvalidData(format!(
                "expected {} covariate values ({n} records x p={p}), got {}",
                n * p,
                covariates.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidData(format!(
                "record {i}: time must be positive and finite, got {}",
                times[i]
            )));
        }
        if let Some(k) = covariates.iter().position(|z| !z.is_finite()) {
            return Err(Error::InvalidData(format!(
                "record {}: covariate z{} is not finite",
                k / p.max(1),
                k % p.max(1) + 1
            )));
        }
        let max_time = times.iter().copied().fold(0.0, f64::max);
        let tau = tau.unwrap_or(max_time);
        if !(tau.is_finite() && tau >= max_time && tau > 0.0) {
            return Err(Error::InvalidData(format!(
                "tau = {tau} must be finite, positive and at least the largest time {max_time}"
            )));
        }
        Ok(Self { times, status, covariates, p, tau })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn is_event(&self, i: usize) -> bool {
        self.status[i]
    }

    pub fn covariates(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.p..(i + 1) * self.p]
    }

    /// Row-major covariate matrix.
    pub fn covariate_matrix(&self) -> &[f64] {
        &self.covariates
    }

    pub fn event_count(&self) -> usize {
        self.status.iter().filter(|&&s| s).count()
    }

    /// Largest L1 norm of a covariate vector.
    pub fn max_covariate_norm(&self) -> f64 {
        (0..self.len())
            .map(|i| self.covariates(i).iter().map(|z| z.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Same data with a different horizon.
    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        let max_time = self.times.iter().copied().fold(0.0, f64::max);
        if !(tau.is_finite() && tau >= max_time && tau > 0.0) {
            return Err(Error::InvalidData(format!(
                "tau = {tau} must be at least the largest time {max_time}"
            )));
        }
        self.tau = tau;
        Ok(self)
    }

    /// `exp(beta' Z_i)` for every record, in record order.
    pub fn risk_scores(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.p, "beta has wrong dimension");
        (0..self.len()).map(|i| dot(self.covariates(i), beta).exp()).collect()
    }

    /// Records reordered by `perm` (record `k` of the result is `perm[k]` of
    /// this dataset).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        let mut covariates = Vec::with_capacity(self.covariates.len());
        for &i in perm {
            covariates.extend_from_slice(self.covariates(i));
        }
        Self {
            times: perm.iter().map(|&i| self.times[i]).collect(),
            status: perm.iter().map(|&i| self.status[i]).collect(),
            covariates,
            p: self.p,
            tau: self.tau,
        }
    }

    /// Same records with every covariate negated.
    pub fn negated_covariates(&self) -> Self {
        Self { covariates: self.covariates.iter().map(|z| -z).collect(), ..self.clone() }
    }

    /// Parses `time,status,z1,...,zp` CSV text.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::Parse { row: 1, message: e.to_string() })?
            .clone();
        let p = check_header(&header)?;
        let mut times = Vec::new();
        let mut status = Vec::new();
        let mut covariates = Vec::new();
        for result in reader.records() {
            let record = result.map_err(|e| Error::Parse {
                row: e.position().map_or(0, |pos| pos.line() as usize),
                message: e.to_string(),
            })?;
            let row = record.position().map_or(0, |pos| pos.line() as usize);
            if record.len() == 1 && record.get(0) == Some("") {
                continue;
            }
            if record.len() != p + 2 {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {} columns, found {}", p + 2, record.len()),
                });
            }
            let time = parse_cell(&record[0], row, "time")?;
            if !(time.is_finite() && time > 0.0) {
                return Err(Error::Parse {
                    row,
                    message: format!("time must be positive and finite, got {}", &record[0]),
                });
            }
            let st = match &record[1] {
                "0" => false,
                "1" => true,
                _ => {
                    return Err(Error::Parse { row, message: "status must be 0 or 1".into() });
                }
            };
            times.push(time);
            status.push(st);
            for k in 0..p {
                let z = parse_cell(&record[k + 2], row, &header[k + 2])?;
                if !z.is_finite() {
                    return Err(Error::Parse {
                        row,
                        message: format!("covariate {} must be finite", &header[k + 2]),
                    });
                }
                covariates.push(z);
            }
        }
        SurvivalDataset::new(times, status, covariates, p, None)
    }

    /// Serializes to the same CSV layout accepted by [`Self::from_csv`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,status");
        for k in 1..=self.p {
            let _ = write!(out, ",z{k}");
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{},{}", self.times[i], u8::from(self.status[i]));
            for z in self.covariates(i) {
                let _ = write!(out, ",{z}");
            }
            out.push('\n');
        }
        out
    }
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let bad = |message: String| Error::Parse { row: 1, message };
    if header.len() < 2 || &header[0] != "time" || &header[1] != "status" {
        return Err(bad("header must start with `time,status`".into()));
    }
    for (k, name) in header.iter().skip(2).enumerate() {
        if name != format!("z{}", k + 1) {
            return Err(bad(format!("covariate column {} must be named z{}, found `{name}`", k + 1, k + 1)));
        }
    }
    Ok(header.len() - 2)
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| Error::Parse {
        row,
        message: format!("column `{column}`: cannot parse `{cell}` as a number"),
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
