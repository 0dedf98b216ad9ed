//! Maximum partial likelihood, Breslow's estimator and the plug-in
//! functionals describing the large-sample law of both.

mod functionals;

pub use functionals::{limit_covariance_a, LimitFunctionals};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::HazardPath;
use crate::survival::{RiskSets, SurvivalDataset};

/// Largest number of step halvings in the Newton line search.
const MAX_HALVINGS: usize = 30;
/// `|beta|_inf * M_z` beyond which the likelihood is treated as monotone.
const MONOTONE_BOUND: f64 = 50.0;

/// `l_n(beta)` and optionally its first two derivatives.
#[derive(Debug, Clone)]
pub struct PartialLikelihood {
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

/// `l_n(β) = Σ_i Σ_{j ∈ D(t_i)} [β'Z_j − ln(n⁻¹ Σ_{k ∈ R(t_i)} exp(β'Z_k))]`.
///
/// `order` selects how many derivatives are returned (0, 1 or 2). Sums over
/// risk sets are accumulated backwards through the sorted records, so the
/// cost is `O(n p²)`.
pub fn partial_loglik(
    ds: &SurvivalDataset,
    rs: &RiskSets,
    beta: &[f64],
    order: u8,
) -> Result<PartialLikelihood> {
    if rs.q() == 0 {
        return Err(Error::UndefinedLikelihood);
    }
    let p = ds.p();
    if beta.len() != p {
        return Err(Error::Domain(format!("beta has dimension {}, expected {p}", beta.len())));
    }
    let n = ds.len() as f64;
    let w = ds.risk_scores(beta);
    let sorted = rs.sorted_order();

    let mut s0 = 0.0;
    let mut s1 = DVector::<f64>::zeros(p);
    let mut s2 = DMatrix::<f64>::zeros(p, p);
    let mut value = 0.0;
    let mut grad = DVector::<f64>::zeros(p);
    let mut hess = DMatrix::<f64>::zeros(p, p);
    let mut pos = sorted.len();
    for i in (0..rs.q()).rev() {
        let start = rs.risk_start(i);
        while pos > start {
            pos -= 1;
            let j = sorted[pos];
            let z = DVector::from_column_slice(ds.covariates(j));
            s0 += w[j];
            if order >= 1 {
                s1.axpy(w[j], &z, 1.0);
            }
            if order >= 2 {
                s2.ger(w[j], &z, &z, 1.0);
            }
        }
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::Numerical(format!(
                "risk-set sum {s0} at t = {} is not positive and finite",
                rs.time(i)
            )));
        }
        let d = rs.death_count(i) as f64;
        let log_mean = (s0 / n).ln();
        for &j in rs.death_set(i) {
            value += crate::survival::dot(ds.covariates(j), beta) - log_mean;
            if order >= 1 {
                grad += DVector::from_column_slice(ds.covariates(j));
            }
        }
        if order >= 1 {
            let mean = &s1 / s0;
            grad.axpy(-d, &mean, 1.0);
            if order >= 2 {
                let cov = &s2 / s0 - &mean * mean.transpose();
                hess -= cov * d;
            }
        }
    }
    Ok(PartialLikelihood {
        value,
        gradient: (order >= 1).then_some(grad),
        hessian: (order >= 2).then_some(hess),
    })
}

/// Breslow's estimator `Â(t) = Σ_{t_i <= t} |D(t_i)| / Σ_{j ∈ R(t_i)} exp(β'Z_j)`.
pub fn breslow(ds: &SurvivalDataset, rs: &RiskSets, beta: &[f64]) -> Result<HazardPath> {
    let w = ds.risk_scores(beta);
    let suffix = rs.suffix_sums(&w);
    let sizes: Vec<f64> =
        (0..rs.q()).map(|i| rs.death_count(i) as f64 / suffix[rs.risk_start(i)]).collect();
    HazardPath::from_increments(rs.distinct_times().to_vec(), sizes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub init: Option<Vec<f64>>,
    /// Convergence threshold on `|gradient|_inf`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { init: None, tol: 1e-8, max_iter: 50 }
    }
}

/// Maximum partial likelihood fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: Vec<f64>,
    /// `Î = −l_n''(β̂) / n`.
    pub info_hat: DMatrix<f64>,
    pub breslow: HazardPath,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Serialize)]
struct FitJson<'a> {
    beta_hat: &'a [f64],
    info_hat: Vec<f64>,
    breslow: Vec<[f64; 2]>,
    loglik: f64,
    converged: bool,
    iterations: usize,
    gradient_norm: f64,
}

impl FitResult {
    /// JSON document with `beta_hat`, row-major `info_hat`, the Breslow path
    /// as `[t, A]` pairs and convergence metadata.
    pub fn to_json(&self) -> String {
        let p = self.info_hat.nrows();
        let info_hat = (0..p).flat_map(|r| (0..p).map(move |c| (r, c))).map(|(r, c)| self.info_hat[(r, c)]).collect();
        let breslow = self.breslow.points().into_iter().map(|(t, a)| [t, a]).collect();
        let doc = FitJson {
            beta_hat: &self.beta_hat,
            info_hat,
            breslow,
            loglik: self.loglik,
            converged: self.converged,
            iterations: self.iterations,
            gradient_norm: self.gradient_norm,
        };
        serde_json::to_string_pretty(&doc).expect("fit result serializes")
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton ascent on `l_n`.
///
/// Each step solves with `−l_n''` (falling back to the gradient when that is
/// not numerically positive definite) and halves the step until `l_n` does
/// not decrease. Divergence toward infinity is reported as
/// [`Error::MonotoneLikelihood`]: either `|β|_inf` exceeds `50 / M_z`, or the
/// gradient has vanished while the Newton step stays large, which only
/// happens along a flat direction.
pub fn fit_mle(ds: &SurvivalDataset, rs: &RiskSets, opts: &FitOptions) -> Result<FitResult> {
    let p = ds.p();
    if rs.q() == 0 {
        return Err(Error::UndefinedLikelihood);
    }
    if p == 0 {
        return Err(Error::Domain("at least one covariate is required".into()));
    }
    let mut beta = opts.init.clone().unwrap_or_else(|| vec![0.0; p]);
    if beta.len() != p {
        return Err(Error::Domain(format!("initial beta has dimension {}, expected {p}", beta.len())));
    }
    let m_z = ds.max_covariate_norm().max(f64::MIN_POSITIVE);
    let threshold = MONOTONE_BOUND / m_z;
    let monotone = |beta: &[f64], iterations: usize| Error::MonotoneLikelihood {
        beta_norm: inf_norm(beta),
        iterations,
        threshold,
    };

    let mut converged = false;
    let mut iterations = 0;
    let mut current = partial_loglik(ds, rs, &beta, 2)?;
    loop {
        let grad = current.gradient.clone().unwrap();
        let neg_hess = -current.hessian.clone().unwrap();
        let newton = neg_hess.clone().cholesky().map(|ch| ch.solve(&grad));
        let grad_norm = grad.amax();
        if grad_norm < opts.tol {
            match &newton {
                Some(step) if step.amax() <= 1e-3 * (1.0 + inf_norm(&beta)) => {
                    converged = true;
                    break;
                }
                _ => return Err(monotone(&beta, iterations)),
            }
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;
        let direction = newton.unwrap_or_else(|| grad.clone());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = beta.iter().zip(direction.iter()).map(|(b, d)| b + step * d).collect();
            if inf_norm(&candidate) > threshold {
                return Err(monotone(&candidate, iterations));
            }
            let trial = partial_loglik(ds, rs, &candidate, 2)?;
            if trial.value >= current.value {
                accepted = Some((candidate, trial));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((b, trial)) => {
                beta = b;
                current = trial;
            }
            // no ascent possible at machine precision
            None => break,
        }
    }
    let grad_norm = current.gradient.as_ref().unwrap().amax();
    if !converged && grad_norm < opts.tol {
        converged = true;
    }
    let n = ds.len() as f64;
    let info_hat = -current.hessian.unwrap() / n;
    let info_hat = 0.5 * (&info_hat + info_hat.transpose());
    Ok(FitResult {
        breslow: breslow(ds, rs, &beta)?,
        beta_hat: beta,
        info_hat,
        loglik: current.value,
        converged,
        iterations,
        gradient_norm: grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ds(times: &[f64], status: &[bool], z: &[f64]) -> (SurvivalDataset, RiskSets) {
        let ds = SurvivalDataset::new(times.to_vec(), status.to_vec(), z.to_vec(), 1, None).unwrap();
        let rs = RiskSets::build(&ds);
        (ds, rs)
    }

    #[test]
    fn three_record_value_at_zero() {
        let (d, r) = ds(&[1.0, 2.0, 3.0], &[true, false, true], &[0.3, -1.0, 2.0]);
        let pl = partial_loglik(&d, &r, &[0.0], 0).unwrap();
        assert_relative_eq!(pl.value, 3f64.ln(), epsilon = 1e-15);
        assert!(pl.gradient.is_none());
    }

    #[test]
    fn breslow_at_zero_is_nelson_aalen() {
        let (d, r) = ds(&[1.0, 2.0, 3.0], &[true, false, true], &[0.3, -1.0, 2.0]);
        let a = breslow(&d, &r, &[0.0]).unwrap();
        assert_relative_eq!(a.eval(1.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(a.eval(2.5), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(a.eval(3.0), 4.0 / 3.0, epsilon = 1e-15);
        assert_eq!(a.eval(0.5), 0.0);
    }

    #[test]
    fn no_events_is_undefined() {
        let (d, r) = ds(&[1.0, 2.0], &[false, false], &[0.0, 1.0]);
        assert!(matches!(partial_loglik(&d, &r, &[0.0], 0), Err(Error::UndefinedLikelihood)));
        assert!(matches!(fit_mle(&d, &r, &FitOptions::default()), Err(Error::UndefinedLikelihood)));
    }

    #[test]
    fn monotone_fixture_is_reported() {
        let (d, r) = ds(&[1.0, 2.0], &[true, true], &[1.0, 0.0]);
        let err = fit_mle(&d, &r, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MonotoneLikelihood { .. }), "{err:?}");
    }

    #[test]
    fn four_record_fixture_converges() {
        let (d, r) = ds(&[1.0, 2.0, 3.0, 4.0], &[true; 4], &[1.0, 0.0, 1.0, 0.0]);
        let fit = fit_mle(&d, &r, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.gradient_norm < 1e-8);
        assert!(fit.info_hat[(0, 0)] > 0.0);
        let json: serde_json::Value = serde_json::from_str(&fit.to_json()).unwrap();
        assert_eq!(json["beta_hat"].as_array().unwrap().len(), 1);
        assert_eq!(json["breslow"].as_array().unwrap().len(), 5);
    }
}
