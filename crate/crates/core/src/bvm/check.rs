use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::distance::{ks_statistic, l1_density_distance, normal_cdf, normal_pdf, KsReference};
use super::Thresholds;
use crate::error::{Error, Result};
use crate::frequentist::{limit_covariance_a, FitResult, LimitFunctionals};
use crate::path::HazardPath;
use crate::posterior::effective_sample_size;

/// Comparison of the `β` posterior with its normal limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCheck {
    /// Per-coordinate KS distance of `√n(β − β̂)` to `N(0, (Î⁻¹)_kk)`.
    pub ks: Vec<f64>,
    /// KDE L1 distance to the normal limit density (`p = 1` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    /// KS distance of the squared Mahalanobis radius to `χ²_p` (`p > 1` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mahalanobis_ks: Option<f64>,
    /// Per-coordinate effective sample size of the chain.
    pub ess: Vec<f64>,
    pub verdict: bool,
}

/// Comparison of the posterior of `A` with its Gaussian-process limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardCheck {
    pub grid: Vec<f64>,
    /// `max_t |E[A(t) | data] − Â(t)|` over the grid.
    pub mean_gap: f64,
    /// Largest entrywise relative error of the draw covariance of
    /// `√n(A − Â)` against `Û0(s ∧ t) + ê0(s)' Î⁻¹ ê0(t)`.
    pub cov_rel_err: f64,
    pub verdict: bool,
}

fn inverse(info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    info.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular("information matrix is not positive definite".into()))
}

/// KS distance of each coordinate of `xs` to the centered normal with the
/// matching diagonal entry of `cov`.
pub fn marginal_ks(xs: &[Vec<f64>], cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    (0..cov.nrows())
        .map(|k| {
            let sd = cov[(k, k)].sqrt();
            let coord: Vec<f64> = xs.iter().map(|x| x[k]).collect();
            ks_statistic(&coord, KsReference::Cdf(&|v| normal_cdf(v, 0.0, sd)))
        })
        .collect()
}

/// Compares `√n(β − β̂)` over `draws` with `N(0, Î⁻¹)`.
pub fn bvm_beta_check(fit: &FitResult, draws: &[Vec<f64>], n: usize, thresholds: &Thresholds) -> Result<BetaCheck> {
    if !fit.converged {
        return Err(Error::Numerical(format!(
            "MLE did not converge (gradient norm {:e} after {} iterations)",
            fit.gradient_norm, fit.iterations
        )));
    }
    if draws.is_empty() {
        return Err(Error::Empty("posterior draws".into()));
    }
    let p = fit.beta_hat.len();
    let cov = inverse(&fit.info_hat)?;
    let root_n = (n as f64).sqrt();
    let xs: Vec<Vec<f64>> = draws
        .iter()
        .map(|b| b.iter().zip(&fit.beta_hat).map(|(x, h)| root_n * (x - h)).collect())
        .collect();
    let ks = marginal_ks(&xs, &cov)?;
    let ess: Vec<f64> = (0..p).map(|k| effective_sample_size(&draws.iter().map(|d| d[k]).collect::<Vec<_>>())).collect();
    let (l1, mahalanobis_ks) = if p == 1 {
        let sd = cov[(0, 0)].sqrt();
        let coord: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        (Some(l1_density_distance(&coord, |v| normal_pdf(v, 0.0, sd), 0.0, sd)?), None)
    } else {
        let radii: Vec<f64> = xs
            .iter()
            .map(|x| {
                let v = DVector::from_column_slice(x);
                (v.transpose() * &fit.info_hat * &v)[(0, 0)]
            })
            .collect();
        let chi = ChiSquared::new(p as f64).map_err(|e| Error::Numerical(e.to_string()))?;
        (None, Some(ks_statistic(&radii, KsReference::Cdf(&|r| chi.cdf(r.max(0.0))))?))
    };
    let verdict = ks.iter().all(|&d| d < thresholds.ks)
        && mahalanobis_ks.is_none_or(|d| d < thresholds.ks)
        && ess.iter().all(|&e| e >= thresholds.min_ess);
    Ok(BetaCheck { ks, l1, mahalanobis_ks, ess, verdict })
}

/// Compares joint posterior paths with Breslow's estimator and the limit
/// covariance on `grid`.
pub fn bvm_a_check(
    fit: &FitResult,
    functionals: &LimitFunctionals,
    paths: &[HazardPath],
    grid: &[f64],
    n: usize,
    thresholds: &Thresholds,
) -> Result<HazardCheck> {
    if paths.len() < 2 {
        return Err(Error::Empty("at least two posterior paths are required".into()));
    }
    if grid.is_empty() {
        return Err(Error::Empty("hazard grid".into()));
    }
    let last = functionals.event_times().last().copied().unwrap_or(0.0);
    if let Some(&t) = grid.iter().find(|&&t| !(t > 0.0 && t <= last)) {
        return Err(Error::Domain(format!("grid time {t} outside (0, {last}], the range of event times")));
    }
    let m = paths.len() as f64;
    let root_n = (n as f64).sqrt();
    let a_hat = fit.breslow.eval_grid(grid);
    let g = grid.len();
    let values: Vec<Vec<f64>> = paths.iter().map(|p| p.eval_grid(grid)).collect();
    let mean: Vec<f64> = (0..g).map(|k| values.iter().map(|v| v[k]).sum::<f64>() / m).collect();
    let mean_gap = mean.iter().zip(&a_hat).fold(0.0f64, |d, (a, b)| d.max((a - b).abs()));

    let mut cov_rel_err: f64 = 0.0;
    for s in 0..g {
        for t in s..g {
            let emp = values
                .iter()
                .map(|v| root_n * (v[s] - mean[s]) * root_n * (v[t] - mean[t]))
                .sum::<f64>()
                / (m - 1.0);
            let limit = limit_covariance_a(grid[s], grid[t], functionals)?;
            cov_rel_err = cov_rel_err.max((emp - limit).abs() / limit.abs());
        }
    }
    let verdict = mean_gap <= thresholds.mean_gap_factor / n as f64 && cov_rel_err <= thresholds.cov_rel_err;
    Ok(HazardCheck { grid: grid.to_vec(), mean_gap, cov_rel_err, verdict })
}

/// `count` equally spaced times between the `lo` and `hi` quantiles of the
/// distinct event times.
pub fn event_quantile_grid(functionals: &LimitFunctionals, lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    let times = functionals.event_times();
    if times.is_empty() || count == 0 {
        return Err(Error::Empty("event times".into()));
    }
    if !(0.0 < lo && lo <= hi && hi <= 1.0) {
        return Err(Error::Domain(format!("grid quantiles must satisfy 0 < lo <= hi <= 1, got {lo}, {hi}")));
    }
    let q = |p: f64| times[((p * times.len() as f64).ceil() as usize).clamp(1, times.len()) - 1];
    let (a, b) = (q(lo), q(hi));
    if count == 1 {
        return Ok(vec![b]);
    }
    Ok((0..count).map(|k| a + (b - a) * k as f64 / (count - 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequentist::fit_mle;
    use crate::survival::{RiskSets, SurvivalDataset};

    fn fitted() -> (FitResult, LimitFunctionals, usize) {
        let ds = SurvivalDataset::new(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![true, true, true, false, true, true],
            vec![0.5, -0.3, 1.0, 0.2, -1.0, 0.1],
            1,
            None,
        )
        .unwrap();
        let rs = RiskSets::build(&ds);
        let fit = fit_mle(&ds, &rs, &Default::default()).unwrap();
        let lf = LimitFunctionals::compute(&ds, &rs, &fit.beta_hat).unwrap();
        (fit, lf, ds.len())
    }

    #[test]
    fn grid_beyond_last_event_is_rejected() {
        let (fit, lf, n) = fitted();
        let paths = vec![fit.breslow.clone(), fit.breslow.clone()];
        let err = bvm_a_check(&fit, &lf, &paths, &[1.0, 7.0], n, &Thresholds::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn nonconverged_fit_is_rejected() {
        let (mut fit, _, n) = fitted();
        fit.converged = false;
        assert!(bvm_beta_check(&fit, &[vec![0.0]], n, &Thresholds::default()).is_err());
    }

    #[test]
    fn quantile_grid_is_inside_event_range() {
        let (_, lf, _) = fitted();
        let grid = event_quantile_grid(&lf, 0.2, 0.8, 5).unwrap();
        assert_eq!(grid.len(), 5);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        assert!(grid[0] >= 1.0 && grid[4] <= 6.0);
    }
}
