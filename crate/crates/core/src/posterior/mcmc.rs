use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::BetaPosteriorSpec;
use crate::error::{Error, Result};
use crate::frequentist::FitResult;

/// Optimal random-walk scaling constant in one dimension.
const RW_SCALE: f64 = 2.38;

#[derive(Debug, Clone, PartialEq)]
pub struct McmcOutput {
    pub draws: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
}

/// Random-walk Metropolis with proposal `β + L z`, `z ~ N(0, I)`.
///
/// Proposals where the target reports a numerical failure are rejected;
/// other errors abort the chain.
pub fn random_walk_metropolis<F>(
    log_target: F,
    init: &[f64],
    factor: &DMatrix<f64>,
    n_draws: usize,
    burn_in: usize,
    seed: u64,
) -> Result<McmcOutput>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let p = init.len();
    if factor.nrows() != p || factor.ncols() != p {
        return Err(Error::Domain(format!("proposal factor must be {p}x{p}")));
    }
    if n_draws == 0 {
        return Err(Error::Domain("at least one draw is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = init.to_vec();
    let mut current_lp = log_target(&current)?;
    if !current_lp.is_finite() {
        return Err(Error::Numerical(format!("log target is {current_lp} at the initial point")));
    }
    let mut draws = Vec::with_capacity(n_draws);
    let mut accepted = 0usize;
    for step in 0..burn_in + n_draws {
        let z = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(&mut rng)));
        let delta = factor * z;
        let proposal: Vec<f64> = current.iter().zip(delta.iter()).map(|(b, d)| b + d).collect();
        let log_u = rng.random::<f64>().ln();
        let lp = match log_target(&proposal) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        if log_u < lp - current_lp {
            current = proposal;
            current_lp = lp;
            if step >= burn_in {
                accepted += 1;
            }
        }
        if step >= burn_in {
            draws.push(current.clone());
        }
    }
    Ok(McmcOutput { draws, acceptance_rate: accepted as f64 / n_draws as f64 })
}

/// Lower Cholesky factor of `(2.38² / p) Î⁻¹ / n`.
pub(crate) fn proposal_factor(info: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let p = info.nrows();
    let inv = info
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("information matrix is not positive definite".into()))?
        .inverse();
    let cov = inv * (RW_SCALE * RW_SCALE / p as f64 / n as f64);
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Singular("proposal covariance is not positive definite".into()))?;
    let l = chol.l();
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("proposal covariance is not finite".into()));
    }
    Ok(l)
}

/// Metropolis chain on the marginal posterior of `β`, started at `β̂` with
/// proposal covariance `(2.38² / p) Î⁻¹ / n`.
pub fn sample_beta_posterior(
    spec: &BetaPosteriorSpec,
    fit: &FitResult,
    n_draws: usize,
    burn_in: usize,
    seed: u64,
) -> Result<McmcOutput> {
    let factor = proposal_factor(&fit.info_hat, spec.dataset().len())?;
    random_walk_metropolis(|b| spec.log_marginal_posterior(b), &fit.beta_hat, &factor, n_draws, burn_in, seed)
}

/// Batch-means standard error of the mean with `⌊√m⌋` batches.
pub fn batch_means_se(xs: &[f64]) -> f64 {
    let m = xs.len();
    let batches = (m as f64).sqrt().floor().max(1.0) as usize;
    let size = m / batches;
    if size == 0 || batches < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> =
        (0..batches).map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// `var(x) / se²`, with `se` from [`batch_means_se`].
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let se = batch_means_se(xs);
    (var / (se * se)).min(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_target() {
        let factor = DMatrix::from_element(1, 1, 2.4);
        let out =
            random_walk_metropolis(|b| Ok(-0.5 * b[0] * b[0]), &[0.0], &factor, 40_000, 1000, 5).unwrap();
        let xs: Vec<f64> = out.draws.iter().map(|d| d[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 4.0 * batch_means_se(&xs));
        assert!((var - 1.0).abs() < 0.05, "{var}");
        assert!(out.acceptance_rate > 0.3 && out.acceptance_rate < 0.6);
        let ess = effective_sample_size(&xs);
        assert!(ess > 2000.0 && ess <= xs.len() as f64);
    }

    #[test]
    fn seeded_chain_is_reproducible() {
        let factor = DMatrix::identity(2, 2);
        let target = |b: &[f64]| Ok(-0.5 * (b[0] * b[0] + 4.0 * b[1] * b[1]));
        let a = random_walk_metropolis(target, &[0.0, 0.0], &factor, 100, 10, 42).unwrap();
        let b = random_walk_metropolis(target, &[0.0, 0.0], &factor, 100, 10, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_information_is_rejected() {
        let info = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(proposal_factor(&info, 10), Err(Error::Singular(_))));
        assert!(random_walk_metropolis(|_| Ok(0.0), &[0.0], &DMatrix::identity(1, 1), 0, 0, 1).is_err());
    }
}
