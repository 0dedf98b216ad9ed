use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequentist::{fit_mle, FitOptions};
use crate::posterior::{sample_beta_posterior, BetaPosteriorSpec};
use crate::priors::PriorConfig;
use crate::survival::{simulate_ph_data, RiskSets, TrueModelSpec};

/// Minimum number of replications for a coverage run.
pub const MIN_REPLICATIONS: usize = 50;

/// Length of the `β` chain run in each replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub draws: usize,
    pub burn_in: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { draws: 4000, burn_in: 500 }
    }
}

/// Frequentist coverage of equal-tailed credible intervals for `β_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub level: f64,
    /// Replications requested.
    pub replications: usize,
    /// Replications skipped because the likelihood was monotone.
    pub skipped: usize,
    /// Per-coordinate fraction of used replications whose interval covers `β_0`.
    pub rate: Vec<f64>,
    /// Per-coordinate mean interval width.
    pub width: Vec<f64>,
    /// Per-coordinate mean of `β̂` over used replications.
    pub mean_beta_hat: Vec<f64>,
    /// Monte-Carlo standard error of `mean_beta_hat`.
    pub beta_hat_se: Vec<f64>,
}

/// Seed of replication `rep`: the first output of ChaCha8 seeded with `seed`
/// on stream `rep`.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng.next_u64()
}

/// Type-7 sample quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let k = pos.floor() as usize;
    let f = pos - k as f64;
    match sorted.get(k + 1) {
        Some(next) => sorted[k] + f * (next - sorted[k]),
        None => sorted[k],
    }
}

struct Replication {
    beta_hat: Vec<f64>,
    covered: Vec<bool>,
    width: Vec<f64>,
}

fn replicate(
    truth: &TrueModelSpec,
    prior: &PriorConfig,
    n: usize,
    level: f64,
    chain: ChainConfig,
    seed: u64,
) -> Result<Option<Replication>> {
    let ds = simulate_ph_data(truth, n, seed)?;
    let rs = RiskSets::build(&ds);
    let fit = match fit_mle(&ds, &rs, &FitOptions::default()) {
        Ok(f) => f,
        Err(Error::MonotoneLikelihood { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let prior = prior.build(ds.tau())?;
    let spec = BetaPosteriorSpec::new(ds, prior)?;
    let out = sample_beta_posterior(&spec, &fit, chain.draws, chain.burn_in, seed.wrapping_add(1))?;
    let alpha = 0.5 * (1.0 - level);
    let mut covered = Vec::new();
    let mut width = Vec::new();
    for (k, &b0) in truth.beta0.iter().enumerate() {
        let mut coord: Vec<f64> = out.draws.iter().map(|d| d[k]).collect();
        coord.sort_by(f64::total_cmp);
        let (lo, hi) = (quantile(&coord, alpha), quantile(&coord, 1.0 - alpha));
        covered.push(lo <= b0 && b0 <= hi);
        width.push(hi - lo);
    }
    Ok(Some(Replication { beta_hat: fit.beta_hat, covered, width }))
}

/// Simulates `replications` datasets of size `n`, runs a `β` chain on each
/// and records whether the equal-tailed `level` credible interval covers the
/// true coefficient. Replications run in parallel; replication `r` uses
/// [`replication_seed`]`(seed, r)` for the data and that seed plus one for
/// the chain.
pub fn coverage_experiment(
    truth: &TrueModelSpec,
    prior: &PriorConfig,
    n: usize,
    replications: usize,
    level: f64,
    chain: ChainConfig,
    seed: u64,
) -> Result<CoverageReport> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::Config(format!(
            "coverage needs at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("credible level must lie in (0, 1), got {level}")));
    }
    truth.validate()?;
    let results = (0..replications)
        .into_par_iter()
        .map(|r| replicate(truth, prior, n, level, chain, replication_seed(seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<Replication> = results.into_iter().flatten().collect();
    let skipped = replications - used.len();
    if used.is_empty() {
        return Err(Error::Numerical("every replication had a monotone likelihood".into()));
    }
    let m = used.len() as f64;
    let p = truth.p();
    let rate = (0..p).map(|k| used.iter().filter(|r| r.covered[k]).count() as f64 / m).collect();
    let width = (0..p).map(|k| used.iter().map(|r| r.width[k]).sum::<f64>() / m).collect();
    let mean_beta_hat: Vec<f64> = (0..p).map(|k| used.iter().map(|r| r.beta_hat[k]).sum::<f64>() / m).collect();
    let beta_hat_se = (0..p)
        .map(|k| {
            let var = used.iter().map(|r| (r.beta_hat[k] - mean_beta_hat[k]).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            (var / m).sqrt()
        })
        .collect();
    Ok(CoverageReport { level, replications, skipped, rate, width, mean_beta_hat, beta_hat_se })
}
