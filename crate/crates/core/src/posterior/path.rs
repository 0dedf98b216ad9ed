use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::jump::draw_fixed_jump;
use super::mcmc::sample_beta_posterior;
use super::BetaPosteriorSpec;
use crate::error::{Error, Result};
use crate::frequentist::FitResult;
use crate::path::HazardPath;
use crate::priors::sample_levy_path;

/// Draws `A` from its posterior given `β`: a fixed jump at each distinct event
/// time plus the tilted continuous part, with jumps below `epsilon` replaced
/// by their mean.
pub fn sample_posterior_path(spec: &BetaPosteriorSpec, beta: &[f64], epsilon: f64, seed: u64) -> Result<HazardPath> {
    draw_posterior_path(spec, beta, epsilon, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn draw_posterior_path<R: Rng>(
    spec: &BetaPosteriorSpec,
    beta: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<HazardPath> {
    spec.check_beta(beta)?;
    let (w, suffix) = spec.suffix(beta);
    let risk = spec.risk();
    let mut times = Vec::with_capacity(risk.q());
    let mut sizes = Vec::with_capacity(risk.q());
    for i in 0..risk.q() {
        let (exps, tail) = spec.jump_inputs(i, &w, &suffix);
        let t = risk.time(i);
        let shape = spec.prior().shape_at(t);
        times.push(t);
        sizes.push(draw_fixed_jump(spec.prior(), &shape, &exps, tail, rng));
    }
    let profile = spec.exponent_profile(&suffix);
    let (ct, cs, knots, values) = sample_levy_path(spec.prior(), &profile, spec.prior().tau(), epsilon, rng)?;
    times.extend(ct);
    sizes.extend(cs);
    HazardPath::with_drift(times, sizes, knots, values)
}

/// Joint posterior draws of `(β, A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDraws {
    pub betas: Vec<Vec<f64>>,
    pub paths: Vec<HazardPath>,
    pub acceptance_rate: f64,
}

/// Runs the `β` chain for `draws * thin` steps after burn-in, keeps every
/// `thin`-th state and draws one path per kept state.
///
/// The chain uses `seed` directly; path `k` uses ChaCha stream `k + 1` of the
/// same seed, so paths can be drawn in parallel and the result does not
/// depend on the thread count.
pub fn sample_joint_posterior(
    spec: &BetaPosteriorSpec,
    fit: &FitResult,
    draws: usize,
    burn_in: usize,
    thin: usize,
    epsilon: f64,
    seed: u64,
) -> Result<JointDraws> {
    if thin == 0 {
        return Err(Error::Domain("thinning interval must be positive".into()));
    }
    let chain = sample_beta_posterior(spec, fit, draws * thin, burn_in, seed)?;
    let betas: Vec<Vec<f64>> = chain.draws.into_iter().skip(thin - 1).step_by(thin).collect();
    let paths = betas
        .par_iter()
        .enumerate()
        .map(|(k, beta)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            draw_posterior_path(spec, beta, epsilon, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JointDraws { betas, paths, acceptance_rate: chain.acceptance_rate })
}

/// CSV with header `draw,beta_1,...,beta_p`.
pub fn write_beta_draws_csv(draws: &[Vec<f64>]) -> String {
    let p = draws.first().map_or(0, Vec::len);
    let mut out = String::from("draw");
    for k in 1..=p {
        let _ = write!(out, ",beta_{k}");
    }
    out.push('\n');
    for (d, beta) in draws.iter().enumerate() {
        let _ = write!(out, "{d}");
        for b in beta {
            let _ = write!(out, ",{b}");
        }
        out.push('\n');
    }
    out
}

/// Long-format CSV `draw,t,A` with one row per grid time and path.
pub fn write_paths_csv(paths: &[HazardPath], grid: &[f64]) -> String {
    let mut out = String::from("draw,t,A\n");
    for (d, path) in paths.iter().enumerate() {
        for &t in grid {
            let _ = writeln!(out, "{d},{t},{}", path.eval(t));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::beta_process_prior;
    use crate::step::StepFunction;
    use crate::survival::SurvivalDataset;

    fn spec() -> BetaPosteriorSpec {
        let ds = SurvivalDataset::new(
            vec![0.5, 1.2, 0.8, 2.0, 1.5, 0.3],
            vec![true, false, true, true, false, true],
            vec![0.4, -1.0, 1.2, 0.0, 0.7, -0.3],
            1,
            Some(2.5),
        )
        .unwrap();
        let prior = beta_process_prior(StepFunction::constant(1.0), StepFunction::constant(1.0), 2.5).unwrap();
        BetaPosteriorSpec::new(ds, prior).unwrap()
    }

    #[test]
    fn paths_are_valid_and_reproducible() {
        let s = spec();
        let a = sample_posterior_path(&s, &[0.2], 1e-4, 11).unwrap();
        let b = sample_posterior_path(&s, &[0.2], 1e-4, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.is_valid());
        for t in s.risk().distinct_times() {
            assert!(a.jump_times().contains(t));
        }
    }

    #[test]
    fn csv_layouts() {
        let csv = write_beta_draws_csv(&[vec![0.5, -1.0], vec![0.25, 2.0]]);
        assert_eq!(csv, "draw,beta_1,beta_2\n0,0.5,-1\n1,0.25,2\n");
        let path = HazardPath::from_jumps(vec![1.0], vec![0.5]).unwrap();
        assert_eq!(write_paths_csv(&[path], &[0.5, 1.0]), "draw,t,A\n0,0.5,0\n0,1,0.5\n");
    }
}
