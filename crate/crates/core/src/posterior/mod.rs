//! Posterior of `(β, A)` given right-censored data under an NII prior.
//!
//! Given `β`, the posterior of `A` is again an independent-increment process:
//! a fixed jump at each distinct event time `t_i` with density `h_ni` on
//! `[0, 1]`, plus a continuous part whose Lévy density is the prior one tilted
//! by `(1 - x)^{R(t)}`, `R(t) = Σ_{T_j >= t} exp(β'Z_j)`. The marginal
//! posterior of `β` is `exp(-ρ_n(β)) Π_i ∫ h_ni · π(β)`.

mod jump;
mod mcmc;
mod path;

pub use jump::{sample_jump, JumpDistribution, MomentMode};
pub use mcmc::{batch_means_se, effective_sample_size, random_walk_metropolis, sample_beta_posterior, McmcOutput};
pub use path::{sample_joint_posterior, sample_posterior_path, write_beta_draws_csv, write_paths_csv, JointDraws};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::priors::{ExponentProfile, NiiPriorSpec};
use crate::survival::{RiskSets, SurvivalDataset};

/// Log-density of the prior on the regression coefficients, up to a constant.
pub trait BetaPrior: fmt::Debug + Send + Sync {
    fn log_density(&self, beta: &[f64]) -> f64;

    fn describe(&self) -> String;
}

/// Independent mean-zero normal coordinates with common scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrior {
    pub scale: f64,
}

impl Default for GaussianPrior {
    fn default() -> Self {
        Self { scale: 10.0 }
    }
}

impl BetaPrior for GaussianPrior {
    fn log_density(&self, beta: &[f64]) -> f64 {
        -0.5 * beta.iter().map(|b| (b / self.scale).powi(2)).sum::<f64>()
    }

    fn describe(&self) -> String {
        format!("independent N(0, {}^2)", self.scale)
    }
}

/// Everything the posterior depends on: data, risk sets, the NII prior on
/// `A` and the prior on `β`.
#[derive(Debug, Clone)]
pub struct BetaPosteriorSpec {
    dataset: SurvivalDataset,
    risk: RiskSets,
    prior: NiiPriorSpec,
    beta_prior: Arc<dyn BetaPrior>,
    /// Distinct observed times, ascending.
    record_times: Vec<f64>,
    /// Position in the sorted order where records at `record_times[k]` start.
    record_start: Vec<usize>,
}

impl BetaPosteriorSpec {
    pub fn new(dataset: SurvivalDataset, prior: NiiPriorSpec) -> Result<Self> {
        if prior.tau() < dataset.tau() {
            return Err(Error::Config(format!(
                "prior horizon {} ends before the data horizon {}",
                prior.tau(),
                dataset.tau()
            )));
        }
        let risk = RiskSets::build(&dataset);
        let mut record_times = Vec::new();
        let mut record_start = Vec::new();
        for (pos, &j) in risk.sorted_order().iter().enumerate() {
            let t = dataset.time(j);
            if record_times.last() != Some(&t) {
                record_times.push(t);
                record_start.push(pos);
            }
        }
        Ok(Self {
            dataset,
            risk,
            prior,
            beta_prior: Arc::new(GaussianPrior::default()),
            record_times,
            record_start,
        })
    }

    pub fn with_beta_prior(mut self, beta_prior: Arc<dyn BetaPrior>) -> Self {
        self.beta_prior = beta_prior;
        self
    }

    pub fn dataset(&self) -> &SurvivalDataset {
        &self.dataset
    }

    pub fn risk(&self) -> &RiskSets {
        &self.risk
    }

    pub fn prior(&self) -> &NiiPriorSpec {
        &self.prior
    }

    pub fn beta_prior(&self) -> &dyn BetaPrior {
        self.beta_prior.as_ref()
    }

    fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.dataset.p() {
            return Err(Error::Domain(format!(
                "beta has dimension {}, expected {}",
                beta.len(),
                self.dataset.p()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("beta must be finite".into()));
        }
        Ok(())
    }

    /// Suffix sums of `exp(β'Z)` over the sorted order.
    fn suffix(&self, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w = self.dataset.risk_scores(beta);
        let suffix = self.risk.suffix_sums(&w);
        (w, suffix)
    }

    /// `R(t)` as a left-continuous step function with knots at `0` and the
    /// distinct observed times.
    pub(crate) fn exponent_profile(&self, suffix: &[f64]) -> ExponentProfile {
        let knots = std::iter::once(0.0).chain(self.record_times.iter().copied()).collect();
        let values = self.record_start.iter().map(|&s| suffix[s]).collect();
        ExponentProfile::new(knots, values)
    }

    /// `Σ_k ∫_{T_(k-1)}^{T_(k)} λ(t) φ_t(R_k) dt` over the intervals between
    /// consecutive distinct observed times, where `R_k` is the risk sum on
    /// the interval.
    fn integrate_over_risk<F: Fn(&crate::priors::JumpShape, f64) -> f64>(
        &self,
        suffix: &[f64],
        upto: f64,
        phi: F,
    ) -> f64 {
        let mut total = 0.0;
        let mut lo = 0.0;
        for (k, &t) in self.record_times.iter().enumerate() {
            if lo >= upto {
                break;
            }
            let hi = t.min(upto);
            if hi > lo {
                let r = suffix[self.record_start[k]];
                for piece in self.prior.pieces(lo, hi) {
                    total += piece.lambda * (piece.hi - piece.lo) * phi(&piece.shape, r);
                }
            }
            lo = lo.max(t);
        }
        if upto > lo {
            // nobody at risk: the prior mean measure
            for piece in self.prior.pieces(lo, upto) {
                total += piece.lambda * (piece.hi - piece.lo) * phi(&piece.shape, 0.0);
            }
        }
        total
    }

    /// `ρ_n(β) = Σ_i ∫_0^{T_i} ∫_0^1 (1 - (1 - x)^{e_i}) (1 - x)^{S_{>i}} g_t(x) λ(t) / x dx dt`.
    ///
    /// Summed over records in sorted order the inner integrals telescope to
    /// `∫_0^τ λ(t) ∫ (1 - (1 - x)^{R(t)}) g_t(x) / x dx dt`, which is what is
    /// evaluated, one closed-form Laplace exponent per interval.
    pub fn rho_n(&self, beta: &[f64]) -> Result<f64> {
        self.check_beta(beta)?;
        let (_, suffix) = self.suffix(beta);
        Ok(self.rho_from_suffix(&suffix))
    }

    fn rho_from_suffix(&self, suffix: &[f64]) -> f64 {
        let tau = self.record_times.last().copied().unwrap_or(0.0);
        self.integrate_over_risk(suffix, tau, |shape, r| shape.laplace_exponent(r, 0.0))
    }

    /// Death exponents and `S⁺` for the `i`-th distinct event time.
    fn jump_inputs(&self, i: usize, w: &[f64], suffix: &[f64]) -> (Vec<f64>, f64) {
        let deaths = self.risk.death_set(i);
        let exps = deaths.iter().map(|&j| w[j]).collect();
        let tail = suffix[self.risk.risk_start(i) + deaths.len()];
        (exps, tail)
    }

    /// `ln ∫_0^1 h̃_ni(x | β) dx` without the `λ(t_i)` factor.
    fn log_normalizer(&self, i: usize, w: &[f64], suffix: &[f64]) -> Result<f64> {
        let (exps, tail) = self.jump_inputs(i, w, suffix);
        let shape = self.prior.shape_at(self.risk.time(i));
        if exps.len() == 1 {
            let z = shape.laplace_exponent(exps[0], tail);
            if z > 0.0 && z.is_finite() {
                return Ok(z.ln());
            }
        }
        Ok(jump::normalizer(&shape, &exps, tail)?.ln())
    }

    /// `h_n(β) = −ρ_n(β) + Σ_i ln(n λ(t_i) ∫ h̃_ni)`.
    pub fn log_likelihood(&self, beta: &[f64]) -> Result<f64> {
        self.check_beta(beta)?;
        let (w, suffix) = self.suffix(beta);
        let n = self.dataset.len() as f64;
        let mut total = -self.rho_from_suffix(&suffix);
        for i in 0..self.risk.q() {
            let lambda = self.prior.lambda().eval(self.risk.time(i));
            total += (n * lambda).ln() + self.log_normalizer(i, &w, &suffix)?;
        }
        Ok(total)
    }

    /// `h_n(β) + ln π(β)`, the unnormalized log marginal posterior.
    pub fn log_marginal_posterior(&self, beta: &[f64]) -> Result<f64> {
        let lp = self.beta_prior.log_density(beta);
        if !lp.is_finite() {
            return Err(Error::Domain(format!("log prior density is {lp} at {beta:?}")));
        }
        Ok(self.log_likelihood(beta)? + lp)
    }

    /// Law of the fixed jump at the `i`-th distinct event time (0-based).
    pub fn jump_distribution(&self, i: usize, beta: &[f64]) -> Result<JumpDistribution> {
        self.check_event_index(i)?;
        self.check_beta(beta)?;
        let (w, suffix) = self.suffix(beta);
        let (exps, tail) = self.jump_inputs(i, &w, &suffix);
        JumpDistribution::new(i, self.prior.shape_at(self.risk.time(i)), exps, tail)
    }

    fn check_event_index(&self, i: usize) -> Result<()> {
        if i >= self.risk.q() {
            return Err(Error::Domain(format!(
                "event index {i} out of range for {} event times",
                self.risk.q()
            )));
        }
        Ok(())
    }

    /// `E x^k` under the `i`-th fixed-jump law: by quadrature (`Exact`) or by
    /// the gamma-ratio `k! Γ(R + 1) / Γ(R + k + 1)` with `R` the full risk
    /// sum at `t_i` (`Approx`).
    pub fn jump_moment(&self, i: usize, beta: &[f64], k: i32, mode: MomentMode) -> Result<f64> {
        if k <= 0 {
            return Err(Error::Domain(format!("moment order must be positive, got {k}")));
        }
        match mode {
            MomentMode::Exact => self.jump_distribution(i, beta)?.moment(k),
            MomentMode::Approx => {
                self.check_event_index(i)?;
                self.check_beta(beta)?;
                let (_, suffix) = self.suffix(beta);
                Ok(jump::gamma_ratio_moment(suffix[self.risk.risk_start(i)], k))
            }
        }
    }

    /// Mean of the continuous part of `A` on `[0, t]` given `β`:
    /// `∫_0^t λ(s) ∫ (1 - x)^{R(s)} g_s(x) dx ds`.
    pub fn continuous_mean(&self, beta: &[f64], t: f64) -> Result<f64> {
        self.check_beta(beta)?;
        let (_, suffix) = self.suffix(beta);
        Ok(self.integrate_over_risk(&suffix, t, |shape, r| shape.laplace_exponent(1.0, r)))
    }

    /// `E[A(t) | β, data]` at each grid time, from closed-form jump means
    /// (quadrature for tied deaths) and the continuous-part mean.
    pub fn posterior_mean_a(&self, beta: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
        self.check_beta(beta)?;
        let (w, suffix) = self.suffix(beta);
        let mut jump_means = Vec::with_capacity(self.risk.q());
        for i in 0..self.risk.q() {
            let (exps, tail) = self.jump_inputs(i, &w, &suffix);
            let shape = self.prior.shape_at(self.risk.time(i));
            jump_means.push(jump::mean(&shape, &exps, tail)?);
        }
        let mut cumulative = Vec::with_capacity(jump_means.len());
        let mut acc = 0.0;
        for m in jump_means {
            acc += m;
            cumulative.push(acc);
        }
        Ok(grid
            .iter()
            .map(|&t| {
                let k = self.risk.distinct_times().partition_point(|&s| s <= t);
                let jumps = if k == 0 { 0.0 } else { cumulative[k - 1] };
                jumps + self.integrate_over_risk(&suffix, t, |shape, r| shape.laplace_exponent(1.0, r))
            })
            .collect())
    }
}
