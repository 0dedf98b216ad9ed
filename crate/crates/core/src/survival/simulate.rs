use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{dot, SurvivalDataset};
use crate::error::{Error, Result};
use crate::step::StepFunction;

/// Baseline hazard of the covariate-free survival law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaselineHazard {
    Exponential { rate: f64 },
    /// Cumulative hazard `(t / scale)^shape`.
    Weibull { shape: f64, scale: f64 },
    PiecewiseConstant { rates: StepFunction },
}

impl BaselineHazard {
    fn check(&self) -> Result<()> {
        let ok = match self {
            BaselineHazard::Exponential { rate } => rate.is_finite() && *rate > 0.0,
            BaselineHazard::Weibull { shape, scale } => {
                shape.is_finite() && *shape > 0.0 && scale.is_finite() && *scale > 0.0
            }
            BaselineHazard::PiecewiseConstant { rates } => {
                rates.values().iter().all(|r| *r >= 0.0) && rates.max() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("baseline hazard {self:?} is not a valid integrable hazard")))
        }
    }

    /// `A_0(t)`.
    pub fn cumulative(&self, t: f64) -> f64 {
        match self {
            BaselineHazard::Exponential { rate } => rate * t,
            BaselineHazard::Weibull { shape, scale } => (t / scale).powf(*shape),
            BaselineHazard::PiecewiseConstant { rates } => rates.integral(t),
        }
    }

    /// `A_0^{-1}(e)`; infinite when the hazard never accumulates `e`.
    pub fn inverse_cumulative(&self, e: f64) -> f64 {
        match self {
            BaselineHazard::Exponential { rate } => e / rate,
            BaselineHazard::Weibull { shape, scale } => scale * e.powf(1.0 / shape),
            BaselineHazard::PiecewiseConstant { rates } => {
                let mut acc = 0.0;
                let mut left = 0.0;
                for (k, &r) in rates.values().iter().enumerate() {
                    let right = rates.breaks().get(k).copied().unwrap_or(f64::INFINITY);
                    let mass = r * (right - left);
                    if r > 0.0 && acc + mass >= e {
                        return left + (e - acc) / r;
                    }
                    acc += mass;
                    left = right;
                }
                f64::INFINITY
            }
        }
    }

    fn eventually_infinite(&self) -> bool {
        match self {
            BaselineHazard::PiecewiseConstant { rates } => *rates.values().last().unwrap() > 0.0,
            _ => true,
        }
    }
}

/// Censoring-time law; an administrative horizon is configured separately
/// through [`TrueModelSpec::tau`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CensoringLaw {
    None,
    /// `C ~ Uniform(0, upper)`.
    Uniform { upper: f64 },
    Exponential { rate: f64 },
}

impl CensoringLaw {
    fn check(&self) -> Result<()> {
        let ok = match self {
            CensoringLaw::None => true,
            CensoringLaw::Uniform { upper } => upper.is_finite() && *upper > 0.0,
            CensoringLaw::Exponential { rate } => rate.is_finite() && *rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid censoring law {self:?}")))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            CensoringLaw::None => f64::INFINITY,
            CensoringLaw::Uniform { upper } => upper * rng.random::<f64>(),
            CensoringLaw::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
        }
    }
}

/// Bounded covariate law for one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CovariateLaw {
    Uniform { low: f64, high: f64 },
    Bernoulli { prob: f64 },
}

impl CovariateLaw {
    fn check(&self) -> Result<()> {
        let ok = match self {
            CovariateLaw::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            CovariateLaw::Bernoulli { prob } => *prob > 0.0 && *prob < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("covariate law {self:?} is degenerate or unbounded")))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            CovariateLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            CovariateLaw::Bernoulli { prob } => f64::from(u8::from(rng.random::<f64>() < *prob)),
        }
    }
}

/// Data-generating proportional-hazards model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueModelSpec {
    pub beta0: Vec<f64>,
    pub baseline: BaselineHazard,
    pub censoring: CensoringLaw,
    pub covariates: Vec<CovariateLaw>,
    /// Administrative censoring horizon; also becomes the dataset's `tau`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl TrueModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.beta0.len() != self.covariates.len() {
            return Err(Error::Config(format!(
                "beta0 has dimension {} but {} covariate laws are given",
                self.beta0.len(),
                self.covariates.len()
            )));
        }
        if self.beta0.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("beta0 must be finite".into()));
        }
        self.baseline.check()?;
        self.censoring.check()?;
        for law in &self.covariates {
            law.check()?;
        }
        if let Some(tau) = self.tau {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::Config(format!("tau must be positive and finite, got {tau}")));
            }
        }
        if self.tau.is_none()
            && self.censoring == CensoringLaw::None
            && !self.baseline.eventually_infinite()
        {
            return Err(Error::Config(
                "baseline hazard vanishes in the tail and nothing censors: survival times may be infinite"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.beta0.len()
    }
}

/// Draws `n` records from the proportional-hazards model in `spec`.
///
/// `X_i = A_0^{-1}(E_i / exp(beta0' Z_i))` with `E_i` standard exponential,
/// `T_i = min(X_i, C_i)` and `delta_i = 1{X_i <= C_i}`. Draws per record are
/// taken in the order covariates, event time, censoring time from a ChaCha8
/// stream seeded with `seed`.
pub fn simulate_ph_data(spec: &TrueModelSpec, n: usize, seed: u64) -> Result<SurvivalDataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let p = spec.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    let mut covariates = Vec::with_capacity(n * p);
    let horizon = spec.tau.unwrap_or(f64::INFINITY);
    for _ in 0..n {
        let z: Vec<f64> = spec.covariates.iter().map(|law| law.sample(&mut rng)).collect();
        let e: f64 = Exp1.sample(&mut rng);
        let x = spec.baseline.inverse_cumulative(e / dot(&z, &spec.beta0).exp());
        let c = spec.censoring.sample(&mut rng).min(horizon);
        let (t, d) = if x <= c { (x, true) } else { (c, false) };
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Numerical(format!("simulated time {t} is not positive and finite")));
        }
        times.push(t);
        status.push(d);
        covariates.extend(z);
    }
    SurvivalDataset::new(times, status, covariates, p, spec.tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> TrueModelSpec {
        TrueModelSpec {
            beta0: vec![0.5, -0.2],
            baseline: BaselineHazard::Weibull { shape: 1.5, scale: 2.0 },
            censoring: CensoringLaw::Exponential { rate: 0.2 },
            covariates: vec![
                CovariateLaw::Uniform { low: -1.0, high: 1.0 },
                CovariateLaw::Bernoulli { prob: 0.4 },
            ],
            tau: Some(5.0),
        }
    }

    #[test]
    fn same_seed_same_data() {
        let a = simulate_ph_data(&spec(), 200, 11).unwrap();
        let b = simulate_ph_data(&spec(), 200, 11).unwrap();
        let c = simulate_ph_data(&spec(), 200, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.tau(), 5.0);
        assert!(a.times().iter().all(|&t| t <= 5.0));
    }

    #[test]
    fn inverse_cumulative_inverts() {
        let pw = BaselineHazard::PiecewiseConstant {
            rates: StepFunction::new(vec![1.0, 2.0], vec![0.5, 0.0, 2.0]).unwrap(),
        };
        for h in [BaselineHazard::Exponential { rate: 2.0 }, spec().baseline, pw] {
            for e in [0.01, 0.3, 1.0, 4.0] {
                let t = h.inverse_cumulative(e);
                assert!((h.cumulative(t) - e).abs() < 1e-12, "{h:?} {e}");
            }
        }
    }

    #[test]
    fn invalid_configurations() {
        let mut s = spec();
        s.baseline = BaselineHazard::Exponential { rate: f64::INFINITY };
        assert!(matches!(simulate_ph_data(&s, 10, 1), Err(Error::Config(_))));
        let mut s = spec();
        s.beta0.pop();
        assert!(s.validate().is_err());
        let mut s = spec();
        s.covariates[1] = CovariateLaw::Bernoulli { prob: 1.0 };
        assert!(s.validate().is_err());
        let s = TrueModelSpec {
            beta0: vec![0.0],
            baseline: BaselineHazard::PiecewiseConstant {
                rates: StepFunction::new(vec![1.0], vec![1.0, 0.0]).unwrap(),
            },
            censoring: CensoringLaw::None,
            covariates: vec![CovariateLaw::Uniform { low: 0.0, high: 1.0 }],
            tau: None,
        };
        assert!(s.validate().is_err());
        assert!(simulate_ph_data(&spec(), 0, 1).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = spec();
        let text = serde_json::to_string(&s).unwrap();
        let back: TrueModelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
