use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BetaPosteriorSpec;
use crate::error::{Error, Result};
use crate::priors::{ln_one_minus, one_minus_pow, JumpShape, NiiPriorSpec};
use crate::quadrature::{integrate, integrate_unit, unit_integrand, unit_substitution, Tolerance};

/// Cells of the tabulated CDF, uniform in the substitution variable of
/// [`integrate_unit`].
const CDF_CELLS: usize = 512;
const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMode {
    Exact,
    Approx,
}

/// `h̃(x) = Π_{j ∈ D} (1 - (1 - x)^{e_j}) (1 - x)^{S⁺} g(x) / x`.
fn unnormalized(shape: &JumpShape, exps: &[f64], tail: f64, x: f64, omx: f64) -> f64 {
    let deaths: f64 = exps.iter().map(|&e| one_minus_pow(x, omx, e)).product();
    deaths * (tail * ln_one_minus(x, omx)).exp() * shape.g_over_x(x, omx)
}

fn layer_scale(tail: f64) -> f64 {
    tail + 1.0
}

pub(crate) fn normalizer(shape: &JumpShape, exps: &[f64], tail: f64) -> Result<f64> {
    let z = integrate_unit(
        |x, omx| unnormalized(shape, exps, tail, x, omx),
        layer_scale(tail),
        Tolerance::new(0.0, REL_TOL),
    )?
    .value;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Numerical(format!(
            "fixed-jump normalizer {z} is not positive and finite (risk sum after deaths {tail})"
        )));
    }
    Ok(z)
}

/// Mean of the normalized `h̃`. A single death reduces to Laplace exponents:
/// `E x = 1 - K(e, S⁺ + 1) / K(e, S⁺)`, using `x = 1 - (1 - x)`.
pub(crate) fn mean(shape: &JumpShape, exps: &[f64], tail: f64) -> Result<f64> {
    if let [e] = exps {
        let z = shape.laplace_exponent(*e, tail);
        if z > 0.0 && z.is_finite() {
            return Ok(1.0 - shape.laplace_exponent(*e, tail + 1.0) / z);
        }
    }
    let z = normalizer(shape, exps, tail)?;
    let first = integrate_unit(
        |x, omx| x * unnormalized(shape, exps, tail, x, omx),
        layer_scale(tail),
        Tolerance::new(0.0, REL_TOL),
    )?
    .value;
    Ok(first / z)
}

/// `k! Γ(R + 1) / Γ(R + k + 1) = Π_{m=1}^k m / (R + m)`.
pub(crate) fn gamma_ratio_moment(r: f64, k: i32) -> f64 {
    (1..=k).map(|m| m as f64 / (r + m as f64)).product()
}

/// Law of a fixed posterior jump, with its normalizer and a CDF tabulated on
/// a grid uniform in the quadrature substitution variable `s`.
#[derive(Debug, Clone)]
pub struct JumpDistribution {
    index: usize,
    shape: JumpShape,
    exponents: Vec<f64>,
    tail: f64,
    normalizer: f64,
    cdf: Vec<f64>,
}

impl JumpDistribution {
    pub(crate) fn new(index: usize, shape: JumpShape, exponents: Vec<f64>, tail: f64) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::Domain("a fixed jump needs at least one death".into()));
        }
        let normalizer = normalizer(&shape, &exponents, tail)?;
        let scale = layer_scale(tail);
        let tol = Tolerance::new(1e-3 * REL_TOL * normalizer, REL_TOL);
        let mut cdf = Vec::with_capacity(CDF_CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        {
            let f = |x: f64, omx: f64| unnormalized(&shape, &exponents, tail, x, omx);
            let integrand = unit_integrand(&f, scale);
            for k in 0..CDF_CELLS {
                let a = k as f64 / CDF_CELLS as f64;
                let b = (k + 1) as f64 / CDF_CELLS as f64;
                acc += integrate(&integrand, a, b, tol)?.value;
                cdf.push(acc);
            }
        }
        for v in &mut cdf {
            *v /= acc;
        }
        Ok(Self { index, shape, exponents, tail, normalizer, cdf })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// `∫_0^1 h̃(x) dx`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Exponents `exp(β'Z_j)` of the deaths at this time.
    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// `Σ_{j ∈ R⁺} exp(β'Z_j)`.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn unnormalized_density(&self, x: f64) -> f64 {
        if !(x > 0.0 && x <= 1.0) {
            return 0.0;
        }
        unnormalized(&self.shape, &self.exponents, self.tail, x, 1.0 - x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.unnormalized_density(x) / self.normalizer
    }

    /// `∫_0^1 pdf` recomputed with an unadapted substitution, as a check on
    /// the normalizer.
    pub fn total_mass(&self) -> Result<f64> {
        let mass = integrate_unit(
            |x, omx| unnormalized(&self.shape, &self.exponents, self.tail, x, omx),
            1.0,
            Tolerance::new(0.0, REL_TOL),
        )?;
        Ok(mass.value / self.normalizer)
    }

    pub fn moment(&self, k: i32) -> Result<f64> {
        if k <= 0 {
            return Err(Error::Domain(format!("moment order must be positive, got {k}")));
        }
        let m = integrate_unit(
            |x, omx| x.powi(k) * unnormalized(&self.shape, &self.exponents, self.tail, x, omx),
            layer_scale(self.tail),
            Tolerance::new(0.0, REL_TOL),
        )?;
        Ok(m.value / self.normalizer)
    }

    fn s_of_x(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return 1.0;
        }
        let v = -(-x).ln_1p() * layer_scale(self.tail);
        v / (1.0 + v)
    }

    /// Tabulated CDF, linear in `s` within each cell.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let pos = self.s_of_x(x) * CDF_CELLS as f64;
        let k = (pos.floor() as usize).min(CDF_CELLS - 1);
        let frac = pos - k as f64;
        (self.cdf[k] + frac * (self.cdf[k + 1] - self.cdf[k])).min(1.0)
    }

    /// Inverse of [`Self::cdf`].
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, CDF_CELLS) - 1;
        let width = self.cdf[k + 1] - self.cdf[k];
        let frac = if width > 0.0 { ((u - self.cdf[k]) / width).clamp(0.0, 1.0) } else { 0.0 };
        let s = (k as f64 + frac) / CDF_CELLS as f64;
        unit_substitution(s, layer_scale(self.tail)).map_or(1.0, |(x, _, _)| x)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random())
    }
}

/// Inverse-CDF draw of the fixed jump at the `i`-th distinct event time.
pub fn sample_jump(spec: &BetaPosteriorSpec, i: usize, beta: &[f64], seed: u64) -> Result<f64> {
    let dist = spec.jump_distribution(i, beta)?;
    Ok(dist.sample(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Exact rejection draw from `h̃`, used when many jumps are needed at
/// different `β`.
///
/// The proposal is Beta(1, S⁺ + ς). The acceptance ratio is
/// `[Π_j (1 - (1 - x)^{e_j}) / (m x)] · [g(x) (1 - x)^{1 - ς} / g*]`, where
/// `m = min_j max(e_j, 1)`. Both factors are at most 1 because
/// `1 - (1 - x)^e <= max(e, 1) x` and `g(x) <= g* (1 - x)^{ς - 1}`.
pub(crate) fn draw_fixed_jump<R: Rng>(
    prior: &NiiPriorSpec,
    shape: &JumpShape,
    exps: &[f64],
    tail: f64,
    rng: &mut R,
) -> f64 {
    let varsigma = prior.varsigma();
    let g_star = prior.g_star();
    let a = tail + varsigma;
    let m = exps.iter().map(|e| e.max(1.0)).fold(f64::INFINITY, f64::min);
    loop {
        let u: f64 = rng.random();
        let log_omx = (1.0 - u).ln() / a;
        let x = -log_omx.exp_m1();
        if x <= 0.0 {
            continue;
        }
        let omx = log_omx.exp();
        let deaths: f64 = exps.iter().map(|&e| one_minus_pow(x, omx, e)).product();
        let ratio = deaths / (m * x) * shape.g(x, omx) * omx.powf(1.0 - varsigma) / g_star;
        if rng.random::<f64>() < ratio {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::beta::beta;
    use statrs::function::gamma::digamma;

    #[test]
    fn unit_beta_prior_gives_beta_one_r_plus_one() {
        let shape = JumpShape::Beta { c: 1.0 };
        for r in [0.0, 1.0, 7.0, 150.0, 2000.0] {
            let d = JumpDistribution::new(0, shape, vec![1.0], r).unwrap();
            assert_relative_eq!(d.normalizer(), 1.0 / (r + 1.0), max_relative = 1e-10);
            for x in [1e-6, 0.01, 0.3, 0.9] {
                assert_relative_eq!(d.pdf(x), (r + 1.0) * (1.0 - x).powf(r), max_relative = 1e-9);
            }
            assert_relative_eq!(d.moment(1).unwrap(), 1.0 / (r + 2.0), max_relative = 1e-9);
            assert_relative_eq!(gamma_ratio_moment(r + 1.0, 1), 1.0 / (r + 2.0), max_relative = 1e-14);
            assert!((d.total_mass().unwrap() - 1.0).abs() < 1e-8);
            let cdf_at = |x: f64| 1.0 - (1.0 - x).powf(r + 1.0);
            for x in [0.001, 0.05, 0.5] {
                assert!((d.cdf(x) - cdf_at(x)).abs() < 1e-5, "r={r} x={x}");
            }
        }
    }

    #[test]
    fn gamma_ratio_examples() {
        assert_relative_eq!(gamma_ratio_moment(5.0, 1), 1.0 / 6.0, epsilon = 1e-16);
        assert_relative_eq!(gamma_ratio_moment(5.0, 2), 1.0 / 21.0, epsilon = 1e-16);
    }

    #[test]
    fn beta_prior_single_death_moments_in_closed_form() {
        // E x^k = [B(k, a) - B(k, a + e)] / [ψ(a + e) - ψ(a)], a = S⁺ + c
        for (c, e, tail) in [(1.0, 0.4, 12.0), (2.5, 1.7, 3.0), (0.6, 3.0, 40.0)] {
            let d = JumpDistribution::new(0, JumpShape::Beta { c }, vec![e], tail).unwrap();
            let a = tail + c;
            let z = digamma(a + e) - digamma(a);
            for k in 1..=3 {
                let expect = (beta(k as f64, a) - beta(k as f64, a + e)) / z;
                assert_relative_eq!(d.moment(k).unwrap(), expect, max_relative = 1e-8);
            }
            let fast = mean(&JumpShape::Beta { c }, &[e], tail).unwrap();
            assert_relative_eq!(fast, d.moment(1).unwrap(), max_relative = 1e-10);
        }
    }

    #[test]
    fn two_deaths_match_pointwise_product() {
        let r = 9.0;
        let d = JumpDistribution::new(0, JumpShape::Beta { c: 1.0 }, vec![1.0, 1.0], r).unwrap();
        // x^2 (1 - x)^r / x = x (1 - x)^r, normalizer B(2, r + 1)
        let z = beta(2.0, r + 1.0);
        assert_relative_eq!(d.normalizer(), z, max_relative = 1e-10);
        for k in 1..=1000 {
            let x = k as f64 / 1001.0;
            let direct = (1.0 - (1.0 - x)) * (1.0 - (1.0 - x)) * (1.0 - x).powf(r) / x;
            assert_relative_eq!(d.unnormalized_density(x), direct, max_relative = 1e-12, epsilon = 1e-300);
        }
        assert!((d.total_mass().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = JumpDistribution::new(0, JumpShape::Gamma { c: 1.0, c_tilde: 1.0 / 2f64.ln() }, vec![0.7], 25.0)
            .unwrap();
        for u in [0.0, 0.01, 0.25, 0.5, 0.9, 0.999] {
            let x = d.quantile(u);
            assert!((0.0..=1.0).contains(&x));
            assert!((d.cdf(x) - u).abs() < 1e-9, "u={u}");
        }
    }

    #[test]
    fn rejection_matches_quadrature_mean() {
        use crate::priors::gamma_process_prior;
        use crate::step::StepFunction;
        let prior = gamma_process_prior(StepFunction::constant(1.0), StepFunction::constant(1.0), 1.0).unwrap();
        let shape = prior.shape_at(0.5);
        let exps = [0.3, 2.0];
        let tail = 6.0;
        let exact = mean(&shape, &exps, tail).unwrap();
        let second = {
            let d = JumpDistribution::new(0, shape, exps.to_vec(), tail).unwrap();
            d.moment(2).unwrap()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 20_000;
        let draws: Vec<f64> = (0..m).map(|_| draw_fixed_jump(&prior, &shape, &exps, tail, &mut rng)).collect();
        let avg = draws.iter().sum::<f64>() / m as f64;
        let se = ((second - exact * exact) / m as f64).sqrt();
        assert!((avg - exact).abs() < 4.0 * se, "{avg} vs {exact}");
    }
}
