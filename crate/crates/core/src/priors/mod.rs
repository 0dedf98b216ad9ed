//! NII process priors on the baseline cumulative hazard.
//!
//! A prior is given by a Lévy measure with density `g_t(x) λ(t) / x` on
//! `[0, τ] × (0, 1]`, where each `g_t` is a probability density on `[0, 1]`.
//! Concentrations `c(t)` and rates `λ(t)` are piecewise constant, so `g_t`
//! is constant in `t` on each piece and is described by a [`JumpShape`].

mod conditions;
mod sampling;

pub use conditions::{check_conditions, ConditionReport};
pub use sampling::sample_prior_path;
pub(crate) use sampling::{sample_levy_path, ExponentProfile};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_10, integrate_unit, Tolerance};
use crate::step::StepFunction;

pub(crate) const QUAD_TOL: Tolerance = Tolerance::new(1e-12, 1e-12);

/// Default truncation level for small jumps.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// `ln(1 - x)` evaluated from whichever of `x`, `1 - x` is more accurate.
#[inline]
pub(crate) fn ln_one_minus(x: f64, omx: f64) -> f64 {
    if x < 0.5 {
        (-x).ln_1p()
    } else {
        omx.ln()
    }
}

/// `1 - (1 - x)^e` without cancellation.
#[inline]
pub(crate) fn one_minus_pow(x: f64, omx: f64, e: f64) -> f64 {
    -(e * ln_one_minus(x, omx)).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorFamily {
    Beta,
    Gamma,
}

/// Jump-size density `g` on a time piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpShape {
    /// `g(x) = c (1 - x)^{c - 1}`.
    Beta { c: f64 },
    /// `g(x) = c̃ x / (-ln(1 - x)) (1 - x)^{c - 1}`.
    Gamma { c: f64, c_tilde: f64 },
}

impl JumpShape {
    /// `g(x)`; `omx` must equal `1 - x`.
    pub fn g(&self, x: f64, omx: f64) -> f64 {
        match *self {
            JumpShape::Beta { c } => c * omx.powf(c - 1.0),
            JumpShape::Gamma { c, c_tilde } => {
                let ratio = if x == 0.0 { 1.0 } else { x / -ln_one_minus(x, omx) };
                c_tilde * ratio * omx.powf(c - 1.0)
            }
        }
    }

    /// `g(x) / x` for `x > 0`.
    pub fn g_over_x(&self, x: f64, omx: f64) -> f64 {
        match *self {
            JumpShape::Beta { c } => c * omx.powf(c - 1.0) / x,
            JumpShape::Gamma { c, c_tilde } => c_tilde * omx.powf(c - 1.0) / -ln_one_minus(x, omx),
        }
    }

    /// `k = g(0+)`.
    pub fn boundary_value(&self) -> f64 {
        match *self {
            JumpShape::Beta { c } => c,
            JumpShape::Gamma { c_tilde, .. } => c_tilde,
        }
    }

    /// `∫_0^1 (1 - (1 - x)^e) (1 - x)^s g(x) / x dx` in closed form.
    ///
    /// Beta: `c (ψ(s + c + e) - ψ(s + c))`. Gamma: after `u = -ln(1 - x)` this
    /// is a Frullani integral equal to `c̃ ln((s + c + e) / (s + c))`.
    pub fn laplace_exponent(&self, e: f64, s: f64) -> f64 {
        match *self {
            JumpShape::Beta { c } => c * digamma_difference(s + c, e),
            JumpShape::Gamma { c, c_tilde } => c_tilde * (e / (s + c)).ln_1p(),
        }
    }

    /// `∫_0^eps (1 - x)^r g(x) dx`, the mean mass of jumps below `eps` under
    /// the tilted density.
    pub fn small_jump_mass(&self, eps: f64, r: f64) -> f64 {
        gauss_legendre_10(|x| (r * (-x).ln_1p()).exp() * self.g(x, 1.0 - x), 0.0, eps)
    }
}

/// `ψ(a + e) - ψ(a)`. For large `a` the direct difference cancels badly, so
/// the asymptotic expansion of ψ is differenced term by term instead.
fn digamma_difference(a: f64, e: f64) -> f64 {
    if a > 1e4 {
        let b = a + e;
        (e / a).ln_1p() + e / (2.0 * a * b) + (1.0 / (a * a) - 1.0 / (b * b)) / 12.0
            - (1.0 / a.powi(4) - 1.0 / b.powi(4)) / 120.0
    } else {
        digamma(a + e) - digamma(a)
    }
}

/// A time piece `[lo, hi)` on which both `λ` and `g_t` are constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub lambda: f64,
    pub shape: JumpShape,
}

/// Lévy-measure specification `ν(dt, dx) = g_t(x) / x dx λ(t) dt` together
/// with the constants of the regularity conditions on it.
#[derive(Debug, Clone, PartialEq)]
pub struct NiiPriorSpec {
    family: PriorFamily,
    c: StepFunction,
    /// Rate of the mean measure in the `g_t(x) λ(t) / x` form.
    lambda: StepFunction,
    /// Rate supplied by the caller (differs from `lambda` for gamma priors).
    input_lambda: StepFunction,
    c_tilde: Option<StepFunction>,
    varsigma: f64,
    g_star: f64,
    alpha: f64,
    tau: f64,
}

fn check_scale_and_rate(c: &StepFunction, lambda: &StepFunction, tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidPrior(format!("tau must be positive and finite, got {tau}")));
    }
    let cs = c.values_on(tau);
    if cs.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidPrior(format!(
            "concentration must satisfy inf c > 0 on [0, tau], got {cs:?}"
        )));
    }
    let ls = lambda.values_on(tau);
    if ls.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidPrior(format!(
            "rate lambda must be bounded and positive on (0, tau), got {ls:?}"
        )));
    }
    Ok(())
}

/// Beta process with scale `c(t)` and mean `Λ(t) = ∫ λ`.
pub fn beta_process_prior(c: StepFunction, lambda: StepFunction, tau: f64) -> Result<NiiPriorSpec> {
    check_scale_and_rate(&c, &lambda, tau)?;
    let cs = c.values_on(tau);
    let c_min = cs.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = cs.iter().copied().fold(0.0, f64::max);
    Ok(NiiPriorSpec {
        family: PriorFamily::Beta,
        c,
        input_lambda: lambda.clone(),
        lambda,
        c_tilde: None,
        varsigma: c_min,
        // (1 - x)^{1 - ς} c (1 - x)^{c - 1} = c (1 - x)^{c - ς} peaks at x = 0.
        g_star: c_max,
        alpha: 1.0,
        tau,
    })
}

/// `c̃ = (∫_0^1 x / (-ln(1 - x)) (1 - x)^{c - 1} dx)^{-1}` by quadrature.
pub fn gamma_normalizer(c: f64) -> Result<f64> {
    let integral = integrate_unit(
        |x, omx| {
            let ratio = if x == 0.0 { 1.0 } else { x / -ln_one_minus(x, omx) };
            ratio * omx.powf(c - 1.0)
        },
        1.0,
        QUAD_TOL,
    )?;
    Ok(1.0 / integral.value)
}

/// Gamma process prior on `-ln(1 - F)` with parameters `(Λ, c)`, expressed
/// as an NII process on the cumulative hazard.
///
/// The Lévy-measure rate becomes `λ̃ = c λ / c̃`, so the prior mean of `A(t)`
/// is `Λ̃(t) = ∫_0^t c / c̃ dΛ`.
pub fn gamma_process_prior(c: StepFunction, lambda: StepFunction, tau: f64) -> Result<NiiPriorSpec> {
    check_scale_and_rate(&c, &lambda, tau)?;
    let tildes = c.values().iter().map(|&cv| gamma_normalizer(cv)).collect::<Result<Vec<_>>>()?;
    let c_tilde = StepFunction::new(c.breaks().to_vec(), tildes)?;
    let ratio = StepFunction::new(
        c.breaks().to_vec(),
        c.values().iter().zip(c_tilde.values()).map(|(cv, ct)| cv / ct).collect(),
    )?;
    let effective = lambda.product(&ratio);
    let c_min = c.values_on(tau).iter().copied().fold(f64::INFINITY, f64::min);
    let tilde_max = c_tilde.values_on(tau).iter().copied().fold(0.0, f64::max);
    Ok(NiiPriorSpec {
        family: PriorFamily::Gamma,
        c,
        lambda: effective,
        input_lambda: lambda,
        c_tilde: Some(c_tilde),
        // strictly below c_* / 2
        varsigma: 0.5 * c_min * (1.0 - 1e-6),
        // c̃ (x / -ln(1-x)) (1-x)^{c-ς} <= c̃ with equality as x -> 0.
        g_star: tilde_max,
        alpha: 1.0,
        tau,
    })
}

impl NiiPriorSpec {
    pub fn family(&self) -> PriorFamily {
        self.family
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn varsigma(&self) -> f64 {
        self.varsigma
    }

    pub fn g_star(&self) -> f64 {
        self.g_star
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn concentration(&self) -> &StepFunction {
        &self.c
    }

    /// `λ(t)` of the `g_t(x) λ(t) / x` form.
    pub fn lambda(&self) -> &StepFunction {
        &self.lambda
    }

    /// The rate the prior was constructed from.
    pub fn input_lambda(&self) -> &StepFunction {
        &self.input_lambda
    }

    /// Prior mean `Λ(t) = ∫_0^t λ` (reported as `Λ̃` for gamma priors).
    pub fn cumulative_mean(&self, t: f64) -> f64 {
        self.lambda.integral(t)
    }

    pub fn shape_at(&self, t: f64) -> JumpShape {
        let k = self.c.piece_index(t);
        let c = self.c.values()[k];
        match &self.c_tilde {
            None => JumpShape::Beta { c },
            Some(tilde) => JumpShape::Gamma { c, c_tilde: tilde.values()[k] },
        }
    }

    /// `g_t(x)`.
    pub fn g(&self, t: f64, x: f64) -> f64 {
        self.shape_at(t).g(x, 1.0 - x)
    }

    /// `k(t)`.
    pub fn k(&self, t: f64) -> f64 {
        self.shape_at(t).boundary_value()
    }

    /// `(k_*, k^*)` over `[0, tau]`.
    pub fn k_bounds(&self) -> (f64, f64) {
        let ks: Vec<f64> = match &self.c_tilde {
            None => self.c.values_on(self.tau).to_vec(),
            Some(tilde) => tilde.values_on(self.tau).to_vec(),
        };
        (ks.iter().copied().fold(f64::INFINITY, f64::min), ks.iter().copied().fold(0.0, f64::max))
    }

    /// Pieces of `[a, b]` on which `λ` and `g_t` are both constant.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<Piece> {
        let mut cuts: Vec<f64> = self
            .c
            .breaks()
            .iter()
            .chain(self.lambda.breaks())
            .copied()
            .filter(|&t| t > a && t < b)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out = Vec::with_capacity(cuts.len() + 1);
        let mut lo = a;
        for hi in cuts.into_iter().chain(std::iter::once(b)) {
            if hi > lo {
                out.push(Piece { lo, hi, lambda: self.lambda.eval(lo), shape: self.shape_at(lo) });
            }
            lo = hi;
        }
        out
    }

    /// Lévy density `g_t(x) λ(t) / x`.
    pub fn levy_density(&self, t: f64, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::Domain(format!(
                "Levy density is defined for jump sizes in (0, 1], got {x}"
            )));
        }
        if !(0.0..=self.tau).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", self.tau)));
        }
        Ok(self.shape_at(t).g_over_x(x, 1.0 - x) * self.lambda.eval(t))
    }

    /// `(E A(t), Var A(t))`: mean `Λ(t)`, variance `∫_0^t (∫ x g_s(x) dx) λ(s) ds`.
    pub fn prior_moments(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        let mut variance = 0.0;
        for piece in self.pieces(0.0, t) {
            let shape = piece.shape;
            let second = integrate_unit(|x, omx| x * shape.g(x, omx), 1.0, QUAD_TOL)?.value;
            variance += piece.lambda * (piece.hi - piece.lo) * second;
        }
        Ok((self.cumulative_mean(t), variance))
    }

    /// `|∫_0^1 g_t(x) dx - 1|` by quadrature.
    pub fn normalization_error(&self, t: f64) -> Result<f64> {
        let shape = self.shape_at(t);
        let total = integrate_unit(|x, omx| shape.g(x, omx), 1.0, QUAD_TOL)?.value;
        Ok((total - 1.0).abs())
    }

    /// Mean contribution of jumps below `eps` on `[0, t]`:
    /// `∫_0^t ∫_0^eps x ν(ds, dx)`.
    pub fn truncated_mean(&self, eps: f64, t: f64) -> f64 {
        self.pieces(0.0, t)
            .iter()
            .map(|p| p.lambda * (p.hi - p.lo) * p.shape.small_jump_mass(eps, 0.0))
            .sum()
    }

    pub fn describe(&self) -> String {
        let fam = match self.family {
            PriorFamily::Beta => "beta",
            PriorFamily::Gamma => "gamma",
        };
        let show = |f: &StepFunction| {
            if f.is_constant() {
                format!("{}", f.values()[0])
            } else {
                format!("piecewise{:?}@{:?}", f.values(), f.breaks())
            }
        };
        format!("{fam}(c={}, lambda={})", show(&self.c), show(&self.input_lambda))
    }
}

/// Prior block of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub family: PriorFamily,
    #[serde(default = "unit_step")]
    pub c: StepFunction,
    #[serde(default = "unit_step")]
    pub lambda: StepFunction,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn unit_step() -> StepFunction {
    StepFunction::constant(1.0)
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { family: PriorFamily::Beta, c: unit_step(), lambda: unit_step(), epsilon: DEFAULT_EPSILON }
    }
}

impl PriorConfig {
    pub fn build(&self, tau: f64) -> Result<NiiPriorSpec> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidPrior(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        match self.family {
            PriorFamily::Beta => beta_process_prior(self.c.clone(), self.lambda.clone(), tau),
            PriorFamily::Gamma => gamma_process_prior(self.c.clone(), self.lambda.clone(), tau),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn beta_const(c: f64) -> NiiPriorSpec {
        beta_process_prior(StepFunction::constant(c), StepFunction::constant(1.0), 1.0).unwrap()
    }

    fn gamma_const(c: f64) -> NiiPriorSpec {
        gamma_process_prior(StepFunction::constant(c), StepFunction::constant(1.0), 1.0).unwrap()
    }

    #[test]
    fn beta_shape_values() {
        let one = beta_const(1.0);
        for x in [0.0, 0.3, 0.9, 1.0 - 1e-9] {
            assert_eq!(one.g(0.5, x), 1.0);
        }
        assert_eq!(beta_const(2.0).g(0.2, 0.5), 1.0);
        assert!(one.normalization_error(0.3).unwrap() < 1e-12);
        assert!(beta_const(3.0).normalization_error(0.3).unwrap() < 1e-10);
        assert_eq!(one.varsigma(), 1.0);
        assert_eq!(one.k(0.7), 1.0);
    }

    #[test]
    fn invalid_scales_rejected() {
        assert!(beta_process_prior(StepFunction::constant(0.0), StepFunction::constant(1.0), 1.0).is_err());
        assert!(gamma_process_prior(StepFunction::constant(-1.0), StepFunction::constant(1.0), 1.0).is_err());
        let zero_rate = StepFunction::new(vec![0.5], vec![1.0, 0.0]).unwrap();
        assert!(beta_process_prior(StepFunction::constant(1.0), zero_rate, 1.0).is_err());
    }

    #[test]
    fn gamma_normalizer_matches_frullani() {
        // ∫ x/(-ln(1-x)) (1-x)^{c-1} dx = ln(1 + 1/c)
        for c in [0.5, 1.0, 2.0, 7.5] {
            let tilde = gamma_normalizer(c).unwrap();
            assert_relative_eq!(1.0 / tilde, (1.0 / c).ln_1p(), max_relative = 1e-11);
        }
    }

    #[test]
    fn gamma_boundary_value_is_c_tilde() {
        let spec = gamma_const(1.0);
        let tilde = 1.0 / std::f64::consts::LN_2;
        assert_relative_eq!(spec.k(0.2), tilde, max_relative = 1e-11);
        assert_relative_eq!(spec.g(0.2, 1e-12), tilde, max_relative = 1e-9);
        assert!(spec.normalization_error(0.5).unwrap() < 1e-8);
        assert_relative_eq!(spec.cumulative_mean(1.0), std::f64::consts::LN_2, max_relative = 1e-11);
    }

    #[test]
    fn levy_density_values() {
        let spec = beta_const(1.0);
        assert_eq!(spec.levy_density(0.3, 0.5).unwrap(), 2.0);
        assert!(matches!(spec.levy_density(0.3, 0.0), Err(Error::Domain(_))));
        assert!(spec.levy_density(0.3, 1.5).is_err());

        let gamma = gamma_const(1.0);
        let tilde = 1.0 / std::f64::consts::LN_2;
        // c̃ (1 - 0.3)^0 / (-ln 0.7) times λ̃ = c / c̃ = ln 2
        let direct = tilde / -(0.7f64).ln() * (1.0 / tilde);
        assert_relative_eq!(gamma.levy_density(0.5, 0.3).unwrap(), direct, max_relative = 1e-10);
    }

    #[test]
    fn moments_of_beta_prior() {
        let spec = beta_const(3.0);
        assert_eq!(spec.prior_moments(0.0).unwrap(), (0.0, 0.0));
        let (m, v) = spec.prior_moments(0.8).unwrap();
        assert_relative_eq!(m, 0.8, max_relative = 1e-14);
        assert_relative_eq!(v, 0.8 / 4.0, max_relative = 1e-10);
    }

    #[test]
    fn moments_of_gamma_prior() {
        // ∫ x g = c̃ ln((c+1)^2 / (c (c+2)))
        let c: f64 = 2.0;
        let spec = gamma_const(c);
        let tilde = 1.0 / (1.0 / c).ln_1p();
        let (m, v) = spec.prior_moments(1.0).unwrap();
        let lambda_tilde = c / tilde;
        assert_relative_eq!(m, lambda_tilde, max_relative = 1e-11);
        let expected = lambda_tilde * tilde * ((c + 1.0).powi(2) / (c * (c + 2.0))).ln();
        assert_relative_eq!(v, expected, max_relative = 1e-9);
    }

    #[test]
    fn doubling_lambda_doubles_mean() {
        let a = beta_process_prior(StepFunction::constant(2.0), StepFunction::constant(0.7), 2.0).unwrap();
        let b = beta_process_prior(StepFunction::constant(2.0), StepFunction::constant(1.4), 2.0).unwrap();
        for t in [0.0, 0.5, 1.7] {
            assert_eq!(2.0 * a.prior_moments(t).unwrap().0, b.prior_moments(t).unwrap().0);
        }
    }

    #[test]
    fn laplace_exponent_matches_quadrature() {
        let shapes = [
            JumpShape::Beta { c: 1.0 },
            JumpShape::Beta { c: 0.4 },
            JumpShape::Beta { c: 3.0 },
            JumpShape::Gamma { c: 1.0, c_tilde: gamma_normalizer(1.0).unwrap() },
            JumpShape::Gamma { c: 0.6, c_tilde: gamma_normalizer(0.6).unwrap() },
        ];
        for shape in shapes {
            for &(e, s) in &[(1.0, 0.0), (0.4, 3.0), (2.5, 150.0), (1.3, 4000.0)] {
                let quad = integrate_unit(
                    |x, omx| one_minus_pow(x, omx, e) * omx.powf(s) * shape.g_over_x(x, omx),
                    s + e + 1.0,
                    QUAD_TOL,
                )
                .unwrap()
                .value;
                assert_relative_eq!(shape.laplace_exponent(e, s), quad, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn digamma_difference_branches_agree() {
        let a: f64 = 1.0e4 * (1.0 + 1e-12);
        let approx = {
            let b = a + 1.7;
            (1.7 / a).ln_1p() + 1.7 / (2.0 * a * b) + (1.0 / (a * a) - 1.0 / (b * b)) / 12.0
        };
        assert_relative_eq!(digamma(a + 1.7) - digamma(a), approx, max_relative = 1e-9);
        assert_relative_eq!(digamma_difference(5e4, 1.0), 1.0 / 5e4, max_relative = 1e-12);
    }

    #[test]
    fn pieces_split_on_all_breaks() {
        let c = StepFunction::new(vec![0.5], vec![1.0, 2.0]).unwrap();
        let l = StepFunction::new(vec![0.25, 0.5], vec![1.0, 3.0, 2.0]).unwrap();
        let spec = beta_process_prior(c, l, 1.0).unwrap();
        let pieces = spec.pieces(0.0, 1.0);
        assert_eq!(pieces.len(), 3);
        assert_eq!(pieces[1].lambda, 3.0);
        assert_eq!(pieces[2].shape, JumpShape::Beta { c: 2.0 });
        assert_eq!(spec.varsigma(), 1.0);
        assert_eq!(spec.g_star(), 2.0);
    }
}
