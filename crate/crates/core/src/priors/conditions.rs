use serde::{Deserialize, Serialize};

use super::NiiPriorSpec;
use crate::error::Result;

/// Upper end of the `h` range used for the Hölder quotient.
const HOLDER_RANGE: f64 = 0.1;

/// Grid evaluation of the boundedness and Hölder conditions on `g_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub varsigma: f64,
    pub g_star: f64,
    /// `sup (1 - x)^{1 - ς} g_t(x)` over the grid.
    pub bounded_sup: f64,
    pub bounded_holds: bool,
    pub alpha: f64,
    /// `sup |g_t(h) - k(t)| / h^α` over the grid.
    pub holder_quotient: f64,
    /// Least-squares slope of `ln |g_t(h) - k(t)|` on `ln h` for small `h`;
    /// `None` when `g_t(h) = k(t)` identically.
    pub holder_exponent: Option<f64>,
    pub k_lower: f64,
    pub k_upper: f64,
    pub holder_holds: bool,
    /// `max_t |∫ g_t - 1|` over the time grid.
    pub normalization_error: f64,
}

fn x_grid(resolution: usize) -> Vec<f64> {
    let m = resolution.max(2);
    let mut xs: Vec<f64> = (1..m).map(|k| k as f64 / m as f64).collect();
    for e in 1..=12 {
        let d = 10f64.powi(-e);
        xs.push(d);
        xs.push(1.0 - d);
    }
    xs.sort_by(f64::total_cmp);
    xs
}

/// Evaluates both conditions on a `resolution`-point time grid over `[0, tau]`
/// and a jump-size grid refined geometrically toward both endpoints.
pub fn check_conditions(spec: &NiiPriorSpec, resolution: usize) -> Result<ConditionReport> {
    let m = resolution.max(2);
    let tau = spec.tau();
    let ts: Vec<f64> = (0..m).map(|k| tau * k as f64 / (m - 1) as f64).collect();
    let xs = x_grid(m);
    let hs: Vec<f64> = (0..60).map(|k| HOLDER_RANGE * 10f64.powf(-(k as f64) / 7.5)).collect();
    let varsigma = spec.varsigma();
    let alpha = spec.alpha();

    let mut bounded_sup: f64 = 0.0;
    let mut holder_quotient: f64 = 0.0;
    let mut normalization_error: f64 = 0.0;
    let mut slopes = Vec::new();
    for &t in &ts {
        let shape = spec.shape_at(t);
        for &x in &xs {
            let omx = 1.0 - x;
            bounded_sup = bounded_sup.max(omx.powf(1.0 - varsigma) * shape.g(x, omx));
        }
        let k = shape.boundary_value();
        let mut pts = Vec::new();
        for &h in &hs {
            let diff = (shape.g(h, 1.0 - h) - k).abs();
            holder_quotient = holder_quotient.max(diff / h.powf(alpha));
            if diff > 1e-13 * k && h < 1e-2 {
                pts.push((h.ln(), diff.ln()));
            }
        }
        if pts.len() >= 3 {
            slopes.push(least_squares_slope(&pts));
        }
        normalization_error = normalization_error.max(spec.normalization_error(t)?);
    }

    let (k_lower, k_upper) = spec.k_bounds();
    let holder_exponent = (!slopes.is_empty()).then(|| slopes.iter().copied().fold(f64::INFINITY, f64::min));
    Ok(ConditionReport {
        varsigma,
        g_star: spec.g_star(),
        bounded_sup,
        bounded_holds: varsigma > 0.0
            && bounded_sup.is_finite()
            && bounded_sup <= spec.g_star() * (1.0 + 1e-9),
        alpha,
        holder_quotient,
        holder_exponent,
        k_lower,
        k_upper,
        holder_holds: alpha > 0.5
            && holder_quotient.is_finite()
            && k_lower > 0.0
            && k_upper.is_finite(),
        normalization_error,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{beta_process_prior, gamma_process_prior};
    use crate::step::StepFunction;

    #[test]
    fn beta_with_varying_scale_is_bounded() {
        let c = StepFunction::new(vec![0.3, 0.6], vec![0.5, 2.0, 1.0]).unwrap();
        let spec = beta_process_prior(c, StepFunction::constant(1.0), 1.0).unwrap();
        assert_eq!(spec.varsigma(), 0.5);
        let report = check_conditions(&spec, 50).unwrap();
        assert!(report.bounded_holds, "{report:?}");
        assert!(report.holder_holds);
        assert!(report.normalization_error < 1e-8);
        assert_eq!(report.k_lower, 0.5);
        assert_eq!(report.k_upper, 2.0);
    }

    #[test]
    fn gamma_with_unit_scale() {
        let spec = gamma_process_prior(StepFunction::constant(1.0), StepFunction::constant(1.0), 1.0).unwrap();
        assert!(spec.varsigma() < 0.5);
        let report = check_conditions(&spec, 20).unwrap();
        assert!(report.bounded_holds, "{report:?}");
        assert!(report.holder_holds);
        // g(h) - c̃ is linear in h near zero
        let slope = report.holder_exponent.unwrap();
        assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn flat_beta_has_zero_quotient() {
        let spec = beta_process_prior(StepFunction::constant(1.0), StepFunction::constant(1.0), 1.0).unwrap();
        let report = check_conditions(&spec, 10).unwrap();
        assert_eq!(report.holder_quotient, 0.0);
        assert_eq!(report.holder_exponent, None);
        assert_eq!(report.bounded_sup, 1.0);
    }
}
