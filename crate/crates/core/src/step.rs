use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous piecewise-constant function on `[0, ∞)`.
///
/// `values[k]` holds on `[breaks[k-1], breaks[k])`, with `breaks[-1] = 0` and
/// `breaks[len] = ∞`. In configuration files a bare number deserializes to a
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepRepr", into = "StepRepr")]
pub struct StepFunction {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StepRepr {
    Constant(f64),
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl TryFrom<StepRepr> for StepFunction {
    type Error = Error;

    fn try_from(repr: StepRepr) -> Result<Self> {
        match repr {
            StepRepr::Constant(v) => Ok(StepFunction::constant(v)),
            StepRepr::Piecewise { breaks, values } => StepFunction::new(breaks, values),
        }
    }
}

impl From<StepFunction> for StepRepr {
    fn from(f: StepFunction) -> Self {
        if f.breaks.is_empty() {
            StepRepr::Constant(f.values[0])
        } else {
            StepRepr::Piecewise { breaks: f.breaks, values: f.values }
        }
    }
}

impl StepFunction {
    pub fn constant(value: f64) -> Self {
        Self { breaks: Vec::new(), values: vec![value] }
    }

    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::Config(format!(
                "step function needs {} values for {} breaks, got {}",
                breaks.len() + 1,
                breaks.len(),
                values.len()
            )));
        }
        if breaks.iter().any(|b| !(b.is_finite() && *b > 0.0))
            || breaks.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config("step breaks must be positive and strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("step values must be finite".into()));
        }
        Ok(Self { breaks, values })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.breaks.is_empty()
    }

    pub fn piece_index(&self, t: f64) -> usize {
        self.breaks.partition_point(|&b| b <= t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.values[self.piece_index(t)]
    }

    /// `∫_0^t f(s) ds` for `t >= 0`.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut left = 0.0;
        for (k, &v) in self.values.iter().enumerate() {
            let right = self.breaks.get(k).copied().unwrap_or(f64::INFINITY);
            if t <= left {
                break;
            }
            acc += v * (t.min(right) - left);
            left = right;
        }
        acc
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Values restricted to pieces that intersect `[0, tau]`.
    pub fn values_on(&self, tau: f64) -> &[f64] {
        let last = self.breaks.partition_point(|&b| b < tau);
        &self.values[..=last]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Pointwise product of two step functions.
    pub fn product(&self, other: &StepFunction) -> StepFunction {
        let mut breaks: Vec<f64> = self.breaks.iter().chain(&other.breaks).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut values = Vec::with_capacity(breaks.len() + 1);
        values.push(self.values[0] * other.values[0]);
        for &b in &breaks {
            values.push(self.eval(b) * other.eval(b));
        }
        StepFunction { breaks, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_of_piecewise() {
        let f = StepFunction::new(vec![1.0, 2.0], vec![1.0, 3.0, 0.5]).unwrap();
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(1.0), 3.0);
        assert_eq!(f.eval(5.0), 0.5);
        assert!((f.integral(0.5) - 0.5).abs() < 1e-15);
        assert!((f.integral(1.5) - 2.5).abs() < 1e-15);
        assert!((f.integral(4.0) - 5.0).abs() < 1e-15);
        assert_eq!(f.values_on(1.0), &[1.0]);
        assert_eq!(f.values_on(1.5), &[1.0, 3.0]);
    }

    #[test]
    fn serde_accepts_bare_constant() {
        let f: StepFunction = serde_json::from_str("2.5").unwrap();
        assert_eq!(f, StepFunction::constant(2.5));
        let g: StepFunction = serde_json::from_str(r#"{"breaks":[1.0],"values":[1.0,2.0]}"#).unwrap();
        assert_eq!(g.eval(1.5), 2.0);
        assert!(serde_json::from_str::<StepFunction>(r#"{"breaks":[1.0],"values":[1.0]}"#).is_err());
    }

    #[test]
    fn product_merges_breaks() {
        let a = StepFunction::new(vec![1.0], vec![1.0, 2.0]).unwrap();
        let b = StepFunction::new(vec![0.5, 1.0], vec![3.0, 4.0, 5.0]).unwrap();
        let c = a.product(&b);
        assert_eq!(c.breaks(), &[0.5, 1.0]);
        assert_eq!(c.values(), &[3.0, 4.0, 10.0]);
    }
}
