use crate::error::{Error, Result};

/// Nondecreasing cumulative-hazard path on `[0, tau]`: a finite set of jumps
/// in `[0, 1]` plus an optional continuous nondecreasing part stored as a
/// piecewise-linear function through `(knot, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardPath {
    jump_times: Vec<f64>,
    jump_sizes: Vec<f64>,
    cumulative: Vec<f64>,
    drift_knots: Vec<f64>,
    drift_values: Vec<f64>,
}

impl HazardPath {
    /// Pure-jump path. Jumps are sorted by time; jumps sharing a time are
    /// kept as separate atoms.
    pub fn from_jumps(times: Vec<f64>, sizes: Vec<f64>) -> Result<Self> {
        Self::with_drift(times, sizes, Vec::new(), Vec::new())
    }

    pub fn with_drift(
        times: Vec<f64>,
        sizes: Vec<f64>,
        drift_knots: Vec<f64>,
        drift_values: Vec<f64>,
    ) -> Result<Self> {
        if let Some(x) = sizes.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
            return Err(Error::Domain(format!("jump size {x} outside [0, 1]")));
        }
        Self::build(times, sizes, drift_knots, drift_values)
    }

    /// Nondecreasing step function whose increments may exceed 1, as for
    /// estimators such as Breslow's; [`Self::is_valid`] reports whether it is
    /// also an admissible cumulative-hazard path.
    pub fn from_increments(times: Vec<f64>, sizes: Vec<f64>) -> Result<Self> {
        if let Some(x) = sizes.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::Domain(format!("increment {x} is negative or not finite")));
        }
        Self::build(times, sizes, Vec::new(), Vec::new())
    }

    fn build(
        times: Vec<f64>,
        sizes: Vec<f64>,
        drift_knots: Vec<f64>,
        drift_values: Vec<f64>,
    ) -> Result<Self> {
        if times.len() != sizes.len() {
            return Err(Error::Domain("jump times and sizes differ in length".into()));
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Domain("jump times must be finite and nonnegative".into()));
        }
        if drift_knots.len() != drift_values.len() {
            return Err(Error::Domain("drift knots and values differ in length".into()));
        }
        if drift_knots.windows(2).any(|w| w[0] > w[1])
            || drift_values.windows(2).any(|w| w[0] > w[1])
            || drift_values.first().is_some_and(|&v| v < 0.0)
        {
            return Err(Error::Domain("drift must be nondecreasing and start at zero or above".into()));
        }
        let mut idx: Vec<usize> = (0..times.len()).collect();
        idx.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let jump_times: Vec<f64> = idx.iter().map(|&k| times[k]).collect();
        let jump_sizes: Vec<f64> = idx.iter().map(|&k| sizes[k]).collect();
        let mut cumulative = Vec::with_capacity(jump_sizes.len());
        let mut acc = 0.0;
        for &x in &jump_sizes {
            acc += x;
            cumulative.push(acc);
        }
        Ok(Self { jump_times, jump_sizes, cumulative, drift_knots, drift_values })
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jump_sizes(&self) -> &[f64] {
        &self.jump_sizes
    }

    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }

    /// Sum of jumps at times `<= t`.
    pub fn jump_part(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Continuous part at `t` (linear interpolation, flat outside the knots).
    pub fn drift_part(&self, t: f64) -> f64 {
        let knots = &self.drift_knots;
        if knots.is_empty() || t <= knots[0] {
            return if knots.is_empty() { 0.0 } else { self.drift_values[0] };
        }
        let k = knots.partition_point(|&s| s <= t);
        if k >= knots.len() {
            return *self.drift_values.last().unwrap();
        }
        let (t0, t1) = (knots[k - 1], knots[k]);
        let (v0, v1) = (self.drift_values[k - 1], self.drift_values[k]);
        if t1 == t0 {
            v1
        } else {
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }

    /// `A(t)`, right-continuous.
    pub fn eval(&self, t: f64) -> f64 {
        self.jump_part(t) + self.drift_part(t)
    }

    pub fn eval_grid(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn has_drift(&self) -> bool {
        !self.drift_knots.is_empty()
    }

    /// `(t, A(t))` at every jump time, preceded by `(0, A(0))`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, self.eval(0.0))];
        let mut times: Vec<f64> = self.jump_times.iter().chain(&self.drift_knots).copied().collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        out.extend(times.into_iter().filter(|&t| t > 0.0).map(|t| (t, self.eval(t))));
        out
    }

    /// Checks the structural invariants: `A(0) = 0` when no atom sits at 0,
    /// jumps in `[0, 1]`, and monotonicity along all knots.
    pub fn is_valid(&self) -> bool {
        let sizes_ok = self.jump_sizes.iter().all(|x| (0.0..=1.0).contains(x));
        let pts = self.points();
        let monotone = pts.windows(2).all(|w| w[1].1 >= w[0].1);
        let start_ok = self.drift_part(0.0) == 0.0 || self.drift_knots.is_empty();
        sizes_ok && monotone && start_ok
    }
}
