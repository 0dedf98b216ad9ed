use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{JumpShape, NiiPriorSpec};
use crate::error::{Error, Result};
use crate::path::HazardPath;

/// Left-continuous step function `R(t)` tilting the Lévy measure by
/// `(1 - x)^{R(t)}`: `values[k]` holds on `(knots[k], knots[k + 1]]`, the
/// first value also at `t = 0`, and zero after the last knot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ExponentProfile {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl ExponentProfile {
    pub(crate) fn zero(tau: f64) -> Self {
        Self { knots: vec![0.0, tau], values: vec![0.0] }
    }

    pub(crate) fn new(knots: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(knots.len(), values.len() + 1);
        Self { knots, values }
    }

    pub(crate) fn eval(&self, t: f64) -> f64 {
        let k = self.knots.partition_point(|&s| s < t);
        if k == 0 {
            self.values.first().copied().unwrap_or(0.0)
        } else if k > self.values.len() {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    pub(crate) fn knots(&self) -> &[f64] {
        &self.knots
    }
}

/// Dominating density for `g(x) / x` on `[eps, 1]`, built from the bound
/// `g(x) <= g* (1 - x)^{ς - 1}`: `left / x` on `[eps, 1/2)` and
/// `2 g* (1 - x)^{ς - 1}` on `[max(eps, 1/2), 1]`. Both pieces have explicit
/// inverse CDFs.
struct Envelope {
    eps: f64,
    split: f64,
    left: f64,
    left_mass: f64,
    right_coef: f64,
    right_mass: f64,
    varsigma: f64,
}

impl Envelope {
    fn new(g_star: f64, varsigma: f64, eps: f64) -> Self {
        let split = eps.max(0.5);
        let left = g_star * 2f64.powf(1.0 - varsigma).max(1.0);
        let left_mass = if eps < 0.5 { left * (0.5 / eps).ln() } else { 0.0 };
        let right_coef = 2.0 * g_star;
        let right_mass = right_coef * (1.0 - split).powf(varsigma) / varsigma;
        Self { eps, split, left, left_mass, right_coef, right_mass, varsigma }
    }

    fn mass(&self) -> f64 {
        self.left_mass + self.right_mass
    }

    /// Draws `(x, 1 - x, envelope density at x)`.
    fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64, f64) {
        let u: f64 = rng.random();
        if u * self.mass() < self.left_mass {
            let v: f64 = rng.random();
            let x = self.eps * ((0.5 / self.eps).ln() * v).exp();
            (x, 1.0 - x, self.left / x)
        } else {
            let v: f64 = rng.random();
            // (1 - x)^ς uniform on [0, (1 - split)^ς]
            let omx = (1.0 - self.split) * (1.0 - v).powf(1.0 / self.varsigma);
            let x = 1.0 - omx;
            (x, omx, self.right_coef * omx.powf(self.varsigma - 1.0))
        }
    }
}

/// Jumps and compensating drift of an NII path on `[0, tau]` whose Lévy
/// density is `(1 - x)^{R(t)} g_t(x) λ(t) / x`.
///
/// Jumps of size `>= eps` are drawn exactly by thinning a Poisson process
/// from [`Envelope`]; smaller jumps are replaced by their mean, added as a
/// piecewise-linear drift.
pub(crate) fn sample_levy_path<R: Rng>(
    spec: &NiiPriorSpec,
    profile: &ExponentProfile,
    tau: f64,
    eps: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    let envelope = Envelope::new(spec.g_star(), spec.varsigma(), eps);
    let mut times = Vec::new();
    let mut sizes = Vec::new();
    for piece in spec.pieces(0.0, tau) {
        let mean = piece.lambda * (piece.hi - piece.lo) * envelope.mass();
        if mean <= 0.0 {
            continue;
        }
        let count = Poisson::new(mean)
            .map_err(|e| Error::Numerical(format!("Poisson intensity {mean}: {e}")))?
            .sample(rng) as usize;
        for _ in 0..count {
            let t = piece.lo + (piece.hi - piece.lo) * rng.random::<f64>();
            let (x, omx, env) = envelope.sample(rng);
            let r = profile.eval(t);
            let target = piece.shape.g_over_x(x, omx) * omx.powf(r);
            if rng.random::<f64>() * env < target {
                times.push(t);
                sizes.push(x);
            }
        }
    }

    let mut knots: Vec<f64> = profile
        .knots()
        .iter()
        .copied()
        .chain(spec.pieces(0.0, tau).iter().flat_map(|p| [p.lo, p.hi]))
        .filter(|&t| (0.0..=tau).contains(&t))
        .collect();
    knots.push(0.0);
    knots.push(tau);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut values = Vec::with_capacity(knots.len());
    let mut acc = 0.0;
    values.push(0.0);
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let shape: JumpShape = spec.shape_at(a);
        let lambda = spec.lambda().eval(a);
        acc += lambda * (b - a) * shape.small_jump_mass(eps, profile.eval(b));
        values.push(acc);
    }
    Ok((times, sizes, knots, values))
}

/// Draws a prior path of the cumulative hazard on `[0, tau]` with jumps below
/// `epsilon` replaced by their mean.
pub fn sample_prior_path(spec: &NiiPriorSpec, epsilon: f64, seed: u64) -> Result<HazardPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (times, sizes, knots, values) =
        sample_levy_path(spec, &ExponentProfile::zero(spec.tau()), spec.tau(), epsilon, &mut rng)?;
    HazardPath::with_drift(times, sizes, knots, values)
}
