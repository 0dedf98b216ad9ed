use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::survival::{RiskSets, SurvivalDataset};

/// Plug-in estimates, at a fixed `β`, of the functionals that govern the
/// joint limit law of the coefficient and cumulative hazard estimators.
///
/// With `S_k(t) = n⁻¹ Σ_{j ∈ R(t)} Z_j^{⊗k} exp(β'Z_j)` and Breslow
/// increments `ΔÂ`:
/// - `Û0(t) = Σ_{t_i <= t} ΔÂ(t_i) / S_0(t_i)`
/// - `ê0(t) = Σ_{t_i <= t} ΔÂ(t_i) S_1(t_i) / S_0(t_i)`
/// - `Î = Σ_i V(t_i) S_0(t_i) ΔÂ(t_i)`, `V = S_2 / S_0 − (S_1 / S_0)^{⊗2}`
#[derive(Debug, Clone)]
pub struct LimitFunctionals {
    times: Vec<f64>,
    s0: Vec<f64>,
    u0: Vec<f64>,
    e0: Vec<DVector<f64>>,
    info: DMatrix<f64>,
    info_inv: Option<DMatrix<f64>>,
    p: usize,
}

impl LimitFunctionals {
    pub fn compute(ds: &SurvivalDataset, rs: &RiskSets, beta: &[f64]) -> Result<Self> {
        let p = ds.p();
        if beta.len() != p {
            return Err(Error::Domain(format!("beta has dimension {}, expected {p}", beta.len())));
        }
        if rs.q() == 0 {
            return Err(Error::UndefinedLikelihood);
        }
        let n = ds.len() as f64;
        let w = ds.risk_scores(beta);
        let sorted = rs.sorted_order();
        let q = rs.q();

        let mut s0_raw = vec![0.0; q];
        let mut s1_raw = vec![DVector::<f64>::zeros(p); q];
        let mut v = vec![DMatrix::<f64>::zeros(p, p); q];
        let (mut a0, mut a1, mut a2) = (0.0, DVector::<f64>::zeros(p), DMatrix::<f64>::zeros(p, p));
        let mut pos = sorted.len();
        for i in (0..q).rev() {
            while pos > rs.risk_start(i) {
                pos -= 1;
                let j = sorted[pos];
                let z = DVector::from_column_slice(ds.covariates(j));
                a0 += w[j];
                a1.axpy(w[j], &z, 1.0);
                a2.ger(w[j], &z, &z, 1.0);
            }
            let s0 = a0 / n;
            if !(s0 > 0.0 && s0.is_finite()) {
                return Err(Error::DegenerateRiskSet(rs.time(i)));
            }
            let mean = &a1 / a0;
            s0_raw[i] = a0;
            v[i] = &a2 / a0 - &mean * mean.transpose();
            s1_raw[i] = a1.clone();
        }

        let mut u0 = Vec::with_capacity(q);
        let mut e0 = Vec::with_capacity(q);
        let mut info = DMatrix::<f64>::zeros(p, p);
        let (mut u_acc, mut e_acc) = (0.0, DVector::<f64>::zeros(p));
        for i in 0..q {
            let d = rs.death_count(i) as f64;
            let da = d / s0_raw[i];
            let s0 = s0_raw[i] / n;
            u_acc += da / s0;
            e_acc.axpy(da, &(&s1_raw[i] / s0_raw[i]), 1.0);
            info += &v[i] * (s0 * da);
            u0.push(u_acc);
            e0.push(e_acc.clone());
        }
        let info = 0.5 * (&info + info.transpose());
        let info_inv = info.clone().cholesky().map(|c| c.inverse());
        Ok(Self {
            times: rs.distinct_times().to_vec(),
            s0: s0_raw.iter().map(|s| s / n).collect(),
            u0,
            e0,
            info,
            info_inv,
            p,
        })
    }

    fn index(&self, t: f64) -> Option<usize> {
        self.times.partition_point(|&s| s <= t).checked_sub(1)
    }

    pub fn u0(&self, t: f64) -> f64 {
        self.index(t).map_or(0.0, |k| self.u0[k])
    }

    pub fn e0(&self, t: f64) -> DVector<f64> {
        self.index(t).map_or_else(|| DVector::zeros(self.p), |k| self.e0[k].clone())
    }

    /// `S_0` at the distinct event time `t_i` with `t_i <= t` closest to `t`;
    /// `None` before the first event time.
    pub fn s0_at(&self, t: f64) -> Option<f64> {
        self.index(t).map(|k| self.s0[k])
    }

    pub fn info(&self) -> &DMatrix<f64> {
        &self.info
    }

    pub fn info_inverse(&self) -> Result<&DMatrix<f64>> {
        self.info_inv
            .as_ref()
            .ok_or_else(|| Error::Singular("plug-in information matrix is not positive definite".into()))
    }

    pub fn event_times(&self) -> &[f64] {
        &self.times
    }
}

/// `Û0(s ∧ t) + ê0(s)' Î⁻¹ ê0(t)`, the limiting covariance of
/// `√n (A − Â)` at `(s, t)`.
pub fn limit_covariance_a(s: f64, t: f64, lf: &LimitFunctionals) -> Result<f64> {
    let inv = lf.info_inverse()?;
    let es = lf.e0(s);
    let et = lf.e0(t);
    Ok(lf.u0(s.min(t)) + (es.transpose() * inv * et)[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fixture() -> (SurvivalDataset, RiskSets) {
        let ds = SurvivalDataset::new(
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![true, true, false, true, true],
            vec![1.0, 0.0, 1.0, 0.5, -1.0],
            1,
            None,
        )
        .unwrap();
        let rs = RiskSets::build(&ds);
        (ds, rs)
    }

    #[test]
    fn u0_brute_force() {
        let (ds, rs) = fixture();
        let beta = [0.3];
        let lf = LimitFunctionals::compute(&ds, &rs, &beta).unwrap();
        let n = ds.len() as f64;
        let mut expect = 0.0;
        for i in 0..ds.len() {
            if ds.is_event(i) {
                let sum: f64 = (0..ds.len())
                    .filter(|&j| ds.time(j) >= ds.time(i))
                    .map(|j| (beta[0] * ds.covariates(j)[0]).exp())
                    .sum();
                expect += n / (sum * sum);
            }
        }
        assert_relative_eq!(lf.u0(5.0), expect, max_relative = 1e-14);
        assert_eq!(lf.u0(0.5), 0.0);
    }

    #[test]
    fn info_matches_negative_hessian() {
        let (ds, rs) = fixture();
        let beta = [0.3];
        let lf = LimitFunctionals::compute(&ds, &rs, &beta).unwrap();
        let h = super::super::partial_loglik(&ds, &rs, &beta, 2).unwrap().hessian.unwrap();
        assert_relative_eq!(lf.info()[(0, 0)], -h[(0, 0)] / ds.len() as f64, max_relative = 1e-12);
    }

    #[test]
    fn covariance_is_symmetric() {
        let (ds, rs) = fixture();
        let lf = LimitFunctionals::compute(&ds, &rs, &[0.2]).unwrap();
        let a = limit_covariance_a(1.5, 4.0, &lf).unwrap();
        let b = limit_covariance_a(4.0, 1.5, &lf).unwrap();
        assert_eq!(a, b);
        assert!(limit_covariance_a(4.0, 4.0, &lf).unwrap() >= a.min(0.0));
    }

    #[test]
    fn constant_covariate_is_singular() {
        let ds = SurvivalDataset::new(vec![1.0, 2.0], vec![true, true], vec![1.0, 1.0], 1, None).unwrap();
        let rs = RiskSets::build(&ds);
        let lf = LimitFunctionals::compute(&ds, &rs, &[0.0]).unwrap();
        assert!(matches!(limit_covariance_a(1.0, 2.0, &lf), Err(Error::Singular(_))));
    }
}
