use coxbvm::frequentist::{breslow, fit_mle, limit_covariance_a, partial_loglik, FitOptions, LimitFunctionals};
use coxbvm::survival::{simulate_ph_data, BaselineHazard, CensoringLaw, CovariateLaw, RiskSets, SurvivalDataset, TrueModelSpec};
use coxbvm::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn model(beta0: Vec<f64>) -> TrueModelSpec {
    let covariates = vec![CovariateLaw::Uniform { low: -1.0, high: 1.0 }; beta0.len()];
    TrueModelSpec {
        beta0,
        baseline: BaselineHazard::Exponential { rate: 1.0 },
        censoring: CensoringLaw::Uniform { upper: 3.9 },
        covariates,
        tau: None,
    }
}

fn naive_loglik(ds: &SurvivalDataset, beta: &[f64]) -> f64 {
    let n = ds.len();
    let score = |i: usize| ds.covariates(i).iter().zip(beta).map(|(z, b)| z * b).sum::<f64>();
    (0..n)
        .filter(|&i| ds.is_event(i))
        .map(|i| {
            let at_risk: f64 = (0..n).filter(|&k| ds.time(k) >= ds.time(i)).map(|k| score(k).exp()).sum();
            score(i) - (at_risk / n as f64).ln()
        })
        .sum()
}

#[test]
fn derivatives_match_finite_differences() {
    let ds = simulate_ph_data(&model(vec![0.5, -0.5, 1.0]), 60, 5).unwrap();
    let rs = RiskSets::build(&ds);
    let beta = [0.3, -0.2, 0.1];
    let at = partial_loglik(&ds, &rs, &beta, 2).unwrap();
    let (grad, hess) = (at.gradient.unwrap(), at.hessian.unwrap());
    assert!((at.value - naive_loglik(&ds, &beta)).abs() < 1e-10);
    let h = 1e-5;
    for k in 0..3 {
        let mut up = beta;
        let mut down = beta;
        up[k] += h;
        down[k] -= h;
        let (fu, fd) = (partial_loglik(&ds, &rs, &up, 1).unwrap(), partial_loglik(&ds, &rs, &down, 1).unwrap());
        let g = (fu.value - fd.value) / (2.0 * h);
        assert!((g - grad[k]).abs() / grad[k].abs().max(1.0) < 1e-6, "gradient {k}: {g} vs {}", grad[k]);
        let (gu, gd) = (fu.gradient.unwrap(), fd.gradient.unwrap());
        for j in 0..3 {
            let fdh = (gu[j] - gd[j]) / (2.0 * h);
            assert!((fdh - hess[(j, k)]).abs() / hess[(j, k)].abs().max(1.0) < 1e-4);
        }
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-12 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[test]
fn four_record_mle_matches_golden_section() {
    let ds = SurvivalDataset::new(vec![1.0, 2.0, 3.0, 4.0], vec![true, true, true, false], vec![1.0, 0.0, 1.0, 0.0], 1, None)
        .unwrap();
    let fit = fit_mle(&ds, &RiskSets::build(&ds), &FitOptions::default()).unwrap();
    let f = |b: f64| naive_loglik(&ds, &[b]);
    let coarse = (-1000..=1000).map(|k| k as f64 / 100.0).fold(-10.0, |m, b| if f(b) > f(m) { b } else { m });
    let oracle = golden_section(f, coarse - 0.01, coarse + 0.01);
    assert!((fit.beta_hat[0] - oracle).abs() < 1e-6, "{} vs {oracle}", fit.beta_hat[0]);
    assert!(fit.converged);
}

#[test]
fn monotone_fixture_is_reported() {
    let ds = SurvivalDataset::new(vec![1.0, 2.0], vec![true, true], vec![1.0, 0.0], 1, None).unwrap();
    let err = fit_mle(&ds, &RiskSets::build(&ds), &FitOptions::default()).unwrap_err();
    assert!(matches!(err, Error::MonotoneLikelihood { .. }));
    assert!(err.is_numerical());
}

#[test]
fn breslow_matches_brute_force() {
    let ds = simulate_ph_data(&model(vec![0.7, -0.4]), 40, 9).unwrap();
    let rs = RiskSets::build(&ds);
    let beta = [0.2, 0.5];
    let path = breslow(&ds, &rs, &beta).unwrap();
    let score = |i: usize| (ds.covariates(i)[0] * beta[0] + ds.covariates(i)[1] * beta[1]).exp();
    for k in 0..=60 {
        let t = k as f64 * 0.05;
        let brute: f64 = (0..ds.len())
            .filter(|&i| ds.is_event(i) && ds.time(i) <= t)
            .map(|i| 1.0 / (0..ds.len()).filter(|&j| ds.time(j) >= ds.time(i)).map(score).sum::<f64>())
            .sum();
        assert!((path.eval(t) - brute).abs() < 1e-12, "t = {t}");
    }
}

#[test]
fn estimates_approach_the_truth() {
    let truth = model(vec![0.5, -1.0]);
    let errs: Vec<f64> = [200, 3200]
        .iter()
        .map(|&n| {
            let ds = simulate_ph_data(&truth, n, 77).unwrap();
            let fit = fit_mle(&ds, &RiskSets::build(&ds), &FitOptions::default()).unwrap();
            fit.beta_hat.iter().zip(&truth.beta0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(errs[1] < 0.15, "{errs:?}");
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn limit_covariance_matches_direct_simulation() {
    let ds = simulate_ph_data(&model(vec![0.5]), 400, 31).unwrap();
    let rs = RiskSets::build(&ds);
    let fit = fit_mle(&ds, &rs, &FitOptions::default()).unwrap();
    let lf = LimitFunctionals::compute(&ds, &rs, &fit.beta_hat).unwrap();
    let grid = [0.1, 0.3, 0.6, 0.9, 1.2];
    let g = grid.len();
    let formula = DMatrix::from_fn(g, g, |s, t| limit_covariance_a(grid[s], grid[t], &lf).unwrap());
    let eig = formula.clone().symmetric_eigen().eigenvalues;
    assert!(eig.iter().all(|&v| v > -1e-12), "{eig}");

    let sd = lf.info_inverse().unwrap()[(0, 0)].sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let reps = 100_000;
    let mut sum = DMatrix::<f64>::zeros(g, g);
    for _ in 0..reps {
        let z: f64 = StandardNormal.sample(&mut rng);
        let x = sd * z;
        let mut w = 0.0;
        let mut prev = 0.0;
        let v = DVector::from_fn(g, |k, _| {
            let u = lf.u0(grid[k]);
            let z: f64 = StandardNormal.sample(&mut rng);
            w += (u - prev).sqrt() * z;
            prev = u;
            w - x * lf.e0(grid[k])[0]
        });
        sum += &v * v.transpose();
    }
    let empirical = sum / reps as f64;
    for s in 0..g {
        for t in 0..g {
            let rel = (empirical[(s, t)] - formula[(s, t)]).abs() / formula[(s, t)];
            assert!(rel < 0.04, "({s}, {t}): {} vs {}", empirical[(s, t)], formula[(s, t)]);
        }
    }
}

fn dataset_strategy() -> impl Strategy<Value = (SurvivalDataset, Vec<f64>)> {
    (1usize..=3, 5usize..30).prop_flat_map(|(p, n)| {
        (
            prop::collection::vec(0.01f64..10.0, n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(-2.0f64..2.0, n * p),
            prop::collection::vec(-1.5f64..1.5, p),
        )
            .prop_filter_map("needs an event", move |(times, mut status, z, beta)| {
                status[0] = true;
                Some((SurvivalDataset::new(times, status, z, p, None).ok()?, beta))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loglik_is_concave((ds, beta) in dataset_strategy()) {
        let rs = RiskSets::build(&ds);
        let at = partial_loglik(&ds, &rs, &beta, 2).unwrap();
        let hess = at.hessian.unwrap();
        let scale = hess.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let eig = hess.symmetric_eigen().eigenvalues;
        prop_assert!(eig.iter().all(|&v| v <= 1e-10 * scale), "{}", eig);
    }

    #[test]
    fn loglik_matches_naive_sum((ds, beta) in dataset_strategy()) {
        let rs = RiskSets::build(&ds);
        let value = partial_loglik(&ds, &rs, &beta, 0).unwrap().value;
        let naive = naive_loglik(&ds, &beta);
        prop_assert!((value - naive).abs() <= 1e-9 * naive.abs().max(1.0));
    }
}
