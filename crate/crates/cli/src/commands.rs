use std::io::Write as _;
use std::path::Path;

use coxbvm::bvm::{
    bvm_a_check, bvm_beta_check, coverage_experiment, density_csv, emit_report, event_quantile_grid, normal_pdf,
    BvmReport, ChainConfig, Meta, Thresholds,
};
use coxbvm::frequentist::{fit_mle, FitOptions, FitResult, LimitFunctionals};
use coxbvm::posterior::{
    sample_beta_posterior, sample_joint_posterior, write_beta_draws_csv, write_paths_csv, BetaPosteriorSpec,
};
use coxbvm::priors::PriorConfig;
use coxbvm::step::StepFunction;
use coxbvm::survival::{simulate_ph_data, validate_dataset, CensoringLaw, CovariateLaw, RiskSets, SurvivalDataset};

use crate::config::{DataSource, RunConfig, SimulateBlock};
use crate::error::CliError;
use crate::{BvmCheckArgs, ChainArgs, CoverageArgs, FitArgs, ModelArgs, PathArgs, PosteriorArgs, PriorArgs, SimulateArgs};

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.to_owned(), source }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn apply_model(block: &mut SimulateBlock, args: &ModelArgs) {
    let model = &mut block.model;
    if let Some(beta0) = &args.beta0 {
        if beta0.len() != model.covariates.len() {
            model.covariates = vec![CovariateLaw::Uniform { low: -1.0, high: 1.0 }; beta0.len()];
        }
        model.beta0.clone_from(beta0);
    }
    if let Some(upper) = args.censoring_upper {
        model.censoring = CensoringLaw::Uniform { upper };
    }
    if args.tau.is_some() {
        model.tau = args.tau;
    }
}

fn apply_prior(prior: &mut PriorConfig, args: &PriorArgs) {
    if let Some(f) = args.prior {
        prior.family = f.into();
    }
    if let Some(c) = args.c {
        prior.c = StepFunction::constant(c);
    }
    if let Some(l) = args.lambda {
        prior.lambda = StepFunction::constant(l);
    }
}

fn apply_chain(cfg: &mut RunConfig, chain: &ChainArgs, paths: &PathArgs) {
    let block = &mut cfg.chain;
    block.draws = chain.draws.unwrap_or(block.draws);
    block.burn_in = chain.burn_in.unwrap_or(block.burn_in);
    block.seed = chain.seed.unwrap_or(block.seed);
    block.path_draws = paths.path_draws.unwrap_or(block.path_draws);
    block.thin = paths.thin.unwrap_or(block.thin);
    block.epsilon = paths.epsilon.unwrap_or(block.epsilon);
    if paths.grid.is_some() {
        cfg.diagnostics.grid.clone_from(&paths.grid);
    }
}

fn simulation_block(cfg: &RunConfig) -> SimulateBlock {
    match &cfg.data {
        Some(DataSource::Simulate(block)) => block.clone(),
        _ => SimulateBlock::default(),
    }
}

/// Loads or simulates the dataset named by `cfg` and checks the regularity
/// conditions.
fn load_dataset(cfg: &RunConfig) -> Result<SurvivalDataset, CliError> {
    let ds = match &cfg.data {
        Some(DataSource::Path(path)) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            SurvivalDataset::from_csv(&text)?
        }
        Some(DataSource::Simulate(block)) => simulate_ph_data(&block.model, block.n, block.seed)?,
        None => return Err(CliError::Invalid("no data source: pass --data or a config with a data block".into())),
    };
    let verdict = validate_dataset(&ds);
    if !verdict.passed {
        return Err(CliError::Validation(verdict.describe()));
    }
    Ok(ds)
}

fn load_config(config: Option<&Path>, data: Option<&Path>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load_or_default(config)?;
    if let Some(path) = data {
        cfg.data = Some(DataSource::Path(path.to_owned()));
    }
    Ok(cfg)
}

fn fit_dataset(ds: &SurvivalDataset) -> Result<(RiskSets, FitResult), CliError> {
    let rs = RiskSets::build(ds);
    let fit = fit_mle(ds, &rs, &FitOptions::default())?;
    Ok((rs, fit))
}

fn hazard_grid(cfg: &RunConfig, lf: &LimitFunctionals) -> Result<Vec<f64>, CliError> {
    match &cfg.diagnostics.grid {
        Some(grid) => Ok(grid.clone()),
        None => {
            let [lo, hi] = cfg.diagnostics.quantiles;
            Ok(event_quantile_grid(lf, lo, hi, cfg.diagnostics.points)?)
        }
    }
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load_or_default(args.config.config.as_deref())?;
    let mut block = simulation_block(&cfg);
    apply_model(&mut block, &args.model);
    block.n = args.n.unwrap_or(block.n);
    block.seed = args.seed.unwrap_or(block.seed);
    let ds = load_dataset(&RunConfig { data: Some(DataSource::Simulate(block)), ..cfg.clone() })?;
    write_output(args.out.as_deref().or(cfg.output.path.as_deref()), &ds.to_csv())
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.config.as_deref(), args.data.data.as_deref())?;
    let ds = load_dataset(&cfg)?;
    let rs = RiskSets::build(&ds);
    let opts = FitOptions { tol: args.tol, max_iter: args.max_iter, ..FitOptions::default() };
    let fit = fit_mle(&ds, &rs, &opts)?;
    let mut text = fit.to_json();
    text.push('\n');
    write_output(args.out.as_deref().or(cfg.output.path.as_deref()), &text)
}

pub fn posterior(args: PosteriorArgs) -> Result<(), CliError> {
    let mut cfg = load_config(args.config.config.as_deref(), args.data.data.as_deref())?;
    apply_prior(&mut cfg.prior, &args.prior);
    apply_chain(&mut cfg, &args.chain, &args.paths);
    cfg.validate()?;
    let ds = load_dataset(&cfg)?;
    let (rs, fit) = fit_dataset(&ds)?;
    let prior = cfg.prior.build(ds.tau())?;
    let spec = BetaPosteriorSpec::new(ds.clone(), prior)?;
    let chain = sample_beta_posterior(&spec, &fit, cfg.chain.draws, cfg.chain.burn_in, cfg.chain.seed)?;
    eprintln!("acceptance rate {:.3}", chain.acceptance_rate);
    write_output(args.out.as_deref().or(cfg.output.path.as_deref()), &write_beta_draws_csv(&chain.draws))?;

    if let Some(paths_out) = args.paths_out.as_deref().or(cfg.output.paths.as_deref()) {
        let lf = LimitFunctionals::compute(&ds, &rs, &fit.beta_hat)?;
        let grid = hazard_grid(&cfg, &lf)?;
        let c = &cfg.chain;
        let joint =
            sample_joint_posterior(&spec, &fit, c.path_draws, c.burn_in, c.thin, c.epsilon, c.seed.wrapping_add(1))?;
        write_output(Some(paths_out), &write_paths_csv(&joint.paths, &grid))?;
    }
    Ok(())
}

pub fn bvm_check(args: BvmCheckArgs) -> Result<(), CliError> {
    let mut cfg = load_config(args.config.config.as_deref(), args.data.data.as_deref())?;
    apply_prior(&mut cfg.prior, &args.prior);
    apply_chain(&mut cfg, &args.chain, &args.paths);
    if args.no_hazard {
        cfg.diagnostics.hazard = false;
    }
    if let Some(f) = args.format {
        cfg.output.format = f.into();
    }
    cfg.validate()?;
    let thresholds = cfg.diagnostics.thresholds;
    let ds = load_dataset(&cfg)?;
    let n = ds.len();
    let (rs, fit) = fit_dataset(&ds)?;
    let prior = cfg.prior.build(ds.tau())?;
    let meta = Meta { n, p: ds.p(), seed: cfg.chain.seed, prior: prior.describe(), thresholds };
    let spec = BetaPosteriorSpec::new(ds.clone(), prior)?;
    let c = cfg.chain;

    let chain = sample_beta_posterior(&spec, &fit, c.draws, c.burn_in, c.seed)?;
    let beta = bvm_beta_check(&fit, &chain.draws, n, &thresholds)?;
    if let Some(path) = args.density_out.as_deref().or(cfg.output.density.as_deref()) {
        if ds.p() != 1 {
            return Err(CliError::Invalid("density output needs a single covariate".into()));
        }
        let sd = (1.0 / fit.info_hat[(0, 0)]).sqrt();
        let root_n = (n as f64).sqrt();
        let xs: Vec<f64> = chain.draws.iter().map(|b| root_n * (b[0] - fit.beta_hat[0])).collect();
        write_output(Some(path), &density_csv(&xs, |v| normal_pdf(v, 0.0, sd), 0.0, sd)?)?;
    }

    let hazard = if cfg.diagnostics.hazard {
        let lf = LimitFunctionals::compute(&ds, &rs, &fit.beta_hat)?;
        let grid = hazard_grid(&cfg, &lf)?;
        let joint =
            sample_joint_posterior(&spec, &fit, c.path_draws, c.burn_in, c.thin, c.epsilon, c.seed.wrapping_add(1))?;
        if let Some(path) = cfg.output.paths.as_deref() {
            write_output(Some(path), &write_paths_csv(&joint.paths, &grid))?;
        }
        Some(bvm_a_check(&fit, &lf, &joint.paths, &grid, n, &thresholds)?)
    } else {
        None
    };

    let report = BvmReport { meta, beta: Some(beta), hazard, coverage: None };
    write_output(args.out.as_deref().or(cfg.output.path.as_deref()), &emit_report(&report, cfg.output.format))?;
    if !report.passed() && !args.no_assert {
        return Err(CliError::Verdict(failed_checks(&report, &thresholds)));
    }
    Ok(())
}

fn failed_checks(report: &BvmReport, t: &Thresholds) -> String {
    let mut failed = Vec::new();
    if let Some(b) = report.beta.as_ref().filter(|b| !b.verdict) {
        failed.push(format!("beta (ks {:?}, mahalanobis ks {:?}, ess {:?}; thresholds ks {}, ess {})", b.ks, b.mahalanobis_ks, b.ess, t.ks, t.min_ess));
    }
    if let Some(h) = report.hazard.as_ref().filter(|h| !h.verdict) {
        failed.push(format!(
            "hazard (mean gap {:.3e} vs {:.3e}, covariance error {:.3} vs {})",
            h.mean_gap,
            t.mean_gap_factor / report.meta.n as f64,
            h.cov_rel_err,
            t.cov_rel_err
        ));
    }
    failed.join("; ")
}

pub fn coverage(args: CoverageArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load_or_default(args.config.config.as_deref())?;
    apply_prior(&mut cfg.prior, &args.prior);
    let mut block = simulation_block(&cfg);
    apply_model(&mut block, &args.model);
    let cov = &mut cfg.coverage;
    cov.n = args.n.unwrap_or(cov.n);
    cov.replications = args.replications.unwrap_or(cov.replications);
    cov.level = args.level.unwrap_or(cov.level);
    cov.draws = args.chain.draws.unwrap_or(cov.draws);
    cov.burn_in = args.chain.burn_in.unwrap_or(cov.burn_in);
    cov.seed = args.chain.seed.unwrap_or(cov.seed);
    if let Some(f) = args.format {
        cfg.output.format = f.into();
    }
    let cov = cfg.coverage;
    let chain = ChainConfig { draws: cov.draws, burn_in: cov.burn_in };
    let report = coverage_experiment(&block.model, &cfg.prior, cov.n, cov.replications, cov.level, chain, cov.seed)?;
    let meta = Meta {
        n: cov.n,
        p: block.model.p(),
        seed: cov.seed,
        prior: cfg.prior.build(1.0)?.describe(),
        thresholds: cfg.diagnostics.thresholds,
    };
    let report = BvmReport { meta, beta: None, hazard: None, coverage: Some(report) };
    write_output(args.out.as_deref().or(cfg.output.path.as_deref()), &emit_report(&report, cfg.output.format))
}
