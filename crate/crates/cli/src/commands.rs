//! Subcommands of the `fplab` binary.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fplab::analysis::{
    convergence_report, ConvergenceReport, ReportSpec, TestFunctionDictionary, DICTIONARY_VERSION,
};
use fplab::designer::{verify_repelling_equilibrium, TargetKind};
use fplab::doc::Document;
use fplab::dynamics::{
    approximate_attractor, fit_operator_certificate, verify_lyapunov, verify_operator_lyapunov,
    CertificateSpec, EnsembleConfig,
};
use fplab::fpe::{solve_family, AssembleOptions};
use fplab::scenarios::{boundary_level, design_for_target, HopfLevels, Scenario};
use fplab::sde::{occupation_measure, SamplerConfig};
use fplab::{
    DiffusionField, Drift, Exec, Grid2D, InvarianceMode, NullFamilySchedule, ScalarField,
    VectorField,
};
use serde_json::json;

use crate::config::{
    validate_eps, AnalysisConfig, GridConfig, RunConfig, ScenarioConfig, ScheduleConfig,
};
use crate::error::{CliError, CliResult};
use crate::pipeline::{env_workers, run, with_workers};
use crate::writer::{Manifest, Role, RunWriter};

#[derive(Debug, Parser)]
#[command(
    name = "fplab",
    version,
    about = "Stationary Fokker-Planck measures under vanishing noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// ou, gibbs-quadratic, double-well or hopf.
    #[arg(long)]
    pub scenario: String,
    /// Scenario parameter as key=value, e.g. `--param b=0.25`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Cells along x (default: the scenario's grid).
    #[arg(long)]
    pub nx: Option<usize>,
    /// Cells along y.
    #[arg(long)]
    pub ny: Option<usize>,
}

impl ScenarioArgs {
    fn resolve(&self) -> CliResult<(Scenario, Grid2D)> {
        let params: BTreeMap<String, f64> = self.params.iter().cloned().collect();
        let scenario = Scenario::by_name(&self.scenario, &params).map_err(|e| match e {
            fplab::Error::UnknownScenario(_) => CliError::config("--scenario", e),
            e => CliError::config("--param", e),
        })?;
        let grid = GridConfig {
            nx: self.nx,
            ny: self.ny,
            ..GridConfig::default()
        }
        .resolve(scenario.default_grid()?.into())
        .map_err(|e| CliError::config("--nx/--ny", e))?;
        Ok((scenario, grid))
    }
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("'{v}' is not a number"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DesignTarget {
    Attractor,
    Repeller,
    Equilibrium,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Primary,
    Uniform,
    Reflecting,
    MonteCarlo,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Primary => Role::Primary,
            RoleArg::Uniform => Role::Uniform,
            RoleArg::Reflecting => Role::Reflecting,
            RoleArg::MonteCarlo => Role::MonteCarlo,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the stationary equation for `A = ε·base` at each ε.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Strictly decreasing noise levels, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo occupation measures for `A = ε·base` at each ε.
    Sample {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        t_total: f64,
        #[arg(long, default_value_t = 64)]
        n_paths: usize,
        /// Burn-in time (default 20% of t_total).
        #[arg(long)]
        t_burn: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convergence diagnostics for the measures of a run directory.
    Verify {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value = "primary")]
        role: RoleArg,
        /// Levels of the scenario's certificate for exterior masses.
        #[arg(long, value_delimiter = ',')]
        rho: Vec<f64>,
        /// Output directory (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Design a noise family for a target set, or test a repelling equilibrium.
    DesignNoise {
        #[arg(long, value_enum)]
        target: DesignTarget,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Shaping ratio `R = max s / min s` (attractor and repeller targets).
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Named target of the scenario (default: the first of the requested kind).
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hopf sweep for one value of b.
    Hopf {
        #[arg(long, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Cells per side (default 200).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        anisotropy: Option<f64>,
        #[arg(long, default_value = "fplab-hopf")]
        out: PathBuf,
        /// Config override key=value; repeatable.
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Execute a run configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `scenario.name`.
        #[arg(long)]
        scenario: Option<String>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Config override key=value, e.g. `--set schedule.ratio=4`; repeatable.
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Ensemble approximation of the attractor (or repeller) of the drift.
    FindAttractor {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1024)]
        ensemble: usize,
        #[arg(long, default_value_t = 40.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Integrate the reversed flow.
        #[arg(long)]
        reverse: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the scenario's certificate U against the flow or one operator.
    VerifyLyapunov {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        rho_m: f64,
        /// Required rate; fitted from the operator when omitted with --eps.
        #[arg(long)]
        gamma: Option<f64>,
        /// Upper level (default: smallest boundary value of U).
        #[arg(long)]
        rho_max: Option<f64>,
        /// Increasing (anti-Lyapunov) condition.
        #[arg(long)]
        anti: bool,
        /// Check `a:D²U + V·∇U` for `A = ε·base` instead of the flow alone.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve { scenario, eps, out } => solve(&scenario, &eps, out),
        Command::Sample {
            scenario,
            eps,
            dt,
            t_total,
            n_paths,
            t_burn,
            seed,
            out,
        } => {
            let mut cfg = SamplerConfig::new(dt, t_total, n_paths, seed);
            if let Some(b) = t_burn {
                cfg.t_burn = b;
            }
            sample(&scenario, &eps, cfg, out)
        }
        Command::Verify {
            run_dir,
            role,
            rho,
            out,
        } => verify(run_dir, role.into(), rho, out),
        Command::DesignNoise {
            target,
            scenario,
            ratio,
            eps,
            name,
            out,
        } => design_noise(target, &scenario, ratio, &eps, name, out),
        Command::Hopf {
            b,
            eps,
            n,
            anisotropy,
            out,
            set,
        } => {
            let mut params = BTreeMap::from([("b".to_string(), b)]);
            if let Some(a) = anisotropy {
                params.insert("anisotropy".into(), a);
            }
            let n = n.unwrap_or(200);
            let cfg = RunConfig {
                seed: 0,
                output_dir: out,
                workers: None,
                scenario: ScenarioConfig {
                    name: "hopf".into(),
                    params,
                },
                grid: GridConfig {
                    nx: Some(n),
                    ny: Some(n),
                    ..GridConfig::default()
                },
                schedule: ScheduleConfig {
                    eps,
                    shaping: Default::default(),
                    target: None,
                    ratio: None,
                    taper_width: None,
                },
                sampler: None,
                analysis: AnalysisConfig::default(),
            };
            let cfg = RunConfig::from_toml_str(&cfg.to_toml(), &set)?;
            run_config(&cfg)
        }
        Command::Run {
            config,
            scenario,
            out,
            set,
        } => {
            let mut set = set;
            if let Some(s) = scenario {
                set.push(format!("scenario.name=\"{s}\""));
            }
            if let Some(o) = out {
                let o = o
                    .to_string_lossy()
                    .replace('\\', "\\\\")
                    .replace('"', "\\\"");
                set.push(format!("output_dir=\"{o}\""));
            }
            let cfg = RunConfig::load(&config, &set)?;
            run_config(&cfg)
        }
        Command::FindAttractor {
            scenario,
            ensemble,
            t_end,
            dt,
            reverse,
            out,
        } => find_attractor(&scenario, ensemble, t_end, dt, reverse, out),
        Command::VerifyLyapunov {
            scenario,
            rho_m,
            gamma,
            rho_max,
            anti,
            eps,
            out,
        } => verify_certificate(&scenario, rho_m, gamma, rho_max, anti, eps, out),
    }
}

/// Runs a config, writes its directory, and reports every assertion.
pub fn run_config(cfg: &RunConfig) -> CliResult<()> {
    let (out, manifest) = run(cfg)?;
    println!(
        "{}: {} members in {:.2} s, {} files in {}",
        cfg.scenario.name,
        out.result.rows.len(),
        out.wall_time_s,
        manifest.files.len(),
        cfg.output_dir.display()
    );
    for (eps, msg) in &out.result.failures {
        println!("  member eps = {eps} failed: {msg}");
    }
    for a in &out.assertions {
        println!(
            "  [{}] {}: {}",
            if a.pass { "PASS" } else { "FAIL" },
            a.name,
            a.detail
        );
    }
    let failed = out.failed();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(failed))
    }
}

fn eps_list(eps: &[f64]) -> CliResult<()> {
    validate_eps(eps).map_err(|m| CliError::config("--eps", m))
}

fn uniform(scenario: &Scenario, grid: &Grid2D, eps: &[f64]) -> CliResult<NullFamilySchedule> {
    Ok(NullFamilySchedule::scaled(
        grid,
        eps,
        |_, _| scenario.base,
        InvarianceMode::Reflecting,
    )?)
}

fn solve(args: &ScenarioArgs, eps: &[f64], out: PathBuf) -> CliResult<()> {
    eps_list(eps)?;
    let (scenario, grid) = args.resolve()?;
    let schedule = uniform(&scenario, &grid, eps)?;
    let outcome = with_workers(env_workers()?, || {
        solve_family(
            &scenario,
            &schedule,
            &grid,
            AssembleOptions::default(),
            Exec::Parallel,
        )
    })?;
    let mut w = RunWriter::create(&out)?;
    for s in &outcome.solutions {
        w.measure(Role::Primary, "uniform", s.eps, &s.measure)?;
        println!(
            "eps = {}: {:?}, residual {:.2e}",
            s.eps, s.report.method, s.report.residual
        );
    }
    let failures: Vec<(f64, String)> = outcome
        .failures
        .iter()
        .map(|(e, err)| (*e, err.to_string()))
        .collect();
    for (e, m) in &failures {
        println!("eps = {e}: failed: {m}");
    }
    w.json(
        "summary.json",
        &json!({
            "scenario": scenario.name,
            "params": scenario.params,
            "grid": grid,
            "eps": eps,
            "reports": outcome.solutions.iter().map(|s| (s.eps, &s.report)).collect::<Vec<_>>(),
            "failures": failures,
        }),
    )?;
    w.finish("solve", &scenario.name, &scenario.params)?;
    if outcome.solutions.is_empty() {
        return Err(CliError::Runtime("no member could be solved".into()));
    }
    Ok(())
}

fn sample(args: &ScenarioArgs, eps: &[f64], cfg: SamplerConfig, out: PathBuf) -> CliResult<()> {
    eps_list(eps)?;
    cfg.validate()
        .map_err(|e| CliError::config("--dt/--t-total/--n-paths/--t-burn", e))?;
    let (scenario, grid) = args.resolve()?;
    let results = with_workers(env_workers()?, || {
        eps.iter()
            .map(|&e| {
                let a = DiffusionField::constant(&grid, scenario.diffusion(e))?;
                occupation_measure(&scenario, &a, &grid, &cfg, Exec::Parallel)
            })
            .collect::<Vec<_>>()
    })?;
    let mut w = RunWriter::create(&out)?;
    let mut diagnostics = vec![];
    let mut failures = vec![];
    for (&e, r) in eps.iter().zip(results) {
        match r {
            Ok((mu, diag)) => {
                w.measure(Role::Primary, "monte-carlo", e, &mu)?;
                println!(
                    "eps = {e}: large jumps {:.4}, bootstrap L1 {:.3e}",
                    diag.large_jump_fraction, diag.bootstrap_l1
                );
                diagnostics.push((e, diag));
            }
            Err(err) => {
                println!("eps = {e}: failed: {err}");
                failures.push((e, err.to_string()));
            }
        }
    }
    w.json(
        "summary.json",
        &json!({
            "scenario": scenario.name,
            "params": scenario.params,
            "grid": grid,
            "eps": eps,
            "sampler": cfg,
            "diagnostics": diagnostics,
            "failures": failures,
        }),
    )?;
    w.finish("sample", &scenario.name, &scenario.params)?;
    if diagnostics.is_empty() {
        return Err(CliError::Runtime("no member could be sampled".into()));
    }
    Ok(())
}

/// Region masses tracked by `verify` for each scenario.
fn default_regions(scenario: &Scenario, grid: &Grid2D) -> Vec<(String, Vec<bool>)> {
    if grid.is_line() {
        return vec![];
    }
    match scenario.name.as_str() {
        "hopf" => {
            let rb = scenario.b().unwrap_or(0.0).max(0.0).sqrt();
            let mut r = vec![
                (
                    "origin".to_string(),
                    grid.cells()
                        .map(|c| c.radius() < 0.3 * rb.max(1.0))
                        .collect(),
                ),
                (
                    "core".to_string(),
                    grid.cells().map(|c| c.radius() < 0.2).collect(),
                ),
            ];
            if rb > 0.0 {
                r.push((
                    "annulus".into(),
                    grid.cells()
                        .map(|c| (c.radius() - rb).abs() < 0.15)
                        .collect(),
                ));
            }
            r
        }
        "double-well" => vec![(
            "left".to_string(),
            grid.cells().map(|c| c.x < 0.0).collect(),
        )],
        _ => vec![],
    }
}

fn verify(run_dir: PathBuf, role: Role, rhos: Vec<f64>, out: Option<PathBuf>) -> CliResult<()> {
    let manifest = Manifest::read(&run_dir)?;
    let scenario = Scenario::by_name(&manifest.scenario, &manifest.params)
        .map_err(|e| CliError::config("run_dir", e))?;
    let entries: Vec<_> = manifest.measures(role).collect();
    if entries.is_empty() {
        return Err(CliError::config(
            "--role",
            format!("the run stores no {role:?} measures"),
        ));
    }
    let measures = entries
        .iter()
        .map(|e| Ok((e.eps, Document::read(run_dir.join(&e.path))?.to_measure()?)))
        .collect::<CliResult<Vec<_>>>()?;
    let grid = measures[0].1.grid().clone();
    if !rhos.windows(2).all(|w| w[1] > w[0]) || rhos.iter().any(|r| !(*r > 0.0)) {
        return Err(CliError::config(
            "--rho",
            "levels must be positive and increasing",
        ));
    }
    let v = VectorField::sample(&grid, |x, y| scenario.eval(x, y))?;
    let u = ScalarField::sample(&grid, |x, y| scenario.certificate(x, y))?;
    let dict = TestFunctionDictionary::standard(&grid)?;
    let regions = default_regions(&scenario, &grid);
    let rows = with_workers(env_workers()?, || {
        measures
            .iter()
            .map(|(eps, mu)| {
                let reference = scenario.reference_measure(&grid, *eps)?;
                let spec = ReportSpec {
                    v: &v,
                    dict: &dict,
                    reference: Some(&reference),
                    level: (!rhos.is_empty()).then_some(&u),
                    rhos: rhos.clone(),
                    regions: regions.clone(),
                };
                Ok(convergence_report(&[(*eps, mu)], &spec, Exec::Parallel)?
                    .rows
                    .remove(0))
            })
            .collect::<fplab::Result<Vec<_>>>()
    })??;
    let report = ConvergenceReport {
        dictionary_version: DICTIONARY_VERSION.into(),
        rhos,
        rows,
    };
    report.validate()?;
    for r in &report.rows {
        println!(
            "eps = {}: BL to reference {:.4e}, residual max {:.4e}",
            r.eps,
            r.bl_distance.unwrap_or(f64::NAN),
            r.residual_max
        );
    }
    // verify only adds files; the run's manifest stays as written
    let mut w = RunWriter::create(out.as_deref().unwrap_or(&run_dir))?;
    w.json("report.json", &report)?;
    w.text("report.csv", &report.to_csv())?;
    Ok(())
}

fn design_noise(
    target: DesignTarget,
    args: &ScenarioArgs,
    ratio: Option<f64>,
    eps: &[f64],
    name: Option<String>,
    out: PathBuf,
) -> CliResult<()> {
    eps_list(eps)?;
    let (scenario, grid) = args.resolve()?;
    let kind = match target {
        DesignTarget::Attractor => TargetKind::Attractor,
        DesignTarget::Repeller => TargetKind::Repeller,
        DesignTarget::Equilibrium => return equilibrium(&scenario, &grid, eps, out),
    };
    let ratio = ratio.ok_or_else(|| CliError::config("--ratio", "required for this target"))?;
    let name = match name {
        Some(n) => n,
        None => scenario
            .target_names()
            .iter()
            .find(|n| scenario.target(n).is_ok_and(|p| p.kind == kind))
            .ok_or_else(|| {
                CliError::config(
                    "--target",
                    format!("scenario {} has no {kind:?} target", scenario.name),
                )
            })?
            .to_string(),
    };
    let preset = scenario
        .target(&name)
        .map_err(|e| CliError::config("--name", e))?;
    if preset.kind != kind {
        return Err(CliError::config(
            "--name",
            format!("{name} is a {:?}, not a {kind:?}", preset.kind),
        ));
    }
    let d = design_for_target(&scenario, &name, ratio, eps, &grid)?;
    let mut w = RunWriter::create(&out)?;
    w.document("profile.json", &d.family.to_document())?;
    w.json(
        "schedule.json",
        &json!({
            "scenario": scenario.name,
            "params": scenario.params,
            "target": name,
            "kind": d.kind,
            "ratio": ratio,
            "eps": eps,
            "member": "A_k(x) = eps_k * s(x) * I with s from profile.json",
            "invariance_mode": d.family.schedule.invariance_mode(),
            "levels": d.family.levels,
            "split_level": d.family.split_level,
            "ratio_condition": d.family.ratio_condition,
            "gradient_cap": d.family.gradient_cap,
            "transition_cells": d.family.transition_cells,
            "global_gamma": d.global_gamma,
            "band": d.band,
        }),
    )?;
    w.finish("design-noise", &scenario.name, &scenario.params)?;
    println!(
        "{name} ({:?}): R = {ratio}, ratio condition {:.3}, band constant {:.4e}",
        d.kind, d.family.ratio_condition, d.band.constant
    );
    Ok(())
}

/// Repelling-equilibrium test of the origin for Hopf with `b > 0` under
/// uniform noise, with the levels of [`HopfLevels`].
fn equilibrium(scenario: &Scenario, grid: &Grid2D, eps: &[f64], out: PathBuf) -> CliResult<()> {
    let b = scenario.b().unwrap_or(0.0);
    if scenario.name != "hopf" || b <= 0.0 {
        return Err(CliError::config(
            "--scenario",
            "the equilibrium target needs the hopf scenario with b > 0",
        ));
    }
    let levels = HopfLevels::for_b(b);
    let schedule = uniform(scenario, grid, eps)?;
    let solutions = with_workers(env_workers()?, || {
        solve_family(
            scenario,
            &schedule,
            grid,
            AssembleOptions::default(),
            Exec::Parallel,
        )
        .into_result()
    })??;
    let v = VectorField::sample(grid, |x, y| scenario.eval(x, y))?;
    let u = ScalarField::sample(grid, |x, y| x * x + y * y)?;
    let measures: Vec<_> = solutions.iter().map(|s| &s.measure).collect();
    let verdict = verify_repelling_equilibrium(
        [0.0, 0.0],
        &v,
        &u,
        &schedule,
        &measures,
        levels.eq_rho0,
        levels.eq_rho_bar,
    )?;
    let mut w = RunWriter::create(&out)?;
    for s in &solutions {
        w.measure(Role::Primary, "uniform", s.eps, &s.measure)?;
    }
    w.json("verdict.json", &verdict)?;
    w.finish("design-noise", &scenario.name, &scenario.params)?;
    println!(
        "C = {:.4}, template {:.4e}, masses {:?}",
        verdict.constant,
        verdict.template,
        verdict.members.iter().map(|m| m.mass).collect::<Vec<_>>()
    );
    if verdict.pass {
        Ok(())
    } else {
        Err(CliError::Assertion(vec!["repelling_equilibrium".into()]))
    }
}

fn find_attractor(
    args: &ScenarioArgs,
    ensemble: usize,
    t_end: f64,
    dt: f64,
    reverse: bool,
    out: PathBuf,
) -> CliResult<()> {
    let (scenario, grid) = args.resolve()?;
    let cfg = EnsembleConfig {
        ensemble_size: ensemble,
        t_end,
        dt,
        time_reversed: reverse,
        exec: Exec::Parallel,
    };
    let a = with_workers(env_workers()?, || {
        approximate_attractor(&scenario, &grid, &cfg, None, None)
    })??;
    let mut w = RunWriter::create(&out)?;
    w.document("attractor.json", &a.to_document())?;
    w.finish("find-attractor", &scenario.name, &scenario.params)?;
    println!(
        "{:?}: {} cells, diameter {:.4}, {} tracked, {} escaped",
        a.kind,
        a.flagged().iter().filter(|&&f| f).count(),
        a.diameter,
        a.tracked,
        a.escaped
    );
    Ok(())
}

fn verify_certificate(
    args: &ScenarioArgs,
    rho_m: f64,
    gamma: Option<f64>,
    rho_max: Option<f64>,
    anti: bool,
    eps: Option<f64>,
    out: PathBuf,
) -> CliResult<()> {
    let (scenario, grid) = args.resolve()?;
    let v = VectorField::sample(&grid, |x, y| scenario.eval(x, y))?;
    let u = ScalarField::sample(&grid, |x, y| scenario.certificate(x, y))?;
    let base = if anti {
        CertificateSpec::anti(rho_m, gamma.unwrap_or(0.0))
    } else {
        CertificateSpec::lyapunov(rho_m, gamma.unwrap_or(0.0))
    };
    let spec = base.with_rho_max(rho_max.unwrap_or_else(|| boundary_level(&u)));
    let cert = match (eps, gamma) {
        (Some(e), g) => {
            let a = DiffusionField::constant(&grid, scenario.diffusion(e))?;
            if g.is_some() {
                verify_operator_lyapunov(&u, &v, &a, spec)
            } else {
                fit_operator_certificate(&u, &v, &a, spec)
            }
        }
        (None, Some(_)) => verify_lyapunov(&u, &v, spec),
        (None, None) => {
            return Err(CliError::config(
                "--gamma",
                "required unless --eps selects an operator to fit",
            ))
        }
    };
    let cert = match cert {
        Ok(c) => c,
        Err(e @ (fplab::Error::Violation { .. } | fplab::Error::CertificateFail { .. })) => {
            println!("certificate rejected: {e}");
            return Err(CliError::Assertion(vec!["certificate".into()]));
        }
        Err(e) => return Err(e.into()),
    };
    let mut w = RunWriter::create(&out)?;
    w.document("certificate.json", &cert.to_document())?;
    w.finish("verify-lyapunov", &scenario.name, &scenario.params)?;
    println!(
        "certificate holds: gamma = {:.6}, levels ({}, {}), worst margin {:.3e}, slack {:.3e}",
        cert.spec.gamma, cert.spec.rho_m, cert.spec.rho_max, cert.worst_margin, cert.slack
    );
    Ok(())
}
