//! Executes a [`RunConfig`] and persists the run directory.

use std::collections::BTreeMap;
use std::time::Instant;

use fplab::analysis::DICTIONARY_VERSION;
use fplab::doc::Document;
use fplab::scenarios::{
    run_boundary_comparison, run_cross_oracle, run_designed_comparison, run_gibbs, run_hopf_sweep,
    Check, HopfLevels, MetricRow, RunConfigEcho, Scenario, ScenarioResult,
};
use fplab::{DiscreteMeasure, Exec, Grid2D, InvarianceMode, NullFamilySchedule};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Assertion, At, Rule, RunConfig, Shaping, DEFAULT_TAPER_WIDTH};
use crate::error::{CliError, CliResult};
use crate::writer::{Manifest, Role, RunWriter};

pub const WORKERS_ENV: &str = "FPLAB_WORKERS";

/// `FPLAB_WORKERS`, if set.
pub fn env_workers() -> CliResult<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::config(
                WORKERS_ENV,
                format!("must be a positive integer, got '{s}'"),
            )),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a pool of `workers` threads (the rayon default when `None`).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> CliResult<R> {
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start {n} workers: {e}")))?;
        return Ok(pool.install(f));
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    Ok(f())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub metric: String,
    pub rule: Rule,
    pub pass: bool,
    pub detail: String,
}

/// Measures stored next to the primary family.
#[derive(Clone, Debug)]
pub struct Companion {
    pub role: Role,
    pub family: String,
    pub measures: Vec<(f64, DiscreteMeasure)>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: RunConfig,
    pub result: ScenarioResult,
    pub companions: Vec<Companion>,
    /// Designed runs: the shaping profile.
    pub profile: Option<Document>,
    /// Shaping-specific details for the summary.
    pub extra: BTreeMap<String, Value>,
    pub assertions: Vec<AssertionOutcome>,
    pub wall_time_s: f64,
    pub workers: Option<usize>,
}

impl RunOutput {
    pub fn failed(&self) -> Vec<String> {
        self.assertions
            .iter()
            .filter(|a| !a.pass)
            .map(|a| a.name.clone())
            .collect()
    }

    pub fn pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn summary(&self) -> Value {
        json!({
            "config": self.config,
            "result": self.result.summary(),
            "extra": self.extra,
            "assertions": self.assertions,
            "pass": self.pass(),
            "wall_time_s": self.wall_time_s,
            "workers": self.workers,
            "parallel": cfg!(feature = "parallel"),
        })
    }

    /// Config echo, measures, profile, `metrics.csv`, `summary.json`, manifest.
    pub fn write(&self, writer: RunWriter) -> CliResult<Manifest> {
        let mut w = writer;
        w.text("config.toml", &self.config.to_toml())?;
        let family = self.result.config.family.clone();
        for s in &self.result.solutions {
            w.measure(Role::Primary, &family, s.eps, &s.measure)?;
        }
        for c in &self.companions {
            for (eps, mu) in &c.measures {
                w.measure(c.role, &c.family, *eps, mu)?;
            }
        }
        if let Some(p) = &self.profile {
            w.document("profile.json", p)?;
        }
        w.text("metrics.csv", &self.result.to_csv())?;
        w.json("summary.json", &self.summary())?;
        w.finish(
            "run",
            &self.config.scenario.name,
            &self.config.scenario.params,
        )
    }
}

/// Computes the run on the configured worker pool and evaluates its assertions.
pub fn execute(cfg: &RunConfig) -> CliResult<RunOutput> {
    cfg.validate()?;
    let workers = match cfg.workers {
        Some(n) => Some(n),
        None => env_workers()?,
    };
    let start = Instant::now();
    let mut out = with_workers(workers, || compute(cfg))??;
    out.wall_time_s = start.elapsed().as_secs_f64();
    out.workers = workers;
    out.assertions = cfg
        .analysis
        .assertions
        .iter()
        .enumerate()
        .map(|(i, a)| evaluate(i, a, &out.result))
        .collect::<CliResult<_>>()?;
    Ok(out)
}

/// [`execute`], then write the run directory at `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> CliResult<(RunOutput, Manifest)> {
    let out = execute(cfg)?;
    let manifest = out.write(RunWriter::create(&cfg.output_dir)?)?;
    Ok((out, manifest))
}

fn uniform_schedule(
    scenario: &Scenario,
    grid: &Grid2D,
    eps: &[f64],
) -> fplab::Result<NullFamilySchedule> {
    NullFamilySchedule::scaled(grid, eps, |_, _| scenario.base, InvarianceMode::Reflecting)
}

fn compute(cfg: &RunConfig) -> CliResult<RunOutput> {
    let scenario = cfg.scenario()?;
    let grid = cfg.grid()?;
    let eps = &cfg.schedule.eps;
    let exec = Exec::Parallel;
    let mut out = RunOutput {
        config: cfg.clone(),
        result: empty_result(&scenario, &grid, eps),
        companions: vec![],
        profile: None,
        extra: BTreeMap::new(),
        assertions: vec![],
        wall_time_s: 0.0,
        workers: None,
    };
    match cfg.schedule.shaping {
        Shaping::Uniform => {
            let schedule = uniform_schedule(&scenario, &grid, eps)?;
            out.result = if scenario.name == "hopf" {
                let mut levels = HopfLevels::for_b(scenario.b().unwrap_or(0.0));
                if let Some(r) = cfg.analysis.rho_m {
                    levels.rho_m = r;
                }
                if let Some(m) = &cfg.analysis.rho_mesh {
                    levels.rhos = m.clone();
                }
                out.extra.insert("levels".into(), json!(levels));
                run_hopf_sweep(&scenario, &schedule, &grid, &levels, exec)?
            } else {
                let levels = cfg
                    .analysis
                    .rho_mesh
                    .as_deref()
                    .map(|m| (cfg.analysis.rho_m.expect("validated with the mesh"), m));
                run_gibbs(&scenario, &schedule, &grid, levels, exec)?
            };
            if let Some(s) = &cfg.sampler {
                let sampler = s.to_sampler(cfg.seed);
                let solved: Vec<f64> = out.result.rows.iter().map(|r| r.eps).collect();
                let (rows, pairs) = run_cross_oracle(&scenario, &solved, &grid, &sampler, exec)?;
                for (row, cross) in out.result.rows.iter_mut().zip(&rows) {
                    row.values.insert("mc_bl".into(), cross.bl);
                    row.values.insert("mc_radial_w1".into(), cross.radial_w1);
                    row.values
                        .insert("mc_large_jump_fraction".into(), cross.large_jump_fraction);
                    row.values.insert(
                        "mc_drift_resolved_fraction".into(),
                        cross.drift_resolved_fraction,
                    );
                }
                out.companions.push(Companion {
                    role: Role::MonteCarlo,
                    family: "monte-carlo".into(),
                    measures: solved
                        .iter()
                        .copied()
                        .zip(pairs.into_iter().map(|p| p.1))
                        .collect(),
                });
                out.result.config.seed = Some(cfg.seed);
                out.extra.insert("sampler".into(), json!(sampler));
            }
        }
        Shaping::Designed => {
            let target = cfg.schedule.target.as_deref().expect("validated");
            let ratio = cfg.schedule.ratio.expect("validated");
            let p = run_designed_comparison(&scenario, target, ratio, eps, &grid, exec)?;
            let dominates = p.dominates_everywhere();
            let mut designed = p.designed;
            for (i, row) in designed.rows.iter_mut().enumerate() {
                if let Some(u) = p.uniform.rows.iter().find(|u| u.eps == row.eps) {
                    for (k, v) in &u.values {
                        row.values.insert(format!("uniform_{k}"), *v);
                    }
                }
                if let Some(&d) = p.dominance.get(i) {
                    row.values
                        .insert("dominance".into(), if d { 1.0 } else { 0.0 });
                }
            }
            designed.checks.push(Check {
                name: "dominance".into(),
                pass: dominates,
                detail: format!("{} per eps: {:?}", p.metric, p.dominance),
            });
            out.companions.push(Companion {
                role: Role::Uniform,
                family: "uniform".into(),
                measures: p
                    .uniform
                    .solutions
                    .iter()
                    .map(|s| (s.eps, s.measure.clone()))
                    .collect(),
            });
            out.profile = Some(p.family.to_document());
            out.extra.insert("target".into(), json!(p.target));
            out.extra.insert("kind".into(), json!(p.kind));
            out.extra.insert("dominance_metric".into(), json!(p.metric));
            out.extra.insert("band".into(), json!(p.band));
            out.extra
                .insert("uniform_failures".into(), json!(p.uniform.failures));
            out.result = designed;
        }
        Shaping::Tapered => {
            let width = cfg.schedule.taper_width.unwrap_or(DEFAULT_TAPER_WIDTH);
            let c = run_boundary_comparison(&scenario, eps, &grid, width, exec)?;
            let mut result = empty_result(&scenario, &grid, eps);
            result.config.family = "tapered".into();
            result.config.invariance_mode = InvarianceMode::VanishingAtBoundary;
            result.rows = c
                .rows
                .iter()
                .map(|r| MetricRow {
                    eps: r.eps,
                    values: BTreeMap::from([
                        ("bl_reflecting".to_string(), r.bl),
                        ("l1_reflecting".to_string(), r.l1),
                        ("edge_mass_reflecting".to_string(), r.edge_mass_reflecting),
                        ("edge_mass_tapered".to_string(), r.edge_mass_tapered),
                    ]),
                })
                .collect();
            result.solutions = c.tapered;
            out.companions.push(Companion {
                role: Role::Reflecting,
                family: "uniform".into(),
                measures: c
                    .reflecting
                    .into_iter()
                    .map(|s| (s.eps, s.measure))
                    .collect(),
            });
            out.extra.insert("taper_width".into(), json!(width));
            out.result = result;
        }
    }
    if let Some(r) = cfg.schedule.ratio {
        out.result.config.ratio = Some(r);
    }
    Ok(out)
}

fn empty_result(scenario: &Scenario, grid: &Grid2D, eps: &[f64]) -> ScenarioResult {
    ScenarioResult {
        config: RunConfigEcho {
            scenario: scenario.name.clone(),
            params: scenario.params.clone(),
            grid: grid.clone().into(),
            eps: eps.to_vec(),
            family: "uniform".into(),
            ratio: None,
            seed: None,
            dictionary_version: DICTIONARY_VERSION.into(),
            invariance_mode: InvarianceMode::Reflecting,
        },
        solutions: vec![],
        rows: vec![],
        checks: vec![],
        failures: vec![],
    }
}

fn available(result: &ScenarioResult) -> String {
    let mut names: Vec<&String> = result.rows.iter().flat_map(|r| r.values.keys()).collect();
    names.sort();
    names.dedup();
    names
        .iter()
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn evaluate(i: usize, a: &Assertion, result: &ScenarioResult) -> CliResult<AssertionOutcome> {
    let field = format!("analysis.assertions[{i}].metric");
    let outcome = |pass: bool, detail: String| AssertionOutcome {
        name: a.name.clone(),
        metric: a.metric.clone(),
        rule: a.rule,
        pass,
        detail,
    };
    if a.rule == Rule::Check {
        let c = result.check(&a.metric).ok_or_else(|| {
            let names: Vec<&str> = result.checks.iter().map(|c| c.name.as_str()).collect();
            CliError::config(
                &field,
                format!(
                    "no check named '{}' (available: {})",
                    a.metric,
                    names.join(", ")
                ),
            )
        })?;
        return Ok(outcome(c.pass, c.detail.clone()));
    }
    let series = result.series(&a.metric).ok_or_else(|| {
        CliError::config(
            &field,
            format!(
                "metric '{}' is missing from some rows (available: {})",
                a.metric,
                available(result)
            ),
        )
    })?;
    if series.is_empty() {
        return Ok(outcome(false, "no solved members".into()));
    }
    let detail = format!("{} = {series:?}", a.metric);
    let pass = match a.rule {
        Rule::Increasing => series.windows(2).all(|w| w[1] > w[0]),
        Rule::Decreasing => series.windows(2).all(|w| w[1] < w[0]),
        Rule::AtLeast | Rule::AtMost => {
            let t = a.threshold.expect("validated");
            let ok = |x: f64| match a.rule {
                Rule::AtLeast => x >= t,
                _ => x <= t,
            };
            match a.at {
                At::Last => ok(*series.last().expect("non-empty")),
                At::Every => series.iter().all(|&x| ok(x)),
            }
        }
        Rule::Check => unreachable!("handled above"),
    };
    Ok(outcome(pass, detail))
}
