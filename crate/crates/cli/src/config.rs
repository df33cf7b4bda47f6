//! The run configuration document.
//!
//! A run is described by one TOML file:
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/hopf-b1"
//!
//! [scenario]
//! name = "hopf"
//! params = { b = 1.0 }
//!
//! [grid]            # optional; fields override the scenario's default grid
//! nx = 200
//! ny = 200
//!
//! [schedule]
//! eps = [0.2, 0.1, 0.05, 0.02]
//! shaping = "uniform"   # or "designed" (needs target, ratio) or "tapered"
//!
//! [analysis]
//! [[analysis.assertions]]
//! name = "annulus-concentrates"
//! metric = "mass_annulus"
//! rule = "at-least"
//! threshold = 0.85
//! ```
//!
//! Command-line overrides (`--set schedule.ratio=4`) are applied to the
//! parsed TOML table before validation, so they obey the same rules.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use fplab::analysis::DICTIONARY_VERSION;
use fplab::grid::GridSpec;
use fplab::scenarios::{Scenario, SCENARIOS};
use fplab::sde::SamplerConfig;
use fplab::Grid2D;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; `FPLAB_WORKERS` or the rayon default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub scenario: ScenarioConfig,
    #[serde(default, skip_serializing_if = "GridConfig::is_empty")]
    pub grid: GridConfig,
    pub schedule: ScheduleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSection>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("fplab-run")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Overrides of the scenario's default grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
}

impl GridConfig {
    pub fn is_empty(&self) -> bool {
        *self == GridConfig::default()
    }

    pub fn resolve(&self, default: GridSpec) -> fplab::Result<Grid2D> {
        Grid2D::try_from(GridSpec {
            x_min: self.x_min.unwrap_or(default.x_min),
            x_max: self.x_max.unwrap_or(default.x_max),
            y_min: self.y_min.unwrap_or(default.y_min),
            y_max: self.y_max.unwrap_or(default.y_max),
            nx: self.nx.unwrap_or(default.nx),
            ny: self.ny.unwrap_or(default.ny),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shaping {
    /// `A = ε·base` everywhere.
    #[default]
    Uniform,
    /// A designed family for `schedule.target`, compared with uniform noise.
    Designed,
    /// Diffusion tapering to the box boundary, compared with reflection.
    Tapered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub eps: Vec<f64>,
    #[serde(default)]
    pub shaping: Shaping,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taper_width: Option<f64>,
}

pub const DEFAULT_TAPER_WIDTH: f64 = 0.4;

/// Monte-Carlo cross-check of every member; the RNG seed is the run's `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub dt: f64,
    pub t_total: f64,
    pub n_paths: usize,
    /// 20% of `t_total` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_burn: Option<f64>,
}

impl SamplerSection {
    pub fn to_sampler(&self, seed: u64) -> SamplerConfig {
        let mut s = SamplerConfig::new(self.dt, self.t_total, self.n_paths, seed);
        if let Some(b) = self.t_burn {
            s.t_burn = b;
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_dictionary")]
    pub dictionary_version: String,
    /// `ρ_m` of the fitted upper-bound certificate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_m: Option<f64>,
    /// Levels at which exterior mass is compared with its bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_mesh: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assertions: Vec<Assertion>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            dictionary_version: default_dictionary(),
            rho_m: None,
            rho_mesh: None,
            assertions: vec![],
        }
    }
}

fn default_dictionary() -> String {
    DICTIONARY_VERSION.into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    AtLeast,
    AtMost,
    /// Strictly increasing along the schedule.
    Increasing,
    /// Strictly decreasing along the schedule.
    Decreasing,
    /// `metric` names a verdict computed by the sweep, e.g. `upper_bound`.
    Check,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum At {
    /// The smallest `ε`.
    #[default]
    Last,
    Every,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub name: String,
    pub metric: String,
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub at: At,
}

/// Dotted path of the offending key: the serde path, extended by the field
/// named in unknown/missing-field messages.
fn error_field(path: &str, message: &str) -> String {
    let mut field = if path == "." {
        String::new()
    } else {
        path.to_string()
    };
    for marker in ["unknown field `", "missing field `"] {
        if let Some(rest) = message.split(marker).nth(1) {
            if let Some(leaf) = rest.split('`').next() {
                // unknown-field paths already end in the key
                if field == leaf || field.ends_with(&format!(".{leaf}")) {
                    break;
                }
                if !field.is_empty() {
                    field.push('.');
                }
                field.push_str(leaf);
            }
            break;
        }
    }
    if field.is_empty() {
        "config".into()
    } else {
        field
    }
}

impl RunConfig {
    /// Parses, applies `key=value` overrides, and validates.
    pub fn from_toml_str(s: &str, overrides: &[String]) -> CliResult<Self> {
        let mut table: toml::Table = s
            .parse()
            .map_err(|e: toml::de::Error| CliError::config("config", e.message()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig =
            serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
                let path = e.path().to_string();
                let message = e.into_inner().message().to_string();
                CliError::config(error_field(&path, &message), message)
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| {
            CliError::config("config", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&s, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn scenario(&self) -> CliResult<Scenario> {
        if !SCENARIOS.contains(&self.scenario.name.as_str()) {
            return Err(CliError::config(
                "scenario.name",
                format!(
                    "unknown scenario '{}' (expected one of {})",
                    self.scenario.name,
                    SCENARIOS.join(", ")
                ),
            ));
        }
        Scenario::by_name(&self.scenario.name, &self.scenario.params)
            .map_err(|e| CliError::config("scenario.params", e))
    }

    pub fn grid(&self) -> CliResult<Grid2D> {
        let s = self.scenario()?;
        self.grid
            .resolve(s.default_grid()?.into())
            .map_err(|e| CliError::config("grid", e))
    }

    pub fn validate(&self) -> CliResult<()> {
        let scenario = self.scenario()?;
        self.grid()?;
        if self.output_dir.as_os_str().is_empty() {
            return Err(CliError::config("output_dir", "must not be empty"));
        }
        if self.workers == Some(0) {
            return Err(CliError::config("workers", "must be at least 1"));
        }
        validate_eps(&self.schedule.eps).map_err(|m| CliError::config("schedule.eps", m))?;
        let sch = &self.schedule;
        match sch.shaping {
            Shaping::Designed => {
                let target = sch.target.as_deref().ok_or_else(|| {
                    CliError::config("schedule.target", "required for designed shaping")
                })?;
                scenario.target(target).map_err(|_| {
                    CliError::config(
                        "schedule.target",
                        format!(
                            "scenario {} has no target '{target}' (available: {})",
                            scenario.name,
                            scenario.target_names().join(", ")
                        ),
                    )
                })?;
                match sch.ratio {
                    Some(r) if r >= 1.0 && r.is_finite() => {}
                    Some(r) => {
                        return Err(CliError::config(
                            "schedule.ratio",
                            format!("must be a finite number >= 1, got {r}"),
                        ))
                    }
                    None => {
                        return Err(CliError::config(
                            "schedule.ratio",
                            "required for designed shaping",
                        ))
                    }
                }
            }
            Shaping::Tapered => {
                if let Some(w) = sch.taper_width {
                    if !(w > 0.0 && w.is_finite()) {
                        return Err(CliError::config(
                            "schedule.taper_width",
                            format!("must be positive, got {w}"),
                        ));
                    }
                }
            }
            Shaping::Uniform => {}
        }
        if sch.shaping != Shaping::Designed && (sch.target.is_some() || sch.ratio.is_some()) {
            return Err(CliError::config(
                "schedule.target",
                "target and ratio apply to designed shaping only",
            ));
        }
        if let Some(s) = &self.sampler {
            if sch.shaping != Shaping::Uniform {
                return Err(CliError::config(
                    "sampler",
                    "the Monte-Carlo cross-check runs with uniform shaping only",
                ));
            }
            s.to_sampler(self.seed)
                .validate()
                .map_err(|e| CliError::config("sampler", e))?;
        }
        self.validate_analysis(&scenario)
    }

    fn validate_analysis(&self, scenario: &Scenario) -> CliResult<()> {
        let a = &self.analysis;
        if a.dictionary_version != DICTIONARY_VERSION {
            return Err(CliError::config(
                "analysis.dictionary_version",
                format!(
                    "unsupported dictionary '{}' (this build provides {DICTIONARY_VERSION})",
                    a.dictionary_version
                ),
            ));
        }
        if let Some(r) = a.rho_m {
            if !(r > 0.0 && r.is_finite()) {
                return Err(CliError::config(
                    "analysis.rho_m",
                    format!("must be positive, got {r}"),
                ));
            }
        }
        if let Some(mesh) = &a.rho_mesh {
            let rho_m = match (a.rho_m, scenario.name.as_str()) {
                (Some(r), _) => r,
                (None, "hopf") => {
                    fplab::scenarios::HopfLevels::for_b(scenario.b().unwrap_or(0.0)).rho_m
                }
                (None, _) => {
                    return Err(CliError::config(
                        "analysis.rho_m",
                        "required when analysis.rho_mesh is set",
                    ))
                }
            };
            if mesh.is_empty()
                || !mesh.windows(2).all(|w| w[1] > w[0])
                || mesh.iter().any(|&r| !(r > rho_m && r.is_finite()))
            {
                return Err(CliError::config(
                    "analysis.rho_mesh",
                    format!("must be non-empty, strictly increasing and above rho_m = {rho_m}"),
                ));
            }
        }
        let mut names = BTreeSet::new();
        for (i, x) in a.assertions.iter().enumerate() {
            let field = |f: &str| format!("analysis.assertions[{i}].{f}");
            if x.name.trim().is_empty() {
                return Err(CliError::config(field("name"), "must not be empty"));
            }
            if !names.insert(x.name.as_str()) {
                return Err(CliError::config(
                    field("name"),
                    format!("duplicate assertion name '{}'", x.name),
                ));
            }
            if x.metric.trim().is_empty() {
                return Err(CliError::config(field("metric"), "must not be empty"));
            }
            match (x.rule, x.threshold) {
                (Rule::AtLeast | Rule::AtMost, Some(t)) if t > 0.0 && t < 1.0 => {}
                (Rule::AtLeast | Rule::AtMost, Some(t)) => {
                    return Err(CliError::config(
                        field("threshold"),
                        format!("must lie in (0, 1), got {t}"),
                    ))
                }
                (Rule::AtLeast | Rule::AtMost, None) => {
                    return Err(CliError::config(
                        field("threshold"),
                        "required for at-least and at-most rules",
                    ))
                }
                (_, Some(_)) => {
                    return Err(CliError::config(
                        field("threshold"),
                        "only at-least and at-most rules take a threshold",
                    ))
                }
                (_, None) => {}
            }
        }
        Ok(())
    }
}

/// Non-empty, positive, finite and strictly decreasing.
pub fn validate_eps(eps: &[f64]) -> Result<(), String> {
    if eps.is_empty() {
        return Err("must list at least one noise level".into());
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(format!("noise levels must be positive and finite, got {e}"));
    }
    if !eps.windows(2).all(|w| w[1] < w[0]) {
        return Err(format!("must be strictly decreasing, got {eps:?}"));
    }
    Ok(())
}

/// Sets a dotted key to a TOML scalar (or inline array); bare words become strings.
fn apply_override(table: &mut toml::Table, spec: &str) -> CliResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(spec, "override must look like key=value"))?;
    let key = key.trim();
    let value: toml::Value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(key, "empty key segment in override"));
    }
    let mut t = table;
    for p in &parts[..parts.len() - 1] {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(key, format!("'{p}' is not a table")))?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOPF: &str = r#"
seed = 3
output_dir = "out"

[scenario]
name = "hopf"
params = { b = 1.0 }

[grid]
nx = 40
ny = 40

[schedule]
eps = [0.2, 0.1]

[[analysis.assertions]]
name = "annulus"
metric = "mass_annulus"
rule = "at-least"
threshold = 0.5
"#;

    fn field_of(e: CliError) -> String {
        match e {
            CliError::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::from_toml_str(HOPF, &[]).unwrap();
        assert_eq!(c.analysis.dictionary_version, DICTIONARY_VERSION);
        let back = RunConfig::from_toml_str(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn increasing_eps_names_the_field() {
        let bad = HOPF.replace("[0.2, 0.1]", "[0.1, 0.2]");
        let e = RunConfig::from_toml_str(&bad, &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(field_of(e), "schedule.eps");
    }

    #[test]
    fn threshold_outside_unit_interval() {
        let e = RunConfig::from_toml_str(HOPF, &["analysis.assertions=[]".into()]);
        assert!(e.is_ok());
        let bad = HOPF.replace("threshold = 0.5", "threshold = 1.5");
        let e = RunConfig::from_toml_str(&bad, &[]).unwrap_err();
        assert_eq!(field_of(e), "analysis.assertions[0].threshold");
    }

    #[test]
    fn overrides_and_unknown_names() {
        let c = RunConfig::from_toml_str(HOPF, &["grid.nx=50".into(), "seed=9".into()]).unwrap();
        assert_eq!((c.grid.nx, c.seed), (Some(50), 9));
        let e = RunConfig::from_toml_str(HOPF, &["scenario.name=lorenz".into()]).unwrap_err();
        assert_eq!(field_of(e), "scenario.name");
        let e = RunConfig::from_toml_str(HOPF, &["scenario.params.c=1".into()]).unwrap_err();
        assert_eq!(field_of(e), "scenario.params");
        let e = RunConfig::from_toml_str(HOPF, &["schedule.shape=\"x\"".into()]).unwrap_err();
        assert_eq!(field_of(e), "schedule.shape");
        let e =
            RunConfig::from_toml_str("[scenario]\nname = \"ou\"\n[schedule]\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "schedule.eps");
    }

    #[test]
    fn designed_needs_target_and_ratio() {
        let dw = r#"
[scenario]
name = "double-well"
[schedule]
eps = [0.2]
shaping = "designed"
"#;
        let e = RunConfig::from_toml_str(dw, &[]).unwrap_err();
        assert_eq!(field_of(e), "schedule.target");
        let e = RunConfig::from_toml_str(dw, &["schedule.target=left-well".into()]).unwrap_err();
        assert_eq!(field_of(e), "schedule.ratio");
        let ok = RunConfig::from_toml_str(
            dw,
            &[
                "schedule.target=left-well".into(),
                "schedule.ratio=10".into(),
            ],
        )
        .unwrap();
        assert_eq!(ok.schedule.ratio, Some(10.0));
        let e = RunConfig::from_toml_str(
            dw,
            &["schedule.target=cycle".into(), "schedule.ratio=10".into()],
        )
        .unwrap_err();
        assert_eq!(field_of(e), "schedule.target");
    }

    #[test]
    fn rho_mesh_needs_a_level_outside_hopf() {
        let ou = "[scenario]\nname = \"ou\"\n[schedule]\neps = [0.1]\n";
        let e = RunConfig::from_toml_str(ou, &["analysis.rho_mesh=[1.2, 2.0]".into()]).unwrap_err();
        assert_eq!(field_of(e), "analysis.rho_m");
        let e = RunConfig::from_toml_str(
            ou,
            &[
                "analysis.rho_mesh=[1.2, 0.5]".into(),
                "analysis.rho_m=1".into(),
            ],
        )
        .unwrap_err();
        assert_eq!(field_of(e), "analysis.rho_mesh");
    }
}
