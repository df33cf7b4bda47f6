//! Run directories.
//!
//! Every file of a run goes through one [`RunWriter`], after the computation
//! has finished, so a directory never mixes outputs of different runs. The
//! writer records what it wrote in `manifest.json`:
//!
//! ```json
//! {
//!   "format": "fplab-run",
//!   "version": 1,
//!   "command": "run",
//!   "scenario": "hopf",
//!   "params": {"b": 1.0},
//!   "measures": [{"eps": 0.2, "role": "primary", "family": "uniform", "path": "measures/eps_0.2.json"}],
//!   "files": ["config.toml", "measures/eps_0.2.json", "metrics.csv", "summary.json"]
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fplab::doc::Document;
use fplab::DiscreteMeasure;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const RUN_FORMAT: &str = "fplab-run";

/// Which family a stored measure belongs to within a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    /// The run's main family (uniform, designed or tapered).
    Primary,
    /// Uniform comparison family of a designed run.
    Uniform,
    /// Reflecting comparison family of a tapered run.
    Reflecting,
    /// Monte-Carlo occupation measures.
    MonteCarlo,
}

impl Role {
    fn dir(self) -> &'static str {
        match self {
            Role::Primary => "measures",
            Role::Uniform => "measures/uniform",
            Role::Reflecting => "measures/reflecting",
            Role::MonteCarlo => "measures/mc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEntry {
    pub eps: f64,
    pub role: Role,
    pub family: String,
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub scenario: String,
    pub params: BTreeMap<String, f64>,
    pub measures: Vec<MeasureEntry>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST);
        let s = fs::read_to_string(&path).map_err(|e| {
            CliError::config("run_dir", format!("cannot read {}: {e}", path.display()))
        })?;
        let m: Manifest = serde_json::from_str(&s)
            .map_err(|e| CliError::config("run_dir", format!("{}: {e}", path.display())))?;
        if m.format != RUN_FORMAT {
            return Err(CliError::config(
                "run_dir",
                format!("{} is not an fplab run manifest", path.display()),
            ));
        }
        Ok(m)
    }

    /// Measures of one role in stored (schedule) order.
    pub fn measures(&self, role: Role) -> impl Iterator<Item = &MeasureEntry> {
        self.measures.iter().filter(move |m| m.role == role)
    }
}

pub struct RunWriter {
    root: PathBuf,
    files: Vec<String>,
    measures: Vec<MeasureEntry>,
}

impl RunWriter {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(RunWriter {
            root: root.to_path_buf(),
            files: vec![],
            measures: vec![],
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn text(&mut self, rel: &str, content: &str) -> CliResult<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, content)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(())
    }

    pub fn json(&mut self, rel: &str, value: &impl Serialize) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(rel, &s)
    }

    pub fn document(&mut self, rel: &str, doc: &Document) -> CliResult<()> {
        let mut s = doc.to_json()?;
        s.push('\n');
        self.text(rel, &s)
    }

    /// Stores a measure as `<role dir>/eps_<ε>.json` with `eps` and `family` in `meta`.
    pub fn measure(
        &mut self,
        role: Role,
        family: &str,
        eps: f64,
        mu: &DiscreteMeasure,
    ) -> CliResult<()> {
        let rel = format!("{}/eps_{eps}.json", role.dir());
        let doc = Document::from_measure(mu)
            .with_meta("eps", eps)
            .with_meta("family", family);
        self.document(&rel, &doc)?;
        self.measures.push(MeasureEntry {
            eps,
            role,
            family: family.into(),
            path: rel,
        });
        Ok(())
    }

    /// Writes the manifest; call once, last.
    pub fn finish(
        mut self,
        command: &str,
        scenario: &str,
        params: &BTreeMap<String, f64>,
    ) -> CliResult<Manifest> {
        let mut files = self.files.clone();
        files.push(MANIFEST.into());
        let m = Manifest {
            format: RUN_FORMAT.into(),
            version: 1,
            command: command.into(),
            scenario: scenario.into(),
            params: params.clone(),
            measures: std::mem::take(&mut self.measures),
            files,
        };
        self.json(MANIFEST, &m)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fplab::Grid2D;

    #[test]
    fn manifest_lists_what_was_written() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::line(-1.0, 1.0, 8).unwrap();
        let mut w = RunWriter::create(dir.path()).unwrap();
        w.measure(Role::Primary, "uniform", 0.1, &DiscreteMeasure::uniform(&g))
            .unwrap();
        w.text("metrics.csv", "eps\n0.1\n").unwrap();
        let m = w.finish("solve", "ou", &BTreeMap::new()).unwrap();
        assert_eq!(
            m.files,
            ["measures/eps_0.1.json", "metrics.csv", "manifest.json"]
        );
        let back = Manifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        let e = &back.measures(Role::Primary).next().unwrap();
        let doc = Document::read(dir.path().join(&e.path)).unwrap();
        assert_eq!(doc.meta_f64("eps").unwrap(), 0.1);
        assert_eq!(doc.to_measure().unwrap(), DiscreteMeasure::uniform(&g));
    }
}
