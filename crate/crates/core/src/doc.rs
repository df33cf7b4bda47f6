//! Self-describing field document shared by every on-disk artifact.
//!
//! ```json
//! {
//!   "format": "fplab-doc",
//!   "version": 1,
//!   "kind": "measure",
//!   "grid": {"x_min": -2.5, "x_max": 2.5, "y_min": -2.5, "y_max": 2.5, "nx": 200, "ny": 200},
//!   "components": ["w"],
//!   "values": [ ... ],
//!   "meta": { ... }
//! }
//! ```
//!
//! `values` is cell-major and row-major: the entry for component `c` of cell
//! `(i, j)` sits at `(j * nx + i) * components.len() + c`. Floats are written
//! with shortest round-trip formatting, so reloading is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::field::{DiffusionField, ScalarField, Sym2, VectorField};
use crate::grid::Grid2D;
use crate::measure::DiscreteMeasure;

pub const FORMAT: &str = "fplab-doc";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocKind {
    Measure,
    VectorField,
    DiffusionField,
    ScalarField,
    Certificate,
    Attractor,
    ShapingProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub format: String,
    pub version: u32,
    pub kind: DocKind,
    pub grid: Grid2D,
    pub components: Vec<String>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub meta: Map<String, Value>,
}

impl Document {
    pub fn new(kind: DocKind, grid: &Grid2D, components: &[&str], values: Vec<f64>) -> Self {
        Document {
            format: FORMAT.into(),
            version: VERSION,
            kind,
            grid: grid.clone(),
            components: components.iter().map(|s| s.to_string()).collect(),
            values,
            meta: Map::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64> {
        self.meta
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Document(format!("missing numeric meta field '{key}'")))
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Document(format!("missing string meta field '{key}'")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Document(format!(
                "unsupported format {} v{}",
                self.format, self.version
            )));
        }
        if self.values.len() != self.grid.len() * self.components.len() {
            return Err(Error::Document(format!(
                "expected {} values, found {}",
                self.grid.len() * self.components.len(),
                self.values.len()
            )));
        }
        Ok(())
    }

    fn expect(&self, kind: DocKind, components: &[&str]) -> Result<()> {
        self.validate()?;
        if self.kind != kind || self.components != components {
            return Err(Error::Document(format!(
                "expected {kind:?} with components {components:?}, found {:?} {:?}",
                self.kind, self.components
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: Document = serde_json::from_str(s)?;
        d.validate()?;
        Ok(d)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_measure(mu: &DiscreteMeasure) -> Self {
        Document::new(DocKind::Measure, mu.grid(), &["w"], mu.weights().to_vec())
    }

    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        self.expect(DocKind::Measure, &["w"])?;
        DiscreteMeasure::new(&self.grid, self.values.clone())
    }

    pub fn from_vector_field(v: &VectorField) -> Self {
        let values = v.values().iter().flat_map(|p| *p).collect();
        Document::new(DocKind::VectorField, v.grid(), &["vx", "vy"], values)
    }

    pub fn to_vector_field(&self) -> Result<VectorField> {
        self.expect(DocKind::VectorField, &["vx", "vy"])?;
        let values = self.values.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        VectorField::from_values(&self.grid, values)
    }

    pub fn from_diffusion_field(a: &DiffusionField) -> Self {
        let values = a
            .values()
            .iter()
            .flat_map(|m| [m.a11, m.a12, m.a22])
            .collect();
        Document::new(
            DocKind::DiffusionField,
            a.grid(),
            &["a11", "a12", "a22"],
            values,
        )
    }

    pub fn to_diffusion_field(&self) -> Result<DiffusionField> {
        self.expect(DocKind::DiffusionField, &["a11", "a12", "a22"])?;
        let values = self
            .values
            .chunks_exact(3)
            .map(|c| Sym2::new(c[0], c[1], c[2]))
            .collect();
        DiffusionField::from_values(&self.grid, values)
    }

    pub fn from_scalar_field(kind: DocKind, name: &str, u: &ScalarField) -> Self {
        Document::new(kind, u.grid(), &[name], u.values().to_vec())
    }

    pub fn to_scalar_field(&self) -> Result<ScalarField> {
        self.validate()?;
        if self.components.len() != 1 {
            return Err(Error::Document("expected a single component".into()));
        }
        ScalarField::from_values(&self.grid, self.values.clone())
    }
}
