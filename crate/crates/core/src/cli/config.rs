//! The JSON run configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::haarsim::Sampler;
use crate::predictions::{hex, MomentRequest, PredictionOptions, Quantity};
use crate::splinefourier::TestFunctionSpec;

/// Master seed used when a config gives none.
pub const DEFAULT_SEED: u64 = 20_240_917;

pub const DEFAULT_SAMPLES: usize = 100_000;

pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Largest acceptable `|z|` in a comparison.
    #[serde(default = "default_z")]
    pub z_threshold: f64,
    /// Absolute tolerance of the box quadratures behind the predictions.
    #[serde(default = "default_quad_tol")]
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            z_threshold: DEFAULT_Z_THRESHOLD,
            quadrature: DEFAULT_QUAD_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Number of functions. With a single entry in `functions` that entry is repeated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub functions: Vec<TestFunctionSpec>,
    #[serde(default = "default_quantities")]
    pub quantities: Vec<Quantity>,
    #[serde(rename = "ensemble_N", default = "default_ensemble_n")]
    pub ensemble_n: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Output,
}

fn default_quantities() -> Vec<Quantity> {
    vec![Quantity::C]
}

fn default_ensemble_n() -> Vec<usize> {
    vec![40]
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_z() -> f64 {
    DEFAULT_Z_THRESHOLD
}

fn default_quad_tol() -> f64 {
    DEFAULT_QUAD_TOL
}

/// Quantities whose formulas need `Σσ < 4`.
fn needs_support_condition(q: Quantity) -> bool {
    matches!(
        q,
        Quantity::C | Quantity::C2 | Quantity::CEven | Quantity::COdd | Quantity::GaussianLimit
    )
}

impl RunConfig {
    /// Parses a JSON document, reporting the failing field path with line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!(
                "at `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip(e))))
    }

    /// The per-index specs after expanding a repeated entry.
    pub fn specs(&self) -> Result<Vec<TestFunctionSpec>> {
        match (self.n, self.functions.len()) {
            (_, 0) => Err(Error::Config("`functions` must not be empty".into())),
            (None, _) => Ok(self.functions.clone()),
            (Some(0), _) => Err(Error::Config("`n` must be at least 1".into())),
            (Some(n), 1) => Ok(vec![self.functions[0].clone(); n]),
            (Some(n), m) if n == m => Ok(self.functions.clone()),
            (Some(n), m) => Err(Error::Config(format!(
                "`n` is {n} but `functions` has {m} entries"
            ))),
        }
    }

    pub fn request(&self) -> Result<MomentRequest> {
        let phis = self
            .specs()?
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.build()
                    .map_err(|e| Error::Config(format!("functions[{i}]: {}", strip(e))))
            })
            .collect::<Result<Vec<_>>>()?;
        MomentRequest::new(phis)
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        let req = self.request()?;
        if self.quantities.iter().any(|&q| needs_support_condition(q)) {
            req.check_support()?;
        }
        if self.quantities.is_empty() {
            return Err(Error::Config("`quantities` must not be empty".into()));
        }
        if self.ensemble_n.is_empty() || self.ensemble_n.contains(&0) {
            return Err(Error::Config(
                "`ensemble_N` needs at least one entry, all at least 1".into(),
            ));
        }
        if self.samples < 100 {
            return Err(Error::Config(format!(
                "`samples` must be at least 100, got {}",
                self.samples
            )));
        }
        let t = &self.tolerances;
        if !(t.z_threshold > 0.0) || !(t.quadrature > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn prediction_options(&self) -> PredictionOptions {
        let mut opts = PredictionOptions::default();
        opts.box_spec = opts.box_spec.with_tol(self.tolerances.quadrature);
        opts
    }

    /// SHA-256 of the canonical JSON of everything except the output settings.
    ///
    /// Keys are sorted and floats use their shortest round-trip form, so the hash does not
    /// depend on the platform or on how the file was written.
    pub fn config_hash(&self) -> String {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = doc.as_object_mut() {
            map.remove("output");
        }
        hex(&Sha256::digest(doc.to_string().as_bytes()))
    }

    /// Seed of the Monte Carlo run for one quantity at one rank.
    pub fn run_seed(&self, quantity: Quantity, ensemble_n: usize) -> u64 {
        let tag = format!("{}/{}/{}", self.seed, quantity.name(), ensemble_n);
        let digest = Sha256::digest(tag.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }
}

/// The message of a config error without its variant prefix.
fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
