//! Run configuration.
//!
//! A TOML file supplies every setting; command-line overrides are applied on
//! top. Relative paths in the file resolve against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ingest::DatasetFormat;
use crate::backend::BackendProfile;
use crate::engine::EngineSettings;
use crate::error::{Error, Result};
use crate::eval::BaselineKind;

fn default_depth() -> u32 {
    2
}

fn default_backend() -> String {
    "mock".into()
}

fn default_workers() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub format: DatasetFormat,
    pub out: PathBuf,
    #[serde(default = "default_depth")]
    pub depth: u32,
    /// `mock` or the id of one of `profiles`.
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default)]
    pub baselines: Vec<BaselineKind>,
    /// Ingest and report only; no generation past unification.
    #[serde(default)]
    pub no_infill: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplars_dir: Option<PathBuf>,
    #[serde(default)]
    pub engine: EngineSettings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<BackendProfile>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub format: Option<DatasetFormat>,
    pub depth: Option<u32>,
    pub text_candidates: Option<usize>,
    pub image_candidates: Option<usize>,
    pub backend: Option<String>,
    pub baselines: Option<Vec<BaselineKind>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub no_infill: bool,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.dataset);
        resolve(&mut cfg.out);
        for dir in [&mut cfg.templates_dir, &mut cfg.exemplars_dir].into_iter().flatten() {
            resolve(dir);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.dataset {
            self.dataset = v;
        }
        if let Some(v) = o.format {
            self.format = v;
        }
        if let Some(v) = o.depth {
            self.depth = v;
        }
        if let Some(v) = o.text_candidates {
            self.engine.text_candidates = v;
        }
        if let Some(v) = o.image_candidates {
            self.engine.image_candidates = v;
        }
        if let Some(v) = o.backend {
            self.backend = v;
        }
        if let Some(v) = o.baselines {
            self.baselines = v;
        }
        if let Some(v) = o.seed {
            self.engine.seed = v;
        }
        if let Some(v) = o.out {
            self.out = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        self.no_infill |= o.no_infill;
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let e = &self.engine;
        for (name, v) in [
            ("text_candidates", e.text_candidates),
            ("image_candidates", e.image_candidates),
            ("unify_candidates", e.unify_candidates),
            ("summary_candidates", e.summary_candidates),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(e.candidate_temperature.is_finite() && e.candidate_temperature >= 0.0) {
            return Err(Error::Config("candidate_temperature must be finite and ≥ 0".into()));
        }
        self.profile().map(|_| ())
    }

    /// The selected backend profile.
    pub fn profile(&self) -> Result<BackendProfile> {
        if let Some(p) = self.profiles.iter().find(|p| p.id == self.backend) {
            p.validate()?;
            return Ok(p.clone());
        }
        if self.backend == "mock" {
            return Ok(BackendProfile::mock());
        }
        Err(Error::Config(format!("no backend profile with id {:?}", self.backend)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses a comma-separated baseline list such as `cot_plus_coi,random`.
pub fn parse_baselines(list: &str) -> Result<Vec<BaselineKind>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}
