//! Run configuration files (TOML).
//!
//! ```toml
//! seed_profile = "canonical"
//!
//! [bundle]
//! n = 1
//! m = 0
//! lambda = 2.0
//!
//! [class]
//! a0 = 1.0
//! b0 = 3.0
//!
//! [grid]
//! rho_min = -30.0
//! rho_max = 30.0
//! count = 2049
//!
//! [time]
//! s_max = 8.0
//! cfl_sigma = 0.2
//!
//! [weight]
//! A = "auto"
//!
//! [outputs]
//! directory = "out/contraction"
//! emit_profiles = true
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::WeightChoice;
use crate::flow::StepController;
use crate::profile::{make_grid, BundleConfig, Grid, KahlerClass};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSection {
    pub n: u32,
    pub m: u32,
    pub lambda: f64,
    #[serde(default = "one")]
    pub base_volume_factor: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSection {
    pub a0: f64,
    pub b0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub rho_min: f64,
    pub rho_max: f64,
    pub count: usize,
}

/// Which time stepper to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub s_max: f64,
    pub cfl_sigma: f64,
    /// Defaults to every 0.5 from 0 to `s_max`.
    #[serde(default)]
    pub checkpoint_list: Option<Vec<f64>>,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
}

fn default_rtol() -> f64 {
    1e-5
}

/// `"auto"` or a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Fixed(f64),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    #[serde(rename = "A")]
    pub a: WeightSpec,
    #[serde(default = "default_radius")]
    pub harnack_radius: f64,
}

fn default_radius() -> f64 {
    crate::diagnostics::DEFAULT_HARNACK_RADIUS
}

impl Default for WeightSection {
    fn default() -> Self {
        WeightSection {
            a: WeightSpec::Keyword("auto".into()),
            harnack_radius: default_radius(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub directory: PathBuf,
    #[serde(default)]
    pub emit_profiles: bool,
    #[serde(default)]
    pub emit_plots_data: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "canonical")]
    pub seed_profile: String,
    pub bundle: BundleSection,
    pub class: ClassSection,
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub weight: WeightSection,
    pub outputs: OutputsSection,
}

fn canonical() -> String {
    "canonical".into()
}

impl RunConfig {
    /// Parse and validate; nothing is touched on disk.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and validate `path`. A relative output directory is resolved
    /// against the directory holding the file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = RunConfig::from_toml(&text)?;
        if cfg.outputs.directory.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.outputs.directory = parent.join(&cfg.outputs.directory);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seed_profile != "canonical" {
            return Err(invalid("seed_profile", "only \"canonical\" is supported"));
        }
        let b = &self.bundle;
        if b.n < 1 {
            return Err(invalid("bundle.n", "must be at least 1"));
        }
        if !b.lambda.is_finite() {
            return Err(invalid("bundle.lambda", "must be finite"));
        }
        if !(b.base_volume_factor > 0.0 && b.base_volume_factor.is_finite()) {
            return Err(invalid("bundle.base_volume_factor", "must be positive"));
        }
        for (field, v) in [("class.a0", self.class.a0), ("class.b0", self.class.b0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        self.grid().map_err(|e| invalid("grid", e.to_string()))?;
        let t = &self.time;
        if !(t.s_max > 0.0 && t.s_max.is_finite()) {
            return Err(invalid("time.s_max", "must be positive"));
        }
        if !(t.cfl_sigma > 0.0 && t.cfl_sigma.is_finite()) {
            return Err(invalid("time.cfl_sigma", "must be positive"));
        }
        if !(t.rtol > 0.0 && t.rtol < 1.0) {
            return Err(invalid("time.rtol", "must lie in (0, 1)"));
        }
        if let Some(list) = &t.checkpoint_list {
            if list.is_empty()
                || list
                    .iter()
                    .any(|s| !(s.is_finite() && *s >= 0.0 && *s <= t.s_max))
                || list.windows(2).any(|w| w[1] <= w[0])
            {
                return Err(invalid(
                    "time.checkpoint_list",
                    "must be increasing values in [0, s_max]",
                ));
            }
        }
        match &self.weight.a {
            WeightSpec::Fixed(a) if !(*a >= 1.0 && a.is_finite()) => {
                return Err(invalid("weight.A", "must be \"auto\" or a number >= 1"));
            }
            WeightSpec::Keyword(k) if k != "auto" => {
                return Err(invalid("weight.A", "must be \"auto\" or a number >= 1"));
            }
            _ => {}
        }
        if !(self.weight.harnack_radius > 0.0) {
            return Err(invalid("weight.harnack_radius", "must be positive"));
        }
        if self.outputs.directory.as_os_str().is_empty() {
            return Err(invalid("outputs.directory", "must not be empty"));
        }
        Ok(())
    }

    pub fn bundle(&self) -> BundleConfig {
        BundleConfig {
            n: self.bundle.n,
            m: self.bundle.m,
            lambda: self.bundle.lambda,
            base_volume_factor: self.bundle.base_volume_factor,
        }
    }

    pub fn class0(&self) -> KahlerClass {
        KahlerClass {
            a: self.class.a0,
            b: self.class.b0,
        }
    }

    pub fn grid(&self) -> crate::Result<Grid> {
        make_grid(self.grid.rho_min, self.grid.rho_max, self.grid.count)
    }

    /// Checkpoints; the default is every 0.5 up to `s_max` (plus `s_max`).
    pub fn schedule(&self) -> Vec<f64> {
        if let Some(list) = &self.time.checkpoint_list {
            return list.clone();
        }
        let mut out: Vec<f64> = (0..)
            .map(|k| 0.5 * k as f64)
            .take_while(|s| *s < self.time.s_max - 1e-12)
            .collect();
        out.push(self.time.s_max);
        out
    }

    pub fn controller(&self) -> StepController {
        match self.time.integrator {
            Integrator::Implicit => StepController::Implicit {
                rtol: self.time.rtol,
                atol: 1e-12,
                dt_max: 0.05,
            },
            Integrator::Explicit => StepController::Explicit {
                sigma: self.time.cfl_sigma,
            },
        }
    }

    pub fn weight_choice(&self) -> WeightChoice {
        match self.weight.a {
            WeightSpec::Fixed(a) => WeightChoice::Fixed(a),
            WeightSpec::Keyword(_) => WeightChoice::Auto,
        }
    }
}
