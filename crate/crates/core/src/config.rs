//! Run configuration shared by every subcommand.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::CoefficientProfile;
use crate::error::{Error, Result};
use crate::simulator::{GridSpec, InitialData, ModelEquation, SamplerSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Predict,
    Simulate,
    Fit,
    Norms,
    Oracle,
    Verify,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsSettings {
    /// Time slab; defaults to the middle half of the simulated range.
    #[serde(default)]
    pub slab: Option<(f64, f64)>,
    #[serde(default = "default_norm_rmax")]
    pub r_max: f64,
    #[serde(default = "default_norm_cells")]
    pub nt: usize,
    #[serde(default = "default_norm_cells")]
    pub nr: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Shell ratio of the interior cells in the dyadic sweep.
    #[serde(default = "default_h1_base")]
    pub base: f64,
}

fn default_norm_rmax() -> f64 {
    40.0
}
fn default_norm_cells() -> usize {
    160
}
fn default_gamma() -> f64 {
    2.0
}
fn default_h1_base() -> f64 {
    2.0
}

impl Default for NormsSettings {
    fn default() -> Self {
        NormsSettings {
            slab: None,
            r_max: default_norm_rmax(),
            nt: default_norm_cells(),
            nr: default_norm_cells(),
            gamma: default_gamma(),
            base: default_h1_base(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    #[serde(default = "default_sources")]
    pub sources: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_sources() -> usize {
    50
}
fn default_points() -> usize {
    20
}
fn default_resolution() -> usize {
    crate::conversion::MIN_RESOLUTION
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings { sources: default_sources(), points: default_points(), resolution: default_resolution() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub profile: CoefficientProfile,
    #[serde(default)]
    pub ell: u32,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub data: InitialData,
    /// Extra sampling curves for `simulate`; `fixed_r(r0)` is always recorded.
    #[serde(default)]
    pub samplers: Vec<SamplerSpec>,
    #[serde(default = "default_r0")]
    pub r0: f64,
    /// Fit window in `t`; defaults to `[200, 2000]` clipped to the run.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub norms: NormsSettings,
    #[serde(default)]
    pub oracle: OracleSettings,
}

pub fn default_grid() -> GridSpec {
    GridSpec { u_min: 0.0, u_max: 2000.0, v_max: 2010.0, h: 1.0 / 16.0, output_stride: 64 }
}
fn default_r0() -> f64 {
    10.0
}
fn default_tol() -> f64 {
    0.3
}
fn default_eps() -> f64 {
    1e-3
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, with the output directory left out so
    /// that identical runs written to different places share a hash.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { out: None, ..self.clone() };
        let text = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn model(&self) -> ModelEquation {
        let f = |x: Option<num_rational::Rational64>| x.map(|q| *q.numer() as f64 / *q.denom() as f64);
        ModelEquation {
            sigma: f(self.profile.sigma),
            delta: f(self.profile.delta),
            amp_v: self.profile.amp_v,
            amp_h: self.profile.amp_h,
            amp_a: self.profile.amp_a,
            ell: self.ell,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 0.01) {
            return Err(Error::Validation(format!("eps = {} outside (0, 1/100]", self.eps)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Validation(format!("tol = {} must be nonnegative", self.tol)));
        }
        if !(self.r0 >= 0.0) {
            return Err(Error::Validation(format!("r0 = {} must be nonnegative", self.r0)));
        }
        if let Some(p) = &self.input {
            if !p.exists() {
                return Err(Error::usage(format!("input file {} does not exist", p.display())));
            }
        }
        self.grid.validate()
    }

    /// `fit_window`, or `[200, 2000]` clipped to the times reached at `r0`.
    pub fn window(&self) -> (f64, f64) {
        self.fit_window.unwrap_or_else(|| {
            let t_max = (self.grid.u_max + self.r0).min(self.grid.v_max - self.r0);
            let hi = t_max.min(2000.0);
            (200f64.min(hi / 10.0), hi)
        })
    }
}
