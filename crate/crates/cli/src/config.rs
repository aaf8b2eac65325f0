//! Run configuration: a TOML file plus command-line overrides. The resolved
//! configuration is written next to every run's outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zhk_core::bifurcation::{BranchConfig, ModelParams};
use zhk_core::energy::LandscapeConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub output: PathBuf,
    pub seed: u64,
    /// Single lattice shape `(Re τ, Im τ)`.
    pub tau: Option<[f64; 2]>,
    pub tau_grid: Option<TauGrid>,
    pub model: ModelConfig,
    pub numerics: Numerics,
    pub branch: BranchOptions,
    pub landscape: LandscapeOptions,
    pub verify: VerifyOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TauGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub n_re: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub n_im: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub chi: f64,
    pub g: f64,
    /// Taylor coefficients `V'''(0), V''''(0), ...`.
    pub higher: Vec<f64>,
    /// `V(0)`; the double-well value `χ²/(2g)` when absent.
    pub v0: Option<f64>,
    /// Applied field for a single branch point.
    pub b: Option<f64>,
    pub n: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub grid_n: usize,
    pub m_max: usize,
    pub m_cap: usize,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub step: f64,
    pub s_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchOptions {
    pub s_values: Vec<f64>,
    pub self_dual: bool,
    pub verify: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeOptions {
    pub mu: f64,
    pub asymptotic_only: bool,
    pub refine: bool,
    pub refine_tol: f64,
    pub hessian_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub quick: bool,
    pub cocycle_twist: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            output: PathBuf::from("out"),
            seed: 20240611,
            tau: None,
            tau_grid: None,
            model: ModelConfig::default(),
            numerics: Numerics::default(),
            branch: BranchOptions::default(),
            landscape: LandscapeOptions::default(),
            verify: VerifyOptions::default(),
        }
    }
}

impl Default for TauGrid {
    fn default() -> Self {
        let l = LandscapeConfig::default();
        TauGrid { re_min: l.re_min, re_max: l.re_max, n_re: l.n_re, im_min: l.im_min, im_max: l.im_max, n_im: l.n_im }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { chi: 1.0, g: 2.0, higher: Vec::new(), v0: None, b: None, n: 1 }
    }
}

impl Default for Numerics {
    fn default() -> Self {
        let b = BranchConfig::default();
        Numerics {
            grid_n: b.n_grid,
            m_max: b.m_max,
            m_cap: b.m_cap,
            newton_tol: b.newton_tol,
            max_iter: b.max_iter,
            step: b.step,
            s_max: b.s_max,
        }
    }
}

impl Default for BranchOptions {
    fn default() -> Self {
        BranchOptions { s_values: (1..=10).map(|k| k as f64 / 100.0).collect(), self_dual: false, verify: false }
    }
}

impl Default for LandscapeOptions {
    fn default() -> Self {
        let l = LandscapeConfig::default();
        LandscapeOptions { mu: l.mu, asymptotic_only: false, refine: l.refine, refine_tol: l.refine_tol, hessian_step: l.hessian_step }
    }
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { quick: false, cocycle_twist: None }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let n = &self.numerics;
        let positive = [
            ("newton_tol", n.newton_tol),
            ("step", n.step),
            ("s_max", n.s_max),
            ("refine_tol", self.landscape.refine_tol),
            ("hessian_step", self.landscape.hessian_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if n.grid_n < 4 || n.grid_n % 2 == 1 {
            return Err(CliError::Config(format!("grid_n must be even and at least 4, got {}", n.grid_n)));
        }
        if n.m_cap < n.m_max {
            return Err(CliError::Config("m_cap must be at least m_max".into()));
        }
        if let Some(g) = &self.tau_grid {
            if g.n_re == 0 || g.n_im == 0 {
                return Err(CliError::Config("tau grid must have at least one node per direction".into()));
            }
        }
        Ok(())
    }

    pub fn tau(&self) -> num_complex::Complex64 {
        let t = self.tau.unwrap_or([0.0, 1.0]);
        num_complex::Complex64::new(t[0], t[1])
    }

    /// Model at field `b` (default `χ`).
    pub fn model(&self) -> ModelParams {
        let m = &self.model;
        let mut p = ModelParams::double_well(m.chi, m.g, m.b.unwrap_or(m.chi));
        p.higher = m.higher.clone();
        p.n = m.n;
        if let Some(v0) = m.v0 {
            p.v0 = v0;
        }
        p
    }

    pub fn branch_config(&self) -> BranchConfig {
        let n = &self.numerics;
        BranchConfig {
            n_grid: n.grid_n,
            m_max: n.m_max,
            m_cap: n.m_cap,
            newton_tol: n.newton_tol,
            max_iter: n.max_iter,
            s_max: n.s_max,
            step: n.step,
            self_dual: self.branch.self_dual,
        }
    }

    pub fn landscape_config(&self) -> LandscapeConfig {
        let g = self.tau_grid.clone().unwrap_or_default();
        let l = &self.landscape;
        LandscapeConfig {
            re_min: g.re_min,
            re_max: g.re_max,
            im_min: g.im_min,
            im_max: g.im_max,
            n_re: g.n_re,
            n_im: g.n_im,
            mu: l.mu,
            refine: l.refine,
            refine_tol: l.refine_tol,
            hessian_step: l.hessian_step,
        }
    }
}
