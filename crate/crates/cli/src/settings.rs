//! Run configuration file and flag/file/default resolution.

use std::path::Path;

use anyhow::{bail, Context};
use nhcool_core::config::{BondOverride, ChainConfig, ModeOverride};
use serde::Deserialize;

use crate::cli::{Common, Method, Range};

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub n_modes: Option<usize>,
    pub t: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    pub kappa: Option<f64>,
    pub n_th: Option<f64>,
    pub t0: Option<f64>,
    pub kappa0: Option<f64>,
    pub cutoff: Option<usize>,
    pub tol: Option<f64>,
    pub output: Option<String>,
    #[serde(default)]
    pub bond: Vec<BondOverride>,
    #[serde(default)]
    pub mode: Vec<ModeOverride>,
    #[serde(default)]
    pub rabi: RabiFile,
    #[serde(default)]
    pub sweep_a: SweepAFile,
    #[serde(default)]
    pub chain_profile: ChainProfileFile,
    #[serde(default)]
    pub scaling: ScalingFile,
    #[serde(default)]
    pub attached: AttachedFile,
    #[serde(default)]
    pub steady: SteadyFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiFile {
    pub grid: Option<usize>,
    pub periods: Option<f64>,
    pub initial_site: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAFile {
    pub range: Option<Range>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainProfileFile {
    pub lengths: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingFile {
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub kappas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttachedFile {
    pub kappa0_range: Option<Range>,
    pub t0_range: Option<Range>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyFile {
    pub method: Option<Method>,
}

impl RunFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Canonical parameters: e^A = 2, kappa = 0.01 t, n_th = 1.
#[derive(Debug, Clone, Copy)]
pub struct ChainDefaults {
    pub n_modes: usize,
    pub t: f64,
    pub a: f64,
    pub kappa: f64,
    pub n_th: f64,
}

impl Default for ChainDefaults {
    fn default() -> Self {
        Self {
            n_modes: 2,
            t: 1.0,
            a: std::f64::consts::LN_2,
            kappa: 0.01,
            n_th: 1.0,
        }
    }
}

pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flags and file merged for one run.
pub struct Settings {
    pub common: Common,
    pub file: RunFile,
}

impl Settings {
    pub fn new(common: Common) -> anyhow::Result<Self> {
        let file = match &common.config {
            Some(path) => RunFile::load(path)?,
            None => RunFile::default(),
        };
        Ok(Self { common, file })
    }

    pub fn output(&self) -> String {
        pick(self.common.output.clone(), self.file.output.clone(), "-".to_string())
    }

    pub fn tol(&self, default: f64) -> f64 {
        pick(self.common.tol, self.file.tol, default)
    }

    pub fn cutoff(&self, default: usize) -> usize {
        pick(self.common.cutoff, self.file.cutoff, default)
    }

    /// Uniform chain parameters with overrides applied.
    pub fn chain(&self, defaults: ChainDefaults) -> ChainConfig {
        let (c, f) = (&self.common, &self.file);
        ChainConfig {
            n_modes: pick(c.n_modes, f.n_modes, defaults.n_modes),
            t: pick(c.t, f.t, defaults.t),
            a: pick(c.a, f.a, defaults.a),
            kappa: pick(c.kappa, f.kappa, defaults.kappa),
            n_th: pick(c.n_th, f.n_th, defaults.n_th),
            bonds: f.bond.clone(),
            modes: f.mode.clone(),
        }
    }

    /// For sweeps that rebuild the chain at every point: per-bond and
    /// per-mode overrides would be ambiguous there.
    pub fn uniform_chain(&self, defaults: ChainDefaults, command: &str) -> anyhow::Result<ChainConfig> {
        if !self.file.bond.is_empty() || !self.file.mode.is_empty() {
            bail!("`{command}` sweeps uniform chains; remove [[bond]] / [[mode]] overrides");
        }
        Ok(self.chain(defaults))
    }
}

/// Rejects empty or non-finite grids early with a usage error.
pub fn check_range(name: &str, r: Range) -> anyhow::Result<Range> {
    if r.count == 0 || !r.start.is_finite() || !r.stop.is_finite() {
        bail!("{name}: need finite bounds and count >= 1");
    }
    Ok(r)
}
