//! TOML description of a chain.
//!
//! ```toml
//! n_modes = 4
//! t = 1.0
//! A = 0.6931471805599453
//! kappa = 0.01
//! n_th = 1.0
//!
//! [[bond]]            # optional, index counts from 0
//! index = 1
//! t = 0.5
//! A = 0.0
//!
//! [[bond]]
//! index = 2
//! t_fwd = [1.0, 0.0]  # [re, im]
//! t_bwd = [0.25, 0.0]
//!
//! [[mode]]
//! index = 0
//! kappa = 0.02
//! ```
//!
//! `t = 0` describes fully decoupled modes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bond, ChainSpec, ModeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_modes: usize,
    pub t: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub kappa: f64,
    pub n_th: f64,
    #[serde(default, rename = "bond", skip_serializing_if = "Vec::is_empty")]
    pub bonds: Vec<BondOverride>,
    #[serde(default, rename = "mode", skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<ModeOverride>,
}

/// Replaces one bond. Either `t`/`A` or both of `t_fwd`/`t_bwd` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondOverride {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_fwd: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_bwd: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeOverride {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
}

impl ChainConfig {
    pub fn uniform(n_modes: usize, t: f64, a: f64, kappa: f64, n_th: f64) -> Self {
        Self {
            n_modes,
            t,
            a,
            kappa,
            n_th,
            bonds: Vec::new(),
            modes: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_spec(&self) -> Result<ChainSpec> {
        let n = self.n_modes;
        if n == 0 {
            return Err(Error::Config("n_modes must be >= 1".into()));
        }
        if !(self.t.is_finite() && self.t >= 0.0 && self.a.is_finite()) {
            return Err(Error::Config(format!(
                "need finite t >= 0 and finite A, got t = {}, A = {}",
                self.t, self.a
            )));
        }
        let mut modes = vec![ModeParams::new(self.kappa, self.n_th)?; n];
        for m in &self.modes {
            let slot = modes.get_mut(m.index).ok_or_else(|| {
                Error::Config(format!("mode override index {} out of range 0..{n}", m.index))
            })?;
            *slot = ModeParams::new(m.kappa.unwrap_or(slot.kappa), m.n_th.unwrap_or(slot.n_th))?;
        }
        let mut bonds = vec![Bond::hatano_nelson(self.t, self.a); n - 1];
        for b in &self.bonds {
            let slot = bonds.get_mut(b.index).ok_or_else(|| {
                Error::Config(format!(
                    "bond override index {} out of range 0..{}",
                    b.index,
                    n - 1
                ))
            })?;
            *slot = b.to_bond(self.t, self.a)?;
        }
        let reference = if self.t > 0.0 { self.t } else { 1.0 };
        ChainSpec::new(modes, bonds, reference)
    }

    /// Exact description of `spec`: every bond and mode is written explicitly.
    pub fn from_spec(spec: &ChainSpec) -> Self {
        let first = spec.modes()[0];
        Self {
            n_modes: spec.n_modes(),
            t: spec.reference_coupling(),
            a: 0.0,
            kappa: first.kappa,
            n_th: first.n_th,
            bonds: spec
                .bonds()
                .iter()
                .enumerate()
                .map(|(index, b)| BondOverride {
                    index,
                    t: None,
                    a: None,
                    t_fwd: Some([b.t_fwd.re, b.t_fwd.im]),
                    t_bwd: Some([b.t_bwd.re, b.t_bwd.im]),
                })
                .collect(),
            modes: spec
                .modes()
                .iter()
                .enumerate()
                .skip(1)
                .filter(|(_, m)| **m != first)
                .map(|(index, m)| ModeOverride {
                    index,
                    kappa: Some(m.kappa),
                    n_th: Some(m.n_th),
                })
                .collect(),
        }
    }
}

impl BondOverride {
    fn to_bond(&self, t: f64, a: f64) -> Result<Bond> {
        match (self.t_fwd, self.t_bwd) {
            (Some(f), Some(b)) => {
                if self.t.is_some() || self.a.is_some() {
                    return Err(Error::Config(format!(
                        "bond {}: give either t/A or t_fwd/t_bwd, not both",
                        self.index
                    )));
                }
                Ok(Bond::new(Complex64::new(f[0], f[1]), Complex64::new(b[0], b[1])))
            }
            (None, None) => {
                let t = self.t.unwrap_or(t);
                if !(t.is_finite() && t >= 0.0) {
                    return Err(Error::Config(format!("bond {}: t must be >= 0", self.index)));
                }
                Ok(Bond::hatano_nelson(t, self.a.unwrap_or(a)))
            }
            _ => Err(Error::Config(format!(
                "bond {}: t_fwd and t_bwd must be given together",
                self.index
            ))),
        }
    }
}
