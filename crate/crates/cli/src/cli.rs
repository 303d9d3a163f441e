use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(
    name = "nhcool",
    version,
    about = "Steady states, spectra and dynamics of non-reciprocal bosonic chains",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Flags override the config file,
/// which overrides the built-in defaults.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// CSV destination; `-` is standard output
    #[arg(long, short, global = true, value_name = "PATH")]
    pub output: Option<String>,
    /// Number of modes in the chain
    #[arg(long, global = true)]
    pub n_modes: Option<usize>,
    /// Reference coupling t
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Hopping asymmetry A (forward t e^A, backward t e^-A)
    #[arg(long = "A", global = true, value_name = "A", allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Bath coupling kappa (units of t)
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Bath occupation
    #[arg(long, global = true)]
    pub n_th: Option<f64>,
    /// Integrator / convergence tolerance
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Fock levels per mode for the master-equation oracle
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-excitation oscillation without dissipation (tau, n_1, ..., n_N)
    Rabi(RabiArgs),
    /// Two-mode steady state across an e^A grid (e_A, n_1, n_2)
    #[command(name = "sweep-A")]
    SweepA(SweepAArgs),
    /// Steady-state and spectral profiles for several chain lengths
    ChainProfile(ChainProfileArgs),
    /// First-mode occupation against chain length for several kappa
    Scaling(ScalingArgs),
    /// Occupation of a mode attached to the chain edge over a (kappa_0, t_0) grid
    Attached(AttachedArgs),
    /// Compare rate equations, moment equations and the master equation
    Oracle,
    /// Steady state of one chain
    Steady(SteadyArgs),
}

#[derive(Debug, Args)]
pub struct RabiArgs {
    /// Number of output rows
    #[arg(long)]
    pub grid: Option<usize>,
    /// Time span in units of pi / t
    #[arg(long)]
    pub periods: Option<f64>,
    /// Site holding the excitation at tau = 0 (1-based)
    #[arg(long)]
    pub initial_site: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepAArgs {
    /// e^A grid as start:stop:count
    #[arg(long, value_name = "START:STOP:COUNT")]
    pub range: Option<Range>,
}

#[derive(Debug, Args)]
pub struct ChainProfileArgs {
    /// Chain lengths
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Bath couplings, one curve each
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct AttachedArgs {
    /// kappa_0 grid (logarithmic) as start:stop:count
    #[arg(long, value_name = "START:STOP:COUNT")]
    pub kappa0_range: Option<Range>,
    /// t_0 grid (linear) as start:stop:count
    #[arg(long, value_name = "START:STOP:COUNT")]
    pub t0_range: Option<Range>,
}

#[derive(Debug, Args)]
pub struct SteadyArgs {
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Coupling of an extra mode attached to mode 1
    #[arg(long)]
    pub t0: Option<f64>,
    /// Bath coupling of the attached mode
    #[arg(long)]
    pub kappa0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Rate equations
    Rate,
    /// Right eigenvectors of the hopping matrix (kappa -> 0)
    Spectral,
    /// Long-time limit of the moment equations
    Dynamics,
    /// Long-time limit of the master equation
    Oracle,
}

/// Inclusive grid `start:stop:count`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(format!("expected START:STOP:COUNT, got `{s}`"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
        Ok(Self {
            start: num(start)?,
            stop: num(stop)?,
            count: count
                .trim()
                .parse()
                .map_err(|e| format!("`{count}`: {e}"))?,
        })
    }
}
