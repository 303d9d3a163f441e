//! Physical description of an open, non-reciprocal bosonic chain and the
//! matrices derived from it.
//!
//! Matrix convention: the hopping term `t_{i,i+1} a_i a_{i+1}^dagger` moves an
//! excitation from site `i` to site `i+1`, so the single-particle matrix has
//! `h[(i+1, i)] = t_{i,i+1}` (forward) and `h[(i, i+1)] = t_{i+1,i}` (backward).
//! The diagonal is zero (rotating frame at the common mode frequency).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dissipation rate and bath occupation of one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    pub kappa: f64,
    pub n_th: f64,
}

impl ModeParams {
    pub fn new(kappa: f64, n_th: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be finite and >= 0, got {kappa}"
            )));
        }
        if !(n_th.is_finite() && n_th >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "n_th must be finite and >= 0, got {n_th}"
            )));
        }
        Ok(Self { kappa, n_th })
    }
}

/// Non-reciprocal coupling between modes `i` and `i+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    /// `t_{i,i+1}`: amplitude for an excitation hopping from `i` to `i+1`.
    pub t_fwd: Complex64,
    /// `t_{i+1,i}`: amplitude for an excitation hopping from `i+1` to `i`.
    pub t_bwd: Complex64,
}

impl Bond {
    pub fn new(t_fwd: Complex64, t_bwd: Complex64) -> Self {
        Self { t_fwd, t_bwd }
    }

    /// Hatano-Nelson bond `(t e^A, t e^-A)` with real asymmetry `A`.
    pub fn hatano_nelson(t: f64, asymmetry: f64) -> Self {
        Self {
            t_fwd: Complex64::new(t * asymmetry.exp(), 0.0),
            t_bwd: Complex64::new(t * (-asymmetry).exp(), 0.0),
        }
    }

    /// A bond that carries no transport.
    pub fn decoupled() -> Self {
        Self::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn is_hermitian(&self) -> bool {
        self.t_bwd == self.t_fwd.conj()
    }

    fn validate(&self, index: usize) -> Result<()> {
        let finite = |z: Complex64| z.re.is_finite() && z.im.is_finite();
        if finite(self.t_fwd) && finite(self.t_bwd) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bond {index} has non-finite coupling"
            )))
        }
    }
}

/// Full specification of an open chain: `N` modes and `N - 1` bonds.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    modes: Vec<ModeParams>,
    bonds: Vec<Bond>,
    reference_coupling: f64,
}

impl ChainSpec {
    pub fn new(modes: Vec<ModeParams>, bonds: Vec<Bond>, reference_coupling: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidParameter(
                "a chain needs at least one mode".into(),
            ));
        }
        if bonds.len() + 1 != modes.len() {
            return Err(Error::InvalidParameter(format!(
                "open chain of {} modes needs {} bonds, got {}",
                modes.len(),
                modes.len() - 1,
                bonds.len()
            )));
        }
        if !(reference_coupling.is_finite() && reference_coupling > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reference coupling must be > 0, got {reference_coupling}"
            )));
        }
        for m in &modes {
            ModeParams::new(m.kappa, m.n_th)?;
        }
        for (i, b) in bonds.iter().enumerate() {
            b.validate(i)?;
        }
        Ok(Self {
            modes,
            bonds,
            reference_coupling,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[ModeParams] {
        &self.modes
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn reference_coupling(&self) -> f64 {
        self.reference_coupling
    }

    /// True when every mode shares the same `kappa` and `n_th`.
    pub fn has_uniform_bath(&self) -> bool {
        let first = self.modes[0];
        self.modes.iter().all(|m| *m == first)
    }

    /// A copy of this chain with mode 0 prepended, joined by `bond` to the
    /// current first mode.
    pub fn prepend_mode(&self, mode: ModeParams, bond: Bond) -> Result<Self> {
        let mut modes = Vec::with_capacity(self.modes.len() + 1);
        modes.push(mode);
        modes.extend_from_slice(&self.modes);
        let mut bonds = Vec::with_capacity(self.bonds.len() + 1);
        bonds.push(bond);
        bonds.extend_from_slice(&self.bonds);
        Self::new(modes, bonds, self.reference_coupling)
    }
}

fn check_coupling(name: &str, t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {t}")))
    }
}

fn check_asymmetry(name: &str, a: f64) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite")))
    }
}

/// Uniform Hatano-Nelson chain: `n` identical modes, `n - 1` bonds `(t e^A, t e^-A)`.
pub fn make_uniform_chain(n: usize, t: f64, a: f64, kappa: f64, n_th: f64) -> Result<ChainSpec> {
    make_alternating_chain(n, t, a, t, a, kappa, n_th)
}

/// Two-sublattice chain. Bonds `0, 2, 4, ...` use `(t1, a1)`, bonds `1, 3, ...` use `(t2, a2)`.
pub fn make_alternating_chain(
    n: usize,
    t1: f64,
    a1: f64,
    t2: f64,
    a2: f64,
    kappa: f64,
    n_th: f64,
) -> Result<ChainSpec> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    check_coupling("t1", t1)?;
    check_coupling("t2", t2)?;
    check_asymmetry("A1", a1)?;
    check_asymmetry("A2", a2)?;
    let mode = ModeParams::new(kappa, n_th)?;
    let bonds = (0..n - 1)
        .map(|b| {
            if b % 2 == 0 {
                Bond::hatano_nelson(t1, a1)
            } else {
                Bond::hatano_nelson(t2, a2)
            }
        })
        .collect();
    ChainSpec::new(vec![mode; n], bonds, t1)
}

/// Complex single-particle hopping matrix of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingMatrix {
    matrix: DMatrix<Complex64>,
    hermitian: bool,
}

impl HoppingMatrix {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Forward amplitude `h[(i+1, i)]` of bond `i`.
    pub fn forward(&self, bond: usize) -> Complex64 {
        self.matrix[(bond + 1, bond)]
    }

    /// Backward amplitude `h[(i, i+1)]` of bond `i`.
    pub fn backward(&self, bond: usize) -> Complex64 {
        self.matrix[(bond, bond + 1)]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }
}

pub fn build_hopping_matrix(spec: &ChainSpec) -> HoppingMatrix {
    let n = spec.n_modes();
    let mut matrix = DMatrix::<Complex64>::zeros(n, n);
    for (i, bond) in spec.bonds().iter().enumerate() {
        matrix[(i + 1, i)] = bond.t_fwd;
        matrix[(i, i + 1)] = bond.t_bwd;
    }
    let hermitian = spec.bonds().iter().all(Bond::is_hermitian);
    HoppingMatrix { matrix, hermitian }
}

/// Non-reciprocal nearest-neighbour transition rates `g[(i, j)]` (from `i` to `j`).
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    g: DMatrix<f64>,
}

impl RateMatrix {
    /// Wraps an arbitrary rate matrix. Only nearest-neighbour entries are
    /// allowed to be nonzero and all entries must be finite and >= 0.
    pub fn from_matrix(g: DMatrix<f64>) -> Result<Self> {
        if g.nrows() != g.ncols() || g.nrows() == 0 {
            return Err(Error::InvalidParameter(
                "rate matrix must be square and non-empty".into(),
            ));
        }
        for ((i, j), &v) in g
            .iter()
            .enumerate()
            .map(|(k, v)| ((k % g.nrows(), k / g.nrows()), v))
        {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "rate g[{i}][{j}] = {v} must be finite and >= 0"
                )));
            }
            if v != 0.0 && i.abs_diff(j) != 1 {
                return Err(Error::InvalidParameter(format!(
                    "rate g[{i}][{j}] couples non-neighbouring modes"
                )));
            }
        }
        Ok(Self { g })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// Rate from mode `i` to mode `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.g[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }
}

/// Transition rate from the side carrying `t_out` towards the side carrying `t_in`:
/// `2 (|t_out|^2 + Re(t_out t_in)) / kappa_sum`.
pub fn transition_rate(t_out: Complex64, t_in: Complex64, kappa_sum: f64) -> f64 {
    2.0 * (t_out.norm_sqr() + (t_out * t_in).re) / kappa_sum
}

pub fn build_rate_matrix(spec: &ChainSpec) -> Result<RateMatrix> {
    let n = spec.n_modes();
    let modes = spec.modes();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for (i, bond) in spec.bonds().iter().enumerate() {
        let kappa_sum = modes[i].kappa + modes[i + 1].kappa;
        let coupled = bond.t_fwd.norm_sqr() + bond.t_bwd.norm_sqr() > 0.0;
        if !coupled {
            continue;
        }
        if kappa_sum <= 0.0 {
            return Err(Error::DivergentRate { bond: i });
        }
        g[(i, i + 1)] = transition_rate(bond.t_fwd, bond.t_bwd, kappa_sum).max(0.0);
        g[(i + 1, i)] = transition_rate(bond.t_bwd, bond.t_fwd, kappa_sum).max(0.0);
    }
    Ok(RateMatrix { g })
}
