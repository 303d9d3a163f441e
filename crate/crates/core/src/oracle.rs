//! Brute-force reference: the trace-preserving non-Hermitian master equation
//!
//! ```text
//! drho/dt = -i (H rho - rho H^dagger) + i Tr[rho (H - H^dagger)] rho + sum_L D[L] rho
//! ```
//!
//! on a truncated Fock space, with thermal jump operators
//! `sqrt(kappa (1 + n_th)) a_i` and `sqrt(kappa n_th) a_i^dagger` per mode.
//! Basis states are ordered with mode 0 as the most significant digit.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{build_hopping_matrix, ChainSpec};
use crate::ode::{Dopri5, OdeOptions};

/// Largest Hilbert-space dimension accepted.
pub const MAX_DIM: usize = 4096;
/// Population of a mode's top Fock level above which truncation is reported.
pub const TRUNCATION_THRESHOLD: f64 = 1e-3;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Product basis `|n_0, ..., n_{N-1}>` with `0 <= n_i < cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockBasis {
    pub n_modes: usize,
    pub cutoff: usize,
}

impl FockBasis {
    pub fn new(n_modes: usize, cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::InvalidParameter(format!(
                "Fock cutoff must be >= 2, got {cutoff}"
            )));
        }
        if n_modes == 0 {
            return Err(Error::InvalidParameter("need at least one mode".into()));
        }
        let dim = (0..n_modes).try_fold(1usize, |d, _| d.checked_mul(cutoff));
        match dim {
            Some(d) if d <= MAX_DIM => Ok(Self { n_modes, cutoff }),
            _ => Err(Error::DimensionTooLarge {
                dim: dim.unwrap_or(usize::MAX),
                limit: MAX_DIM,
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.cutoff.pow(self.n_modes as u32)
    }

    fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.n_modes - 1 - mode) as u32)
    }

    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.cutoff
    }

    pub fn index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.n_modes {
            return Err(Error::InvalidParameter(format!(
                "expected {} occupations, got {}",
                self.n_modes,
                occupations.len()
            )));
        }
        occupations.iter().enumerate().try_fold(0, |acc, (m, &n)| {
            if n >= self.cutoff {
                Err(Error::IndexOutOfRange {
                    index: n,
                    len: self.cutoff,
                })
            } else {
                Ok(acc + n * self.stride(m))
            }
        })
    }

    pub fn excitations(&self, index: usize) -> usize {
        (0..self.n_modes).map(|m| self.occupation(index, m)).sum()
    }
}

/// Sparse operator stored as `(row, col, value)` triplets.
#[derive(Debug, Clone, Default)]
struct SparseOp {
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    fn annihilation(basis: &FockBasis, mode: usize) -> Self {
        let stride = basis.stride(mode);
        let entries = (0..basis.dim())
            .filter_map(|k| {
                let n = basis.occupation(k, mode);
                (n > 0).then(|| (k - stride, k, Complex64::new((n as f64).sqrt(), 0.0)))
            })
            .collect();
        Self { entries }
    }

    fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        }
    }

    fn scaled(mut self, s: f64) -> Self {
        for e in &mut self.entries {
            e.2 *= s;
        }
        self
    }

    /// Diagonal of `L^dagger L`; exact when every column holds at most one entry.
    fn gram_diagonal(&self, dim: usize) -> Vec<f64> {
        let mut d = vec![0.0; dim];
        for &(_, c, v) in &self.entries {
            d[c] += v.norm_sqr();
        }
        d
    }
}

/// Density matrix on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    rho: DMatrix<Complex64>,
    basis: FockBasis,
}

impl FockDensityMatrix {
    pub fn new(rho: DMatrix<Complex64>, basis: FockBasis) -> Result<Self> {
        let d = basis.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "density matrix must be {d}x{d}"
            )));
        }
        Ok(Self { rho, basis })
    }

    /// `|n><n|` for the occupation pattern `n`.
    pub fn basis_state(basis: FockBasis, occupations: &[usize]) -> Result<Self> {
        let k = basis.index(occupations)?;
        let d = basis.dim();
        let mut rho = DMatrix::zeros(d, d);
        rho[(k, k)] = Complex64::new(1.0, 0.0);
        Ok(Self { rho, basis })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint())
            .iter()
            .fold(0.0, |a, z| a.max(z.norm()))
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues().min()
    }

    /// `<a_i^dagger a_i>` for every mode.
    pub fn occupations(&self) -> Vec<f64> {
        let b = self.basis;
        let mut n = vec![0.0; b.n_modes];
        for k in 0..b.dim() {
            let p = self.rho[(k, k)].re;
            for (m, nm) in n.iter_mut().enumerate() {
                *nm += p * b.occupation(k, m) as f64;
            }
        }
        n
    }

    /// Population of the top Fock level of each mode.
    pub fn top_level_populations(&self) -> Vec<f64> {
        let b = self.basis;
        let mut p = vec![0.0; b.n_modes];
        for k in 0..b.dim() {
            for (m, pm) in p.iter_mut().enumerate() {
                if b.occupation(k, m) + 1 == b.cutoff {
                    *pm += self.rho[(k, k)].re;
                }
            }
        }
        p
    }

    /// Total population of basis states with exactly `count` excitations.
    pub fn excitation_population(&self, count: usize) -> f64 {
        (0..self.basis.dim())
            .filter(|&k| self.basis.excitations(k) == count)
            .map(|k| self.rho[(k, k)].re)
            .sum()
    }
}

/// Product of single-mode thermal states, each renormalized after truncation.
pub fn thermal_state(spec: &ChainSpec, cutoff: usize) -> Result<FockDensityMatrix> {
    let basis = FockBasis::new(spec.n_modes(), cutoff)?;
    let single: Vec<Vec<f64>> = spec
        .modes()
        .iter()
        .map(|m| {
            let r = m.n_th / (1.0 + m.n_th);
            let w: Vec<f64> = (0..cutoff).map(|k| r.powi(k as i32)).collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| x / z).collect()
        })
        .collect();
    let d = basis.dim();
    let mut rho = DMatrix::zeros(d, d);
    for k in 0..d {
        let p: f64 = (0..basis.n_modes)
            .map(|m| single[m][basis.occupation(k, m)])
            .product();
        rho[(k, k)] = Complex64::new(p, 0.0);
    }
    Ok(FockDensityMatrix { rho, basis })
}

/// A truncated-space population that exceeded [`TRUNCATION_THRESHOLD`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWarning {
    pub mode: usize,
    pub time: f64,
    /// Largest top-level population seen for this mode.
    pub population: f64,
}

/// Diagnostics gathered along an integration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleDiagnostics {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// Smallest eigenvalue over the reported states.
    pub min_eigenvalue: f64,
    pub warnings: Vec<TruncationWarning>,
    pub accepted_steps: usize,
}

impl OracleDiagnostics {
    fn observe(&mut self, time: f64, rho: &FockDensityMatrix) {
        self.max_trace_error = self.max_trace_error.max((rho.trace() - 1.0).norm());
        self.max_hermiticity_error = self.max_hermiticity_error.max(rho.hermiticity_error());
        for (mode, p) in rho.top_level_populations().into_iter().enumerate() {
            if p <= TRUNCATION_THRESHOLD {
                continue;
            }
            match self.warnings.iter_mut().find(|w| w.mode == mode) {
                Some(w) if w.population < p => {
                    w.population = p;
                    w.time = time;
                }
                Some(_) => {}
                None => {
                    log::warn!("mode {mode}: top Fock level population {p:.3e} at t = {time}");
                    self.warnings.push(TruncationWarning { mode, time, population: p });
                }
            }
        }
    }

    fn observe_spectrum(&mut self, rho: &FockDensityMatrix) {
        self.min_eigenvalue = self.min_eigenvalue.min(rho.min_eigenvalue());
    }
}

/// Result of a master-equation integration.
#[derive(Debug, Clone)]
pub struct MasterEquationRun {
    pub times: Vec<f64>,
    pub states: Vec<FockDensityMatrix>,
    pub diagnostics: OracleDiagnostics,
}

impl MasterEquationRun {
    pub fn last(&self) -> &FockDensityMatrix {
        self.states.last().expect("a run has at least one state")
    }
}

/// Long-time limit of the master equation.
#[derive(Debug, Clone)]
pub struct OracleSteady {
    pub occupations: Vec<f64>,
    pub rho: FockDensityMatrix,
    pub time: f64,
    pub residual: f64,
    pub diagnostics: OracleDiagnostics,
}

/// Generator of the master equation for one chain and cutoff.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    basis: FockBasis,
    h: SparseOp,
    h_adj: SparseOp,
    jumps: Vec<SparseOp>,
    /// `sum_L L^dagger L`, which is diagonal in the Fock basis.
    decay: Vec<f64>,
    rate_scale: f64,
}

impl MasterEquation {
    pub fn new(spec: &ChainSpec, cutoff: usize) -> Result<Self> {
        let basis = FockBasis::new(spec.n_modes(), cutoff)?;
        let d = basis.dim();
        let hop = build_hopping_matrix(spec);
        let hop = hop.matrix();
        let lower: Vec<SparseOp> = (0..basis.n_modes)
            .map(|m| SparseOp::annihilation(&basis, m))
            .collect();

        // H = sum_{jk} h_jk a_j^dagger a_k over the nonzero couplings.
        let mut h = SparseOp::default();
        for j in 0..basis.n_modes {
            for k in [j.wrapping_sub(1), j + 1] {
                if k >= basis.n_modes || hop[(j, k)] == ZERO {
                    continue;
                }
                let (sj, sk) = (basis.stride(j), basis.stride(k));
                for col in 0..d {
                    let (nj, nk) = (basis.occupation(col, j), basis.occupation(col, k));
                    if nk == 0 || nj + 1 >= cutoff {
                        continue;
                    }
                    let amp = ((nk * (nj + 1)) as f64).sqrt();
                    h.entries.push((col - sk + sj, col, hop[(j, k)] * amp));
                }
            }
        }

        let mut jumps = Vec::new();
        for (m, a) in lower.into_iter().enumerate() {
            let mode = spec.modes()[m];
            if mode.kappa == 0.0 {
                continue;
            }
            let up = a.adjoint().scaled((mode.kappa * mode.n_th).sqrt());
            jumps.push(a.scaled((mode.kappa * (1.0 + mode.n_th)).sqrt()));
            if mode.n_th > 0.0 {
                jumps.push(up);
            }
        }
        let mut decay = vec![0.0; d];
        for l in &jumps {
            for (x, y) in decay.iter_mut().zip(l.gram_diagonal(d)) {
                *x += y;
            }
        }

        let mut row_sum = vec![0.0; d];
        for &(r, _, v) in &h.entries {
            row_sum[r] += v.norm();
        }
        let rate_scale = row_sum
            .iter()
            .zip(&decay)
            .map(|(h, g)| 2.0 * h + g)
            .fold(0.0, f64::max);

        Ok(Self {
            h_adj: h.adjoint(),
            basis,
            h,
            jumps,
            decay,
            rate_scale,
        })
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    /// `drho/dt` for the given state.
    pub fn derivative(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.basis.dim();
        let mut out = DMatrix::zeros(d, d);

        // -i (H rho - rho H^dagger)
        for &(r, c, v) in &self.h.entries {
            let w = -I * v;
            for col in 0..d {
                out[(r, col)] += w * rho[(c, col)];
            }
        }
        for &(r, c, v) in &self.h_adj.entries {
            let w = I * v;
            for row in 0..d {
                out[(row, c)] += w * rho[(row, r)];
            }
        }

        // i Tr[rho (H - H^dagger)] rho
        let mut tr = ZERO;
        for &(r, c, v) in &self.h.entries {
            tr += v * rho[(c, r)];
        }
        for &(r, c, v) in &self.h_adj.entries {
            tr -= v * rho[(c, r)];
        }
        let w = I * tr;
        if w != ZERO {
            out.zip_apply(rho, |o, x| *o += w * x);
        }

        // L rho L^dagger - {L^dagger L, rho} / 2
        for l in &self.jumps {
            for &(r1, c1, v1) in &l.entries {
                for &(r2, c2, v2) in &l.entries {
                    out[(r1, r2)] += v1 * rho[(c1, c2)] * v2.conj();
                }
            }
        }
        for col in 0..d {
            for row in 0..d {
                out[(row, col)] -= 0.5 * (self.decay[row] + self.decay[col]) * rho[(row, col)];
            }
        }
        out
    }

    fn pack(rho: &DMatrix<Complex64>) -> Vec<f64> {
        rho.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    fn unpack(&self, y: &[f64]) -> DMatrix<Complex64> {
        let d = self.basis.dim();
        DMatrix::from_iterator(d, d, y.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])))
    }

    fn state(&self, y: &[f64]) -> FockDensityMatrix {
        FockDensityMatrix {
            rho: self.unpack(y),
            basis: self.basis,
        }
    }

    fn ode_options(&self, tol: f64) -> Result<OdeOptions> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
        }
        let mut opts = OdeOptions::with_tolerances(tol, tol);
        if self.rate_scale > 0.0 {
            opts.h_max = 0.5 / self.rate_scale;
        }
        Ok(opts)
    }

    fn check_state(&self, rho0: &FockDensityMatrix) -> Result<()> {
        if rho0.basis != self.basis {
            return Err(Error::InvalidParameter(format!(
                "initial state has basis {:?}, generator expects {:?}",
                rho0.basis, self.basis
            )));
        }
        Ok(())
    }

    /// Integrates from `rho0` at time 0 and reports the state on `grid`.
    pub fn evolve(&self, rho0: &FockDensityMatrix, grid: &[f64], tol: f64) -> Result<MasterEquationRun> {
        self.check_state(rho0)?;
        if grid.is_empty()
            || grid[0] < 0.0
            || grid.iter().any(|t| !t.is_finite())
            || grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParameter(
                "time grid must be finite, strictly increasing and start at t >= 0".into(),
            ));
        }
        let y0 = Self::pack(&rho0.rho);
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let dr = self.derivative(&self.unpack(y));
            for (k, z) in dr.iter().enumerate() {
                dy[2 * k] = z.re;
                dy[2 * k + 1] = z.im;
            }
        };
        let mut stepper = Dopri5::new(&rhs, 0.0, &y0, self.ode_options(tol)?);
        let t_end = *grid.last().unwrap();
        let mut diag = OracleDiagnostics {
            min_eigenvalue: f64::INFINITY,
            ..OracleDiagnostics::default()
        };
        diag.observe(0.0, rho0);
        let mut states = Vec::with_capacity(grid.len());
        let mut buf = vec![0.0; y0.len()];
        for &t in grid {
            while stepper.t() < t {
                stepper.step(t_end)?;
                diag.observe(stepper.t(), &self.state(stepper.y()));
            }
            let state = if t == stepper.t() {
                self.state(stepper.y())
            } else {
                stepper.interpolate(t, &mut buf);
                self.state(&buf)
            };
            diag.observe_spectrum(&state);
            states.push(state);
        }
        diag.accepted_steps = stepper.accepted_steps();
        Ok(MasterEquationRun {
            times: grid.to_vec(),
            states,
            diagnostics: diag,
        })
    }

    /// Integrates until `max |drho/dt| <= tol` or `budget` is exhausted.
    pub fn steady(&self, rho0: &FockDensityMatrix, tol: f64, budget: f64) -> Result<OracleSteady> {
        self.check_state(rho0)?;
        let y0 = Self::pack(&rho0.rho);
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let dr = self.derivative(&self.unpack(y));
            for (k, z) in dr.iter().enumerate() {
                dy[2 * k] = z.re;
                dy[2 * k + 1] = z.im;
            }
        };
        let mut stepper = Dopri5::new(&rhs, 0.0, &y0, self.ode_options(tol)?);
        let mut diag = OracleDiagnostics {
            min_eigenvalue: f64::INFINITY,
            ..OracleDiagnostics::default()
        };
        diag.observe(0.0, rho0);
        loop {
            let r = stepper.derivative().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if r <= tol {
                let rho = self.state(stepper.y());
                diag.observe_spectrum(&rho);
                diag.accepted_steps = stepper.accepted_steps();
                return Ok(OracleSteady {
                    occupations: rho.occupations(),
                    rho,
                    time: stepper.t(),
                    residual: r,
                    diagnostics: diag,
                });
            }
            if stepper.t() >= budget {
                return Err(Error::NotConverged {
                    time: stepper.t(),
                    residual: r,
                });
            }
            stepper.step(budget)?;
            diag.observe(stepper.t(), &self.state(stepper.y()));
        }
    }
}

/// Integrates the master equation from `rho0` to `t_end`.
pub fn evolve_master_equation(
    spec: &ChainSpec,
    rho0: &FockDensityMatrix,
    t_end: f64,
    tol: f64,
) -> Result<MasterEquationRun> {
    let me = MasterEquation::new(spec, rho0.basis.cutoff)?;
    let grid = if t_end > 0.0 { vec![0.0, t_end] } else { vec![0.0] };
    me.evolve(rho0, &grid, tol)
}

/// Steady occupations of the master equation, started from the thermal state.
/// The time budget is `200 / kappa_min`.
pub fn oracle_steady(spec: &ChainSpec, cutoff: usize, tol: f64) -> Result<OracleSteady> {
    let kappa_min = spec.modes().iter().map(|m| m.kappa).fold(f64::INFINITY, f64::min);
    if kappa_min <= 0.0 {
        return Err(Error::InvalidParameter(
            "oracle steady state needs kappa > 0 on every mode".into(),
        ));
    }
    let me = MasterEquation::new(spec, cutoff)?;
    me.steady(&thermal_state(spec, cutoff)?, tol, 200.0 / kappa_min)
}
