//! Time-domain engines.
//!
//! * [`single_excitation_trace`]: one excitation evolving under `i dc/dt = h c`,
//!   renormalized at every reported time. Dissipation is ignored.
//! * [`evolve_covariance`]: linear moment equations for `C[i][j] = <a_i^dagger a_j>`
//!   with thermal damping, dropping fourth-order moments.
//!
//! Moment equations (with `h` the hopping matrix, so `h[(j, i)] = t_{ij}`):
//!
//! ```text
//! dn_i/dt   = Re sum_j i [ h_ji C_ij^* - h_ij C_ij ]          - kappa_i (n_i - n_th,i)
//! dC_ij/dt  = i sum_k [ h_ik^* C_kj - C_ik h_jk ]             - (kappa_i + kappa_j)/2 C_ij
//! ```
//!
//! At two modes these are exactly the textbook two-mode equations. For longer
//! chains the coherence hierarchy couples `C_{i,i+1}` to next-nearest-neighbour
//! coherences. [`CoherenceClosure::NearestNeighbor`] drops those, which is the
//! approximation under which the steady state equals the rate equations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{build_hopping_matrix, ChainSpec};
use crate::ode::{Dopri5, OdeOptions};
use crate::steady::SteadyState;

const I: Complex64 = Complex64::new(0.0, 1.0);
const HERMITIAN_TOL: f64 = 1e-10;

/// Which coherences `C_ij` (`i != j`) are evolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoherenceClosure {
    /// Only `C_{i,i+1}`; longer-range coherences are held at zero.
    #[default]
    NearestNeighbor,
    /// Every pair. Its steady state departs from the rate equations for `N >= 3`.
    Full,
}

/// Second moments `C[i][j] = <a_i^dagger a_j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    c: DMatrix<Complex64>,
}

impl CovarianceState {
    pub fn new(c: DMatrix<Complex64>) -> Result<Self> {
        if !c.is_square() || c.nrows() == 0 {
            return Err(Error::InvalidParameter(
                "covariance must be a non-empty square matrix".into(),
            ));
        }
        let state = Self { c };
        let err = state.hermiticity_error();
        if err > HERMITIAN_TOL * max_abs(&state.c).max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "covariance is not Hermitian (deviation {err:e})"
            )));
        }
        Ok(state)
    }

    /// `diag(n_th,i)`: every mode in equilibrium with its own bath.
    pub fn thermal(spec: &ChainSpec) -> Self {
        let n = spec.n_modes();
        let mut c = DMatrix::zeros(n, n);
        for (i, m) in spec.modes().iter().enumerate() {
            c[(i, i)] = Complex64::new(m.n_th, 0.0);
        }
        Self { c }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.c
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn occupations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.c[(i, i)].re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.c - self.c.adjoint()))
    }
}

/// Sampled solution of one of the engines.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `occupations[k][i]` is `n_i` at `times[k]`.
    pub occupations: Vec<Vec<f64>>,
    /// Full covariance snapshots, when requested.
    pub covariances: Vec<CovarianceState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time series of mode `i`.
    pub fn mode(&self, i: usize) -> Vec<f64> {
        self.occupations.iter().map(|n| n[i]).collect()
    }

    /// CSV header `tau,n_1,...,n_N`.
    pub fn csv_header(&self) -> Vec<String> {
        let n = self.occupations.first().map_or(0, Vec::len);
        std::iter::once("tau".to_string())
            .chain((1..=n).map(|i| format!("n_{i}")))
            .collect()
    }
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if grid[0] < 0.0 || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter(
            "time grid must be finite and start at tau >= 0".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "time grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn tridiagonal_apply(h: &DMatrix<Complex64>, x: &[Complex64], out: &mut [Complex64]) {
    let n = x.len();
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        if i > 0 {
            acc += h[(i, i - 1)] * x[i - 1];
        }
        if i + 1 < n {
            acc += h[(i, i + 1)] * x[i + 1];
        }
        out[i] = acc;
    }
}

fn single_excitation_options() -> OdeOptions {
    OdeOptions::with_tolerances(1e-12, 1e-13)
}

/// Evolves a single excitation starting on `initial_site` and reports the
/// normalized site populations at each time in `tau_grid`.
pub fn single_excitation_trace(
    spec: &ChainSpec,
    initial_site: usize,
    tau_grid: &[f64],
) -> Result<Trajectory> {
    let n = spec.n_modes();
    if initial_site >= n {
        return Err(Error::IndexOutOfRange {
            index: initial_site,
            len: n,
        });
    }
    check_grid(tau_grid)?;
    let h = build_hopping_matrix(spec);
    let h = h.matrix();
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let c: Vec<Complex64> = (0..n).map(|i| Complex64::new(y[i], y[n + i])).collect();
        let mut hc = vec![Complex64::new(0.0, 0.0); n];
        tridiagonal_apply(h, &c, &mut hc);
        for i in 0..n {
            let d = -I * hc[i];
            dy[i] = d.re;
            dy[n + i] = d.im;
        }
    };
    let mut y0 = vec![0.0; 2 * n];
    y0[initial_site] = 1.0;
    let samples = crate::ode::integrate_grid(&rhs, 0.0, &y0, tau_grid, single_excitation_options())?;

    let occupations = samples
        .into_iter()
        .map(|y| {
            let p: Vec<f64> = (0..n).map(|i| y[i] * y[i] + y[n + i] * y[n + i]).collect();
            let norm: f64 = p.iter().sum();
            p.into_iter().map(|v| v / norm).collect()
        })
        .collect();
    Ok(Trajectory {
        times: tau_grid.to_vec(),
        occupations,
        covariances: Vec::new(),
    })
}

/// Fraction of `[0, period]` during which `n_a > n_b` for a single excitation
/// started on `initial_site`. Crossings are located on a grid of `samples`
/// intervals and refined by bisection.
pub fn dominance_fraction(
    spec: &ChainSpec,
    initial_site: usize,
    a: usize,
    b: usize,
    period: f64,
    samples: usize,
) -> Result<f64> {
    let n = spec.n_modes();
    for idx in [a, b] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    if !(period > 0.0 && period.is_finite()) || samples == 0 {
        return Err(Error::InvalidParameter(
            "dominance fraction needs a positive period and samples >= 1".into(),
        ));
    }
    let diff = |tau: f64| -> Result<f64> {
        if tau == 0.0 {
            return Ok(if initial_site == a { 1.0 } else if initial_site == b { -1.0 } else { 0.0 });
        }
        let tr = single_excitation_trace(spec, initial_site, &[tau])?;
        Ok(tr.occupations[0][a] - tr.occupations[0][b])
    };
    let grid: Vec<f64> = (0..=samples)
        .map(|k| period * k as f64 / samples as f64)
        .collect();
    let trace = single_excitation_trace(spec, initial_site, &grid)?;
    let f: Vec<f64> = trace.occupations.iter().map(|o| o[a] - o[b]).collect();

    let mut bounds = vec![0.0];
    for k in 0..samples {
        if (f[k] > 0.0) != (f[k + 1] > 0.0) {
            let (mut lo, mut hi) = (grid[k], grid[k + 1]);
            let lo_pos = f[k] > 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (diff(mid)? > 0.0) == lo_pos {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 4.0 * f64::EPSILON * period {
                    break;
                }
            }
            bounds.push(0.5 * (lo + hi));
        }
    }
    bounds.push(period);

    let mut above = 0.0;
    for w in bounds.windows(2) {
        if w[1] > w[0] && diff(0.5 * (w[0] + w[1]))? > 0.0 {
            above += w[1] - w[0];
        }
    }
    Ok(above / period)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceOptions {
    /// Relative tolerance; the absolute tolerance is `tol` times the bath scale.
    pub tol: f64,
    pub closure: CoherenceClosure,
    /// Keep full covariance snapshots in the trajectory.
    pub record_covariance: bool,
    /// Time budget for [`steady_from_dynamics_with`]; `50 / kappa_min` if `None`.
    pub budget: Option<f64>,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            closure: CoherenceClosure::default(),
            record_covariance: false,
            budget: None,
        }
    }
}

/// The moment equations of one chain, packed into a real state vector
/// `[n_1..n_N, Re C_p, Im C_p, ...]` over the tracked pairs `p = (i, j)`, `i < j`.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    h: DMatrix<Complex64>,
    kappa: Vec<f64>,
    n_th: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

impl CovarianceModel {
    pub fn new(spec: &ChainSpec, closure: CoherenceClosure) -> Self {
        let n = spec.n_modes();
        let pairs = match closure {
            CoherenceClosure::NearestNeighbor => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            CoherenceClosure::Full => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
        };
        Self {
            h: build_hopping_matrix(spec).matrix().clone(),
            kappa: spec.modes().iter().map(|m| m.kappa).collect(),
            n_th: spec.modes().iter().map(|m| m.n_th).collect(),
            pairs,
        }
    }

    pub fn dim(&self) -> usize {
        self.kappa.len()
    }

    pub fn state_len(&self) -> usize {
        self.dim() + 2 * self.pairs.len()
    }

    pub fn pack(&self, c: &DMatrix<Complex64>) -> Vec<f64> {
        let n = self.dim();
        let mut y = Vec::with_capacity(self.state_len());
        y.extend((0..n).map(|i| c[(i, i)].re));
        for &(i, j) in &self.pairs {
            y.push(c[(i, j)].re);
            y.push(c[(i, j)].im);
        }
        y
    }

    /// Hermitian matrix from a packed state; untracked coherences are zero.
    pub fn unpack(&self, y: &[f64]) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            c[(i, i)] = Complex64::new(y[i], 0.0);
        }
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            let z = Complex64::new(y[n + 2 * p], y[n + 2 * p + 1]);
            c[(i, j)] = z;
            c[(j, i)] = z.conj();
        }
        c
    }

    fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> {
        let n = self.dim();
        [i.wrapping_sub(1), i + 1].into_iter().filter(move |&k| k < n)
    }

    pub fn occupation_derivative(&self, c: &DMatrix<Complex64>, i: usize) -> f64 {
        let h = &self.h;
        let mut d = Complex64::new(0.0, 0.0);
        for j in self.neighbours(i) {
            d += I * (h[(j, i)] * c[(i, j)].conj() - h[(i, j)] * c[(i, j)]);
        }
        d.re - self.kappa[i] * (c[(i, i)].re - self.n_th[i])
    }

    pub fn coherence_derivative(&self, c: &DMatrix<Complex64>, i: usize, j: usize) -> Complex64 {
        let h = &self.h;
        let mut d = Complex64::new(0.0, 0.0);
        for k in self.neighbours(i) {
            d += h[(i, k)].conj() * c[(k, j)];
        }
        for k in self.neighbours(j) {
            d -= c[(i, k)] * h[(j, k)];
        }
        I * d - 0.5 * (self.kappa[i] + self.kappa[j]) * c[(i, j)]
    }

    /// `dC/dt` on the tracked entries (untracked entries are zero).
    pub fn derivative(&self, c: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = Complex64::new(self.occupation_derivative(c, i), 0.0);
        }
        for &(i, j) in &self.pairs {
            let z = self.coherence_derivative(c, i, j);
            d[(i, j)] = z;
            d[(j, i)] = z.conj();
        }
        d
    }

    pub fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.dim();
        let c = self.unpack(y);
        for i in 0..n {
            dy[i] = self.occupation_derivative(&c, i);
        }
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            let z = self.coherence_derivative(&c, i, j);
            dy[n + 2 * p] = z.re;
            dy[n + 2 * p + 1] = z.im;
        }
    }

    fn ode_options(&self, c0: &DMatrix<Complex64>, tol: f64) -> Result<OdeOptions> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
        }
        let scale = self
            .n_th
            .iter()
            .copied()
            .chain((0..self.dim()).map(|i| c0[(i, i)].re.abs()))
            .fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        // Keep h * |lambda| well inside the stability region on the coherence
        // oscillations; otherwise the controller parks at the stability edge
        // and the long-time derivative never drops below the tolerance.
        let rate = (0..self.dim())
            .map(|i| self.neighbours(i).map(|k| self.h[(i, k)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut opts = OdeOptions::with_tolerances(tol, tol * scale);
        if rate > 0.0 {
            opts.h_max = 0.5 / rate;
        }
        Ok(opts)
    }
}

fn check_initial(spec: &ChainSpec, c0: &CovarianceState) -> Result<()> {
    if c0.dim() != spec.n_modes() {
        return Err(Error::InvalidParameter(format!(
            "covariance of order {} for {} modes",
            c0.dim(),
            spec.n_modes()
        )));
    }
    Ok(())
}

fn push_sample(
    traj: &mut Trajectory,
    model: &CovarianceModel,
    t: f64,
    y: &[f64],
    record: bool,
) {
    traj.times.push(t);
    traj.occupations.push(y[..model.dim()].to_vec());
    if record {
        traj.covariances.push(CovarianceState { c: model.unpack(y) });
    }
}

/// Integrates the moment equations to `t_end`, sampling at every accepted step.
pub fn evolve_covariance(
    spec: &ChainSpec,
    c0: &CovarianceState,
    t_end: f64,
    opts: &CovarianceOptions,
) -> Result<Trajectory> {
    check_initial(spec, c0)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
    }
    let model = CovarianceModel::new(spec, opts.closure);
    let ode_opts = model.ode_options(c0.matrix(), opts.tol)?;
    let y0 = model.pack(c0.matrix());
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| model.rhs(y, dy);
    let mut stepper = Dopri5::new(&rhs, 0.0, &y0, ode_opts);
    let mut traj = Trajectory::default();
    push_sample(&mut traj, &model, 0.0, &y0, opts.record_covariance);
    while stepper.t() < t_end {
        stepper.step(t_end)?;
        push_sample(&mut traj, &model, stepper.t(), stepper.y(), opts.record_covariance);
    }
    Ok(traj)
}

/// Integrates the moment equations and samples them on `grid` by dense output.
pub fn evolve_covariance_on_grid(
    spec: &ChainSpec,
    c0: &CovarianceState,
    grid: &[f64],
    opts: &CovarianceOptions,
) -> Result<Trajectory> {
    check_initial(spec, c0)?;
    check_grid(grid)?;
    let model = CovarianceModel::new(spec, opts.closure);
    let ode_opts = model.ode_options(c0.matrix(), opts.tol)?;
    let y0 = model.pack(c0.matrix());
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| model.rhs(y, dy);
    let samples = crate::ode::integrate_grid(&rhs, 0.0, &y0, grid, ode_opts)?;
    let mut traj = Trajectory::default();
    for (&t, y) in grid.iter().zip(&samples) {
        push_sample(&mut traj, &model, t, y, opts.record_covariance);
    }
    Ok(traj)
}

/// Long-time limit of the moment equations started from the thermal state.
pub fn steady_from_dynamics(spec: &ChainSpec, tol: f64) -> Result<SteadyState> {
    steady_from_dynamics_with(
        spec,
        &CovarianceOptions {
            tol,
            ..CovarianceOptions::default()
        },
    )
}

/// As [`steady_from_dynamics`], converged once `max |dC/dt| <= tol * kappa_max * n_th`.
pub fn steady_from_dynamics_with(spec: &ChainSpec, opts: &CovarianceOptions) -> Result<SteadyState> {
    let kappa_min = spec.modes().iter().map(|m| m.kappa).fold(f64::INFINITY, f64::min);
    let kappa_max = spec.modes().iter().map(|m| m.kappa).fold(0.0, f64::max);
    if kappa_min <= 0.0 {
        return Err(Error::InvalidParameter(
            "steady state from dynamics needs kappa > 0 on every mode".into(),
        ));
    }
    let n_scale = spec.modes().iter().map(|m| m.n_th).fold(0.0, f64::max);
    let n_scale = if n_scale > 0.0 { n_scale } else { 1.0 };
    let threshold = opts.tol * kappa_max * n_scale;
    let budget = opts.budget.unwrap_or(50.0 / kappa_min);

    let model = CovarianceModel::new(spec, opts.closure);
    let c0 = CovarianceState::thermal(spec);
    let ode_opts = model.ode_options(c0.matrix(), opts.tol)?;
    let y0 = model.pack(c0.matrix());
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| model.rhs(y, dy);
    let mut stepper = Dopri5::new(&rhs, 0.0, &y0, ode_opts);
    loop {
        let r = stepper.derivative().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r <= threshold {
            return Ok(SteadyState {
                occupations: stepper.y()[..model.dim()].to_vec(),
                residual: r,
            });
        }
        if stepper.t() >= budget {
            return Err(Error::NotConverged {
                time: stepper.t(),
                residual: r,
            });
        }
        stepper.step(budget)?;
    }
}
