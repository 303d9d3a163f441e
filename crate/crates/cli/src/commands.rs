use std::f64::consts::PI;

use nhcool_core::config::ChainConfig;
use nhcool_core::dynamics::{single_excitation_trace, steady_from_dynamics};
use nhcool_core::model::build_hopping_matrix;
use nhcool_core::oracle::oracle_steady;
use nhcool_core::spectral::{diagonalize, hn_occupations};
use nhcool_core::steady::{
    closed_form_two_mode, plateau_limit, solve_steady_chain, solve_with_attached, AttachedModeSpec,
};
use nhcool_core::sweep::{linspace, logspace, try_map};
use nhcool_core::{ChainSpec, Error};

use crate::cli::{AttachedArgs, ChainProfileArgs, Method, RabiArgs, ScalingArgs, SteadyArgs, SweepAArgs};
use crate::settings::{check_range, pick, ChainDefaults, Settings};
use crate::table::{Cell, Table};

/// Relative deviation allowed between solver layers in `oracle`.
pub const LAYER_TOLERANCE: f64 = 0.10;

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Solver(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.into()),
            e => Failure::Solver(e),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow::anyhow!(msg.into()))
}

/// A finished command: the table plus any cross-layer violations.
pub struct Report {
    pub table: Table,
    pub violations: Vec<String>,
}

impl From<Table> for Report {
    fn from(table: Table) -> Self {
        Self {
            table,
            violations: Vec::new(),
        }
    }
}

type Outcome = Result<Report, Failure>;

/// Chain construction errors come from user input, so they are usage errors.
fn build(cfg: &ChainConfig) -> Result<ChainSpec, Failure> {
    cfg.to_spec().map_err(|e| Failure::Usage(e.into()))
}

fn with_modes(cfg: &ChainConfig, n_modes: usize) -> ChainConfig {
    ChainConfig {
        n_modes,
        ..cfg.clone()
    }
}

pub fn rabi(s: &Settings, args: &RabiArgs) -> Outcome {
    let f = &s.file.rabi;
    let cfg = s.chain(ChainDefaults::default());
    let spec = build(&cfg)?;
    let rows = pick(args.grid, f.grid, 1000);
    let periods = pick(args.periods, f.periods, 2.0);
    let site = pick(args.initial_site, f.initial_site, 1);
    if rows == 0 || !(periods > 0.0 && periods.is_finite()) {
        return Err(usage("rabi: need grid >= 1 and periods > 0"));
    }
    if site == 0 || site > cfg.n_modes {
        return Err(usage(format!("rabi: initial site must be in 1..={}", cfg.n_modes)));
    }
    if cfg.t <= 0.0 {
        return Err(usage("rabi: the time unit pi / t needs t > 0"));
    }
    let taus = linspace(0.0, periods * PI / cfg.t, rows)?;
    let trace = single_excitation_trace(&spec, site - 1, &taus)?;
    let mut table = Table::new(trace.csv_header());
    for (tau, n) in trace.times.iter().zip(&trace.occupations) {
        table.push(std::iter::once(Cell::from(*tau)).chain(n.iter().map(|&v| v.into())).collect());
    }
    Ok(table.into())
}

pub fn sweep_a(s: &Settings, args: &SweepAArgs) -> Outcome {
    let cfg = s.uniform_chain(ChainDefaults::default(), "sweep-A")?;
    let range = check_range(
        "sweep-A range",
        pick(args.range, s.file.sweep_a.range, "1:5:100".parse().unwrap()),
    )?;
    if range.start <= 0.0 || range.stop <= 0.0 {
        return Err(usage("sweep-A: e^A must be positive"));
    }
    let grid = linspace(range.start, range.stop, range.count)?;
    let rows = try_map(&grid, |&e_a| {
        closed_form_two_mode(cfg.t, e_a.ln(), cfg.kappa, cfg.kappa, cfg.n_th).map(|(n1, n2)| (e_a, n1, n2))
    })?;
    let mut table = Table::new(["e_A", "n_1", "n_2"]);
    for (e_a, n1, n2) in rows {
        table.push(vec![e_a.into(), n1.into(), n2.into()]);
    }
    Ok(table.into())
}

fn spectral_occupations(spec: &ChainSpec) -> Result<Vec<f64>, Failure> {
    let n_th = spec.modes()[0].n_th;
    if spec.modes().iter().any(|m| m.n_th != n_th) {
        return Err(usage("spectral occupations need a uniform bath occupation"));
    }
    Ok(hn_occupations(&diagonalize(&build_hopping_matrix(spec))?, n_th))
}

pub fn chain_profile(s: &Settings, args: &ChainProfileArgs) -> Outcome {
    let cfg = s.uniform_chain(ChainDefaults::default(), "chain-profile")?;
    let lengths = pick(args.lengths.clone(), s.file.chain_profile.lengths.clone(), vec![5, 10, 15]);
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(usage("chain-profile: lengths must be >= 1"));
    }
    let specs = lengths
        .iter()
        .map(|&n| build(&with_modes(&cfg, n)))
        .collect::<Result<Vec<_>, _>>()?;
    let profiles = try_map(&specs, |spec| -> Result<_, Failure> {
        let rate = solve_steady_chain(spec)?.occupations;
        let hn = hn_occupations(&diagonalize(&build_hopping_matrix(spec))?, cfg.n_th);
        Ok((rate, hn))
    })?;
    let mut table = Table::new(["N", "i", "n_i", "n_i_hn"]);
    for (&n, (rate, hn)) in lengths.iter().zip(profiles) {
        for i in 0..n {
            table.push(vec![n.into(), (i + 1).into(), rate[i].into(), hn[i].into()]);
        }
    }
    Ok(table.into())
}

pub fn scaling(s: &Settings, args: &ScalingArgs) -> Outcome {
    let f = &s.file.scaling;
    let cfg = s.uniform_chain(ChainDefaults::default(), "scaling")?;
    let n_min = pick(args.n_min, f.n_min, 2);
    let n_max = pick(args.n_max, f.n_max, 30);
    let kappas = pick(args.kappas.clone(), f.kappas.clone(), vec![1e-4, 1e-3, 1e-2]);
    if n_min == 0 || n_max < n_min {
        return Err(usage("scaling: need 1 <= n_min <= n_max"));
    }
    if kappas.is_empty() || kappas.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(usage("scaling: kappas must be positive"));
    }
    let lengths: Vec<usize> = (n_min..=n_max).collect();
    let hn = try_map(&lengths, |&n| -> Result<_, Failure> {
        let spec = build(&with_modes(&cfg, n))?;
        Ok(spectral_occupations(&spec)?[0])
    })?;
    let points: Vec<(f64, usize)> = kappas
        .iter()
        .flat_map(|&k| lengths.iter().map(move |&n| (k, n)))
        .collect();
    let rows = try_map(&points, |&(kappa, n)| -> Result<_, Failure> {
        let spec = build(&ChainConfig {
            n_modes: n,
            kappa,
            ..cfg.clone()
        })?;
        let n1 = solve_steady_chain(&spec)?.occupations[0];
        let plateau = plateau_limit(cfg.t, cfg.a, kappa, cfg.n_th)?;
        Ok((n1, plateau))
    })?;
    let mut table = Table::new(["N", "kappa", "n_1", "plateau", "n_1_hn"]);
    for (&(kappa, n), (n1, plateau)) in points.iter().zip(rows) {
        table.push(vec![n.into(), kappa.into(), n1.into(), plateau.into(), hn[n - n_min].into()]);
    }
    Ok(table.into())
}

pub fn attached(s: &Settings, args: &AttachedArgs) -> Outcome {
    let f = &s.file.attached;
    let defaults = ChainDefaults {
        n_modes: 15,
        ..ChainDefaults::default()
    };
    let spec = build(&s.uniform_chain(defaults, "attached")?)?;
    let k_range = check_range(
        "kappa0 range",
        pick(args.kappa0_range, f.kappa0_range, "1e-4:0.1:20".parse().unwrap()),
    )?;
    let t_range = check_range(
        "t0 range",
        pick(args.t0_range, f.t0_range, "0.05:2:20".parse().unwrap()),
    )?;
    if k_range.start <= 0.0 || k_range.stop <= 0.0 {
        return Err(usage("attached: kappa0 grid is logarithmic and must be positive"));
    }
    let kappas = logspace(k_range.start, k_range.stop, k_range.count)?;
    let couplings = linspace(t_range.start, t_range.stop, t_range.count)?;
    let points: Vec<(f64, f64)> = kappas
        .iter()
        .flat_map(|&k| couplings.iter().map(move |&t| (k, t)))
        .collect();
    let n0 = try_map(&points, |&(k0, t0)| -> Result<_, Failure> {
        Ok(solve_with_attached(&spec, &AttachedModeSpec::new(t0, k0))?.occupations[0])
    })?;
    let mut table = Table::new(["kappa_0", "t_0", "n_0"]);
    for (&(k0, t0), n) in points.iter().zip(n0) {
        table.push(vec![k0.into(), t0.into(), n.into()]);
    }
    Ok(table.into())
}

fn relative(x: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        (x - reference).abs() / reference
    } else {
        (x - reference).abs()
    }
}

pub fn oracle(s: &Settings) -> Outcome {
    let defaults = ChainDefaults {
        kappa: 0.05,
        n_th: 0.1,
        ..ChainDefaults::default()
    };
    let spec = build(&s.chain(defaults))?;
    let cutoff = s.cutoff(5);
    let tol = s.tol(1e-10);

    let rate = solve_steady_chain(&spec)?.occupations;
    let dynamics = steady_from_dynamics(&spec, tol)?.occupations;
    let oracle = oracle_steady(&spec, cutoff, tol)?;

    let mut violations = Vec::new();
    let diag = &oracle.diagnostics;
    if diag.max_trace_error > 1e-8 {
        violations.push(format!("trace drifted by {:.2e}", diag.max_trace_error));
    }
    if diag.max_hermiticity_error > 1e-8 {
        violations.push(format!("hermiticity error {:.2e}", diag.max_hermiticity_error));
    }
    if diag.min_eigenvalue < -1e-6 {
        violations.push(format!("density matrix eigenvalue {:.2e}", diag.min_eigenvalue));
    }
    for w in &diag.warnings {
        log::warn!(
            "mode {}: top Fock level holds {:.2e}; raise --cutoff",
            w.mode + 1,
            w.population
        );
    }

    let mut table = Table::new(["mode", "n_rate", "n_dynamics", "n_oracle", "dev_dynamics", "dev_oracle"]);
    for i in 0..spec.n_modes() {
        let (r, d, o) = (rate[i], dynamics[i], oracle.occupations[i]);
        let (dd, dor) = (relative(d, r), relative(o, r));
        for (layer, dev) in [("dynamics", dd), ("oracle", dor)] {
            if dev > LAYER_TOLERANCE {
                violations.push(format!(
                    "mode {}: {layer} deviates from the rate equations by {:.1}%",
                    i + 1,
                    100.0 * dev
                ));
            }
        }
        table.push(vec![(i + 1).into(), r.into(), d.into(), o.into(), dd.into(), dor.into()]);
    }
    Ok(Report { table, violations })
}

pub fn steady(s: &Settings, args: &SteadyArgs) -> Outcome {
    let cfg = s.chain(ChainDefaults::default());
    let spec = build(&cfg)?;
    let method = pick(args.method, s.file.steady.method, Method::Rate);
    let t0 = args.t0.or(s.file.t0);
    let kappa0 = args.kappa0.or(s.file.kappa0);

    let (first, occupations) = match (method, t0) {
        (Method::Rate, Some(t0)) => {
            let k0 = kappa0.unwrap_or(spec.modes()[0].kappa);
            (0, solve_with_attached(&spec, &AttachedModeSpec::new(t0, k0))?.occupations)
        }
        (_, Some(_)) => return Err(usage("an attached mode (t0) is only supported by --method rate")),
        (Method::Rate, None) => (1, solve_steady_chain(&spec)?.occupations),
        (Method::Spectral, None) => (1, spectral_occupations(&spec)?),
        (Method::Dynamics, None) => (1, steady_from_dynamics(&spec, s.tol(1e-9))?.occupations),
        (Method::Oracle, None) => (1, oracle_steady(&spec, s.cutoff(5), s.tol(1e-10))?.occupations),
    };
    let mut table = Table::new(["i", "n_i"]);
    for (k, n) in occupations.into_iter().enumerate() {
        table.push(vec![(first + k).into(), n.into()]);
    }
    Ok(table.into())
}
