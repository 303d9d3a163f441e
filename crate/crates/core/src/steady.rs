//! Steady-state rate equations.
//!
//! Mode `i` loses excitations to its neighbours at rates `g[(i, j)]` and to its
//! bath at rate `kappa_i`, and gains them from neighbours and from the bath:
//!
//! ```text
//! (sum_j g_ij + kappa_i) n_i - sum_j g_ji n_j = kappa_i n_th,i
//! ```
//!
//! Summing over `i` cancels every transfer term, so with a uniform `kappa`
//! the total occupation is `N n_th` whatever the rates are.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{build_rate_matrix, Bond, ChainSpec, ModeParams, RateMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub occupations: Vec<f64>,
    /// Max-norm of `M n - b` for the solved linear system.
    pub residual: f64,
}

impl SteadyState {
    pub fn total(&self) -> f64 {
        self.occupations.iter().sum()
    }
}

/// Hermitian (reciprocal) attachment of an extra mode 0 to mode 1 of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttachedModeSpec {
    pub t0: f64,
    pub kappa0: f64,
    /// Bath occupation of mode 0; `None` uses the first chain mode's `n_th`.
    pub n_th0: Option<f64>,
}

impl AttachedModeSpec {
    pub fn new(t0: f64, kappa0: f64) -> Self {
        Self {
            t0,
            kappa0,
            n_th0: None,
        }
    }
}

/// Solves the rate equations for arbitrary nearest-neighbour rates.
///
/// The balance matrix is nearly singular when `g >> kappa` (its columns sum
/// to `kappa`), so row `i < N - 1` is replaced by the sum of rows `0..=i`,
/// i.e. the net flux across bond `i`:
///
/// ```text
/// g_{i,i+1} n_i - g_{i+1,i} n_{i+1} + sum_{k<=i} kappa_k n_k = sum_{k<=i} kappa_k n_th,k
/// ```
///
/// The last row becomes the global balance `sum_k kappa_k (n_k - n_th,k) = 0`.
/// After row scaling this stays well conditioned for any `g / kappa`.
/// The reported residual is measured on the original balance equations.
pub fn solve_rate_equations(rates: &RateMatrix, modes: &[ModeParams]) -> Result<SteadyState> {
    let n = modes.len();
    if rates.dim() != n {
        return Err(Error::InvalidParameter(format!(
            "rate matrix of order {} for {n} modes",
            rates.dim()
        )));
    }
    if modes.iter().all(|m| m.kappa == 0.0) {
        return Err(Error::SingularSystem(
            "every mode has kappa = 0; take the kappa -> 0 limit with small kappa".into(),
        ));
    }
    let g = rates.matrix();

    let mut flux = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let (mut bath, mut source) = (0.0, 0.0);
    for i in 0..n {
        bath += modes[i].kappa;
        source += modes[i].kappa * modes[i].n_th;
        for k in 0..=i {
            flux[(i, k)] = modes[k].kappa;
        }
        rhs[i] = source;
        let mut scale = bath;
        if i + 1 < n {
            flux[(i, i)] += g[(i, i + 1)];
            flux[(i, i + 1)] = -g[(i + 1, i)];
            scale = scale.max(g[(i, i + 1)]).max(g[(i + 1, i)]);
        }
        if scale > 0.0 {
            flux.row_mut(i).unscale_mut(scale);
            rhs[i] /= scale;
        }
    }
    let solution = flux
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("rate equations are singular".into()))?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite solution".into()));
    }
    let occupations: Vec<f64> = solution.iter().copied().collect();
    let residual = balance_residual(g, modes, &occupations);
    Ok(SteadyState {
        occupations,
        residual,
    })
}

/// Max-norm residual of the per-mode balance equations.
fn balance_residual(g: &DMatrix<f64>, modes: &[ModeParams], n: &[f64]) -> f64 {
    let len = n.len();
    (0..len)
        .map(|i| {
            let mut r = modes[i].kappa * (n[i] - modes[i].n_th);
            for j in [i.wrapping_sub(1), i + 1] {
                if j < len {
                    r += g[(i, j)] * n[i] - g[(j, i)] * n[j];
                }
            }
            r.abs()
        })
        .fold(0.0, f64::max)
}

pub fn solve_steady_chain(spec: &ChainSpec) -> Result<SteadyState> {
    solve_rate_equations(&build_rate_matrix(spec)?, spec.modes())
}

/// Large-`N` occupation of the first mode, `kappa^2 n_th / (kappa^2 + t^2 (e^{2A} - e^{-2A}))`.
pub fn plateau_limit(t: f64, a: f64, kappa: f64, n_th: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidRegime(format!(
            "plateau needs A > 0 (t_12 > t_21), got A = {a}"
        )));
    }
    if !(t > 0.0 && kappa > 0.0 && n_th >= 0.0) {
        return Err(Error::InvalidParameter(
            "plateau needs t > 0, kappa > 0, n_th >= 0".into(),
        ));
    }
    let k2 = kappa * kappa;
    Ok(k2 * n_th / (k2 + t * t * ((2.0 * a).exp() - (-2.0 * a).exp())))
}

/// First-mode occupation of the semi-infinite uniform chain, obtained exactly
/// from the rate equations.
///
/// Far from the left edge the chain sits at `n_th`; the edge correction
/// decays as `lambda^i` with `lambda` the root inside the unit circle of
/// `g_21 x^2 - (g_12 + g_21 + kappa) x + g_12 = 0`, which gives
/// `n_1 = n_th g_12 (1 - lambda) / (g_12 - g_21 lambda)`.
pub fn semi_infinite_edge_occupation(t: f64, a: f64, kappa: f64, n_th: f64) -> Result<f64> {
    plateau_limit(t, a, kappa, n_th)?;
    let fwd = transition(t * a.exp(), t * (-a).exp(), kappa);
    let bwd = transition(t * (-a).exp(), t * a.exp(), kappa);
    let spread = fwd - bwd;
    let b = fwd + bwd + kappa;
    let disc = (spread * spread + 2.0 * kappa * (fwd + bwd) + kappa * kappa).sqrt();
    let lambda = 2.0 * fwd / (b + disc);
    // 1 - lambda without cancellation: (b + disc - 2 fwd) / (b + disc).
    let excess = (2.0 * kappa * (fwd + bwd) + kappa * kappa) / (disc + spread);
    let one_minus_lambda = (kappa + excess) / (b + disc);
    Ok(n_th * fwd * one_minus_lambda / (fwd - bwd * lambda))
}

fn transition(t_out: f64, t_in: f64, kappa: f64) -> f64 {
    2.0 * (t_out * t_out + t_out * t_in) / (2.0 * kappa)
}

/// Reciprocal rate between the attached mode and mode 1, `4 |t0|^2 / (kappa1 + kappa0)`.
pub fn attached_rate(t0: f64, kappa0: f64, kappa1: f64) -> f64 {
    4.0 * t0 * t0 / (kappa1 + kappa0)
}

/// Attached-mode balance `n0 = (g0 n1 + kappa0 n_th) / (g0 + kappa0)`.
pub fn attached_closed_form(n1: f64, t0: f64, kappa0: f64, kappa1: f64, n_th: f64) -> f64 {
    let g0 = attached_rate(t0, kappa0, kappa1);
    (g0 * n1 + kappa0 * n_th) / (g0 + kappa0)
}

/// Solves the `N + 1` mode system with mode 0 attached to the chain's first
/// mode. Occupations are ordered mode 0 first.
pub fn solve_with_attached(spec: &ChainSpec, attached: &AttachedModeSpec) -> Result<SteadyState> {
    if !attached.t0.is_finite() {
        return Err(Error::InvalidParameter("t0 must be finite".into()));
    }
    let n_th0 = attached.n_th0.unwrap_or(spec.modes()[0].n_th);
    let mode0 = ModeParams::new(attached.kappa0, n_th0)?;
    let t0 = num_complex::Complex64::new(attached.t0, 0.0);
    let full = spec.prepend_mode(mode0, Bond::new(t0, t0))?;
    solve_steady_chain(&full)
}

/// Exact solution of the two-mode balance.
pub fn closed_form_two_mode(t: f64, a: f64, kappa1: f64, kappa2: f64, n_th: f64) -> Result<(f64, f64)> {
    if !(kappa1 > 0.0 && kappa2 > 0.0) {
        return Err(Error::InvalidParameter(
            "two-mode closed form needs kappa1, kappa2 > 0".into(),
        ));
    }
    if !(t >= 0.0 && a.is_finite() && n_th >= 0.0) {
        return Err(Error::InvalidParameter(
            "two-mode closed form needs t >= 0, finite A, n_th >= 0".into(),
        ));
    }
    let (t12, t21) = (t * a.exp(), t * (-a).exp());
    let ks = kappa1 + kappa2;
    let g12 = 2.0 * (t12 * t12 + t12 * t21) / ks;
    let g21 = 2.0 * (t21 * t21 + t12 * t21) / ks;
    let det = g12 * kappa2 + g21 * kappa1 + kappa1 * kappa2;
    let n1 = n_th * (kappa1 * g21 + kappa1 * kappa2 + kappa2 * g21) / det;
    let n2 = n_th * (kappa2 * g12 + kappa1 * kappa2 + kappa1 * g12) / det;
    Ok((n1, n2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_uniform_chain;
    use crate::spectral::{diagonalize, hn_occupations};
    use crate::model::build_hopping_matrix;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn chain(n: usize, a: f64, kappa: f64) -> ChainSpec {
        make_uniform_chain(n, 1.0, a, kappa, 1.0).unwrap()
    }

    /// Plain Gaussian elimination without pivoting, assembled straight from
    /// the balance equations; independent of the library's LU path.
    fn brute_force(n: usize, fwd: f64, bwd: f64, kappa: f64, n_th: f64) -> Vec<f64> {
        let mut m = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            m[i][i] = kappa;
            if i + 1 < n {
                m[i][i] += fwd;
                m[i][i + 1] -= bwd;
            }
            if i > 0 {
                m[i][i] += bwd;
                m[i][i - 1] -= fwd;
            }
            m[i][n] = kappa * n_th;
        }
        for c in 0..n {
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
            x[r] = (m[r][n] - s) / m[r][r];
        }
        x
    }

    #[test]
    fn two_mode_cooling() {
        let s = solve_steady_chain(&chain(2, LN_2, 0.01)).unwrap();
        assert!((s.occupations[0] - 250.01 / 625.01).abs() < 1e-12);
        assert!((s.occupations[1] - 1000.01 / 625.01).abs() < 1e-12);
        assert!((s.occupations[0] - 0.4).abs() < 1e-3);
    }

    #[test]
    fn hermitian_chain_is_thermal() {
        for n in 1..=12 {
            let s = solve_steady_chain(&make_uniform_chain(n, 1.0, 0.0, 0.03, 2.5).unwrap()).unwrap();
            for v in s.occupations {
                assert!((v - 2.5).abs() < 1e-12 * 2.5);
            }
        }
    }

    #[test]
    fn small_kappa_geometric_profile() {
        let s = solve_steady_chain(&chain(3, LN_2, 1e-6)).unwrap();
        let expected = [1.0 / 7.0, 4.0 / 7.0, 16.0 / 7.0];
        for i in 0..3 {
            assert!((s.occupations[i] - expected[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_brute_force_elimination() {
        for (n, a, k) in [(5, 0.3, 0.02), (10, LN_2, 0.01), (7, 1.1, 0.5)] {
            let s = solve_steady_chain(&chain(n, a, k)).unwrap();
            let (tf, tb) = (a.exp(), (-a).exp());
            let fwd = (tf * tf + 1.0) / k;
            let bwd = (tb * tb + 1.0) / k;
            let brute = brute_force(n, fwd, bwd, k, 1.0);
            for (x, y) in s.occupations.iter().zip(&brute) {
                assert!((x - y).abs() < 1e-10 * y);
            }
        }
    }

    #[test]
    fn decoupled_modes_thermalize() {
        let m = ModeParams::new(0.01, 1.0).unwrap();
        let spec = ChainSpec::new(vec![m; 2], vec![Bond::decoupled()], 1.0).unwrap();
        let s = solve_steady_chain(&spec).unwrap();
        assert_eq!(s.occupations, vec![1.0, 1.0]);
    }

    #[test]
    fn zero_kappa_is_singular() {
        let m = ModeParams::new(0.0, 1.0).unwrap();
        let spec = ChainSpec::new(vec![m], vec![], 1.0).unwrap();
        assert!(matches!(solve_steady_chain(&spec), Err(Error::SingularSystem(_))));
        assert!(matches!(
            solve_steady_chain(&chain(3, 0.5, 0.0)),
            Err(Error::DivergentRate { .. })
        ));
    }

    #[test]
    fn residual_is_small() {
        for (n, k) in [(2, 0.01), (10, 0.01), (40, 0.01), (15, 0.5), (8, 1e-6)] {
            let s = solve_steady_chain(&chain(n, LN_2, k)).unwrap();
            // normwise backward error
            let g_max = 5.0 / k;
            let n_max = s.occupations.iter().fold(0.0f64, |a, &b| a.max(b));
            let scale = (2.0 * g_max + k) * n_max + k;
            assert!(s.residual <= 1e-13 * scale, "n={n} k={k} r={}", s.residual);
        }
    }

    #[test]
    fn two_mode_small_kappa_is_accurate() {
        let s = solve_steady_chain(&chain(2, LN_2, 1e-6)).unwrap();
        let (n1, n2) = closed_form_two_mode(1.0, LN_2, 1e-6, 1e-6, 1.0).unwrap();
        assert!((s.occupations[0] - n1).abs() < 1e-13);
        assert!((s.occupations[1] - n2).abs() < 1e-13);
    }

    #[test]
    fn plateau_values() {
        let p = plateau_limit(1.0, LN_2, 0.01, 1.0).unwrap();
        assert!((p - 1e-4 / (1e-4 + 3.75)).abs() < 1e-18);
        assert!((p - 2.6666e-5).abs() < 1e-9);
        let p = plateau_limit(1.0, 0.1, 0.01, 1.0).unwrap();
        assert!((p - 1e-4 / (1e-4 + 0.2f64.exp() - (-0.2f64).exp())).abs() < 1e-18);
        assert!((p - 2.48e-4).abs() < 1e-6);
        let p = plateau_limit(1.0, LN_2, 1e4, 1.0).unwrap();
        assert!((p - 1.0).abs() < 1e-6);
        assert!(matches!(plateau_limit(1.0, 0.0, 0.01, 1.0), Err(Error::InvalidRegime(_))));
        assert!(matches!(plateau_limit(1.0, -0.5, 0.01, 1.0), Err(Error::InvalidRegime(_))));
    }

    #[test]
    fn long_chain_converges_to_semi_infinite_edge() {
        for (a, k) in [(LN_2, 0.01), (0.1, 0.01), (1.0, 0.1), (0.5, 1e-3)] {
            let exact = semi_infinite_edge_occupation(1.0, a, k, 1.0).unwrap();
            let n1 = solve_steady_chain(&chain(400, a, k)).unwrap().occupations[0];
            assert!((n1 / exact - 1.0).abs() < 1e-8, "a={a} k={k}: {n1} vs {exact}");
        }
        // The large-N limit exceeds the plateau formula by (e^{2A}+1)/(e^{2A}-e^{-2A})
        // to leading order in kappa.
        let ratio = semi_infinite_edge_occupation(1.0, LN_2, 1e-4, 1.0).unwrap()
            / plateau_limit(1.0, LN_2, 1e-4, 1.0).unwrap();
        assert!((ratio - 5.0 / 3.75).abs() < 1e-3);
    }

    #[test]
    fn closed_form_two_mode_values() {
        let (n1, n2) = closed_form_two_mode(1.0, LN_2, 0.01, 0.01, 1.0).unwrap();
        assert!((n1 - 250.01 / 625.01).abs() < 1e-14);
        assert!((n1 + n2 - 2.0).abs() < 1e-14);
        let (n1, n2) = closed_form_two_mode(1.0, 0.0, 0.01, 0.03, 1.7).unwrap();
        assert!((n1 - 1.7).abs() < 1e-13 && (n2 - 1.7).abs() < 1e-13);
        let mut prev = 1.0;
        for ea in [2.0, 5.0, 20.0, 100.0, 1000.0] {
            let (n1, _) = closed_form_two_mode(1.0, f64::ln(ea), 0.01, 0.01, 1.0).unwrap();
            assert!(n1 < prev);
            prev = n1;
        }
        assert!(prev < 1e-5);
        assert!(closed_form_two_mode(1.0, 0.5, 0.0, 0.01, 1.0).is_err());
    }

    #[test]
    fn closed_form_matches_chain_solver_unequal_kappa() {
        let m1 = ModeParams::new(0.02, 1.0).unwrap();
        let m2 = ModeParams::new(0.07, 1.0).unwrap();
        let spec = ChainSpec::new(vec![m1, m2], vec![Bond::hatano_nelson(1.0, 0.8)], 1.0).unwrap();
        let s = solve_steady_chain(&spec).unwrap();
        let (n1, n2) = closed_form_two_mode(1.0, 0.8, 0.02, 0.07, 1.0).unwrap();
        assert!((s.occupations[0] - n1).abs() < 1e-12);
        assert!((s.occupations[1] - n2).abs() < 1e-12);
    }

    #[test]
    fn attached_mode_examples() {
        let spec = chain(15, LN_2, 0.01);
        let s = solve_with_attached(&spec, &AttachedModeSpec::new(1.0, 0.01)).unwrap();
        assert_eq!(s.occupations.len(), 16);
        assert!((attached_rate(1.0, 0.01, 0.01) - 200.0).abs() < 1e-12);
        let eq7 = attached_closed_form(s.occupations[1], 1.0, 0.01, 0.01, 1.0);
        assert!((eq7 / s.occupations[0] - 1.0).abs() < 0.02);
        assert!(s.occupations[0] < 1e-3);

        let s = solve_with_attached(&spec, &AttachedModeSpec::new(0.0, 0.01)).unwrap();
        assert!((s.occupations[0] - 1.0).abs() < 1e-12);

        let s = solve_with_attached(&spec, &AttachedModeSpec::new(1.0, 1e9)).unwrap();
        assert!((s.occupations[0] - 1.0).abs() < 1e-6);

        let mut custom = AttachedModeSpec::new(0.0, 0.2);
        custom.n_th0 = Some(3.0);
        let s = solve_with_attached(&spec, &custom).unwrap();
        assert!((s.occupations[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_cooling_in_asymmetry() {
        let mut prev = f64::INFINITY;
        for k in 0..=40 {
            let a = 2.0 * k as f64 / 40.0;
            let n1 = solve_steady_chain(&chain(2, a, 0.01)).unwrap().occupations[0];
            assert!(n1 <= prev + 1e-15);
            prev = n1;
        }
    }

    #[test]
    fn exponential_regime_ratios() {
        let s = solve_steady_chain(&chain(10, LN_2, 0.01)).unwrap();
        let plateau = plateau_limit(1.0, LN_2, 0.01, 1.0).unwrap();
        let n = &s.occupations;
        let mut checked = 0;
        for i in 0..9 {
            if n[i] >= 100.0 * plateau {
                let r = n[i] / n[i + 1];
                assert!((0.24..=0.26).contains(&r), "i={i} r={r}");
                checked += 1;
            }
        }
        assert!(checked >= 5);
    }

    #[test]
    fn plateau_monotone_in_length() {
        for kappa in [1e-4, 1e-3, 1e-2] {
            let plateau = plateau_limit(1.0, LN_2, kappa, 1.0).unwrap();
            let mut prev = f64::INFINITY;
            for n in 1..=40 {
                let n1 = solve_steady_chain(&chain(n, LN_2, kappa)).unwrap().occupations[0];
                assert!(n1 <= prev * (1.0 + 1e-12));
                assert!(n1 >= 0.95 * plateau);
                prev = n1;
            }
        }
    }

    #[test]
    fn spectral_consistency_small_kappa() {
        for n in 2..=8 {
            let spec = chain(n, LN_2, 1e-6);
            let rate = solve_steady_chain(&spec).unwrap().occupations[0];
            let hn = hn_occupations(&diagonalize(&build_hopping_matrix(&spec)).unwrap(), 1.0)[0];
            assert!(((hn - rate) / rate).abs() <= 0.15, "n={n}");
            if n == 2 {
                assert!((hn - rate).abs() < 1e-4);
            }
        }
    }

    proptest! {
        #[test]
        fn conservation_for_random_rates(
            rates in proptest::collection::vec((0.0f64..1e3, 0.0f64..1e3), 1..30),
            kappa in 1e-3f64..1.0,
            n_th in 0.0f64..5.0,
        ) {
            let n = rates.len() + 1;
            let mut g = DMatrix::zeros(n, n);
            for (i, (f, b)) in rates.iter().enumerate() {
                g[(i, i + 1)] = *f;
                g[(i + 1, i)] = *b;
            }
            let modes = vec![ModeParams::new(kappa, n_th).unwrap(); n];
            let s = solve_rate_equations(&RateMatrix::from_matrix(g).unwrap(), &modes).unwrap();
            let total = n as f64 * n_th;
            prop_assert!((s.total() - total).abs() <= 1e-10 * total.max(1e-300));
            prop_assert!(s.occupations.iter().all(|&v| v >= -1e-12 * total.max(1.0)));
        }

        #[test]
        fn two_mode_matches_closed_form(a in -2.0f64..2.0, k in 1e-3f64..1.0, n_th in 0.0f64..5.0) {
            let s = solve_steady_chain(&make_uniform_chain(2, 1.0, a, k, n_th).unwrap()).unwrap();
            let (n1, n2) = closed_form_two_mode(1.0, a, k, k, n_th).unwrap();
            prop_assert!((s.occupations[0] - n1).abs() <= 1e-12 * n_th.max(1.0));
            prop_assert!((s.occupations[1] - n2).abs() <= 1e-12 * n_th.max(1.0));
        }

        #[test]
        fn attached_cools_whenever_first_mode_is_cold(
            t0 in 1e-3f64..3.0, k0 in 1e-4f64..1.0, a in 0.05f64..1.5, n in 2usize..12
        ) {
            let s = solve_with_attached(&chain(n, a, 0.01), &AttachedModeSpec::new(t0, k0)).unwrap();
            prop_assert!(s.occupations[1] < 1.0);
            prop_assert!(s.occupations[0] < 1.0);
        }
    }
}
