//! Diagonalization of the non-Hermitian hopping matrix and the occupations
//! implied by its right eigenvectors.
//!
//! When every bond has a real positive product `t_fwd * t_bwd`, the diagonal
//! similarity `D = diag(d_i)` with `d_{i+1} / d_i = sqrt(t_fwd / t_bwd)` maps
//! `h` onto a real symmetric tridiagonal matrix, so the spectrum is real and
//! the right eigenvectors are `D` times orthonormal vectors. The gauge factors
//! grow like `e^{A i}` and are kept as logarithms so long chains do not
//! overflow.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::symmetric_tridiagonal_eigen;
use crate::model::HoppingMatrix;

/// Components below this magnitude are skipped when forming ratios.
pub const RATIO_FLOOR: f64 = 1e-12;

const REALITY_TOL: f64 = 1e-12;
const DEGENERACY_GAP: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending real eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Unit-norm right eigenvectors as columns; column `alpha` pairs with
    /// `eigenvalues[alpha]`, row `i` is the component on mode `i`.
    pub right_eigenvectors: DMatrix<Complex64>,
    /// `ln d_i` of the diagonal similarity (complex when couplings carry phases).
    pub log_gauge: Vec<Complex64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest residual `|h psi - eps psi|` over all eigenpairs.
    pub fn max_residual(&self, h: &HoppingMatrix) -> f64 {
        let m = h.matrix();
        (0..self.dim())
            .map(|a| {
                let psi = self.right_eigenvectors.column(a);
                let r = m * psi - psi * Complex64::new(self.eigenvalues[a], 0.0);
                r.norm()
            })
            .fold(0.0, f64::max)
    }

    /// Eigenvalues recovered as `psi^dagger h psi`, which keeps any imaginary
    /// part the construction failed to remove.
    pub fn rayleigh_eigenvalues(&self, h: &HoppingMatrix) -> Vec<Complex64> {
        let m = h.matrix();
        (0..self.dim())
            .map(|a| {
                let psi = self.right_eigenvectors.column(a);
                (psi.adjoint() * (m * psi))[(0, 0)] / psi.norm_squared()
            })
            .collect()
    }
}

/// Per-bond check that the gauge transform exists; returns `sqrt(t_fwd / t_bwd)`
/// and the real symmetric coupling.
fn bond_gauge(bond: usize, t_fwd: Complex64, t_bwd: Complex64) -> Result<(Complex64, f64)> {
    let product = t_fwd * t_bwd;
    if product.norm() == 0.0 {
        return Err(Error::SingularBond { bond });
    }
    if product.im.abs() > REALITY_TOL * product.norm() || product.re <= 0.0 {
        return Err(Error::NotGaugeReducible {
            bond,
            product: format!("{product}"),
        });
    }
    let step = (t_fwd / t_bwd).sqrt();
    Ok((step, (t_fwd / step).re))
}

pub fn diagonalize(h: &HoppingMatrix) -> Result<SpectralDecomposition> {
    let n = h.dim();
    let mut log_gauge = vec![Complex64::new(0.0, 0.0); n];
    let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
    for b in 0..n.saturating_sub(1) {
        let (step, coupling) = bond_gauge(b, h.forward(b), h.backward(b))?;
        log_gauge[b + 1] = log_gauge[b] + step.ln();
        offdiag.push(coupling);
    }

    let eig = symmetric_tridiagonal_eigen(&vec![0.0; n], &offdiag)?;
    let mut phi = eig.eigenvectors;
    reorthogonalize_clusters(&eig.eigenvalues, &mut phi, h.norm());

    let mut right = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        let col = phi.column(a);
        // Largest log-magnitude of D phi, used as a common scale.
        let shift = (0..n)
            .filter(|&i| col[i] != 0.0)
            .map(|i| log_gauge[i].re + col[i].abs().ln())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut psi = DVector::<Complex64>::from_fn(n, |i, _| {
            if col[i] == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                (log_gauge[i] - shift).exp() * col[i]
            }
        });
        let norm = psi.norm();
        psi /= Complex64::new(norm, 0.0);
        right.set_column(a, &psi);
    }

    Ok(SpectralDecomposition {
        eigenvalues: eig.eigenvalues.iter().copied().collect(),
        right_eigenvectors: right,
        log_gauge,
    })
}

/// Modified Gram-Schmidt inside clusters of nearly equal eigenvalues.
fn reorthogonalize_clusters(eigenvalues: &DVector<f64>, vectors: &mut DMatrix<f64>, scale: f64) {
    let n = eigenvalues.len();
    let gap = DEGENERACY_GAP * scale.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eigenvalues[end] - eigenvalues[end - 1] < gap {
            end += 1;
        }
        if end - start > 1 {
            log::debug!("re-orthogonalizing eigenvectors {start}..{end}");
            for j in start..end {
                for k in start..j {
                    let overlap = vectors.column(k).dot(&vectors.column(j));
                    let prev = vectors.column(k).clone_owned();
                    vectors.column_mut(j).axpy(-overlap, &prev, 1.0);
                }
                let norm = vectors.column(j).norm();
                vectors.column_mut(j).unscale_mut(norm);
            }
        }
        start = end;
    }
}

/// `n_i = n_th * sum_alpha |psi_alpha^i|^2` with unit-norm right eigenvectors.
pub fn hn_occupations(decomp: &SpectralDecomposition, n_th: f64) -> Vec<f64> {
    let psi = &decomp.right_eigenvectors;
    (0..decomp.dim())
        .map(|i| n_th * psi.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect()
}

/// For every eigenvector, the ratios `|psi^{i+1} / psi^i|`; `None` where
/// `|psi^i|` is below [`RATIO_FLOOR`].
pub fn localization_profile(decomp: &SpectralDecomposition) -> Vec<Vec<Option<f64>>> {
    let n = decomp.dim();
    let psi = &decomp.right_eigenvectors;
    (0..n)
        .map(|a| {
            (0..n.saturating_sub(1))
                .map(|i| {
                    let here = psi[(i, a)].norm();
                    (here > RATIO_FLOOR).then(|| psi[(i + 1, a)].norm() / here)
                })
                .collect()
        })
        .collect()
}
