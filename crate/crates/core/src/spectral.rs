//! Deterministic dense decompositions with ascending spectra, and the
//! empirical monotonicity diagnostic for singular values along `alpha`.
//!
//! Every factorization returned here is normalized the same way: values in
//! nondecreasing order (ties keep the backend's order), and each column pair
//! is signed so that the largest-magnitude entry of the left vector is
//! positive (lowest index wins ties). Two calls on bit-identical input give
//! bit-identical output.

use lax::{layout::MatrixLayout, Lapack, UPLO};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{ugrm, DirectedGraph, UgrmParams};

/// Orthogonality and reconstruction tolerance used by property checks.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Slack allowed before a decrease in a singular value counts as a violation.
pub const MONOTONICITY_TOL: f64 = 1e-8;
/// Symmetry tolerance accepted by [`eig_psd_ascending`].
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Most negative eigenvalue still accepted as semidefinite.
pub const PSD_TOL: f64 = 1e-8;

/// Largest accepted reconstruction residual, relative to the largest entry.
const RESIDUAL_TOL: f64 = 1e-9;

/// `m = u * diag(sigma) * v^T` with `sigma` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactorization {
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
}

impl SvdFactorization {
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// `u * diag(sigma) * v^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (mut col, s) in us.column_iter_mut().zip(self.sigma.iter()) {
            col *= *s;
        }
        us * self.v.transpose()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        (self.u, self.sigma, self.v)
    }
}

/// `m = w * diag(lambda) * w^T` for symmetric positive semidefinite `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigFactorization {
    w: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl EigFactorization {
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Index permutation that sorts `values` ascending; equal values keep their
/// original relative order.
fn ascending_order(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Position of the entry with the largest magnitude; first one on ties.
fn dominant_index(col: nalgebra::DVectorView<'_, f64>) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > best_abs {
            best = i;
            best_abs = x.abs();
        }
    }
    best
}

fn layout(n: usize) -> Result<MatrixLayout> {
    let n = i32::try_from(n)
        .map_err(|_| Error::Convergence(format!("order {n} exceeds LAPACK limits")))?;
    Ok(MatrixLayout::F { col: n, lda: n })
}

extern "C" {
    fn openblas_set_num_threads(n: std::os::raw::c_int);
}

/// Keeps LAPACK on the calling thread. Callers parallelize across
/// decompositions, and a fixed thread count keeps results reproducible.
fn single_threaded_blas() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    // SAFETY: a plain setter exported by the OpenBLAS library that
    // openblas-src links in.
    ONCE.call_once(|| unsafe { openblas_set_num_threads(1) });
}

fn lapack_eigh(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    single_threaded_blas();
    let n = m.nrows();
    let mut a = m.as_slice().to_vec();
    let values = f64::eigh(true, layout(n)?, UPLO::Lower, &mut a).map_err(|e| {
        Error::Convergence(format!(
            "symmetric eigendecomposition of {n}x{n} matrix: {e}"
        ))
    })?;
    Ok((DVector::from_vec(values), DMatrix::from_vec(n, n, a)))
}

fn lapack_svd(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    single_threaded_blas();
    let n = m.nrows();
    let mut a = m.as_slice().to_vec();
    let svd = f64::svd(layout(n)?, true, true, &mut a)
        .map_err(|e| Error::Convergence(format!("SVD of {n}x{n} matrix: {e}")))?;
    match (svd.u, svd.vt) {
        (Some(u), Some(vt)) => Ok((
            DVector::from_vec(svd.s),
            DMatrix::from_vec(n, n, u),
            DMatrix::from_vec(n, n, vt).transpose(),
        )),
        _ => Err(Error::Convergence(
            "SVD returned no singular vectors".into(),
        )),
    }
}

/// Full SVD of a square matrix with ascending singular values.
///
/// Exactly symmetric input goes through the symmetric eigensolver, so that
/// `v` equals `u` column for column except where an eigenvalue is negative
/// beyond rounding level.
pub fn svd_ascending(m: &DMatrix<f64>) -> Result<SvdFactorization> {
    check_square_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(SvdFactorization {
            u: DMatrix::zeros(0, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(0, 0),
        });
    }
    let (raw_sigma, u_raw, v_raw) = if m == &m.transpose() {
        let (lambda, w) = lapack_eigh(m)?;
        let rounding = 64.0 * n as f64 * f64::EPSILON * m.amax();
        let signed = lambda.map(|l| if l < -rounding { l } else { l.abs() });
        (signed, w.clone(), w)
    } else {
        lapack_svd(m)?
    };

    let order = ascending_order(&raw_sigma.map(f64::abs));
    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    let mut sigma = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut s = raw_sigma[src];
        let mut uc = u_raw.column(src).into_owned();
        let mut vc = v_raw.column(src).into_owned();
        if s < 0.0 {
            s = -s;
            vc.neg_mut();
        }
        if uc[dominant_index(uc.as_view())] < 0.0 {
            uc.neg_mut();
            vc.neg_mut();
        }
        sigma[dst] = s;
        u.set_column(dst, &uc);
        v.set_column(dst, &vc);
    }
    let residual = (&u * DMatrix::from_diagonal(&sigma) * v.transpose() - m).amax();
    if residual > RESIDUAL_TOL * m.amax().max(1.0) {
        return Err(Error::Convergence(format!(
            "SVD of {n}x{n} matrix has reconstruction residual {residual:e}"
        )));
    }
    Ok(SvdFactorization { u, sigma, v })
}

/// Eigendecomposition of a symmetric positive semidefinite matrix, ascending.
///
/// Eigenvalues within [`PSD_TOL`] below zero are clamped to zero.
pub fn eig_psd_ascending(m: &DMatrix<f64>) -> Result<EigFactorization> {
    check_square_finite(m)?;
    let asym = m
        .iter()
        .zip(m.transpose().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(EigFactorization {
            w: DMatrix::zeros(0, 0),
            lambda: DVector::zeros(0),
        });
    }
    let (eigenvalues, eigenvectors) = lapack_eigh(m)?;
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL {
        return Err(Error::Indefinite(min));
    }
    let order = ascending_order(&eigenvalues);
    let mut w = DMatrix::zeros(n, n);
    let mut lambda = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut wc = eigenvectors.column(src).into_owned();
        if wc[dominant_index(wc.as_view())] < 0.0 {
            wc.neg_mut();
        }
        lambda[dst] = eigenvalues[src].max(0.0);
        w.set_column(dst, &wc);
    }
    let residual =
        (&w * DMatrix::from_diagonal(&eigenvalues.select_rows(&order)) * w.transpose() - m).amax();
    if residual > RESIDUAL_TOL * m.amax().max(1.0) {
        return Err(Error::Convergence(format!(
            "eigendecomposition of {n}x{n} matrix has reconstruction residual {residual:e}"
        )));
    }
    Ok(EigFactorization { w, lambda })
}

/// A pair of grid points at which singular value `index` decreased.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub index: usize,
    pub alpha: f64,
    pub alpha_next: f64,
    /// `nu(alpha) - nu(alpha_next)`, always above the tolerance.
    pub gap: f64,
}

/// Ascending singular values of the unified matrix over an `alpha` grid at fixed `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub k: f64,
    pub alpha_grid: Vec<f64>,
    /// `singular_values[a][l]` is the `l`-th ascending singular value at `alpha_grid[a]`.
    pub singular_values: Vec<Vec<f64>>,
    pub violations: Vec<MonotonicityViolation>,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks whether every ascending singular value of `ugrm(g, alpha, k)` is
/// nondecreasing in `alpha`, comparing all grid pairs `alpha < alpha'`.
pub fn monotonicity_report(
    g: &DirectedGraph,
    k: f64,
    alpha_grid: &[f64],
) -> Result<MonotonicityReport> {
    if alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "alpha grid must be strictly ascending".into(),
        ));
    }
    let singular_values = alpha_grid
        .iter()
        .map(|&alpha| {
            let p = UgrmParams::new(alpha, k)?;
            Ok(svd_ascending(&ugrm(g, p))?.sigma.iter().copied().collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let mut violations = Vec::new();
    for a in 0..alpha_grid.len() {
        for b in a + 1..alpha_grid.len() {
            for (index, (lo, hi)) in singular_values[a]
                .iter()
                .zip(&singular_values[b])
                .enumerate()
            {
                let gap = lo - hi;
                if gap > MONOTONICITY_TOL {
                    violations.push(MonotonicityViolation {
                        index,
                        alpha: alpha_grid[a],
                        alpha_next: alpha_grid[b],
                        gap,
                    });
                }
            }
        }
    }
    Ok(MonotonicityReport {
        k,
        alpha_grid: alpha_grid.to_vec(),
        singular_values,
        violations,
    })
}
