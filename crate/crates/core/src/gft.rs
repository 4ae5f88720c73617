//! SVD-based graph Fourier transforms.
//!
//! A basis is a pair of orthogonal matrices `(U, V)`. The forward transform
//! maps a length-`N` signal to two coefficient blocks,
//! `z1 = (U + V)^T x / 2` and `z2 = (U - V)^T x / 2`, and the inverse maps
//! them back through `(U (z1 + z2) + V (z1 - z2)) / 2`.
//!
//! Bases come in two flavours. A *direct* basis is the SVD of one matrix
//! (a general digraph, or the composite matrix of a product graph). A
//! *factored* basis keeps the SVDs of the two factor matrices and acts as
//! `U1 ⊗ U2`, `V1 ⊗ V2` without ever forming the Kronecker products; its
//! frequencies are the pairwise sums of factor singular values, ordered by a
//! [`FrequencyTable`].

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{kronecker, ugrm, DirectedGraph, ProductShape, UgrmParams};
use crate::spectral::{svd_ascending, SvdFactorization, ORTHOGONALITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Direct,
    Factored,
}

#[derive(Debug, Clone)]
enum Repr {
    Direct {
        u: DMatrix<f64>,
        v: DMatrix<f64>,
        sigma: DVector<f64>,
    },
    Factored {
        first: SvdFactorization,
        second: SvdFactorization,
        shape: ProductShape,
    },
}

/// Transform basis for one of the SVD-based graph Fourier transforms.
#[derive(Debug, Clone)]
pub struct GftBasis {
    repr: Repr,
}

/// The two coefficient blocks produced by a forward transform.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPair {
    pub z1: DVector<f64>,
    pub z2: DVector<f64>,
}

impl SpectrumPair {
    pub fn zeros(n: usize) -> Self {
        Self {
            z1: DVector::zeros(n),
            z2: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.z1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z1.is_empty()
    }

    /// Euclidean norm of the stacked vector `(z1, z2)`.
    pub fn norm(&self) -> f64 {
        (self.z1.norm_squared() + self.z2.norm_squared()).sqrt()
    }
}

fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    (m.transpose() * m - DMatrix::<f64>::identity(n, n)).amax()
}

impl GftBasis {
    pub fn from_svd(svd: SvdFactorization) -> Self {
        let (u, sigma, v) = svd.into_parts();
        Self {
            repr: Repr::Direct { u, v, sigma },
        }
    }

    /// A direct basis from explicit orthogonal matrices.
    pub fn from_orthogonal(u: DMatrix<f64>, v: DMatrix<f64>, sigma: DVector<f64>) -> Result<Self> {
        let n = u.nrows();
        for m in [&u, &v] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::NotSquare {
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
        }
        if sigma.len() != n {
            return Err(Error::DimensionMismatch {
                context: "basis frequencies",
                expected: n,
                found: sigma.len(),
            });
        }
        for m in [&u, &v] {
            let defect = orthogonality_defect(m);
            if defect > ORTHOGONALITY_TOL {
                return Err(Error::InvalidParameter(format!(
                    "basis matrix is not orthogonal (defect {defect:e})"
                )));
            }
        }
        Ok(Self {
            repr: Repr::Direct { u, v, sigma },
        })
    }

    /// A factored basis acting as `first.u ⊗ second.u` and `first.v ⊗ second.v`.
    pub fn from_factor_svds(first: SvdFactorization, second: SvdFactorization) -> Result<Self> {
        let shape = ProductShape::new(first.len(), second.len())?;
        Ok(Self {
            repr: Repr::Factored {
                first,
                second,
                shape,
            },
        })
    }

    pub fn provenance(&self) -> Provenance {
        match self.repr {
            Repr::Direct { .. } => Provenance::Direct,
            Repr::Factored { .. } => Provenance::Factored,
        }
    }

    /// Signal length `N`.
    pub fn len(&self) -> usize {
        match &self.repr {
            Repr::Direct { sigma, .. } => sigma.len(),
            Repr::Factored { shape, .. } => shape.n(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Product shape of a factored basis.
    pub fn shape(&self) -> Option<ProductShape> {
        match &self.repr {
            Repr::Direct { .. } => None,
            Repr::Factored { shape, .. } => Some(*shape),
        }
    }

    /// Factor SVDs of a factored basis.
    pub fn factors(&self) -> Option<(&SvdFactorization, &SvdFactorization)> {
        match &self.repr {
            Repr::Direct { .. } => None,
            Repr::Factored { first, second, .. } => Some((first, second)),
        }
    }

    /// Left basis matrix; materializes `U1 ⊗ U2` for factored bases.
    pub fn u(&self) -> Cow<'_, DMatrix<f64>> {
        match &self.repr {
            Repr::Direct { u, .. } => Cow::Borrowed(u),
            Repr::Factored { first, second, .. } => Cow::Owned(kronecker(first.u(), second.u())),
        }
    }

    /// Right basis matrix; materializes `V1 ⊗ V2` for factored bases.
    pub fn v(&self) -> Cow<'_, DMatrix<f64>> {
        match &self.repr {
            Repr::Direct { v, .. } => Cow::Borrowed(v),
            Repr::Factored { first, second, .. } => Cow::Owned(kronecker(first.v(), second.v())),
        }
    }

    /// Frequency attached to each coefficient, in coefficient order.
    ///
    /// Direct bases return their ascending singular values. Factored bases
    /// return `sigma1[i] + sigma2[j]` at coefficient `i * n2 + j`, which is
    /// not sorted; use a [`FrequencyTable`] for the ascending order.
    pub fn frequencies(&self) -> Cow<'_, DVector<f64>> {
        match &self.repr {
            Repr::Direct { sigma, .. } => Cow::Borrowed(sigma),
            Repr::Factored {
                first,
                second,
                shape,
            } => Cow::Owned(DVector::from_fn(shape.n(), |idx, _| {
                first.sigma()[idx / shape.n2()] + second.sigma()[idx % shape.n2()]
            })),
        }
    }

    fn check_len(&self, found: usize, context: &'static str) -> Result<()> {
        if found != self.len() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }

    /// `(U^T x, V^T x)` in coefficient order.
    fn analysis(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match &self.repr {
            Repr::Direct { u, v, .. } => (u.tr_mul(x), v.tr_mul(x)),
            Repr::Factored {
                first,
                second,
                shape,
            } => {
                let xm = DMatrix::from_column_slice(shape.n2(), shape.n1(), x.as_slice());
                let cu = second.u().tr_mul(&xm) * first.u();
                let cv = second.v().tr_mul(&xm) * first.v();
                (
                    DVector::from_column_slice(cu.as_slice()),
                    DVector::from_column_slice(cv.as_slice()),
                )
            }
        }
    }

    /// `U a + V b`.
    fn synthesis(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        match &self.repr {
            Repr::Direct { u, v, .. } => u * a + v * b,
            Repr::Factored {
                first,
                second,
                shape,
            } => {
                let am = DMatrix::from_column_slice(shape.n2(), shape.n1(), a.as_slice());
                let bm = DMatrix::from_column_slice(shape.n2(), shape.n1(), b.as_slice());
                let out = second.u() * am * first.u().transpose()
                    + second.v() * bm * first.v().transpose();
                DVector::from_column_slice(out.as_slice())
            }
        }
    }

    /// Forward transform of a vectorized signal.
    pub fn forward(&self, x: &DVector<f64>) -> Result<SpectrumPair> {
        self.check_len(x.len(), "forward transform")?;
        let (a, b) = self.analysis(x);
        Ok(SpectrumPair {
            z1: (&a + &b) * 0.5,
            z2: (a - b) * 0.5,
        })
    }

    /// Inverse transform.
    pub fn inverse(&self, s: &SpectrumPair) -> Result<DVector<f64>> {
        self.check_len(s.z1.len(), "inverse transform (z1)")?;
        self.check_len(s.z2.len(), "inverse transform (z2)")?;
        Ok(self.synthesis(&(&s.z1 + &s.z2), &(&s.z1 - &s.z2)) * 0.5)
    }
}

/// Forward transform; see [`GftBasis::forward`].
pub fn gft_forward(basis: &GftBasis, x: &DVector<f64>) -> Result<SpectrumPair> {
    basis.forward(x)
}

/// Inverse transform; see [`GftBasis::inverse`].
pub fn gft_inverse(basis: &GftBasis, s: &SpectrumPair) -> Result<DVector<f64>> {
    basis.inverse(s)
}

/// Ascending ordering of the frequency pairs of a factored basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    n2: usize,
    pairs: Vec<(usize, usize)>,
    mu: Vec<f64>,
}

impl FrequencyTable {
    /// Sorts all sums `sigma1[i] + sigma2[j]` ascending, ties by `(i, j)`.
    pub fn from_singular_values(sigma1: &[f64], sigma2: &[f64]) -> Self {
        let mut entries: Vec<(f64, usize, usize)> = sigma1
            .iter()
            .enumerate()
            .flat_map(|(i, s1)| {
                sigma2
                    .iter()
                    .enumerate()
                    .map(move |(j, s2)| (s1 + s2, i, j))
            })
            .collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        Self {
            n2: sigma2.len(),
            pairs: entries.iter().map(|e| (e.1, e.2)).collect(),
            mu: entries.iter().map(|e| e.0).collect(),
        }
    }

    pub fn for_basis(basis: &GftBasis) -> Option<Self> {
        basis.factors().map(|(first, second)| {
            Self::from_singular_values(first.sigma().as_slice(), second.sigma().as_slice())
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(i, j)` of the `t`-th lowest frequency.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Coefficient index `i * n2 + j` of the `t`-th lowest frequency.
    pub fn coefficient_index(&self, t: usize) -> usize {
        let (i, j) = self.pairs[t];
        i * self.n2 + j
    }
}

/// Direct basis from the SVD of the unified matrix of `g` (any digraph,
/// including a constructed product graph).
pub fn build_basis_direct(g: &DirectedGraph, p: UgrmParams) -> Result<GftBasis> {
    basis_from_matrix(&ugrm(g, p))
}

pub fn basis_from_matrix(m: &DMatrix<f64>) -> Result<GftBasis> {
    Ok(GftBasis::from_svd(svd_ascending(m)?))
}

/// Factored basis from the SVDs of the two factor graphs' unified matrices.
pub fn build_basis_factored(
    g1: &DirectedGraph,
    g2: &DirectedGraph,
    p: UgrmParams,
) -> Result<(GftBasis, FrequencyTable)> {
    factored_basis_from_matrices(&ugrm(g1, p), &ugrm(g2, p))
}

pub fn factored_basis_from_matrices(
    m1: &DMatrix<f64>,
    m2: &DMatrix<f64>,
) -> Result<(GftBasis, FrequencyTable)> {
    let basis = GftBasis::from_factor_svds(svd_ascending(m1)?, svd_ascending(m2)?)?;
    let table = FrequencyTable::for_basis(&basis).expect("factored basis");
    Ok((basis, table))
}

fn check_band(m: usize, n: usize) -> Result<()> {
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "bandwidth {m} exceeds signal length {n}"
        )));
    }
    Ok(())
}

/// Keeps the first `m` frequencies of a direct basis (both coefficient blocks).
///
/// `x_noisy` is the `n2 x n1` signal matrix; the output has the same shape.
pub fn bandlimit_reconstruct_i(
    basis: &GftBasis,
    x_noisy: &DMatrix<f64>,
    m: usize,
) -> Result<DMatrix<f64>> {
    if basis.provenance() != Provenance::Direct {
        return Err(Error::InvalidParameter(
            "type-I bandlimiting needs a direct basis".into(),
        ));
    }
    let n = basis.len();
    basis.check_len(x_noisy.len(), "type-I bandlimiting")?;
    check_band(m, n)?;
    if m == n {
        return Ok(x_noisy.clone());
    }
    let x = DVector::from_column_slice(x_noisy.as_slice());
    let mut s = basis.forward(&x)?;
    s.z1.rows_mut(m, n - m).fill(0.0);
    s.z2.rows_mut(m, n - m).fill(0.0);
    let out = basis.inverse(&s)?;
    Ok(DMatrix::from_column_slice(
        x_noisy.nrows(),
        x_noisy.ncols(),
        out.as_slice(),
    ))
}

fn factored_parts<'a>(
    basis: &'a GftBasis,
    table: &FrequencyTable,
    x_noisy: &DMatrix<f64>,
) -> Result<(&'a SvdFactorization, &'a SvdFactorization)> {
    let (first, second) = basis.factors().ok_or_else(|| {
        Error::InvalidParameter("type-II bandlimiting needs a factored basis".into())
    })?;
    if x_noisy.shape() != (second.len(), first.len()) {
        return Err(Error::DimensionMismatch {
            context: "type-II bandlimiting (signal rows x columns)",
            expected: basis.len(),
            found: x_noisy.len(),
        });
    }
    if table.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            context: "frequency table",
            expected: basis.len(),
            found: table.len(),
        });
    }
    Ok((first, second))
}

/// Keeps the `m` lowest frequency pairs of a factored basis. Each retained
/// pair `(i, j)` contributes the rank-one terms
/// `(u2j^T X u1i) u2j u1i^T` and `(v2j^T X v1i) v2j v1i^T`, halved.
pub fn bandlimit_reconstruct_ii(
    basis: &GftBasis,
    table: &FrequencyTable,
    x_noisy: &DMatrix<f64>,
    m: usize,
) -> Result<DMatrix<f64>> {
    let (first, second) = factored_parts(basis, table, x_noisy)?;
    check_band(m, basis.len())?;
    if m == basis.len() {
        return Ok(x_noisy.clone());
    }
    let mut out = DMatrix::zeros(x_noisy.nrows(), x_noisy.ncols());
    for &(i, j) in &table.pairs()[..m] {
        for (left, right) in [(second.u(), first.u()), (second.v(), first.v())] {
            let (l, r) = (left.column(j), right.column(i));
            let c = l.dot(&(x_noisy * r));
            out.ger(0.5 * c, &l, &r, 1.0);
        }
    }
    Ok(out)
}

/// A bandlimiting operator of either type, able to evaluate many bandwidths
/// of one signal incrementally.
#[derive(Debug, Clone)]
pub enum Bandlimiter {
    TypeI(GftBasis),
    TypeII(GftBasis, FrequencyTable),
}

impl Bandlimiter {
    pub fn basis(&self) -> &GftBasis {
        match self {
            Bandlimiter::TypeI(b) | Bandlimiter::TypeII(b, _) => b,
        }
    }

    pub fn len(&self) -> usize {
        self.basis().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reconstruct(&self, x_noisy: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
        match self {
            Bandlimiter::TypeI(b) => bandlimit_reconstruct_i(b, x_noisy, m),
            Bandlimiter::TypeII(b, t) => bandlimit_reconstruct_ii(b, t, x_noisy, m),
        }
    }

    /// Calls `visit(m, reconstruction)` for every bandwidth in `m_values`
    /// (strictly ascending), reusing the partial sum between bandwidths.
    pub fn sweep<F>(&self, x_noisy: &DMatrix<f64>, m_values: &[usize], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &DMatrix<f64>) -> Result<()>,
    {
        let n = self.len();
        if m_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "bandwidths must be strictly ascending".into(),
            ));
        }
        if let Some(&last) = m_values.last() {
            check_band(last, n)?;
        }
        let (rows, cols) = x_noisy.shape();
        let mut acc = DMatrix::zeros(rows, cols);
        let mut t = 0;
        match self {
            Bandlimiter::TypeI(basis) => {
                if basis.provenance() != Provenance::Direct {
                    return Err(Error::InvalidParameter(
                        "type-I bandlimiting needs a direct basis".into(),
                    ));
                }
                basis.check_len(x_noisy.len(), "type-I bandlimiting")?;
                let x = DVector::from_column_slice(x_noisy.as_slice());
                let (a, b) = basis.analysis(&x);
                let (u, v) = (basis.u(), basis.v());
                let flat = acc.as_mut_slice();
                for &m in m_values {
                    while t < m {
                        let (ca, cb) = (0.5 * a[t], 0.5 * b[t]);
                        for ((o, uu), vv) in flat
                            .iter_mut()
                            .zip(u.column(t).iter())
                            .zip(v.column(t).iter())
                        {
                            *o += ca * uu + cb * vv;
                        }
                        t += 1;
                    }
                    if m == n {
                        visit(m, x_noisy)?;
                    } else {
                        visit(m, &DMatrix::from_column_slice(rows, cols, flat))?;
                    }
                }
            }
            Bandlimiter::TypeII(basis, table) => {
                let (first, second) = factored_parts(basis, table, x_noisy)?;
                let cu = second.u().tr_mul(x_noisy) * first.u();
                let cv = second.v().tr_mul(x_noisy) * first.v();
                for &m in m_values {
                    while t < m {
                        let (i, j) = table.pairs()[t];
                        acc.ger(
                            0.5 * cu[(j, i)],
                            &second.u().column(j),
                            &first.u().column(i),
                            1.0,
                        );
                        acc.ger(
                            0.5 * cv[(j, i)],
                            &second.v().column(j),
                            &first.v().column(i),
                            1.0,
                        );
                        t += 1;
                    }
                    if m == n {
                        visit(m, x_noisy)?;
                    } else {
                        visit(m, &acc)?;
                    }
                }
            }
        }
        Ok(())
    }
}
