//! Directed graphs and the matrices derived from them.
//!
//! Orientation convention: `weights[(i, j)]` is the weight of the edge
//! `j -> i`. Row sums of the adjacency matrix are therefore in-degrees and
//! every Laplacian `L = D - A` satisfies `L * 1 = 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A weighted directed graph without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    weights: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl DirectedGraph {
    /// Builds a graph from its weight matrix (row = edge target, column = edge source).
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = weights.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::InvalidGraph(
                "graph must have at least one vertex".into(),
            ));
        }
        for j in 0..cols {
            for i in 0..rows {
                let w = weights[(i, j)];
                if !w.is_finite() {
                    return Err(Error::InvalidGraph(format!(
                        "weight ({i}, {j}) is not finite"
                    )));
                }
                if w < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "weight ({i}, {j}) is negative: {w}"
                    )));
                }
                if i == j && w != 0.0 {
                    return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
                }
            }
        }
        Ok(Self {
            weights,
            labels: None,
        })
    }

    /// Builds a graph on `n` vertices from `(source, target, weight)` triples.
    /// Repeated edges accumulate.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut weights = DMatrix::zeros(n, n);
        for &(from, to, w) in edges {
            if from >= n || to >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {from} -> {to} references a vertex outside 0..{n}"
                )));
            }
            weights[(to, from)] += w;
        }
        Self::new(weights)
    }

    /// The graph on `n` vertices with no edges.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(n, n))
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.order() {
            return Err(Error::DimensionMismatch {
                context: "vertex labels",
                expected: self.order(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Number of vertices.
    pub fn order(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    pub fn is_undirected(&self) -> bool {
        self.weights == self.weights.transpose()
    }

    /// Incoming weight sum of every vertex.
    pub fn in_degrees(&self) -> DVector<f64> {
        DVector::from_iterator(self.order(), self.weights.row_iter().map(|r| r.sum()))
    }

    /// The same graph with every edge reversed.
    pub fn reversed(&self) -> Self {
        Self {
            weights: self.weights.transpose(),
            labels: self.labels.clone(),
        }
    }

    pub fn matrices(&self) -> GraphMatrices {
        derive_matrices(self)
    }
}

/// The four classical representation matrices of a directed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices {
    pub adjacency: DMatrix<f64>,
    pub in_degree: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    pub signless_laplacian: DMatrix<f64>,
}

impl GraphMatrices {
    pub fn get(&self, kind: MatrixKind) -> &DMatrix<f64> {
        match kind {
            MatrixKind::Laplacian => &self.laplacian,
            MatrixKind::Adjacency => &self.adjacency,
            MatrixKind::InDegree => &self.in_degree,
            MatrixKind::SignlessLaplacian => &self.signless_laplacian,
        }
    }
}

/// Selects one of the fixed representation matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatrixKind {
    Laplacian,
    Adjacency,
    InDegree,
    SignlessLaplacian,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 4] = [
        MatrixKind::Laplacian,
        MatrixKind::Adjacency,
        MatrixKind::InDegree,
        MatrixKind::SignlessLaplacian,
    ];

    /// One-letter symbol: L, A, D or Q.
    pub fn symbol(self) -> &'static str {
        match self {
            MatrixKind::Laplacian => "L",
            MatrixKind::Adjacency => "A",
            MatrixKind::InDegree => "D",
            MatrixKind::SignlessLaplacian => "Q",
        }
    }

    /// Short method name used in report tables (Lap, Adj, Id, SLap).
    pub fn method_name(self) -> &'static str {
        match self {
            MatrixKind::Laplacian => "Lap",
            MatrixKind::Adjacency => "Adj",
            MatrixKind::InDegree => "Id",
            MatrixKind::SignlessLaplacian => "SLap",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "L" | "l" | "lap" | "Lap" => Some(MatrixKind::Laplacian),
            "A" | "a" | "adj" | "Adj" => Some(MatrixKind::Adjacency),
            "D" | "d" | "id" | "Id" => Some(MatrixKind::InDegree),
            "Q" | "q" | "slap" | "SLap" => Some(MatrixKind::SignlessLaplacian),
            _ => None,
        }
    }
}

pub fn derive_matrices(g: &DirectedGraph) -> GraphMatrices {
    let adjacency = g.weights.clone();
    let in_degree = DMatrix::from_diagonal(&g.in_degrees());
    let laplacian = &in_degree - &adjacency;
    let signless_laplacian = &in_degree + &adjacency;
    GraphMatrices {
        adjacency,
        in_degree,
        laplacian,
        signless_laplacian,
    }
}

/// The parameter pair `(alpha, k)`, both restricted to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UgrmParams {
    alpha: f64,
    k: f64,
}

impl UgrmParams {
    pub fn new(alpha: f64, k: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("k", k)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} lies outside [0, 1]"
                )));
            }
        }
        Ok(Self { alpha, k })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Coefficient multiplying the adjacency matrix, `(2k - 1)(alpha - 1)`.
    pub fn adjacency_coefficient(&self) -> f64 {
        (2.0 * self.k - 1.0) * (self.alpha - 1.0)
    }

    /// The parameter pair at which the unified matrix coincides with
    /// `kind` up to a positive scale factor.
    pub fn for_kind(kind: MatrixKind) -> Self {
        let (alpha, k) = match kind {
            MatrixKind::Laplacian => (0.5, 1.0),
            MatrixKind::Adjacency => (0.0, 0.0),
            MatrixKind::InDegree => (1.0, 0.0),
            MatrixKind::SignlessLaplacian => (0.5, 0.0),
        };
        Self { alpha, k }
    }
}

/// `alpha * D + (2k - 1)(alpha - 1) * A`.
pub fn ugrm(g: &DirectedGraph, p: UgrmParams) -> DMatrix<f64> {
    let m = g.matrices();
    ugrm_from_parts(&m.in_degree, &m.adjacency, p)
}

pub(crate) fn ugrm_from_parts(
    in_degree: &DMatrix<f64>,
    adjacency: &DMatrix<f64>,
    p: UgrmParams,
) -> DMatrix<f64> {
    let c = p.adjacency_coefficient();
    in_degree.zip_map(adjacency, |d, a| p.alpha * d + c * a)
}

/// Order of the two factors of a Cartesian product graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductShape {
    n1: usize,
    n2: usize,
}

impl ProductShape {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "product factors must be nonempty, got {n1} x {n2}"
            )));
        }
        Ok(Self { n1, n2 })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn n(&self) -> usize {
        self.n1 * self.n2
    }

    /// Flat index of product vertex `(i1, i2)`.
    pub fn flat_index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n2 + i2
    }
}

/// Kronecker product; entry `(i*p + s, j*q + t)` equals `a[(i, j)] * b[(s, t)]`.
pub fn kronecker(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let (p, q) = b.shape();
    let mut out = DMatrix::zeros(m * p, n * q);
    for j in 0..n {
        for i in 0..m {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            out.view_mut((i * p, j * q), (p, q))
                .zip_apply(b, |o, bv| *o = aij * bv);
        }
    }
    out
}

/// Kronecker sum `m1 ⊗ I + I ⊗ m2`.
pub fn kron_sum(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    for m in [m1, m2] {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
    }
    let (n1, n2) = (m1.nrows(), m2.nrows());
    Ok(kronecker(m1, &DMatrix::identity(n2, n2)) + kronecker(&DMatrix::identity(n1, n1), m2))
}

/// Cartesian product `g1 □ g2`; vertex `(i1, i2)` lives at index `i1 * n2 + i2`.
pub fn cartesian_product(g1: &DirectedGraph, g2: &DirectedGraph) -> DirectedGraph {
    let shape = ProductShape {
        n1: g1.order(),
        n2: g2.order(),
    };
    let n = shape.n();
    let (a1, a2) = (g1.weights(), g2.weights());
    let weights = DMatrix::from_fn(n, n, |row, col| {
        let (i1, i2) = (row / shape.n2, row % shape.n2);
        let (j1, j2) = (col / shape.n2, col % shape.n2);
        let mut w = 0.0;
        if i2 == j2 {
            w += a1[(i1, j1)];
        }
        if i1 == j1 {
            w += a2[(i2, j2)];
        }
        w
    });
    let labels = match (g1.labels(), g2.labels()) {
        (Some(l1), Some(l2)) => Some(
            l1.iter()
                .flat_map(|a| l2.iter().map(move |b| format!("({a},{b})")))
                .collect(),
        ),
        _ => None,
    };
    DirectedGraph { weights, labels }
}

/// Stacks the columns of an `n2 x n1` signal matrix into a vector.
pub fn vec(x: &DMatrix<f64>) -> DVector<f64> {
    // nalgebra storage is column-major, so the flat buffer is already vec(X).
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &DVector<f64>, shape: ProductShape) -> Result<DMatrix<f64>> {
    if v.len() != shape.n() {
        return Err(Error::DimensionMismatch {
            context: "unvec",
            expected: shape.n(),
            found: v.len(),
        });
    }
    Ok(DMatrix::from_column_slice(shape.n2, shape.n1, v.as_slice()))
}
