//! Dataset ingestion and graph construction for spatiotemporal signals.
//!
//! Signals are `N x T` matrices: one row per spatial vertex (station), one
//! column per time step. On the product `line_graph(T) □ stations` the
//! first factor indexes columns and the second indexes rows.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gft::{basis_from_matrix, SpectrumPair};
use crate::graph::{cartesian_product, DirectedGraph};

/// A real-valued signal matrix with optional row and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub values: DMatrix<f64>,
    pub row_labels: Option<Vec<String>>,
    pub col_labels: Option<Vec<String>>,
}

impl SignalMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("signal matrix is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            values,
            row_labels: None,
            col_labels: None,
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

fn parse_cell(cell: &str, line: usize, column: usize) -> Result<f64> {
    match parse_number(cell) {
        Some(v) if v.is_finite() => Ok(v),
        Some(_) => Err(Error::Parse {
            line,
            column,
            message: format!("non-finite value {:?}", cell.trim()),
        }),
        None => Err(Error::Parse {
            line,
            column,
            message: format!("not a number: {:?}", cell.trim()),
        }),
    }
}

struct RawCsv {
    rows: Vec<(usize, Vec<String>)>,
}

fn read_records<R: Read>(reader: R) -> Result<RawCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(RawCsv { rows })
}

/// Parses a numeric grid with an optional header row and/or label column.
///
/// The first column holds labels when the first cell of the last row is not
/// a number; the first row is a header when any of its data cells is not a
/// number.
pub fn parse_signal_csv<R: Read>(reader: R) -> Result<SignalMatrix> {
    let RawCsv { rows } = read_records(reader)?;
    let Some((_, last)) = rows.last() else {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "file contains no rows".into(),
        });
    };
    let label_col = last.len() > 1 && parse_number(&last[0]).is_none();
    let skip = usize::from(label_col);
    let has_header = rows[0]
        .1
        .iter()
        .skip(skip)
        .any(|c| parse_number(c).is_none());
    let body = &rows[usize::from(has_header)..];
    if body.is_empty() {
        return Err(Error::Parse {
            line: rows[0].0,
            column: 1,
            message: "no numeric rows after the header".into(),
        });
    }

    let width = rows[0].1.len();
    for (line, cells) in &rows {
        if cells.len() != width {
            return Err(Error::Parse {
                line: *line,
                column: cells.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", cells.len()),
            });
        }
    }
    let ncols = width - skip;
    if ncols == 0 {
        return Err(Error::Parse {
            line: rows[0].0,
            column: 1,
            message: "no numeric columns".into(),
        });
    }

    let mut values = DMatrix::zeros(body.len(), ncols);
    let mut row_labels = Vec::new();
    for (r, (line, cells)) in body.iter().enumerate() {
        if label_col {
            row_labels.push(cells[0].clone());
        }
        for (c, cell) in cells.iter().skip(skip).enumerate() {
            values[(r, c)] = parse_cell(cell, *line, c + skip + 1)?;
        }
    }
    Ok(SignalMatrix {
        values,
        row_labels: label_col.then_some(row_labels),
        col_labels: has_header.then(|| rows[0].1[skip..].to_vec()),
    })
}

pub fn load_signal_csv(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    parse_signal_csv(open(path)?).map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::InvalidParameter(format!("{}: {other}", path.display())),
    })
}

/// Shortest text that parses back to the same `f64`; exponent notation
/// outside `[1e-5, 1e16)`.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Writes a signal in the format read by [`parse_signal_csv`]. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_signal_csv<W: Write>(writer: W, m: &SignalMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::Parse {
        line: 0,
        column: 0,
        message: e.to_string(),
    };
    if let Some(cols) = &m.col_labels {
        let mut header: Vec<String> = Vec::with_capacity(cols.len() + 1);
        if m.row_labels.is_some() {
            header.push(String::new());
        }
        header.extend(cols.iter().cloned());
        w.write_record(&header).map_err(io_err)?;
    }
    for r in 0..m.nrows() {
        let mut rec: Vec<String> = Vec::with_capacity(m.ncols() + 1);
        if let Some(labels) = &m.row_labels {
            rec.push(labels[r].clone());
        }
        rec.extend(m.values.row(r).iter().map(|&v| format_value(v)));
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Parse {
        line: 0,
        column: 0,
        message: e.to_string(),
    })
}

pub fn save_signal_csv(path: impl AsRef<Path>, m: &SignalMatrix) -> Result<()> {
    write_signal_csv(create(path.as_ref())?, m)
}

/// Reads a square weight matrix (row = edge target, column = edge source).
pub fn parse_graph_csv<R: Read>(reader: R) -> Result<DirectedGraph> {
    let m = parse_signal_csv(reader)?;
    let g = DirectedGraph::new(m.values)?;
    match m.row_labels.or(m.col_labels) {
        Some(labels) => g.with_labels(labels),
        None => Ok(g),
    }
}

pub fn load_graph_csv(path: impl AsRef<Path>) -> Result<DirectedGraph> {
    let path = path.as_ref();
    parse_graph_csv(open(path)?).map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::InvalidParameter(format!("{}: {other}", path.display())),
    })
}

pub fn save_graph_csv(path: impl AsRef<Path>, g: &DirectedGraph) -> Result<()> {
    let labels = g.labels().map(<[String]>::to_vec);
    save_signal_csv(
        path,
        &SignalMatrix {
            values: g.weights().clone(),
            row_labels: labels.clone(),
            col_labels: labels,
        },
    )
}

/// Parameters of a global z-score, kept so that it can be undone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.map(|v| (v - self.mean) / self.std)
    }

    pub fn invert(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.map(|v| v * self.std + self.mean)
    }
}

/// Subtracts the mean of all entries and divides by their population
/// standard deviation.
pub fn normalize(m: &SignalMatrix) -> Result<(SignalMatrix, Normalization)> {
    let n = m.values.len() as f64;
    let mean = m.values.sum() / n;
    let var = m.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(Error::Degenerate(
            "cannot normalize a constant signal".into(),
        ));
    }
    let params = Normalization { mean, std };
    Ok((
        SignalMatrix {
            values: params.apply(&m.values),
            row_labels: m.row_labels.clone(),
            col_labels: m.col_labels.clone(),
        },
        params,
    ))
}

/// Station positions as planar `(longitude, latitude)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSet {
    coords: Vec<[f64; 2]>,
    labels: Vec<String>,
}

impl StationSet {
    pub fn new(coords: Vec<[f64; 2]>, labels: Vec<String>) -> Result<Self> {
        if coords.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "station labels",
                expected: coords.len(),
                found: labels.len(),
            });
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for i in 0..coords.len() {
            for j in i + 1..coords.len() {
                if coords[i] == coords[j] {
                    return Err(Error::InvalidParameter(format!(
                        "stations {} and {} share coordinates {:?}",
                        labels[i], labels[j], coords[i]
                    )));
                }
            }
        }
        Ok(Self { coords, labels })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords[i], self.coords[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}

/// Reads `label,longitude,latitude` rows after a header line.
pub fn parse_stations_csv<R: Read>(reader: R) -> Result<StationSet> {
    let RawCsv { rows } = read_records(reader)?;
    if rows.len() < 2 {
        return Err(Error::Parse {
            line: rows.first().map_or(1, |r| r.0),
            column: 1,
            message: "expected a header line followed by station rows".into(),
        });
    }
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (line, cells) in &rows[1..] {
        if cells.len() != 3 {
            return Err(Error::Parse {
                line: *line,
                column: cells.len().min(3) + 1,
                message: format!(
                    "expected 3 fields (label,longitude,latitude), found {}",
                    cells.len()
                ),
            });
        }
        labels.push(cells[0].clone());
        coords.push([
            parse_cell(&cells[1], *line, 2)?,
            parse_cell(&cells[2], *line, 3)?,
        ]);
    }
    StationSet::new(coords, labels)
}

pub fn load_stations_csv(path: impl AsRef<Path>) -> Result<StationSet> {
    let path = path.as_ref();
    parse_stations_csv(open(path)?).map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::InvalidParameter(format!("{}: {other}", path.display())),
    })
}

pub fn save_stations_csv(path: impl AsRef<Path>, s: &StationSet) -> Result<()> {
    let mut out = String::from("label,longitude,latitude\n");
    for (label, c) in s.labels.iter().zip(&s.coords) {
        out.push_str(&format!(
            "{label},{},{}\n",
            format_value(c[0]),
            format_value(c[1])
        ));
    }
    let path = path.as_ref();
    create(path)?
        .write_all(out.as_bytes())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Gaussian kernel width for nearest-neighbor weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Mean distance over all retained neighbor pairs.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub neighbors: usize,
    pub bandwidth: Bandwidth,
    /// Point edges from the center to its neighbors instead of the reverse.
    pub reverse: bool,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            neighbors: 5,
            bandwidth: Bandwidth::Auto,
            reverse: false,
        }
    }
}

/// Nearest-neighbor station graph with weights `exp(-d^2 / bw^2)`.
///
/// Every station receives edges from its `neighbors` closest stations
/// (lower index first on equal distance), so each in-degree count equals
/// `neighbors`. With `reverse` set, the edges point outward instead.
pub fn knn_graph(s: &StationSet, cfg: &KnnConfig) -> Result<DirectedGraph> {
    let n = s.len();
    if cfg.neighbors == 0 || cfg.neighbors >= n {
        return Err(Error::InvalidParameter(format!(
            "neighbors must lie in 1..{n} for {n} stations, got {}",
            cfg.neighbors
        )));
    }
    let mut chosen: Vec<(usize, usize, f64)> = Vec::with_capacity(n * cfg.neighbors);
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (s.distance(i, j), j))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        chosen.extend(cand[..cfg.neighbors].iter().map(|&(d, j)| (i, j, d)));
    }
    let bw = match cfg.bandwidth {
        Bandwidth::Auto => chosen.iter().map(|c| c.2).sum::<f64>() / chosen.len() as f64,
        Bandwidth::Fixed(b) if b > 0.0 && b.is_finite() => b,
        Bandwidth::Fixed(b) => {
            return Err(Error::InvalidParameter(format!(
                "kernel bandwidth must be positive, got {b}"
            )))
        }
    };
    let mut weights = DMatrix::zeros(n, n);
    for (i, j, d) in chosen {
        let w = (-(d * d) / (bw * bw)).exp();
        if cfg.reverse {
            weights[(j, i)] = w;
        } else {
            weights[(i, j)] = w;
        }
    }
    DirectedGraph::new(weights)?.with_labels(s.labels.clone())
}

/// Unweighted directed path `0 -> 1 -> ... -> t-1`.
pub fn line_graph(t: usize) -> Result<DirectedGraph> {
    if t < 1 {
        return Err(Error::InvalidParameter(
            "line graph needs at least one vertex".into(),
        ));
    }
    let edges: Vec<_> = (1..t).map(|s| (s - 1, s, 1.0)).collect();
    DirectedGraph::from_edges(t, &edges)
}

/// `n` stations drawn uniformly from a 10 x 10 degree box.
pub fn random_stations(seed: u64, n: usize) -> Result<StationSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n)
        .map(|_| {
            [
                -125.0 + 10.0 * rng.random::<f64>(),
                32.0 + 10.0 * rng.random::<f64>(),
            ]
        })
        .collect();
    StationSet::new(coords, (0..n).map(|i| format!("s{i}")).collect())
}

/// The default spatiotemporal factor pair: `line_graph(t)` and a 5-nearest
/// neighbor graph (fewer when `n` is small) over seeded random stations.
pub fn default_factor_graphs(
    seed: u64,
    n: usize,
    t: usize,
) -> Result<(DirectedGraph, DirectedGraph)> {
    let time = line_graph(t)?;
    let space = if n == 1 {
        DirectedGraph::empty(1)?
    } else {
        let cfg = KnnConfig {
            neighbors: 5.min(n - 1),
            ..KnnConfig::default()
        };
        knn_graph(&random_stations(seed, n)?, &cfg)?
    };
    Ok((time, space))
}

/// A signal on `g1 □ g2` whose transform under the Laplacian type-I basis
/// is supported on the `band` lowest frequencies; both coefficient blocks
/// get seeded standard normal entries there. Returns the `n2 x n1` matrix.
pub fn synthesize_bandlimited(
    g1: &DirectedGraph,
    g2: &DirectedGraph,
    band: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let n = g1.order() * g2.order();
    if band < 1 || band > n {
        return Err(Error::InvalidParameter(format!(
            "band must lie in 1..={n}, got {band}"
        )));
    }
    let basis = basis_from_matrix(&cartesian_product(g1, g2).matrices().laplacian)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut s = SpectrumPair::zeros(n);
    for t in 0..band {
        s.z1[t] = rng.sample(StandardNormal);
        s.z2[t] = rng.sample(StandardNormal);
    }
    let x: DVector<f64> = basis.inverse(&s)?;
    Ok(DMatrix::from_column_slice(
        g2.order(),
        g1.order(),
        x.as_slice(),
    ))
}

/// Bandlimited test signal on the default `t`-step, `n`-station product
/// graph, as an `n x t` matrix.
pub fn synthetic_spatiotemporal(
    seed: u64,
    n: usize,
    t: usize,
    band: usize,
) -> Result<SignalMatrix> {
    let (time, space) = default_factor_graphs(seed, n, t)?;
    let values = synthesize_bandlimited(&time, &space, band, seed)?;
    let mut m = SignalMatrix::new(values)?;
    m.row_labels = space.labels().map(<[String]>::to_vec);
    m.col_labels = Some((0..t).map(|i| format!("t{i}")).collect());
    Ok(m)
}
