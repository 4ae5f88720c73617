use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use ugrm_core::denoise::{
    add_noise, bandwidth_grid, grid_search, ugrm_bandlimiter, Curve, DenoiseReport, GridConfig,
    NoiseConfig,
};
use ugrm_core::gft::{build_basis_direct, build_basis_factored};
use ugrm_core::graph::{cartesian_product, MatrixKind, UgrmParams};
use ugrm_core::io::{
    default_factor_graphs, format_value, knn_graph, line_graph, normalize, parse_stations_csv,
    random_stations, save_graph_csv, save_signal_csv, save_stations_csv, synthetic_spatiotemporal,
    KnnConfig, SignalMatrix,
};
use ugrm_core::spectral::monotonicity_report;

use crate::args::{
    BuildGraphArgs, Command, DenoiseArgs, MonotonicityArgs, ObjectiveArg, ReplayArgs, SpectrumArgs,
    SynthArgs, VariantArg,
};
use crate::inputs::{product_input, spatial_graph};
use crate::manifest::{sha256_hex, write_json, InputLog, ManifestFile, RunManifest};

pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Spectrum(a) => spectrum(a),
        Command::Denoise(a) => denoise(a),
        Command::Monotonicity(a) => monotonicity(a),
        Command::BuildGraph(a) => build_graph(a),
        Command::Synth(a) => synth(a),
        Command::Replay(r) => replay(&r),
    }
}

pub fn replay(r: &ReplayArgs) -> Result<()> {
    let text = fs::read_to_string(&r.manifest)
        .with_context(|| format!("cannot read {}", r.manifest.display()))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).context("manifest is not valid JSON")?;
    if let Some(inner) = value.get_mut("manifest") {
        value = inner.take();
    }
    let manifest: RunManifest = serde_json::from_value(value).context("not a run manifest")?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by version {}, replaying with {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    for input in &manifest.inputs {
        let bytes = fs::read(&input.path)
            .with_context(|| format!("cannot read {}", input.path.display()))?;
        if sha256_hex(&bytes) != input.sha256 {
            bail!(
                "{} changed since the manifest was written",
                input.path.display()
            );
        }
    }
    let mut cmd = manifest.invocation;
    match cmd.out_dir_mut() {
        Some(dir) => *dir = r.out_dir.clone(),
        None => bail!("a replay cannot replay another replay"),
    }
    execute(cmd)
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    write_json(&dir.join("manifest.json"), &ManifestFile { manifest })
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let mut log = InputLog::default();
    let input = product_input(&a.input, &mut log)?;
    let p = UgrmParams::new(a.alpha, a.k)?;
    let values = if a.normalize {
        normalize(&input.signal)?.0.values
    } else {
        input.signal.values.clone()
    };
    let x = DVector::from_column_slice(values.as_slice());
    let (basis, table) = match a.variant {
        VariantArg::I => (
            build_basis_direct(&cartesian_product(&input.time, &input.space), p)?,
            None,
        ),
        VariantArg::II => {
            let (b, t) = build_basis_factored(&input.time, &input.space, p)?;
            (b, Some(t))
        }
    };
    let s = basis.forward(&x)?;
    let freqs = basis.frequencies();
    let rows = (0..basis.len()).map(|t| {
        let (idx, f) = match &table {
            Some(tb) => (tb.coefficient_index(t), tb.mu()[t]),
            None => (t, freqs[t]),
        };
        vec![
            t.to_string(),
            format_value(f),
            format_value(s.z1[idx]),
            format_value(s.z2[idx]),
        ]
    });
    prepare_out_dir(&a.out_dir)?;
    write_csv(
        &a.out_dir.join("spectrum.csv"),
        &["t", "frequency", "z1", "z2"],
        rows,
    )?;
    let out_dir = a.out_dir.clone();
    write_manifest(
        &out_dir,
        &RunManifest::new(Command::Spectrum(a), log.into_entries()),
    )
}

#[derive(Serialize)]
struct NormalizationInfo {
    mean: f64,
    std: f64,
}

#[derive(Serialize)]
struct SignalInfo {
    rows: usize,
    cols: usize,
    normalization: Option<NormalizationInfo>,
}

/// One line of the results table: the grid optimum or a fixed baseline.
#[derive(Serialize)]
struct MethodRow {
    method: String,
    m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    /// `null` when the reconstruction is exact.
    snr_db: Option<f64>,
    bae: f64,
    exact: bool,
}

impl MethodRow {
    fn new(
        method: String,
        m: usize,
        params: Option<(f64, f64)>,
        curve: &Curve,
        idx: usize,
    ) -> Self {
        Self {
            method,
            m,
            alpha: params.map(|p| p.0),
            k: params.map(|p| p.1),
            snr_db: finite(curve.snr[idx]),
            bae: curve.bae[idx],
            exact: curve.snr[idx] == f64::INFINITY,
        }
    }

    fn score(&self, objective: ObjectiveArg) -> f64 {
        match objective {
            ObjectiveArg::Snr => self.snr_db.unwrap_or(f64::INFINITY),
            ObjectiveArg::Bae => self.bae,
        }
    }
}

#[derive(Serialize)]
struct RunSummary {
    sigma: f64,
    /// `null` when the noisy input equals the clean signal.
    isnr_db: Option<f64>,
    optimal: MethodRow,
    baselines: Vec<MethodRow>,
    /// Every curve reconstructs the input exactly at the full bandwidth.
    full_band_exact: bool,
    curves_dir: String,
    reconstruction: String,
}

#[derive(Serialize)]
struct DenoiseOutput<'a> {
    manifest: &'a RunManifest,
    variant: VariantArg,
    objective: ObjectiveArg,
    signal: SignalInfo,
    m_values: Vec<usize>,
    runs: Vec<RunSummary>,
}

fn method_name(kind: MatrixKind, variant: VariantArg) -> String {
    let suffix = match variant {
        VariantArg::I => "I",
        VariantArg::II => "II",
    };
    format!("{}-GFT-{suffix}", kind.method_name())
}

fn curve_rows<'a>(
    m_values: &'a [usize],
    curve: &'a Curve,
) -> impl Iterator<Item = Vec<String>> + 'a {
    m_values.iter().enumerate().map(|(i, m)| {
        vec![
            m.to_string(),
            format_value(curve.snr[i]),
            format_value(curve.bae[i]),
        ]
    })
}

fn write_curves(dir: &Path, report: &DenoiseReport, variant: VariantArg) -> Result<()> {
    prepare_out_dir(dir)?;
    let header = ["M", "snr_db", "bae"];
    for cell in &report.cells {
        let name = format!("alpha_{}_k_{}.csv", cell.alpha, cell.k);
        write_csv(
            &dir.join(name),
            &header,
            curve_rows(&report.m_values, &cell.curve),
        )?;
    }
    for b in &report.baselines {
        let name = format!("{}.csv", method_name(b.kind, variant));
        write_csv(
            &dir.join(name),
            &header,
            curve_rows(&report.m_values, &b.curve),
        )?;
    }
    Ok(())
}

fn summarize(
    report: &DenoiseReport,
    variant: VariantArg,
    n: usize,
    curves_dir: String,
    reconstruction: String,
) -> RunSummary {
    let best = report.best;
    let idx = report
        .m_values
        .iter()
        .position(|&m| m == best.m)
        .expect("best bandwidth is on the grid");
    let cell = report
        .cell(best.alpha, best.k)
        .expect("best cell is on the grid");
    let optimal = MethodRow::new(
        "optimal".into(),
        best.m,
        Some((best.alpha, best.k)),
        &cell.curve,
        idx,
    );
    let baselines = report
        .baselines
        .iter()
        .map(|b| {
            let (i, _) = b.curve.best(report.objective);
            MethodRow::new(
                method_name(b.kind, variant),
                report.m_values[i],
                None,
                &b.curve,
                i,
            )
        })
        .collect();
    let full_band_exact = report.m_values.last() == Some(&n)
        && report
            .cells
            .iter()
            .map(|c| &c.curve)
            .chain(report.baselines.iter().map(|b| &b.curve))
            .all(|c| c.snr.last() == Some(&f64::INFINITY));
    RunSummary {
        sigma: report.noise.sigma(),
        isnr_db: finite(report.isnr),
        optimal,
        baselines,
        full_band_exact,
        curves_dir,
        reconstruction,
    }
}

fn table_cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "exact".into()
    }
}

/// Methods as rows, noise levels as columns.
fn write_table(path: &Path, runs: &[RunSummary], objective: ObjectiveArg) -> Result<()> {
    let sigmas: Vec<String> = runs.iter().map(|r| format!("sigma={}", r.sigma)).collect();
    let mut header = vec!["method"];
    header.extend(sigmas.iter().map(String::as_str));
    let mut rows = Vec::new();
    let mut optimal = vec!["optimal".to_owned()];
    optimal.extend(runs.iter().map(|r| {
        let o = &r.optimal;
        format!(
            "\"{} (M={}, alpha={}, k={})\"",
            table_cell(o.score(objective)),
            o.m,
            o.alpha.unwrap_or_default(),
            o.k.unwrap_or_default()
        )
    }));
    rows.push(optimal);
    if objective == ObjectiveArg::Snr {
        let mut isnr = vec!["ISNR".to_owned()];
        isnr.extend(
            runs.iter()
                .map(|r| table_cell(r.isnr_db.unwrap_or(f64::INFINITY))),
        );
        rows.push(isnr);
    }
    let n_baselines = runs.first().map_or(0, |r| r.baselines.len());
    for b in 0..n_baselines {
        let mut row = vec![runs[0].baselines[b].method.clone()];
        row.extend(runs.iter().map(|r| {
            let m = &r.baselines[b];
            format!("{} (M={})", table_cell(m.score(objective)), m.m)
        }));
        rows.push(row);
    }
    write_csv(path, &header, rows)
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    if a.sigma.is_empty() {
        bail!("--sigma needs at least one value");
    }
    let mut log = InputLog::default();
    let input = product_input(&a.input, &mut log)?;
    let n = input.signal.values.len();
    let (x, norm) = if a.raw {
        (input.signal.values.clone(), None)
    } else {
        let (z, p) = normalize(&input.signal)?;
        (z.values, Some(p))
    };
    let m_values = a.m_grid.clone().unwrap_or_else(|| bandwidth_grid(n, 5));
    let baselines: Vec<MatrixKind> = if a.no_baselines {
        Vec::new()
    } else {
        a.baselines.iter().map(|&b| b.into()).collect()
    };
    let grid = GridConfig::new(
        a.alpha_grid.clone(),
        a.k_grid.clone(),
        m_values,
        a.objective.into(),
    )?
    .with_baselines(baselines);
    let noises = a
        .sigma
        .iter()
        .map(|&s| NoiseConfig::new(s, a.seed, a.trials))
        .collect::<ugrm_core::error::Result<Vec<_>>>()?;

    let mut resolved = a.clone();
    resolved.m_grid = Some(grid.m_values().to_vec());
    let out_dir = a.out_dir.clone();
    let manifest = RunManifest::new(Command::Denoise(resolved), log.into_entries());
    prepare_out_dir(&out_dir)?;

    let variant = a.variant.into();
    let mut runs = Vec::with_capacity(noises.len());
    for noise in &noises {
        let report = grid_search(&x, &input.time, &input.space, &grid, noise, variant)?;
        let tag = format!("sigma_{}", noise.sigma());
        let curves_dir = format!("curves/{tag}");
        write_curves(&out_dir.join(&curves_dir), &report, a.variant)?;

        let best = report.best;
        let op = ugrm_bandlimiter(
            &input.time,
            &input.space,
            UgrmParams::new(best.alpha, best.k)?,
            variant,
        )?;
        let xhat: DMatrix<f64> = op.reconstruct(&add_noise(&x, noise, 0)?, best.m)?;
        let reconstruction = format!("best_{tag}.csv");
        save_signal_csv(
            out_dir.join(&reconstruction),
            &SignalMatrix {
                values: norm.map_or(xhat.clone(), |p| p.invert(&xhat)),
                row_labels: input.signal.row_labels.clone(),
                col_labels: input.signal.col_labels.clone(),
            },
        )?;
        runs.push(summarize(&report, a.variant, n, curves_dir, reconstruction));
    }

    write_table(&out_dir.join("table.csv"), &runs, a.objective)?;
    let output = DenoiseOutput {
        manifest: &manifest,
        variant: a.variant,
        objective: a.objective,
        signal: SignalInfo {
            rows: input.signal.nrows(),
            cols: input.signal.ncols(),
            normalization: norm.map(|p| NormalizationInfo {
                mean: p.mean,
                std: p.std,
            }),
        },
        m_values: grid.m_values().to_vec(),
        runs,
    };
    write_json(&out_dir.join("report.json"), &output)
}

#[derive(Serialize)]
struct ViolationOut {
    index: usize,
    alpha: f64,
    alpha_next: f64,
    gap: f64,
}

#[derive(Serialize)]
struct KReport {
    k: f64,
    alpha_grid: Vec<f64>,
    singular_values: Vec<Vec<f64>>,
    violations: Vec<ViolationOut>,
}

#[derive(Serialize)]
struct MonotonicityOutput<'a> {
    manifest: &'a RunManifest,
    order: usize,
    undirected: bool,
    total_violations: usize,
    reports: Vec<KReport>,
}

fn monotonicity(a: MonotonicityArgs) -> Result<()> {
    let mut log = InputLog::default();
    let base = spatial_graph(&a.spatial, &mut log)?;
    let g = match a.time_steps {
        Some(t) => cartesian_product(&line_graph(t)?, &base),
        None => base,
    };
    let reports = a
        .k_grid
        .iter()
        .map(|&k| monotonicity_report(&g, k, &a.alpha_grid))
        .collect::<ugrm_core::error::Result<Vec<_>>>()?;

    prepare_out_dir(&a.out_dir)?;
    let mut sv_rows = Vec::new();
    let mut violation_rows = Vec::new();
    for r in &reports {
        for (alpha, sv) in r.alpha_grid.iter().zip(&r.singular_values) {
            for (l, s) in sv.iter().enumerate() {
                sv_rows.push(vec![
                    r.k.to_string(),
                    alpha.to_string(),
                    l.to_string(),
                    format_value(*s),
                ]);
            }
        }
        for v in &r.violations {
            violation_rows.push(vec![
                r.k.to_string(),
                v.index.to_string(),
                v.alpha.to_string(),
                v.alpha_next.to_string(),
                format_value(v.gap),
            ]);
        }
    }
    write_csv(
        &a.out_dir.join("singular_values.csv"),
        &["k", "alpha", "index", "sigma"],
        sv_rows,
    )?;
    write_csv(
        &a.out_dir.join("violations.csv"),
        &["k", "index", "alpha", "alpha_next", "gap"],
        violation_rows,
    )?;

    let total: usize = reports.iter().map(|r| r.violations.len()).sum();
    println!(
        "{total} monotonicity violations over {} k values and {} alpha values",
        reports.len(),
        a.alpha_grid.len()
    );
    let out_dir = a.out_dir.clone();
    let manifest = RunManifest::new(Command::Monotonicity(a), log.into_entries());
    let output = MonotonicityOutput {
        manifest: &manifest,
        order: g.order(),
        undirected: g.is_undirected(),
        total_violations: total,
        reports: reports
            .into_iter()
            .map(|r| KReport {
                k: r.k,
                alpha_grid: r.alpha_grid,
                singular_values: r.singular_values,
                violations: r
                    .violations
                    .into_iter()
                    .map(|v| ViolationOut {
                        index: v.index,
                        alpha: v.alpha,
                        alpha_next: v.alpha_next,
                        gap: v.gap,
                    })
                    .collect(),
            })
            .collect(),
    };
    write_json(&out_dir.join("monotonicity.json"), &output)
}

fn build_graph(a: BuildGraphArgs) -> Result<()> {
    let mut log = InputLog::default();
    let g = match (&a.stations, a.line) {
        (Some(path), None) => {
            let bytes = log.read("stations", path)?;
            let stations = parse_stations_csv(&bytes[..])
                .with_context(|| format!("invalid stations file {}", path.display()))?;
            let cfg = KnnConfig {
                neighbors: a.neighbors,
                bandwidth: a.bandwidth.into(),
                reverse: a.reverse_knn,
            };
            knn_graph(&stations, &cfg)?
        }
        (None, Some(t)) => line_graph(t)?,
        _ => bail!("exactly one of --stations or --line is required"),
    };
    prepare_out_dir(&a.out_dir)?;
    save_graph_csv(a.out_dir.join("graph.csv"), &g)?;
    let out_dir = a.out_dir.clone();
    write_manifest(
        &out_dir,
        &RunManifest::new(Command::BuildGraph(a), log.into_entries()),
    )
}

fn synth(a: SynthArgs) -> Result<()> {
    let signal = synthetic_spatiotemporal(a.seed, a.stations_count, a.time_steps, a.band)?;
    let stations = random_stations(a.seed, a.stations_count)?;
    let (_, space) = default_factor_graphs(a.seed, a.stations_count, a.time_steps)?;
    prepare_out_dir(&a.out_dir)?;
    save_signal_csv(a.out_dir.join("signal.csv"), &signal)?;
    save_stations_csv(a.out_dir.join("stations.csv"), &stations)?;
    save_graph_csv(a.out_dir.join("graph.csv"), &space)?;
    let out_dir = a.out_dir.clone();
    write_manifest(&out_dir, &RunManifest::new(Command::Synth(a), Vec::new()))
}
