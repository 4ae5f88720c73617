use anyhow::{bail, Context, Result};
use ugrm_core::graph::DirectedGraph;
use ugrm_core::io::{
    knn_graph, line_graph, parse_graph_csv, parse_signal_csv, parse_stations_csv, KnnConfig,
    SignalMatrix,
};

use crate::args::{ProductArgs, SpatialArgs};
use crate::manifest::InputLog;

pub fn spatial_graph(args: &SpatialArgs, log: &mut InputLog) -> Result<DirectedGraph> {
    match (&args.stations, &args.graph) {
        (Some(path), None) => {
            let bytes = log.read("stations", path)?;
            let stations = parse_stations_csv(&bytes[..])
                .with_context(|| format!("invalid stations file {}", path.display()))?;
            let cfg = KnnConfig {
                neighbors: args.neighbors,
                bandwidth: args.bandwidth.into(),
                reverse: args.reverse_knn,
            };
            Ok(knn_graph(&stations, &cfg)?)
        }
        (None, Some(path)) => {
            let bytes = log.read("graph", path)?;
            Ok(parse_graph_csv(&bytes[..])
                .with_context(|| format!("invalid graph file {}", path.display()))?)
        }
        _ => bail!("exactly one of --stations or --graph is required"),
    }
}

/// The signal with its temporal (first) and spatial (second) factor graphs.
pub struct ProductInput {
    pub signal: SignalMatrix,
    pub time: DirectedGraph,
    pub space: DirectedGraph,
}

pub fn product_input(args: &ProductArgs, log: &mut InputLog) -> Result<ProductInput> {
    let bytes = log.read("signal", &args.signal)?;
    let signal = parse_signal_csv(&bytes[..])
        .with_context(|| format!("invalid signal file {}", args.signal.display()))?;
    let space = spatial_graph(&args.spatial, log)?;
    let time = match &args.time_graph {
        Some(path) => {
            let bytes = log.read("time-graph", path)?;
            parse_graph_csv(&bytes[..])
                .with_context(|| format!("invalid graph file {}", path.display()))?
        }
        None => line_graph(signal.ncols())?,
    };
    if signal.nrows() != space.order() || signal.ncols() != time.order() {
        bail!(
            "signal is {}x{} but the graphs have {} stations and {} time steps",
            signal.nrows(),
            signal.ncols(),
            space.order(),
            time.order()
        );
    }
    Ok(ProductInput {
        signal,
        time,
        space,
    })
}
