#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;
use ugrm_core::graph::DirectedGraph;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    max_abs(&(a - b))
}

/// Nonnegative weights with a zero diagonal; about half the edges present.
pub fn digraph(max_n: usize) -> impl Strategy<Value = DirectedGraph> {
    (1..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.05f64..3.0], n * n).prop_map(move |w| {
            let mut m = DMatrix::from_vec(n, n, w);
            m.fill_diagonal(0.0);
            DirectedGraph::new(m).unwrap()
        })
    })
}

pub fn undirected(max_n: usize) -> impl Strategy<Value = DirectedGraph> {
    digraph(max_n).prop_map(|g| {
        let w = g.weights();
        DirectedGraph::new((w + w.transpose()) * 0.5).unwrap()
    })
}

pub fn signal(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-5.0f64..5.0, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

pub fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.5), Just(1.0), 0.0f64..=1.0]
}
