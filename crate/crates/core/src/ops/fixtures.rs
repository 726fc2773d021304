//! Hand-built pooling inputs shared by tests and the command-line tools.

use crate::mesh::{build_edge_topology, primitives, EdgeTopology, Mesh};
use crate::tensor::Tensor;

/// Scalar features on an icosahedron where the two pooling policies pick different second
/// collapses.
///
/// `collapsed` has the lowest score and goes first under both policies. `runner_up` (its ring
/// edge `a`) has the second-lowest score, but `a`'s partner `b` is large, so the averaged
/// survivor overtakes `distant`, an edge far from the first collapse. Frozen scores pick
/// `runner_up` second; updated scores pick `distant`.
#[derive(Debug, Clone)]
pub struct DivergenceFixture {
    pub mesh: Mesh,
    pub topology: EdgeTopology,
    pub features: Tensor,
    pub collapsed: usize,
    pub runner_up: usize,
    pub distant: usize,
    /// Two collapses below the full edge count.
    pub target: usize,
}

pub fn score_update_divergence() -> DivergenceFixture {
    let mesh = primitives::icosahedron();
    let topology = build_edge_topology(&mesh).expect("icosahedron is manifold");
    let collapsed = 0;
    let [a, b, _, _] = topology.neighbors(collapsed).map(|n| n.expect("closed mesh"));
    let [p, q] = topology.edge(collapsed);
    let near: Vec<usize> = [p, q]
        .into_iter()
        .flat_map(|v| topology.vertex_neighbors(v).chain([v]))
        .collect();
    let distant = (0..topology.edge_count())
        .find(|&x| topology.edge(x).iter().all(|v| !near.contains(v)))
        .expect("icosahedron has an edge away from any other edge's star");

    let mut values: Vec<f64> = (0..topology.edge_count()).map(|i| 5.0 + 0.01 * i as f64).collect();
    values[collapsed] = 0.1;
    values[a] = 0.2;
    values[distant] = 0.5;
    values[b] = 10.0;
    let target = topology.edge_count() - 6;
    DivergenceFixture {
        features: Tensor::from_vec(values.len(), 1, values),
        mesh,
        topology,
        collapsed,
        runner_up: a,
        distant,
        target,
    }
}
