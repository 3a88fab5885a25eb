//! Shared fixtures for the benchmark suite: deterministic random graphs,
//! embeddings, and a small pre-generated motif dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smixup_core::graph::{adjacency_from_edges, gen_motif_dataset, MotifConfig};
use smixup_core::{Graph, GraphDataset, Matrix};

/// Random simple graph with `n` nodes, edge probability 1/2, and
/// `width`-dimensional uniform features.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, width: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_range(0.0..1.0) < 0.5 {
                edges.push((i, j));
            }
        }
    }
    let x = Matrix::from_shape_fn((n, width), |_| rng.random_range(-1.0..1.0));
    Graph::new(adjacency_from_edges(n, &edges), x, vec![1.0]).expect("valid by construction")
}

/// Random embedding matrix, `n` rows of `width` uniform entries.
pub fn random_embedding(rng: &mut ChaCha8Rng, n: usize, width: usize) -> Matrix {
    Matrix::from_shape_fn((n, width), |_| rng.random_range(-1.0..1.0))
}

/// Small deterministic motif dataset for end-to-end benches.
pub fn motif_fixture(count_per_class: usize) -> GraphDataset {
    let cfg = MotifConfig {
        count_per_class,
        base_size_min: 5,
        base_size_max: 10,
        seed: 7,
        ..MotifConfig::default()
    };
    gen_motif_dataset(&cfg).expect("valid config")
}
