//! Anchor-based sparse attention for graphs, built around k-dominating-set
//! anchors: every node attends to its k-hop neighborhood plus a small set of
//! globally visible anchor nodes, with shortest-path-distance buckets as an
//! additive attention bias. The crate bundles the graph machinery, anchor
//! selection, receptive-field construction, the transformer layer (forward
//! and analytic backward), a stacked model with expressiveness experiments
//! against 1-WL color refinement, and a benchmark harness for the
//! complexity claims.

pub mod anchor;
pub mod attention;
pub mod bench;
pub mod encoding;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod model;
pub mod ratio;
pub mod rng;

pub use anchor::{
    enumerate_greedy_distribution, enumerate_greedy_outcomes, select_k_ds, verify_k_ds, AnchorSet,
};
pub use attention::{
    anchor_attention_forward, attention_pair_count, transformer_block_backward,
    transformer_block_forward, AttentionWeights, LayerGrads, LayerParams,
};
pub use bench::{fit_exponent, scaling_sweep, BenchFamily, ScalingRecord};
pub use encoding::{
    check_anchor_distinguishable, check_neighbor_distinguishable,
    compute_constant_receptive_fields, compute_receptive_fields, ReceptiveField, SpdBucketing,
};
pub use error::{Error, Result};
pub use graph::{disjoint_union, generate, two_triangles, BfsResult, Graph, GraphFamily};
pub use matrix::Matrix;
pub use model::{
    distinguish_randomized, gnn_reduction_check, influence_test, model_forward,
    signature_distribution, wl_refine, Aggregator, DistinguishOutcome, InfluenceResult,
    ModelConfig, Readout, RefinementLabels, Refiner, WlOutcome,
};
pub use ratio::Ratio;
pub use rng::SplitMix64;
