//! Gradual domain adaptation on attributed graphs.
//!
//! The pipeline: measure the fused Gromov-Wasserstein (FGW) distance between
//! a labeled source graph and an unlabeled target, solve a low-rank transport
//! problem to place both on a common r-node space, interpolate intermediate
//! graphs along the resulting approximate FGW geodesic, and walk a graph
//! convolutional classifier across the sequence with confidence-weighted
//! self-training.

pub mod csbm;
pub mod error;
pub mod fgw;
pub mod gnn;
pub mod graph;
pub mod io;
pub mod lowrank;
pub mod ot;
pub mod path;
pub mod runner;

pub use csbm::{csbm_shift_preset, generate_csbm, CsbmSpec, ShiftKind, ShiftSide};
pub use error::{GdaError, Result};
pub use fgw::{fgw_cost, fgw_distance_bruteforce, fgw_distance_cg, FgwConfig, FgwResult};
pub use gnn::{
    entropy_confidence, forward, normalize_adjacency, predict, train, train_from,
    train_with_history, GcnModel, TrainConfig,
};
pub use graph::{attribute_distance_matrix, uniform_marginal, Graph};
pub use io::{load_graph, load_graph_dir, save_graph};
pub use lowrank::{
    gradient_kernels, init_plan, lift_product_plan, lr_dykstra, solve_lowrank_fgw, LowRankConfig,
    LowRankPlan,
};
pub use ot::exact_ot;
pub use path::{
    estimate_optimal_t, generate_path, generate_path_with_plan, interpolate, load_path,
    normalize_plan, path_quality, product_reference_plan, save_path, transform_graphs,
    GeodesicPath, PathPairSample, PathQualityReport,
};
pub use runner::{
    aggregate_sweep, evaluate, label_transfer_to_transformed, run_direct, run_gradual,
    shift_sweep, shift_sweep_cells, sweep_cell_specs, EvalLabels, GdaReport, PathMetadata,
    ShiftSweepRow, SweepCell, SweepConfig,
};
