//! System generators, matrix/graph ingestion and the experiment sweeps.

mod generators;
mod io;
mod run;
mod spec;

pub use generators::{
    consensus_matrix, default_edge_probability, erdos_renyi_system, erdos_renyi_with_probability, graph_to_system,
    load_edge_list, parse_edge_list, random_b, random_direction, random_feasible_schedule, sub_seed, BDistribution, EdgeListGraph,
};
pub use io::{format_matrix, load_matrix, load_vectors, parse_matrix};
pub use run::{run_experiment, ExperimentOutput};
pub use spec::{parse_f64_list, parse_usize_list, ExperimentKind, ExperimentSpec, StateModel};

/// Path of the bundled karate-club edge list.
pub fn zachary_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/zachary.txt")
}

/// Contents of the bundled karate-club edge list.
pub const ZACHARY_EDGES: &str = include_str!("../../data/zachary.txt");
