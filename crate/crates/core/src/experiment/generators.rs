use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::error::{invalid, Error, Result};
use crate::linalg::{rank_unchecked, RankTolerance};
use crate::schedule::ActuatorSchedule;

/// Independent 64-bit seed for sub-task `stream` of a run seeded with `seed`.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// `I - L / n` for the Laplacian `L` of a symmetric 0/1 adjacency matrix.
pub fn consensus_matrix(adjacency: &DMatrix<f64>) -> DMatrix<f64> {
    let n = adjacency.nrows();
    let degrees = adjacency.column_sum();
    let laplacian = DMatrix::from_diagonal(&degrees) - adjacency;
    DMatrix::identity(n, n) - laplacian / n as f64
}

/// Edge probability `2 ln n / n`, capped at 1.
pub fn default_edge_probability(n: usize) -> f64 {
    (2.0 * (n as f64).ln() / n as f64).min(1.0)
}

/// Undirected Erdos-Renyi graph with edge probability `2 ln n / n`,
/// returned as `A = I - L / n`.
pub fn erdos_renyi_system(n: usize, seed: u64) -> Result<DMatrix<f64>> {
    erdos_renyi_with_probability(n, default_edge_probability(n), seed)
}

pub fn erdos_renyi_with_probability(n: usize, edge_probability: f64, seed: u64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(invalid("Erdos-Renyi system needs n >= 2"));
    }
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(invalid(format!("edge probability must lie in [0, 1], got {edge_probability}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adjacency = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(edge_probability) {
                adjacency[(i, j)] = 1.0;
                adjacency[(j, i)] = 1.0;
            }
        }
    }
    Ok(consensus_matrix(&adjacency))
}

/// Undirected simple graph on vertices `1..=vertices`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeListGraph {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl EdgeListGraph {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(u, v) in &edges {
            if u == v {
                return Err(invalid(format!("self-loop at vertex {u}")));
            }
            if u == 0 || v == 0 || u > vertices || v > vertices {
                return Err(invalid(format!("edge ({u}, {v}) outside 1..={vertices}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(invalid(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self { vertices, edges })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut adj = DMatrix::zeros(self.vertices, self.vertices);
        for &(u, v) in &self.edges {
            adj[(u - 1, v - 1)] = 1.0;
            adj[(v - 1, u - 1)] = 1.0;
        }
        adj
    }
}

/// Parses whitespace-separated `u v` pairs (1-based); `#` starts a comment.
/// The vertex count is the largest index seen.
pub fn parse_edge_list(text: &str) -> Result<EdgeListGraph> {
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(format!("expected two vertex indices, got {:?}", line)));
        }
        let mut ends = [0usize; 2];
        for (slot, field) in ends.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| parse_err(format!("{field:?} is not a vertex index")))?;
            if *slot == 0 {
                return Err(parse_err("vertex indices start at 1".into()));
            }
        }
        let [u, v] = ends;
        if u == v {
            return Err(parse_err(format!("self-loop at vertex {u}")));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(parse_err(format!("duplicate edge ({u}, {v})")));
        }
        edges.push((u, v));
    }
    let vertices = edges.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0);
    EdgeListGraph::new(vertices, edges)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<EdgeListGraph> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

/// `A = I - L / n` for the graph's Laplacian.
pub fn graph_to_system(graph: &EdgeListGraph) -> DMatrix<f64> {
    consensus_matrix(&graph.adjacency())
}

/// Distribution of the entries of a random input matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BDistribution {
    Uniform01,
    Gaussian,
    Identity,
}

impl FromStr for BDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform01" | "uniform" => Ok(Self::Uniform01),
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "identity" => Ok(Self::Identity),
            other => Err(invalid(format!(
                "unknown B distribution {other:?} (expected uniform01, gaussian or identity)"
            ))),
        }
    }
}

impl std::fmt::Display for BDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Uniform01 => "uniform01",
            Self::Gaussian => "gaussian",
            Self::Identity => "identity",
        })
    }
}

fn draw_b(n: usize, m: usize, dist: BDistribution, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    match dist {
        BDistribution::Uniform01 => {
            let unif = Uniform::new(0.0, 1.0).expect("valid range");
            DMatrix::from_fn(n, m, |_, _| rng.sample(unif))
        }
        BDistribution::Gaussian => DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal)),
        BDistribution::Identity => DMatrix::identity(n, m),
    }
}

/// Seeded `n x m` input matrix. A draw with rank below `min(n, m)` is
/// replaced once by a fresh draw from the same stream.
pub fn random_b(n: usize, m: usize, dist: BDistribution, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 || m == 0 {
        return Err(invalid("B needs n, m >= 1"));
    }
    if dist == BDistribution::Identity && n != m {
        return Err(invalid(format!("identity B requires m = n, got n = {n}, m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = draw_b(n, m, dist, &mut rng);
    if rank_unchecked(&b, RankTolerance::default()) < n.min(m) {
        eprintln!("warning: random B was rank deficient, resampling once");
        return Ok(draw_b(n, m, dist, &mut rng));
    }
    Ok(b)
}

/// Gaussian direction scaled to `norm`.
pub fn random_direction(n: usize, norm: f64, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let len = v.norm();
    if len == 0.0 {
        v
    } else {
        v * (norm / len)
    }
}

/// Each step gets a uniformly random `s`-subset of the `m` actuators.
pub fn random_feasible_schedule(m: usize, horizon: usize, s: usize, seed: u64) -> Result<ActuatorSchedule> {
    if s > m {
        return Err(invalid(format!("s = {s} exceeds m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets = (0..horizon).map(|_| sample(&mut rng, m, s).into_iter().collect()).collect();
    ActuatorSchedule::new(sets, s)
}
