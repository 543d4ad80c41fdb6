use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

use super::generators::BDistribution;

/// Which experiment sweep to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    EnergyVsS,
    RelativeEnergy,
    MseVsTime,
    MseVsM,
    MseVsS,
    MseVsXf,
    MseVsX0,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::EnergyVsS,
        Self::RelativeEnergy,
        Self::MseVsTime,
        Self::MseVsM,
        Self::MseVsS,
        Self::MseVsXf,
        Self::MseVsX0,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::EnergyVsS => "energy-vs-s",
            Self::RelativeEnergy => "relative-energy",
            Self::MseVsTime => "mse-vs-time",
            Self::MseVsM => "mse-vs-m",
            Self::MseVsS => "mse-vs-s",
            Self::MseVsXf => "mse-vs-xf",
            Self::MseVsX0 => "mse-vs-x0",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.id() == s).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|k| k.id()).collect();
            invalid(format!("unknown experiment {s:?} (expected one of {})", known.join(", ")))
        })
    }
}

/// Source of the state matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateModel {
    ErdosRenyi,
    Identity,
}

impl FromStr for StateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erdos-renyi" | "er" => Ok(Self::ErdosRenyi),
            "identity" => Ok(Self::Identity),
            other => Err(invalid(format!("unknown system {other:?} (expected erdos-renyi or identity)"))),
        }
    }
}

/// Parameters of one experiment run. Unset sweep lists fall back to
/// experiment-specific defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub n: usize,
    pub m: Option<usize>,
    pub p: Option<usize>,
    pub s_values: Vec<usize>,
    pub k: Option<usize>,
    pub horizon: usize,
    pub trials: usize,
    pub sigma2: Vec<f64>,
    pub b_dist: BDistribution,
    pub system: StateModel,
    pub edge_probability: Option<f64>,
    pub graph: Option<PathBuf>,
    pub m_values: Vec<usize>,
    pub xf_norms: Vec<f64>,
    pub x0_norms: Vec<f64>,
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(format!("{key}: {value:?} is not a non-negative integer")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| invalid(format!("{key}: {value:?} is not a number")))?;
    if !v.is_finite() {
        return Err(invalid(format!("{key}: {value:?} is not finite")));
    }
    Ok(v)
}

/// `a,b,c` or an inclusive range `lo:hi` / `lo:hi:step`.
pub fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let value = value.trim();
    let list = if value.contains(':') {
        let parts: Vec<usize> = value.split(':').map(|p| parse_usize(key, p)).collect::<Result<_>>()?;
        let (lo, hi, step) = match parts.as_slice() {
            [lo, hi] => (*lo, *hi, 1),
            [lo, hi, step] => (*lo, *hi, *step),
            _ => return Err(invalid(format!("{key}: malformed range {value:?}"))),
        };
        if step == 0 || lo > hi {
            return Err(invalid(format!("{key}: empty range {value:?}")));
        }
        (lo..=hi).step_by(step).collect()
    } else {
        value.split(',').map(|p| parse_usize(key, p)).collect::<Result<Vec<_>>>()?
    };
    if list.is_empty() {
        return Err(invalid(format!("{key}: empty list")));
    }
    Ok(list)
}

pub fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|p| parse_f64(key, p)).collect()
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            n: 20,
            m: None,
            p: None,
            s_values: Vec::new(),
            k: None,
            horizon: 40,
            trials: 20,
            sigma2: vec![1e-4],
            b_dist: BDistribution::Gaussian,
            system: StateModel::ErdosRenyi,
            edge_probability: None,
            graph: None,
            m_values: Vec::new(),
            xf_norms: Vec::new(),
            x0_norms: Vec::new(),
        }
    }

    /// Sets one field from its config key (`-` and `_` are interchangeable).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "experiment" => self.kind = value.parse()?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| invalid(format!("seed: {value:?} is not an unsigned integer")))?
            }
            "n" => self.n = parse_usize(&key, value)?,
            "m" => self.m = Some(parse_usize(&key, value)?),
            "p" => self.p = Some(parse_usize(&key, value)?),
            "s" => self.s_values = parse_usize_list(&key, value)?,
            "k" => self.k = Some(parse_usize(&key, value)?),
            "horizon" => self.horizon = parse_usize(&key, value)?,
            "trials" => self.trials = parse_usize(&key, value)?,
            "sigma2" => self.sigma2 = parse_f64_list(&key, value)?,
            "b_dist" => self.b_dist = value.parse()?,
            "system" => self.system = value.parse()?,
            "edge_probability" => self.edge_probability = Some(parse_f64(&key, value)?),
            "graph" => self.graph = Some(PathBuf::from(value)),
            "m_values" => self.m_values = parse_usize_list(&key, value)?,
            "xf_norm" => self.xf_norms = parse_f64_list(&key, value)?,
            "x0_norm" => self.x0_norms = parse_f64_list(&key, value)?,
            other => return Err(invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_config(text: &str) -> Result<Self> {
        let mut spec = Self::new(ExperimentKind::EnergyVsS, 0);
        let mut has_seed = false;
        let mut has_kind = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            if let Some((key, _)) = line.split_once('=') {
                has_seed |= key.trim() == "seed";
                has_kind |= key.trim() == "experiment";
            }
        }
        if !has_kind || !has_seed {
            return Err(invalid("config must set both experiment and seed"));
        }
        spec.apply_config(text)?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.trials == 0 || self.horizon == 0 {
            return Err(invalid("n, trials and horizon must be positive"));
        }
        if self.sigma2.iter().any(|&v| v < 0.0) || self.sigma2.is_empty() {
            return Err(invalid("sigma2 must be a non-empty list of values >= 0"));
        }
        if self.xf_norms.iter().chain(&self.x0_norms).any(|&v| v < 0.0) {
            return Err(invalid("norms must be >= 0"));
        }
        if let Some(pe) = self.edge_probability {
            if !(0.0..=1.0).contains(&pe) {
                return Err(invalid("edge_probability must lie in [0, 1]"));
            }
        }
        if self.m == Some(0) || self.m_values.contains(&0) {
            return Err(invalid("m must be positive"));
        }
        Ok(())
    }

    /// Every field as `key = value` lines, re-parseable by [`apply_config`](Self::apply_config).
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment = {}", self.kind.id());
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "n = {}", self.n);
        if let Some(m) = self.m {
            let _ = writeln!(out, "m = {m}");
        }
        if let Some(p) = self.p {
            let _ = writeln!(out, "p = {p}");
        }
        if !self.s_values.is_empty() {
            let _ = writeln!(out, "s = {}", join(&self.s_values));
        }
        if let Some(k) = self.k {
            let _ = writeln!(out, "k = {k}");
        }
        let _ = writeln!(out, "horizon = {}", self.horizon);
        let _ = writeln!(out, "trials = {}", self.trials);
        let _ = writeln!(out, "sigma2 = {}", join(&self.sigma2));
        let _ = writeln!(out, "b_dist = {}", self.b_dist);
        let system = match self.system {
            StateModel::ErdosRenyi => "erdos-renyi",
            StateModel::Identity => "identity",
        };
        let _ = writeln!(out, "system = {system}");
        if let Some(pe) = self.edge_probability {
            let _ = writeln!(out, "edge_probability = {pe}");
        }
        if let Some(g) = &self.graph {
            let _ = writeln!(out, "graph = {}", g.display());
        }
        if !self.m_values.is_empty() {
            let _ = writeln!(out, "m_values = {}", join(&self.m_values));
        }
        if !self.xf_norms.is_empty() {
            let _ = writeln!(out, "xf_norm = {}", join(&self.xf_norms));
        }
        if !self.x0_norms.is_empty() {
            let _ = writeln!(out, "x0_norm = {}", join(&self.x0_norms));
        }
        out
    }
}
