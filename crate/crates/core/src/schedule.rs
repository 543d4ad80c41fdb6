//! Actuator schedules and their (time, actuator) selection-set view.
//!
//! Actuator indices are 0-based in memory. The text format is 1-based:
//! line k lists the actuators of step k separated by spaces, and an empty
//! line is an empty step.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

/// A set of `(k, j)` pairs: actuator `j` is active at step `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionSet {
    horizon: usize,
    pairs: BTreeSet<(usize, usize)>,
}

impl SelectionSet {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            pairs: BTreeSet::new(),
        }
    }

    pub fn from_pairs(horizon: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = Self::new(horizon);
        for (k, j) in pairs {
            if k >= horizon {
                return Err(invalid(format!("time index {k} outside horizon {horizon}")));
            }
            if !set.pairs.insert((k, j)) {
                return Err(invalid(format!("duplicate pair ({k}, {j})")));
            }
        }
        Ok(set)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, pair: (usize, usize)) -> bool {
        self.pairs.contains(&pair)
    }

    /// Inserts a pair; returns false if it was already present.
    pub fn insert(&mut self, pair: (usize, usize)) -> bool {
        assert!(pair.0 < self.horizon, "time index outside horizon");
        self.pairs.insert(pair)
    }

    pub fn remove(&mut self, pair: (usize, usize)) -> bool {
        self.pairs.remove(&pair)
    }

    /// Pairs in lexicographic (time, actuator) order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn count_at(&self, k: usize) -> usize {
        self.pairs.range((k, 0)..(k + 1, 0)).count()
    }

    pub fn is_subset(&self, other: &SelectionSet) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    /// Membership in the feasible set: at most `s` actuators per step.
    pub fn is_feasible(&self, s: usize) -> bool {
        (0..self.horizon).all(|k| self.count_at(k) <= s)
    }

    pub fn to_schedule(&self, s: usize) -> Result<ActuatorSchedule> {
        let mut sets = vec![BTreeSet::new(); self.horizon];
        for &(k, j) in &self.pairs {
            sets[k].insert(j);
        }
        ActuatorSchedule::new(sets, s)
    }
}

/// `(S_0, ..., S_{K-1})` with `|S_k| <= s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActuatorSchedule {
    sets: Vec<BTreeSet<usize>>,
    sparsity: usize,
}

impl ActuatorSchedule {
    pub fn new(sets: Vec<BTreeSet<usize>>, sparsity: usize) -> Result<Self> {
        if let Some((k, set)) = sets.iter().enumerate().find(|(_, set)| set.len() > sparsity) {
            return Err(invalid(format!(
                "step {k} has {} actuators, budget is {sparsity}",
                set.len()
            )));
        }
        Ok(Self { sets, sparsity })
    }

    pub fn empty(horizon: usize, sparsity: usize) -> Self {
        Self {
            sets: vec![BTreeSet::new(); horizon],
            sparsity,
        }
    }

    /// Every actuator active at every step.
    pub fn full(horizon: usize, m: usize) -> Self {
        Self {
            sets: vec![(0..m).collect(); horizon],
            sparsity: m,
        }
    }

    /// Step k uses actuators `k s, k s + 1, ..., k s + s - 1` modulo m. With
    /// `horizon = m` every actuator appears exactly `s` times.
    pub fn cyclic(horizon: usize, m: usize, s: usize) -> Self {
        let sets = (0..horizon)
            .map(|k| (0..s.min(m)).map(|t| (k * s + t) % m).collect())
            .collect();
        Self { sets, sparsity: s }
    }

    pub fn horizon(&self) -> usize {
        self.sets.len()
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn sets(&self) -> &[BTreeSet<usize>] {
        &self.sets
    }

    pub fn set(&self, k: usize) -> &BTreeSet<usize> {
        &self.sets[k]
    }

    pub fn total_pairs(&self) -> usize {
        self.sets.iter().map(BTreeSet::len).sum()
    }

    /// Largest actuator index used, if any.
    pub fn max_actuator(&self) -> Option<usize> {
        self.sets.iter().filter_map(|s| s.last().copied()).max()
    }

    pub fn to_selection(&self) -> SelectionSet {
        let mut sel = SelectionSet::new(self.horizon());
        for (k, set) in self.sets.iter().enumerate() {
            for &j in set {
                sel.insert((k, j));
            }
        }
        sel
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for set in &self.sets {
            let line: Vec<String> = set.iter().map(|j| (j + 1).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Parses the line-oriented format. Without an explicit budget the
    /// largest step size is used.
    pub fn parse_text(text: &str, sparsity: Option<usize>) -> Result<Self> {
        let mut segments: Vec<&str> = text.split('\n').collect();
        if segments.last() == Some(&"") {
            segments.pop();
        }
        let mut sets = Vec::with_capacity(segments.len());
        for (lineno, line) in segments.iter().enumerate() {
            let mut set = BTreeSet::new();
            for tok in line.split_whitespace() {
                let idx: usize = tok.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("not an actuator index: {tok:?}"),
                })?;
                if idx == 0 {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: "actuator indices are 1-based".into(),
                    });
                }
                if !set.insert(idx - 1) {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("duplicate actuator {idx}"),
                    });
                }
            }
            sets.push(set);
        }
        let s = sparsity.unwrap_or_else(|| sets.iter().map(BTreeSet::len).max().unwrap_or(0));
        Self::new(sets, s)
    }
}
