//! Design-space topology: integer partitions of the CDU pool into subloops,
//! CDU-to-subloop assignment policies, and the workload equalization
//! transform.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant_model::{ModelError, SubloopLoads};

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("expected {expected} CDU loads, got {got}")]
    LoadLengthMismatch { expected: usize, got: usize },
    #[error("equalization level must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An ordered integer partition: CDU counts per subloop, non-increasing,
/// summing to the plant's CDU total.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    counts: Vec<usize>,
}

impl Partition {
    pub fn new(counts: Vec<usize>) -> Result<Self, TopologyError> {
        if counts.is_empty() {
            return Err(TopologyError::InvalidPartition("no subloops".into()));
        }
        if counts.contains(&0) {
            return Err(TopologyError::InvalidPartition(
                "every subloop must hold at least one CDU".into(),
            ));
        }
        if counts.windows(2).any(|w| w[0] < w[1]) {
            return Err(TopologyError::InvalidPartition(format!(
                "counts must be non-increasing, got {counts:?}"
            )));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Number of subloops.
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Total CDU count.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

impl fmt::Display for Partition {
    /// Canonical rendering, e.g. `(19, 6)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for Partition {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let inner = trimmed
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .unwrap_or(trimmed);
        let counts = inner
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| TopologyError::InvalidPartition(format!("bad count in {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Partition::new(counts)
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = TopologyError;
    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Partition::new(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.counts
    }
}

/// CDU index → subloop index map for one partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CduAssignment {
    /// `subloop_of[j]` is the subloop of CDU j, in `[0, K)`.
    pub subloop_of: Vec<usize>,
    /// Number of subloops.
    pub k: usize,
}

impl CduAssignment {
    /// Checks that exactly n_k CDUs map to each subloop k.
    pub fn matches(&self, partition: &Partition) -> bool {
        if self.k != partition.k() || self.subloop_of.len() != partition.total() {
            return false;
        }
        let mut counts = vec![0usize; self.k];
        for &s in &self.subloop_of {
            if s >= self.k {
                return false;
            }
            counts[s] += 1;
        }
        counts == partition.counts()
    }
}

/// Enumerates all partitions of `n` into exactly `k` non-increasing positive
/// parts, in descending lexicographic order. `k > n` yields an empty list.
pub fn enumerate_partitions(n: usize, k: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut parts = Vec::with_capacity(k);
    descend(n, k, n, &mut parts, &mut out);
    out
}

fn descend(n: usize, k: usize, max_part: usize, parts: &mut Vec<usize>, out: &mut Vec<Partition>) {
    if k == 1 {
        if n >= 1 && n <= max_part {
            parts.push(n);
            out.push(Partition {
                counts: parts.clone(),
            });
            parts.pop();
        }
        return;
    }
    // First part from largest to smallest gives descending lexicographic order.
    let hi = max_part.min(n - (k - 1));
    let lo = n.div_ceil(k);
    if lo > hi {
        return;
    }
    for p in (lo..=hi).rev() {
        parts.push(p);
        descend(n - p, k - 1, p, parts, out);
        parts.pop();
    }
}

/// Indices of CDUs sorted by descending mean load (ties by index).
fn hot_order(cdu_mean_loads: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cdu_mean_loads.len()).collect();
    order.sort_by(|&a, &b| {
        cdu_mean_loads[b]
            .total_cmp(&cdu_mean_loads[a])
            .then(a.cmp(&b))
    });
    order
}

/// Serpentine ("snake") deal of load-sorted CDUs across the subloops so each
/// receives a representative mix: passes run over the subloop indices in
/// alternating direction, skipping subloops already at capacity n_k.
pub fn balanced_assignment(
    partition: &Partition,
    cdu_mean_loads: &[f64],
) -> Result<CduAssignment, TopologyError> {
    let n = partition.total();
    if cdu_mean_loads.len() != n {
        return Err(TopologyError::LoadLengthMismatch {
            expected: n,
            got: cdu_mean_loads.len(),
        });
    }
    let k = partition.k();
    let mut remaining: Vec<usize> = partition.counts().to_vec();
    let mut subloop_of = vec![0usize; n];
    let order = hot_order(cdu_mean_loads);

    let mut cursor = 0usize;
    let mut forward = true;
    while cursor < n {
        let pass: Box<dyn Iterator<Item = usize>> = if forward {
            Box::new(0..k)
        } else {
            Box::new((0..k).rev())
        };
        for s in pass {
            if remaining[s] > 0 && cursor < n {
                subloop_of[order[cursor]] = s;
                remaining[s] -= 1;
                cursor += 1;
            }
        }
        forward = !forward;
    }
    Ok(CduAssignment { subloop_of, k })
}

/// Contiguous-block assignment concentrating the hottest CDUs in the
/// fewest-CDU subloop: blocks of load-sorted CDUs go to subloops ordered by
/// ascending n_k, ties broken so the higher subloop index gets the hotter
/// block.
pub fn worst_case_assignment(
    partition: &Partition,
    cdu_mean_loads: &[f64],
) -> Result<CduAssignment, TopologyError> {
    let n = partition.total();
    if cdu_mean_loads.len() != n {
        return Err(TopologyError::LoadLengthMismatch {
            expected: n,
            got: cdu_mean_loads.len(),
        });
    }
    let k = partition.k();
    let mut subloop_order: Vec<usize> = (0..k).collect();
    subloop_order.sort_by(|&a, &b| {
        partition.counts()[a]
            .cmp(&partition.counts()[b])
            .then(b.cmp(&a))
    });

    let order = hot_order(cdu_mean_loads);
    let mut subloop_of = vec![0usize; n];
    let mut cursor = 0usize;
    for &s in &subloop_order {
        for _ in 0..partition.counts()[s] {
            subloop_of[order[cursor]] = s;
            cursor += 1;
        }
    }
    Ok(CduAssignment { subloop_of, k })
}

/// Sums per-CDU loads into per-subloop loads for one timestep.
pub fn subloop_loads(
    assignment: &CduAssignment,
    cdu_loads_t: &[f64],
) -> Result<SubloopLoads, TopologyError> {
    if cdu_loads_t.len() != assignment.subloop_of.len() {
        return Err(TopologyError::LoadLengthMismatch {
            expected: assignment.subloop_of.len(),
            got: cdu_loads_t.len(),
        });
    }
    let mut q = vec![0.0; assignment.k];
    for (&s, &load) in assignment.subloop_of.iter().zip(cdu_loads_t) {
        q[s] += load;
    }
    Ok(SubloopLoads::from_loads(q)?)
}

/// Blends per-CDU loads toward their mean: `q_j(α) = (1-α)·q_j + α·q̄`.
/// Total load is preserved for every α.
pub fn equalize_workload(cdu_loads_t: &[f64], alpha: f64) -> Result<Vec<f64>, TopologyError> {
    if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
        return Err(TopologyError::AlphaOutOfRange(alpha));
    }
    let mean = cdu_loads_t.iter().sum::<f64>() / cdu_loads_t.len() as f64;
    Ok(cdu_loads_t
        .iter()
        .map(|&q| (1.0 - alpha) * q + alpha * mean)
        .collect())
}
