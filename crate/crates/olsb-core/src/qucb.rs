//! Per-flow online path statistics, the queue-UCB selection rule, and the
//! genie rule it is measured against.
//!
//! For a flow with spanner paths `p` the learner keeps a running cost
//! estimate `mean_p` and a sample count `count_p`, and each slot selects
//!
//! ```text
//! p* = argmin_p  K * mean_p + Q[level(mean_p)] - sqrt(2 ln t / count_p)
//! ```
//!
//! where `Q` is the source's per-level queue snapshot for the flow's
//! destination. The genie solves the same program with true path means and
//! no exploration bonus. Ties break toward the lowest path id.

use crate::error::{Error, Result};
use crate::queueing::CostLevels;

/// Running statistics for one spanner path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStats {
    pub path_id: usize,
    /// Empirical mean of observed normalized path costs.
    pub mean: f64,
    /// Number of recorded observations (>= 1 after initialization).
    pub count: u64,
    pub last_update_slot: u64,
}

/// Cost statistics a node keeps for one suffix of a spanner path.
#[derive(Debug, Clone, PartialEq)]
pub struct SubpathStats {
    /// Node index (into the path's node sequence) where the suffix starts.
    pub start: usize,
    pub mean: f64,
    pub count: u64,
}

/// Online state for one flow: statistics over its spanner paths, kept in
/// ascending path-id order so argmin scans break ties toward lower ids.
#[derive(Debug, Clone)]
pub struct FlowLearner {
    /// Tuning parameter weighting path cost against queue backlog.
    pub k: f64,
    /// Scales the exploration bonus; 0 turns the learner into a greedy
    /// index rule (used by the oracle-equivalence check).
    pub explore_scale: f64,
    stats: Vec<PathStats>,
    /// Per path (parallel to `stats`): suffix statistics held by the
    /// intermediate nodes on that path.
    subpaths: Vec<Vec<SubpathStats>>,
}

impl FlowLearner {
    /// Creates a learner for the given spanner path ids (any order; stored
    /// sorted) with per-path suffix counts taken from `hops`.
    pub fn new(k: f64, path_ids: &[usize], hops: &[usize]) -> Result<Self> {
        if path_ids.is_empty() {
            return Err(Error::config("spanner", "flow has an empty spanner"));
        }
        assert_eq!(path_ids.len(), hops.len());
        let mut order: Vec<usize> = (0..path_ids.len()).collect();
        order.sort_by_key(|&i| path_ids[i]);
        let stats = order
            .iter()
            .map(|&i| PathStats {
                path_id: path_ids[i],
                mean: 0.0,
                count: 0,
                last_update_slot: 0,
            })
            .collect();
        let subpaths = order
            .iter()
            .map(|&i| {
                // A path s -> v_1 -> ... -> v_{h-1} -> d has h-1 proper
                // suffixes observed at the intermediate nodes.
                (1..hops[i])
                    .map(|start| SubpathStats { start, mean: 0.0, count: 0 })
                    .collect()
            })
            .collect();
        Ok(FlowLearner {
            k,
            explore_scale: 1.0,
            stats,
            subpaths,
        })
    }

    pub fn stats(&self) -> &[PathStats] {
        &self.stats
    }

    pub fn subpath_stats(&self, slot: usize) -> &[SubpathStats] {
        &self.subpaths[slot]
    }

    pub fn slot_of_path(&self, path_id: usize) -> Option<usize> {
        self.stats.iter().position(|s| s.path_id == path_id)
    }

    /// Seeds every path with its first observation (probe transmissions):
    /// count 1, mean equal to the observed cost. Idempotent for identical
    /// observations.
    pub fn initialize(&mut self, first_observations: &[f64]) -> Result<()> {
        if first_observations.len() != self.stats.len() {
            return Err(Error::Init(format!(
                "expected {} probe observations, got {}",
                self.stats.len(),
                first_observations.len()
            )));
        }
        for (s, &obs) in self.stats.iter_mut().zip(first_observations) {
            if !(0.0..=1.0).contains(&obs) {
                return Err(Error::CostOutOfRange(obs));
            }
            s.mean = obs;
            s.count = 1;
            s.last_update_slot = 0;
        }
        Ok(())
    }

    /// Folds one observed path cost (and optional suffix costs) into the
    /// running means. `subpath_costs` is aligned with the path's proper
    /// suffixes, outermost first.
    pub fn record_delivery(
        &mut self,
        path_id: usize,
        cost: f64,
        subpath_costs: &[f64],
        slot: u64,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&cost) {
            return Err(Error::CostOutOfRange(cost));
        }
        let idx = self
            .slot_of_path(path_id)
            .ok_or(Error::UnknownPath(path_id))?;
        let s = &mut self.stats[idx];
        s.count += 1;
        s.mean += (cost - s.mean) / s.count as f64;
        s.last_update_slot = slot;
        for (sub, &c) in self.subpaths[idx].iter_mut().zip(subpath_costs) {
            sub.count += 1;
            sub.mean += (c - sub.mean) / sub.count as f64;
        }
        Ok(())
    }

    /// The QUCB rule: argmin over spanner paths of
    /// `K*mean + Q[level(mean)] - explore_scale*sqrt(2 ln t / count)`.
    /// `source_levels` is the source's per-level queue snapshot for this
    /// flow's destination. Returns `(path_id, index_value)`.
    pub fn qucb_select(
        &self,
        t: u64,
        levels: &CostLevels,
        source_levels: &[u32],
    ) -> (usize, f64) {
        debug_assert!(t >= 1);
        debug_assert!(self.stats.iter().all(|s| s.count >= 1), "learner not initialized");
        let ln_t = (t as f64).ln();
        let mut best_id = self.stats[0].path_id;
        let mut best_val = f64::INFINITY;
        for s in &self.stats {
            let bonus = self.explore_scale * (2.0 * ln_t / s.count as f64).sqrt();
            let val = balanced_index(self.k, s.mean, levels, source_levels) - bonus;
            if val < best_val {
                best_val = val;
                best_id = s.path_id;
            }
        }
        (best_id, best_val)
    }

    /// Index value of every spanner path at slot `t`, for decision
    /// logging: `(path_id, index)` in ascending path-id order.
    pub fn qucb_indexes(
        &self,
        t: u64,
        levels: &CostLevels,
        source_levels: &[u32],
    ) -> Vec<(usize, f64)> {
        let ln_t = (t as f64).ln();
        self.stats
            .iter()
            .map(|s| {
                let bonus = self.explore_scale * (2.0 * ln_t / s.count as f64).sqrt();
                (
                    s.path_id,
                    balanced_index(self.k, s.mean, levels, source_levels) - bonus,
                )
            })
            .collect()
    }
}

/// The shared objective `K*cost + Q[level(cost)]`; both QUCB and the genie
/// evaluate through this one routine so the oracle-equivalence property is
/// exact in floating point.
#[inline]
pub fn balanced_index(k: f64, cost: f64, levels: &CostLevels, source_levels: &[u32]) -> f64 {
    k * cost + source_levels[levels.level_of(cost)] as f64
}

/// The genie rule: argmin over `candidates` (pairs of path id and true mean
/// cost, in ascending id order for deterministic ties) of
/// `K*mu + Q[level(mu)]`. Returns `(path_id, objective_value)`.
pub fn genie_select(
    k: f64,
    candidates: &[(usize, f64)],
    levels: &CostLevels,
    source_levels: &[u32],
) -> (usize, f64) {
    assert!(!candidates.is_empty());
    let mut best_id = candidates[0].0;
    let mut best_val = f64::INFINITY;
    for &(id, mu) in candidates {
        let val = balanced_index(k, mu, levels, source_levels);
        if val < best_val {
            best_val = val;
            best_id = id;
        }
    }
    (best_id, best_val)
}

// ---------------------------------------------------------------------------
// Baseline index rules
// ---------------------------------------------------------------------------

/// UCB1 on cost alone: argmin of `mean - sqrt(2 ln t / count)`.
pub fn ucb1_select(stats: &[PathStats], t: u64) -> usize {
    let ln_t = (t as f64).ln();
    let mut best_id = stats[0].path_id;
    let mut best_val = f64::INFINITY;
    for s in stats {
        let val = s.mean - (2.0 * ln_t / s.count as f64).sqrt();
        if val < best_val {
            best_val = val;
            best_id = s.path_id;
        }
    }
    best_id
}

/// Deterministic explore-then-exploit rule for the adaptive shortest-path
/// baseline: while the least-sampled path has fewer than
/// `ceil(gamma * ln t)` samples, sample it; otherwise exploit the lowest
/// empirical mean.
pub fn aspr_select(stats: &[PathStats], t: u64, gamma: f64) -> usize {
    let quota = (gamma * (t as f64).ln()).ceil() as u64;
    let mut min_count = u64::MAX;
    let mut min_count_id = stats[0].path_id;
    let mut best_mean = f64::INFINITY;
    let mut best_mean_id = stats[0].path_id;
    for s in stats {
        if s.count < min_count {
            min_count = s.count;
            min_count_id = s.path_id;
        }
        if s.mean < best_mean {
            best_mean = s.mean;
            best_mean_id = s.path_id;
        }
    }
    if min_count < quota {
        min_count_id
    } else {
        best_mean_id
    }
}
