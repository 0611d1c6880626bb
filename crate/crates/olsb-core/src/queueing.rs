//! Multi-level per-destination packet queues and the cost quantization map.
//!
//! Each node keeps, per flow destination, one FIFO queue per cost level
//! `m`. A packet in the level-`m` queue must reach its destination over a
//! remaining path of cost at most the level's budget `C_m`, and its level
//! can only tighten (decrease) over its lifetime.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{LinkId, NodeId};

/// The quantization grid `C_0 .. C_M` with
/// `0 = C_0 < C_1 < ... < C_{M-1} < 1 < C_M`.
///
/// Queues exist for levels `0 .. M-1`; `C_M > 1` guarantees every cost in
/// `[0, 1]` maps to a level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLevels {
    values: Vec<f64>,
}

impl CostLevels {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::config("cost_levels", "need at least C_0 and C_1"));
        }
        if values[0] != 0.0 {
            return Err(Error::config("cost_levels", "C_0 must be 0"));
        }
        for w in values.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::config("cost_levels", "values must be strictly increasing"));
            }
        }
        let m = values.len() - 1;
        if values[m - 1] >= 1.0 || values[m] <= 1.0 {
            return Err(Error::config(
                "cost_levels",
                "grid must satisfy C_{M-1} < 1 < C_M",
            ));
        }
        Ok(CostLevels { values })
    }

    /// Equal-interval grid: `C_i = i / m` for `i < m`, `C_m = 1 + 1/m`.
    pub fn equal_intervals(m: usize) -> Self {
        assert!(m >= 1);
        let mut values: Vec<f64> = (0..m).map(|i| i as f64 / m as f64).collect();
        values.push(1.0 + 1.0 / m as f64);
        CostLevels { values }
    }

    /// Number of queue levels M (levels are `0 ..= M-1`).
    pub fn n_levels(&self) -> usize {
        self.values.len() - 1
    }

    /// Budget `C_m` of level `m`.
    #[inline]
    pub fn budget(&self, m: usize) -> f64 {
        self.values[m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The unique level `i` with `C_i <= c < C_{i+1}`, for `c` in `[0, 1]`.
    pub fn level_of(&self, c: f64) -> usize {
        debug_assert!((0.0..=1.0).contains(&c), "cost {c} outside [0,1]");
        // Levels are few; a linear scan beats binary search at this size.
        let m = self.n_levels();
        for i in (0..m).rev() {
            if c >= self.values[i] {
                return i;
            }
        }
        0
    }
}

/// An in-flight packet.
#[derive(Debug, Clone)]
pub struct Packet {
    pub uid: u64,
    pub flow: u16,
    /// Current cost level; non-increasing over the packet's lifetime.
    pub level: u8,
    /// Level assigned at source injection (for cost-compliance audits).
    pub injected_level: u8,
    pub injected_slot: u64,
    pub current_node: NodeId,
    /// Links traversed so far with their realized (raw) weights.
    pub trace: Vec<(LinkId, f64)>,
    /// Remaining route for pinned forwarding (level-0 packets and the
    /// pinned baseline routers); `pos` indexes the next link to take.
    pub pinned: Option<PinnedRoute>,
    /// Set when the packet entered a level-0 queue after injection, i.e.
    /// left the budget-feasibility regime.
    pub demoted_to_level0: bool,
}

#[derive(Debug, Clone)]
pub struct PinnedRoute {
    pub links: Arc<Vec<LinkId>>,
    pub pos: usize,
}

impl Packet {
    /// Realized cost of the traversed trace, normalized by node count.
    pub fn trace_cost(&self, n_nodes: usize) -> f64 {
        self.trace.iter().map(|(_, w)| w).sum::<f64>() / n_nodes as f64
    }
}

/// Read access to queue lengths as they stood at the start of the current
/// movement phase. The slot loop computes all forwarding decisions against
/// this view while applying them to the live queues.
pub trait SnapshotView {
    /// Slot-start length of `(node, dest, m)`.
    fn snap_len(&self, node: NodeId, dest_idx: usize, m: usize) -> u32;
    /// Appends the levels `m >= 1` that can have a positive slot-start
    /// length at `(node, dest)`; may over-approximate (callers re-check
    /// via [`SnapshotView::snap_len`]) but must never omit one.
    fn sender_levels(&self, node: NodeId, dest_idx: usize, out: &mut Vec<usize>);
}

/// Dense bank of FIFO queues indexed by `(node, destination, level)`.
///
/// Destinations are the flow destinations only, remapped to dense indices.
/// The bank tracks per-slot deltas so that slot-start lengths stay
/// readable in O(1) during a movement phase without copying the bank
/// (see [`QueueBank::begin_movement_epoch`]).
#[derive(Debug, Clone)]
pub struct QueueBank {
    dests: Vec<NodeId>,
    n_levels: usize,
    queues: Vec<VecDeque<Packet>>,
    lengths: Vec<u32>,
    node_totals: Vec<u32>,
    total: u64,
    /// `lengths[i] + snap_delta[i]` is the length at the start of the
    /// current movement epoch.
    snap_delta: Vec<i32>,
    dirty: Vec<u32>,
    /// Bitset of levels with live packets per (node, dest), one word group
    /// per pair, for fast sender-side iteration.
    level_bits: Vec<u64>,
    words_per_pair: usize,
}

impl QueueBank {
    pub fn new(n_nodes: usize, dests: Vec<NodeId>, n_levels: usize) -> Self {
        let size = n_nodes * dests.len() * n_levels;
        let words_per_pair = n_levels.div_ceil(64);
        let pairs = n_nodes * dests.len();
        QueueBank {
            dests,
            n_levels,
            queues: vec![VecDeque::new(); size],
            lengths: vec![0; size],
            node_totals: vec![0; n_nodes],
            total: 0,
            snap_delta: vec![0; size],
            dirty: Vec::new(),
            level_bits: vec![0; pairs * words_per_pair],
            words_per_pair,
        }
    }

    /// Declares the current live lengths to be the movement snapshot:
    /// clears all per-slot deltas.
    pub fn begin_movement_epoch(&mut self) {
        for &i in &self.dirty {
            self.snap_delta[i as usize] = 0;
        }
        self.dirty.clear();
    }

    #[inline]
    fn note_delta(&mut self, idx: usize, change: i32) {
        if self.snap_delta[idx] == 0 {
            self.dirty.push(idx as u32);
        }
        self.snap_delta[idx] += change;
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn n_dests(&self) -> usize {
        self.dests.len()
    }

    pub fn dests(&self) -> &[NodeId] {
        &self.dests
    }

    pub fn dest_index(&self, dest: NodeId) -> Option<usize> {
        self.dests.iter().position(|&d| d == dest)
    }

    #[inline]
    pub fn slot_index(&self, node: NodeId, dest_idx: usize, m: usize) -> usize {
        (node.index() * self.dests.len() + dest_idx) * self.n_levels + m
    }

    /// Inserts `pkt` at the tail of `(node, dest, m)`. The packet's level is
    /// set to `m`; enqueueing above the packet's current level is a budget
    /// violation.
    pub fn enqueue(&mut self, node: NodeId, dest_idx: usize, m: usize, mut pkt: Packet) -> Result<()> {
        if m > pkt.level as usize {
            return Err(Error::BudgetViolation {
                packet_level: pkt.level as usize,
                requested: m,
            });
        }
        pkt.level = m as u8;
        pkt.current_node = node;
        let idx = self.slot_index(node, dest_idx, m);
        self.queues[idx].push_back(pkt);
        self.lengths[idx] += 1;
        self.node_totals[node.index()] += 1;
        self.total += 1;
        self.note_delta(idx, -1);
        if self.lengths[idx] == 1 {
            let pair = node.index() * self.dests.len() + dest_idx;
            self.level_bits[pair * self.words_per_pair + m / 64] |= 1u64 << (m % 64);
        }
        Ok(())
    }

    /// Removes and returns the FIFO head of `(node, dest, m)`, if any.
    pub fn dequeue_head(&mut self, node: NodeId, dest_idx: usize, m: usize) -> Option<Packet> {
        let idx = self.slot_index(node, dest_idx, m);
        let pkt = self.queues[idx].pop_front()?;
        self.lengths[idx] -= 1;
        self.node_totals[node.index()] -= 1;
        self.total -= 1;
        self.note_delta(idx, 1);
        if self.lengths[idx] == 0 {
            let pair = node.index() * self.dests.len() + dest_idx;
            self.level_bits[pair * self.words_per_pair + m / 64] &= !(1u64 << (m % 64));
        }
        Some(pkt)
    }

    #[inline]
    pub fn len(&self, node: NodeId, dest_idx: usize, m: usize) -> u32 {
        self.lengths[self.slot_index(node, dest_idx, m)]
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Total packets stored across all queues.
    pub fn total_len(&self) -> u64 {
        self.total
    }

    /// Total packets queued at one node (all destinations and levels).
    #[inline]
    pub fn node_len(&self, node: NodeId) -> u32 {
        self.node_totals[node.index()]
    }

    /// Flat copy of all queue lengths, indexable via [`QueueSnapshot::get`].
    pub fn snapshot_lengths(&self) -> QueueSnapshot {
        QueueSnapshot {
            n_dests: self.dests.len(),
            n_levels: self.n_levels,
            lengths: self.lengths.clone(),
        }
    }

    /// Lengths of every level queue at `(node, dest)`, contiguous in `m`.
    pub fn level_lengths(&self, node: NodeId, dest_idx: usize) -> &[u32] {
        let start = self.slot_index(node, dest_idx, 0);
        &self.lengths[start..start + self.n_levels]
    }
}

impl SnapshotView for QueueBank {
    #[inline]
    fn snap_len(&self, node: NodeId, dest_idx: usize, m: usize) -> u32 {
        let idx = self.slot_index(node, dest_idx, m);
        (self.lengths[idx] as i64 + self.snap_delta[idx] as i64) as u32
    }

    fn sender_levels(&self, node: NodeId, dest_idx: usize, out: &mut Vec<usize>) {
        // Live-nonempty levels. A level fully drained this slot has live 0
        // but snapshot > 0 — its remaining availability is also 0 (sends
        // are what drained it), so skipping it is exact. A level that only
        // received this slot reports snapshot length 0 and is filtered by
        // the caller.
        let pair = node.index() * self.dests.len() + dest_idx;
        for w in 0..self.words_per_pair {
            let mut bits = self.level_bits[pair * self.words_per_pair + w];
            if w == 0 {
                bits &= !1; // level 0 is never a backpressure sender
            }
            while bits != 0 {
                let m = w * 64 + bits.trailing_zeros() as usize;
                out.push(m);
                bits &= bits - 1;
            }
        }
    }
}

/// Immutable view of queue lengths taken at a point in time.
#[derive(Debug, Clone)]
pub struct QueueSnapshot {
    n_dests: usize,
    n_levels: usize,
    pub lengths: Vec<u32>,
}

impl QueueSnapshot {
    #[inline]
    pub fn get(&self, node: NodeId, dest_idx: usize, m: usize) -> u32 {
        self.lengths[(node.index() * self.n_dests + dest_idx) * self.n_levels + m]
    }

    /// Slice of all level lengths at `(node, dest)`, contiguous in `m`.
    #[inline]
    pub fn levels(&self, node: NodeId, dest_idx: usize) -> &[u32] {
        let start = (node.index() * self.n_dests + dest_idx) * self.n_levels;
        &self.lengths[start..start + self.n_levels]
    }
}

impl SnapshotView for QueueSnapshot {
    #[inline]
    fn snap_len(&self, node: NodeId, dest_idx: usize, m: usize) -> u32 {
        self.get(node, dest_idx, m)
    }

    fn sender_levels(&self, node: NodeId, dest_idx: usize, out: &mut Vec<usize>) {
        for (m, &len) in self.levels(node, dest_idx).iter().enumerate().skip(1) {
            if len > 0 {
                out.push(m);
            }
        }
    }
}
