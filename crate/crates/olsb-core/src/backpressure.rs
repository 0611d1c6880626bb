//! Budget-feasible backpressure forwarding.
//!
//! A packet in the level-`m` queue at node `v` may move across link
//! `(v, v')` into the level-`m'` queue at `v'` only when the receiving
//! budget fits what remains of the sending budget after paying the link's
//! realized weight:
//!
//! ```text
//! pressure(v,d,m -> v',d,m') = Q_v(d,m) - Q_v'(d,m')   if C_m' <= max(C_m - w, 0)
//!                              -inf                     otherwise
//! ```
//!
//! A link's pressure is the maximum over `(d, m, m')`, clamped at zero,
//! and each node transmits on its maximum-pressure outgoing link. Queue
//! lengths are read through a [`SnapshotView`] so every decision in a slot
//! sees the same slot-start state; `SentCounts` subtracts what the node
//! already sent this slot. Maximizations break ties deterministically:
//! first (lowest) destination and sender level, and the highest feasible
//! receiver level, so a moved packet keeps the loosest budget.

use crate::queueing::{CostLevels, SnapshotView};
use crate::topology::{Graph, LinkId, NodeId};

/// Backpressure between two neighbor queues: the queue differential when
/// the budget condition `C_m' <= max(C_m - w, 0)` holds, else `-inf`.
#[inline]
pub fn queue_pressure(q_v: f64, q_vp: f64, c_m: f64, c_mp: f64, w: f64) -> f64 {
    if c_mp <= (c_m - w).max(0.0) {
        q_v - q_vp
    } else {
        f64::NEG_INFINITY
    }
}

/// A transmission chosen by the scheduler: move the head packet of
/// `(src(link), dest, from_level)` into `(dst(link), dest, to_level)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub link: LinkId,
    pub dest_idx: usize,
    pub from_level: usize,
    pub to_level: usize,
    pub pressure: f64,
}

/// Per-destination reachability masks, used to keep backpressure from
/// pushing a packet onto a node that cannot reach its destination at all.
#[derive(Debug, Clone)]
pub struct Reachability {
    /// `reach[dest_idx][node] == true` iff `dest` is reachable from `node`.
    reach: Vec<Vec<bool>>,
}

impl Reachability {
    pub fn new(g: &Graph, dests: &[NodeId]) -> Self {
        let reach = dests
            .iter()
            .map(|&d| {
                g.hop_distances_to(d)
                    .into_iter()
                    .map(|dist| dist != usize::MAX)
                    .collect()
            })
            .collect();
        Reachability { reach }
    }

    #[inline]
    pub fn ok(&self, dest_idx: usize, node: NodeId) -> bool {
        self.reach[dest_idx][node.index()]
    }
}

/// Sender-side send bookkeeping within one slot: effective availability is
/// the slot-start length minus what the node already sent this slot.
#[derive(Debug, Default)]
pub struct SentCounts {
    entries: Vec<(usize, u32)>,
}

impl SentCounts {
    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn sent(&self, bank_idx: usize) -> u32 {
        self.entries
            .iter()
            .find(|(i, _)| *i == bank_idx)
            .map_or(0, |(_, c)| *c)
    }

    pub fn record(&mut self, bank_idx: usize) {
        if let Some(e) = self.entries.iter_mut().find(|(i, _)| *i == bank_idx) {
            e.1 += 1;
        } else {
            self.entries.push((bank_idx, 1));
        }
    }
}

/// Reusable scratch space for decision evaluation.
#[derive(Debug, Default)]
pub struct DecisionScratch {
    levels: Vec<usize>,
}

/// Evaluates one link's backpressure: the maximum of [`queue_pressure`]
/// over destinations and level pairs, clamped at zero. Returns the argmax
/// `(dest_idx, m, m')` for positive pressure, with deterministic
/// tie-breaking (lowest `d`, lowest `m`, highest feasible `m'` among the
/// emptiest receiver levels).
///
/// `w_norm` is the link's realized weight on the same scale as the level
/// budgets (normalized by node count). Level-0 sender queues are excluded:
/// their packets move by pinned shortest-path forwarding.
#[allow(clippy::too_many_arguments)]
pub fn link_pressure<V: SnapshotView>(
    g: &Graph,
    link: LinkId,
    view: &V,
    sent: &SentCounts,
    bank_index: impl Fn(NodeId, usize, usize) -> usize,
    levels: &CostLevels,
    w_norm: f64,
    n_dests: usize,
    scratch: &mut DecisionScratch,
) -> (f64, Option<(usize, usize, usize)>) {
    let v = g.link(link).src;
    let vp = g.link(link).dst;
    let mut best = f64::NEG_INFINITY;
    let mut best_triple = None;

    for d in 0..n_dests {
        scratch.levels.clear();
        view.sender_levels(v, d, &mut scratch.levels);
        for &m in &scratch.levels {
            let avail = view
                .snap_len(v, d, m)
                .saturating_sub(sent.sent(bank_index(v, d, m)));
            if avail == 0 {
                continue;
            }
            let budget = (levels.budget(m) - w_norm).max(0.0);
            let Some((mp, q_recv)) = best_receiver_level(view, vp, d, levels, budget) else {
                continue;
            };
            let p = avail as f64 - q_recv as f64;
            if p > best {
                best = p;
                best_triple = Some((d, m, mp));
            }
        }
    }
    if best <= 0.0 {
        (0.0, None)
    } else {
        (best, best_triple)
    }
}

/// Emptiest receiver level with budget at most `budget`; ties resolve to
/// the highest feasible level so the packet keeps the loosest budget.
/// `None` when no level fits (cannot happen for `budget >= 0` since
/// `C_0 = 0`).
fn best_receiver_level<V: SnapshotView>(
    view: &V,
    vp: NodeId,
    d: usize,
    levels: &CostLevels,
    budget: f64,
) -> Option<(usize, u32)> {
    let mut cand: Option<(usize, u32)> = None;
    for mp in 0..levels.n_levels() {
        if levels.budget(mp) > budget {
            break;
        }
        let q = view.snap_len(vp, d, mp);
        match cand {
            Some((_, q_min)) if q > q_min => {}
            _ => cand = Some((mp, q)),
        }
    }
    cand
}

/// Picks the best transmission for node `v` this slot: evaluate every
/// outgoing link's pressure and take the argmax (first link on ties; links
/// are ordered by destination id). Returns `None` when every link's
/// pressure is zero.
///
/// Unlike [`link_pressure`], this applies the slot loop's routing guards:
/// a non-delivery move must keep the destination reachable, and a delivery
/// hop (receiver == destination) is always admissible with receiver
/// backlog 0.
#[allow(clippy::too_many_arguments)]
pub fn best_node_decision<V: SnapshotView>(
    g: &Graph,
    v: NodeId,
    view: &V,
    sent: &SentCounts,
    bank_index: impl Fn(NodeId, usize, usize) -> usize + Copy,
    levels: &CostLevels,
    w_norm_of: impl Fn(LinkId) -> f64,
    reach: &Reachability,
    dests: &[NodeId],
    scratch: &mut DecisionScratch,
) -> Option<Decision> {
    let mut best: Option<Decision> = None;
    for &lid in g.out_links(v) {
        let vp = g.link(lid).dst;
        let w_norm = w_norm_of(lid);
        for (d, &dest_node) in dests.iter().enumerate() {
            let delivery = vp == dest_node;
            if !delivery && !reach.ok(d, vp) {
                continue;
            }
            scratch.levels.clear();
            view.sender_levels(v, d, &mut scratch.levels);
            for &m in &scratch.levels {
                let avail = view
                    .snap_len(v, d, m)
                    .saturating_sub(sent.sent(bank_index(v, d, m)));
                if avail == 0 {
                    continue;
                }
                let budget = (levels.budget(m) - w_norm).max(0.0);
                let (mp, q_recv) = if delivery {
                    // The destination holds no queues; the packet is
                    // handed to the application, bookkept as level 0.
                    (0usize, 0u32)
                } else {
                    match best_receiver_level(view, vp, d, levels, budget) {
                        Some(c) => c,
                        None => continue,
                    }
                };
                let p = avail as f64 - q_recv as f64;
                // Ties across links resolve toward the move that keeps
                // the most budget (highest receiver level), then toward
                // the earlier link.
                let better = p > 0.0
                    && best.map_or(true, |b| {
                        p > b.pressure || (p == b.pressure && mp > b.to_level)
                    });
                if better {
                    best = Some(Decision {
                        link: lid,
                        dest_idx: d,
                        from_level: m,
                        to_level: mp,
                        pressure: p,
                    });
                }
            }
        }
    }
    best
}
