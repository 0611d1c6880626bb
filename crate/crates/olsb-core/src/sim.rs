//! The time-slotted simulation loop binding topology, link model, learner,
//! queueing and backpressure together, plus the baseline routers.
//!
//! One run is strictly single-threaded and fully determined by its
//! [`SimConfig`]; the sweep layer parallelizes across runs.
//!
//! Slot structure (learning algorithms):
//!
//! 1. sample link weights; snapshot each flow's source queue levels,
//! 2. Poisson arrivals; for flows with arrivals, select a path, account
//!    regret against the genie on the same snapshot, and inject the
//!    arrivals into the queue the decision-time estimate maps to,
//! 3. move packets: pinned/level-0 forwarding first, then backpressure,
//!    both against the post-injection snapshot, nodes in ascending order,
//! 4. deliveries are logged; path-cost observations reach the learner at
//!    the end of the slot (`instant`) or after the path's hop count
//!    (`per_hop`).
//!
//! Cost observations come from the selection channel: selecting path `p`
//! at slot `t` yields one unbiased sample of `p`'s realized cost under
//! that slot's weights, acknowledged back to the source. Delivered-packet
//! traces never feed the estimates — a backpressured hop is taken only
//! when its realized weight fits the budget, so trace costs are biased
//! low, and the traveled path rarely coincides with the selected one.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backpressure::{best_node_decision, DecisionScratch, Reachability, SentCounts};
use crate::config::{AckMode, Algorithm, SimConfig};
use crate::error::{Error, Result};
use crate::link_model::{path_cost, path_mean, SlotWeights, WeightModel};
use crate::qucb::{aspr_select, balanced_index, genie_select, ucb1_select, FlowLearner};
use crate::queueing::{CostLevels, Packet, PinnedRoute, QueueBank, SnapshotView};
use crate::rng::{self, Stream};
use crate::sha1;
use crate::spanner::{build_spanner, SpannerSet};
use crate::topology::{enumerate_paths, Graph, LinkId, NodeId, Path};

/// Wall-clock duration of one slot, for delay reporting.
pub const SLOT_DURATION_US: f64 = 20.0;

/// Numerical slack for the realized-cost compliance audit.
const COMPLIANCE_TOL: f64 = 1e-9;

/// Poisson arrival count for one flow at one slot; pure in
/// `(seed, flow, t)`.
pub fn arrivals(seed: u64, flow: usize, t: u64, rate: f64) -> u32 {
    rng::poisson(seed, Stream::Arrivals, flow as u64, t, rate)
}

// ---------------------------------------------------------------------------
// Run artifacts
// ---------------------------------------------------------------------------

/// Everything a run emits: manifest, sampled metrics, and summary.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub manifest: Manifest,
    pub metrics: Vec<MetricsRow>,
    pub summary: Summary,
    /// Rendered per-decision log (`slot,flow,chosen_path,indexes`), only
    /// when the config enables it.
    pub decision_log: Option<String>,
}

/// Reproducibility record: the resolved config plus derived facts worth
/// auditing (spanner composition, topology content hash).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SimConfig,
    /// Git-style blob id of the topology document's canonical JSON.
    pub topology_hash: String,
    pub spanners: Vec<SpannerInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpannerInfo {
    pub flow: usize,
    pub enumerated_paths: usize,
    pub l: usize,
    pub coefficient_bound: f64,
    /// Enumeration ids of the base paths, ascending.
    pub path_ids: Vec<usize>,
    /// Node sequences of the base paths, for audit.
    pub node_sequences: Vec<Vec<u32>>,
}

/// One sampled metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub slot: u64,
    pub regret_inc: f64,
    pub regret_cum: f64,
    /// `regret_cum / ln(slot)`; undefined at slot 1.
    pub regret_over_ln_t: Option<f64>,
    /// Mean queued packets per node at this slot.
    pub avg_queue_len: f64,
    /// Cumulative deliveries.
    pub deliveries: u64,
    /// Cumulative mean end-to-end delay in microseconds.
    pub avg_delay_us: Option<f64>,
    /// Chosen path id per flow this slot (`-` when the flow made no
    /// decision), semicolon-joined.
    pub chosen_path: String,
    pub genie_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSummary {
    pub flow: usize,
    pub l: usize,
    /// Cumulative regret attributed to this flow.
    pub regret: f64,
    /// True mean cost per spanner path, ascending path id.
    pub mu: Vec<f64>,
    /// Final cost estimates, aligned with `mu`.
    pub mean_estimates: Vec<f64>,
    /// Final observation counts, aligned with `mu`.
    pub t_counts: Vec<u64>,
    /// Empirical mean source queue length at each spanner path's mean
    /// level, measured over the second half of the run.
    pub eta: Vec<f64>,
    /// Level the flow's cheapest spanner path maps to.
    pub shortest_level: usize,
    /// Time-average length of the source queue at `shortest_level`.
    pub shortest_level_queue_avg: f64,
    /// Concentration audit `|estimate - mu| <= sqrt(2 ln t / count)` per
    /// spanner path over sampled slots: satisfied count and total checks,
    /// aligned with `mu`.
    pub concentration_ok: Vec<u64>,
    pub concentration_total: Vec<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Counters {
    pub injected: u64,
    pub delivered: u64,
    pub in_system: u64,
    /// Packets injected directly into level 0.
    pub level0_injections: u64,
    /// Packets demoted to level 0 mid-route by the budget clamp.
    pub level0_demotions: u64,
    pub compliance_checked: u64,
    pub compliance_violations: u64,
    pub conservation_violations: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub point: String,
    pub algorithm: Algorithm,
    pub k: f64,
    pub lambda: f64,
    pub seed: u64,
    pub slots: u64,
    /// Mean end-to-end delay over delivered packets in microseconds;
    /// `None` when nothing was delivered.
    pub avg_delay_us: Option<f64>,
    /// Time-average of the per-node mean queue length over sampled slots.
    pub avg_queue_len: f64,
    /// Mean realized (normalized) cost over delivered packets.
    pub avg_realized_cost: Option<f64>,
    pub regret_total: f64,
    pub counters: Counters,
    pub flows: Vec<FlowSummary>,
}

// ---------------------------------------------------------------------------
// Static per-flow context
// ---------------------------------------------------------------------------

struct FlowCtx {
    src: NodeId,
    dest_idx: usize,
    rate: f64,
    /// All enumerated paths (ids are positions).
    paths: Vec<Path>,
    /// Spanner path ids, ascending (aligned with the learner's stats).
    spanner_ids: Vec<usize>,
    /// True mean cost per spanner path, aligned with `spanner_ids`.
    mu: Vec<f64>,
    /// Hop count per spanner path, aligned with `spanner_ids`.
    hops: Vec<usize>,
    /// Link routes per spanner path, aligned with `spanner_ids`.
    routes: Vec<Arc<Vec<LinkId>>>,
    /// Genie comparison set: `(path_id, mu)` ascending by id.
    genie_set: Vec<(usize, f64)>,
    /// Level of the cheapest spanner path's true mean.
    shortest_level: usize,
}

struct Setup {
    graph: Graph,
    levels: CostLevels,
    model: WeightModel,
    flows: Vec<FlowCtx>,
    dests: Vec<NodeId>,
    reach: Reachability,
    /// Min-hop distance table per dest, for demoted-packet forwarding.
    dist_to_dest: Vec<Vec<usize>>,
    manifest: Manifest,
}

fn setup(config: &SimConfig) -> Result<Setup> {
    let graph = config.graph()?;
    let levels = config.levels()?;
    let model = WeightModel::new(config.link_dists.clone(), config.seed)?;
    if model.n_links() != graph.n_links() {
        return Err(Error::config(
            "link_dists",
            format!("expected {} entries, got {}", graph.n_links(), model.n_links()),
        ));
    }

    let mut dests: Vec<NodeId> = Vec::new();
    for f in &config.flows {
        let d = graph
            .node_at(f.dst.0, f.dst.1)
            .ok_or_else(|| Error::config("flows", "destination not in topology"))?;
        if !dests.contains(&d) {
            dests.push(d);
        }
    }
    dests.sort();

    let n = graph.n_nodes();
    let mut flows = Vec::with_capacity(config.flows.len());
    let mut spanner_infos = Vec::new();
    for (fi, fs) in config.flows.iter().enumerate() {
        let src = graph.node_at(fs.src.0, fs.src.1).unwrap();
        let dst = graph.node_at(fs.dst.0, fs.dst.1).unwrap();
        let dist = graph.hop_distances_to(dst);
        if dist[src.index()] == usize::MAX {
            return Err(Error::NoPath { flow: fi });
        }
        let max_hops = config.max_hops.unwrap_or(dist[src.index()] + 4);
        let paths = enumerate_paths(&graph, src, dst, max_hops, Some(config.max_paths));
        if paths.is_empty() {
            return Err(Error::NoPath { flow: fi });
        }
        let spanner: SpannerSet = build_spanner(&paths, graph.n_links(), config.spanner_c);
        let mut spanner_ids = spanner.path_ids();
        spanner_ids.sort_unstable();
        let mu: Vec<f64> = spanner_ids
            .iter()
            .map(|&id| path_mean(&paths[id], &model, n))
            .collect();
        let hops: Vec<usize> = spanner_ids.iter().map(|&id| paths[id].hops()).collect();
        let routes: Vec<Arc<Vec<LinkId>>> = spanner_ids
            .iter()
            .map(|&id| Arc::new(paths[id].links.clone()))
            .collect();
        let genie_set: Vec<(usize, f64)> = if config.genie_full_path_set {
            paths.iter().map(|p| (p.id, path_mean(p, &model, n))).collect()
        } else {
            spanner_ids.iter().copied().zip(mu.iter().copied()).collect()
        };
        let cheapest_mu = mu.iter().copied().fold(f64::INFINITY, f64::min);
        spanner_infos.push(SpannerInfo {
            flow: fi,
            enumerated_paths: paths.len(),
            l: spanner.len(),
            coefficient_bound: spanner.coefficient_bound,
            path_ids: spanner_ids.clone(),
            node_sequences: spanner_ids
                .iter()
                .map(|&id| paths[id].nodes.iter().map(|n| n.0).collect())
                .collect(),
        });
        flows.push(FlowCtx {
            src,
            dest_idx: dests.iter().position(|&d| d == dst).unwrap(),
            rate: fs.rate.unwrap_or(config.lambda),
            paths,
            spanner_ids,
            mu,
            hops,
            routes,
            genie_set,
            shortest_level: levels.level_of(cheapest_mu),
        });
    }

    let reach = Reachability::new(&graph, &dests);
    let dist_to_dest = dests.iter().map(|&d| graph.hop_distances_to(d)).collect();

    let topo_json = serde_json::to_string_pretty(&config.topology)?;
    let manifest = Manifest {
        config: config.clone(),
        topology_hash: sha1::git_blob_oid(topo_json.as_bytes()),
        spanners: spanner_infos,
    };

    Ok(Setup {
        graph,
        levels,
        model,
        flows,
        dests,
        reach,
        dist_to_dest,
        manifest,
    })
}

// ---------------------------------------------------------------------------
// Metric accumulation shared by all algorithms
// ---------------------------------------------------------------------------

struct Meter {
    stride: u64,
    slots: u64,
    n_nodes: usize,
    regret_cum: f64,
    delivered: u64,
    delay_slot_sum: u64,
    realized_cost_sum: f64,
    queue_len_rows_sum: f64,
    rows: Vec<MetricsRow>,
}

impl Meter {
    fn new(stride: u64, slots: u64, n_nodes: usize) -> Self {
        Meter {
            stride,
            slots,
            n_nodes,
            regret_cum: 0.0,
            delivered: 0,
            delay_slot_sum: 0,
            realized_cost_sum: 0.0,
            queue_len_rows_sum: 0.0,
            rows: Vec::new(),
        }
    }

    fn deliver(&mut self, delay_slots: u64, realized_cost: f64) {
        self.delivered += 1;
        self.delay_slot_sum += delay_slots;
        self.realized_cost_sum += realized_cost;
    }

    fn sampled(&self, t: u64) -> bool {
        t % self.stride == 0 || t == self.slots
    }

    fn avg_delay_us(&self) -> Option<f64> {
        (self.delivered > 0)
            .then(|| self.delay_slot_sum as f64 / self.delivered as f64 * SLOT_DURATION_US)
    }

    fn avg_realized_cost(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.realized_cost_sum / self.delivered as f64)
    }

    fn emit(&mut self, t: u64, slot_inc: f64, total_queued: u64, chosen: String, genie: String) {
        let avg_q = total_queued as f64 / self.n_nodes as f64;
        self.queue_len_rows_sum += avg_q;
        self.rows.push(MetricsRow {
            slot: t,
            regret_inc: slot_inc,
            regret_cum: self.regret_cum,
            regret_over_ln_t: (t > 1).then(|| self.regret_cum / (t as f64).ln()),
            avg_queue_len: avg_q,
            deliveries: self.delivered,
            avg_delay_us: self.avg_delay_us(),
            chosen_path: chosen,
            genie_path: genie,
        });
    }

    fn avg_queue_len(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.queue_len_rows_sum / self.rows.len() as f64
        }
    }
}

fn join_cells(cells: &[Option<(usize, usize)>], pick: impl Fn(&(usize, usize)) -> usize) -> String {
    let mut out = String::new();
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        match c {
            Some(pair) => out.push_str(&pick(pair).to_string()),
            None => out.push('-'),
        }
    }
    out
}

/// Scheduled estimate update, applied at the end of its due slot.
struct PendingUpdate {
    flow: usize,
    path_id: usize,
    cost: f64,
    subpath_costs: Vec<f64>,
}

fn probe_initialize(setup: &Setup, learners: &mut [FlowLearner]) -> Result<()> {
    // Initialization probes: one packet through every spanner path at
    // t = 0, all observing the same slot-0 weights. Probes do not touch
    // queue or delay accounting.
    let w0 = setup.model.sample_slot(0);
    let n = setup.graph.n_nodes();
    for (fc, learner) in setup.flows.iter().zip(learners.iter_mut()) {
        let obs: Vec<f64> = fc
            .spanner_ids
            .iter()
            .map(|&id| path_cost(&fc.paths[id], &w0, n))
            .collect();
        learner.initialize(&obs)?;
    }
    Ok(())
}

/// Costs of the path's proper suffixes under this slot's weights,
/// outermost suffix first — the observations intermediate nodes keep.
fn suffix_costs(path: &Path, weights: &SlotWeights, n_nodes: usize) -> Vec<f64> {
    let h = path.links.len();
    let mut acc = 0.0;
    let mut tail = vec![0.0; h];
    for i in (0..h).rev() {
        acc += weights.get(path.links[i]);
        tail[i] = acc;
    }
    (1..h).map(|i| tail[i] / n_nodes as f64).collect()
}

/// Next hop for a level-0 packet at `v`: its pinned route when it has one,
/// otherwise the deterministic min-hop step toward the destination.
fn next_hop_level0(pkt: &Packet, g: &Graph, dist: &[usize], v: NodeId) -> LinkId {
    if let Some(route) = &pkt.pinned {
        let lid = route.links[route.pos];
        debug_assert_eq!(g.link(lid).src, v);
        return lid;
    }
    *g.out_links(v)
        .iter()
        .find(|lid| {
            let to = g.link(**lid).dst;
            dist[to.index()] != usize::MAX && dist[to.index()] + 1 == dist[v.index()]
        })
        .expect("level-0 packet at a node with no route to its destination")
}

/// Executes one run. Fully deterministic in the config.
pub fn run(config: &SimConfig) -> Result<RunArtifact> {
    let setup = setup(config)?;
    match config.algorithm {
        Algorithm::Olsb => run_olsb(config, setup),
        Algorithm::Backpressure => run_backpressure(config, setup),
        Algorithm::Aspr | Algorithm::Ucb1 => run_pinned(config, setup),
    }
}

// ---------------------------------------------------------------------------
// OLSB
// ---------------------------------------------------------------------------

fn run_olsb(config: &SimConfig, setup: Setup) -> Result<RunArtifact> {
    let g = &setup.graph;
    let levels = &setup.levels;
    let n_nodes = g.n_nodes();
    let n_levels = levels.n_levels();
    let norm = n_nodes as f64;
    let nf = setup.flows.len();

    let mut learners: Vec<FlowLearner> = setup
        .flows
        .iter()
        .map(|fc| FlowLearner::new(config.k, &fc.spanner_ids, &fc.hops))
        .collect::<Result<_>>()?;
    probe_initialize(&setup, &mut learners)?;

    let mut bank = QueueBank::new(n_nodes, setup.dests.clone(), n_levels);
    let mut sent = SentCounts::default();
    let mut scratch = DecisionScratch::default();

    let mut meter = Meter::new(config.stride, config.slots, n_nodes);
    let mut counters = Counters::default();
    let mut flow_regret = vec![0.0; nf];
    let mut eta_sums: Vec<Vec<u64>> = vec![vec![0; n_levels]; nf];
    let mut eta_slots: u64 = 0;
    let mut slq_sums = vec![0u64; nf];
    let mut conc_ok: Vec<Vec<u64>> = setup
        .flows
        .iter()
        .map(|fc| vec![0; fc.spanner_ids.len()])
        .collect();
    let mut conc_total: Vec<Vec<u64>> = conc_ok.clone();
    let mut qsrc: Vec<Vec<u32>> = vec![vec![0; n_levels]; nf];
    let mut chosen: Vec<Option<(usize, usize)>> = vec![None; nf];
    let mut pending: BTreeMap<u64, Vec<PendingUpdate>> = BTreeMap::new();
    let mut uid: u64 = 0;
    let half = config.slots / 2;
    let mut decision_log = config
        .decision_log
        .then(|| String::from("slot,flow,chosen_path,indexes\n"));

    for t in 1..=config.slots {
        let w = setup.model.sample_slot(t);

        // Pre-injection source snapshots: the queue states both QUCB and
        // the genie are evaluated on this slot.
        for (f, fc) in setup.flows.iter().enumerate() {
            qsrc[f].copy_from_slice(bank.level_lengths(fc.src, fc.dest_idx));
            slq_sums[f] += qsrc[f][fc.shortest_level] as u64;
        }
        if t > half {
            eta_slots += 1;
            for f in 0..nf {
                for m in 0..n_levels {
                    eta_sums[f][m] += qsrc[f][m] as u64;
                }
            }
        }

        let mut slot_inc = 0.0;
        for (f, fc) in setup.flows.iter().enumerate() {
            chosen[f] = None;
            let a = arrivals(config.seed, f, t, fc.rate);
            if a == 0 {
                continue;
            }
            let (pid, _) = learners[f].qucb_select(t, levels, &qsrc[f]);
            if let Some(log) = decision_log.as_mut() {
                let indexes = learners[f]
                    .qucb_indexes(t, levels, &qsrc[f])
                    .iter()
                    .map(|(id, v)| format!("{id}:{v:.6}"))
                    .collect::<Vec<_>>()
                    .join(";");
                log.push_str(&format!("{t},{f},{pid},{indexes}\n"));
            }
            let slot_idx = learners[f].slot_of_path(pid).expect("selected path is tracked");
            let estimate = learners[f].stats()[slot_idx].mean;
            let realized = path_cost(&fc.paths[pid], &w, n_nodes);
            let (gpid, gval) = genie_select(config.k, &fc.genie_set, levels, &qsrc[f]);
            let inc = balanced_index(config.k, realized, levels, &qsrc[f]) - gval;
            slot_inc += inc;
            flow_regret[f] += inc;
            chosen[f] = Some((pid, gpid));

            // Injection level from the decision-time estimate; level-0
            // packets are pinned to the currently estimated-cheapest path.
            let m_inj = levels.level_of(estimate);
            let pinned_route = if m_inj == 0 {
                let best = learners[f]
                    .stats()
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.mean.partial_cmp(&b.1.mean).expect("finite means"))
                    .map(|(i, _)| i)
                    .expect("non-empty spanner");
                Some(fc.routes[best].clone())
            } else {
                None
            };
            for _ in 0..a {
                uid += 1;
                counters.injected += 1;
                if m_inj == 0 {
                    counters.level0_injections += 1;
                }
                let pkt = Packet {
                    uid,
                    flow: f as u16,
                    level: m_inj as u8,
                    injected_level: m_inj as u8,
                    injected_slot: t,
                    current_node: fc.src,
                    trace: Vec::new(),
                    pinned: pinned_route
                        .clone()
                        .map(|links| PinnedRoute { links, pos: 0 }),
                    demoted_to_level0: false,
                };
                bank.enqueue(fc.src, fc.dest_idx, m_inj, pkt)?;
            }

            // Selection-channel observation, acknowledged per ack mode.
            let due = match config.ack_mode {
                AckMode::Instant => t,
                AckMode::PerHop => t + fc.paths[pid].hops() as u64,
            };
            pending.entry(due).or_default().push(PendingUpdate {
                flow: f,
                path_id: pid,
                cost: realized,
                subpath_costs: suffix_costs(&fc.paths[pid], &w, n_nodes),
            });
        }

        // Movement phase against the post-injection snapshot.
        bank.begin_movement_epoch();
        for v_i in 0..n_nodes {
            let v = NodeId(v_i as u32);
            if bank.node_len(v) == 0 {
                continue;
            }
            sent.clear();
            let mut cap_left = config.cap;

            // Level-0 pinned forwarding has priority for the node's
            // transmit capacity.
            'level0: for d in 0..setup.dests.len() {
                let idx0 = bank.slot_index(v, d, 0);
                let mut avail = bank.snap_len(v, d, 0);
                while avail > 0 {
                    if cap_left == 0 {
                        break 'level0;
                    }
                    let mut pkt = bank
                        .dequeue_head(v, d, 0)
                        .expect("snapshot promised a level-0 packet");
                    let lid = next_hop_level0(&pkt, g, &setup.dist_to_dest[d], v);
                    pkt.trace.push((lid, w.get(lid)));
                    if let Some(route) = pkt.pinned.as_mut() {
                        route.pos += 1;
                    }
                    let to = g.link(lid).dst;
                    sent.record(idx0);
                    cap_left -= 1;
                    avail -= 1;
                    if to == setup.dests[d] {
                        deliver(&mut meter, &mut counters, levels, &pkt, t, norm);
                    } else {
                        bank.enqueue(to, d, 0, pkt)?;
                    }
                }
            }

            // Backpressure for the remaining capacity.
            while cap_left > 0 {
                let dec = best_node_decision(
                    g,
                    v,
                    &bank,
                    &sent,
                    |n, d, m| bank.slot_index(n, d, m),
                    levels,
                    |lid| w.get(lid) / norm,
                    &setup.reach,
                    &setup.dests,
                    &mut scratch,
                );
                let Some(dec) = dec else { break };
                let mut pkt = bank
                    .dequeue_head(v, dec.dest_idx, dec.from_level)
                    .expect("positive pressure implies a queued packet");
                pkt.trace.push((dec.link, w.get(dec.link)));
                let to = g.link(dec.link).dst;
                sent.record(bank.slot_index(v, dec.dest_idx, dec.from_level));
                cap_left -= 1;
                if to == setup.dests[dec.dest_idx] {
                    // The budget rule's clamp admits a final hop whose
                    // weight exceeds the remaining budget; such a packet
                    // left the budget regime and is exempt from the
                    // compliance audit.
                    if w.get(dec.link) / norm > levels.budget(dec.from_level) {
                        pkt.demoted_to_level0 = true;
                    }
                    deliver(&mut meter, &mut counters, levels, &pkt, t, norm);
                } else {
                    if dec.to_level == 0 {
                        // Budget exhausted: the packet continues in
                        // shortest-path mode from the receiving node.
                        pkt.demoted_to_level0 = true;
                        pkt.pinned = None;
                        counters.level0_demotions += 1;
                    }
                    bank.enqueue(to, dec.dest_idx, dec.to_level, pkt)?;
                }
            }
        }

        // End-of-slot estimate updates (instant acks from this slot plus
        // per-hop acks that are due).
        while let Some(entry) = pending.first_entry() {
            if *entry.key() > t {
                break;
            }
            for u in entry.remove() {
                learners[u.flow].record_delivery(u.path_id, u.cost, &u.subpath_costs, t)?;
            }
        }

        let in_system = bank.total_len();
        if counters.injected != in_system + counters.delivered {
            counters.conservation_violations += 1;
            debug_assert!(
                false,
                "conservation violated at slot {t}: {} != {} + {}",
                counters.injected, in_system, counters.delivered
            );
        }

        meter.regret_cum += slot_inc;
        if meter.sampled(t) {
            let ln_t = (t as f64).ln();
            for (f, fc) in setup.flows.iter().enumerate() {
                for (i, s) in learners[f].stats().iter().enumerate() {
                    conc_total[f][i] += 1;
                    let bound = (2.0 * ln_t / s.count as f64).sqrt();
                    if (s.mean - fc.mu[i]).abs() <= bound {
                        conc_ok[f][i] += 1;
                    }
                }
            }
            meter.emit(
                t,
                slot_inc,
                in_system,
                join_cells(&chosen, |c| c.0),
                join_cells(&chosen, |c| c.1),
            );
        }
    }

    counters.in_system = bank.total_len();
    let flows_summary: Vec<FlowSummary> = setup
        .flows
        .iter()
        .enumerate()
        .map(|(f, fc)| FlowSummary {
            flow: f,
            l: fc.spanner_ids.len(),
            regret: flow_regret[f],
            mu: fc.mu.clone(),
            mean_estimates: learners[f].stats().iter().map(|s| s.mean).collect(),
            t_counts: learners[f].stats().iter().map(|s| s.count).collect(),
            eta: fc
                .mu
                .iter()
                .map(|&mu_i| {
                    if eta_slots == 0 {
                        0.0
                    } else {
                        eta_sums[f][levels.level_of(mu_i)] as f64 / eta_slots as f64
                    }
                })
                .collect(),
            shortest_level: fc.shortest_level,
            shortest_level_queue_avg: if config.slots == 0 {
                0.0
            } else {
                slq_sums[f] as f64 / config.slots as f64
            },
            concentration_ok: conc_ok[f].clone(),
            concentration_total: conc_total[f].clone(),
        })
        .collect();

    let summary = Summary {
        point: config.point_name(),
        algorithm: config.algorithm,
        k: config.k,
        lambda: config.lambda,
        seed: config.seed,
        slots: config.slots,
        avg_delay_us: meter.avg_delay_us(),
        avg_queue_len: meter.avg_queue_len(),
        avg_realized_cost: meter.avg_realized_cost(),
        regret_total: meter.regret_cum,
        counters,
        flows: flows_summary,
    };
    Ok(RunArtifact {
        manifest: setup.manifest,
        metrics: meter.rows,
        summary,
        decision_log,
    })
}

fn deliver(
    meter: &mut Meter,
    counters: &mut Counters,
    levels: &CostLevels,
    pkt: &Packet,
    t: u64,
    norm: f64,
) {
    let realized = pkt.trace.iter().map(|(_, w)| w).sum::<f64>() / norm;
    counters.delivered += 1;
    // Realized-cost compliance: packets that stayed in the budget regime
    // (injected at level >= 1, never demoted to level 0) must respect the
    // budget of their injection level.
    if pkt.injected_level >= 1 && !pkt.demoted_to_level0 {
        counters.compliance_checked += 1;
        let budget = levels.budget(pkt.injected_level as usize);
        if realized > budget + COMPLIANCE_TOL {
            counters.compliance_violations += 1;
            debug_assert!(
                false,
                "packet {} realized cost {realized} exceeds budget {budget}",
                pkt.uid
            );
        }
    }
    meter.deliver(t - pkt.injected_slot, realized);
}

// ---------------------------------------------------------------------------
// Baseline: pure backpressure (single queue per node and destination)
// ---------------------------------------------------------------------------

fn run_backpressure(config: &SimConfig, setup: Setup) -> Result<RunArtifact> {
    let g = &setup.graph;
    let n_nodes = g.n_nodes();
    let n_dests = setup.dests.len();
    let nf = setup.flows.len();

    // One queue per (node, destination): a bank with a single level.
    let mut bank = QueueBank::new(n_nodes, setup.dests.clone(), 1);
    let mut sent = SentCounts::default();

    let mut meter = Meter::new(config.stride, config.slots, n_nodes);
    let mut counters = Counters::default();
    let mut uid: u64 = 0;
    let none_cells = vec![None; nf];

    for t in 1..=config.slots {
        let w = setup.model.sample_slot(t);

        for (f, fc) in setup.flows.iter().enumerate() {
            let a = arrivals(config.seed, f, t, fc.rate);
            for _ in 0..a {
                uid += 1;
                counters.injected += 1;
                let pkt = Packet {
                    uid,
                    flow: f as u16,
                    level: 0,
                    injected_level: 0,
                    injected_slot: t,
                    current_node: fc.src,
                    trace: Vec::new(),
                    pinned: None,
                    demoted_to_level0: false,
                };
                bank.enqueue(fc.src, fc.dest_idx, 0, pkt)?;
            }
        }

        bank.begin_movement_epoch();
        for v_i in 0..n_nodes {
            let v = NodeId(v_i as u32);
            if bank.node_len(v) == 0 {
                continue;
            }
            sent.clear();
            for _ in 0..config.cap {
                // Maximize Q_v(d) - Q_v'(d) over outgoing links and
                // destinations; the budget condition is dropped.
                let mut best: Option<(f64, LinkId, usize)> = None;
                for &lid in g.out_links(v) {
                    let to = g.link(lid).dst;
                    for d in 0..n_dests {
                        let delivery = to == setup.dests[d];
                        if !delivery && !setup.reach.ok(d, to) {
                            continue;
                        }
                        let avail = bank
                            .snap_len(v, d, 0)
                            .saturating_sub(sent.sent(bank.slot_index(v, d, 0)));
                        if avail == 0 {
                            continue;
                        }
                        let q_recv = if delivery { 0 } else { bank.snap_len(to, d, 0) };
                        let p = avail as f64 - q_recv as f64;
                        if p > 0.0 && best.map_or(true, |(bp, _, _)| p > bp) {
                            best = Some((p, lid, d));
                        }
                    }
                }
                let Some((_, lid, d)) = best else { break };
                let mut pkt = bank
                    .dequeue_head(v, d, 0)
                    .expect("positive pressure implies a queued packet");
                pkt.trace.push((lid, w.get(lid)));
                let to = g.link(lid).dst;
                sent.record(bank.slot_index(v, d, 0));
                if to == setup.dests[d] {
                    counters.delivered += 1;
                    let realized =
                        pkt.trace.iter().map(|(_, wt)| wt).sum::<f64>() / n_nodes as f64;
                    meter.deliver(t - pkt.injected_slot, realized);
                } else {
                    bank.enqueue(to, d, 0, pkt)?;
                }
            }
        }

        let in_system = bank.total_len();
        if counters.injected != in_system + counters.delivered {
            counters.conservation_violations += 1;
            debug_assert!(false, "conservation violated at slot {t}");
        }
        if meter.sampled(t) {
            meter.emit(
                t,
                0.0,
                in_system,
                join_cells(&none_cells, |c| c.0),
                join_cells(&none_cells, |c| c.1),
            );
        }
    }

    counters.in_system = bank.total_len();
    let summary = baseline_summary(config, &setup, &meter, counters);
    Ok(RunArtifact {
        manifest: setup.manifest,
        metrics: meter.rows,
        summary,
        decision_log: None,
    })
}

// ---------------------------------------------------------------------------
// Baselines: end-to-end pinned routing (adaptive shortest path, UCB1)
// ---------------------------------------------------------------------------

fn run_pinned(config: &SimConfig, setup: Setup) -> Result<RunArtifact> {
    let g = &setup.graph;
    let n_nodes = g.n_nodes();
    let nf = setup.flows.len();

    let mut learners: Vec<FlowLearner> = setup
        .flows
        .iter()
        .map(|fc| FlowLearner::new(config.k, &fc.spanner_ids, &fc.hops))
        .collect::<Result<_>>()?;
    probe_initialize(&setup, &mut learners)?;

    // Single FIFO per node; packets carry their pinned route.
    let mut fifos: Vec<VecDeque<Packet>> = vec![VecDeque::new(); n_nodes];
    let mut fifo_total: u64 = 0;
    let mut snap_lens = vec![0u32; n_nodes];

    let mut meter = Meter::new(config.stride, config.slots, n_nodes);
    let mut counters = Counters::default();
    let mut pending: BTreeMap<u64, Vec<PendingUpdate>> = BTreeMap::new();
    let mut chosen: Vec<Option<(usize, usize)>> = vec![None; nf];
    let mut uid: u64 = 0;

    for t in 1..=config.slots {
        let w = setup.model.sample_slot(t);

        for (f, fc) in setup.flows.iter().enumerate() {
            chosen[f] = None;
            let a = arrivals(config.seed, f, t, fc.rate);
            if a == 0 {
                continue;
            }
            let pid = match config.algorithm {
                Algorithm::Ucb1 => ucb1_select(learners[f].stats(), t),
                Algorithm::Aspr => aspr_select(learners[f].stats(), t, config.aspr_gamma),
                _ => unreachable!("pinned loop only runs aspr/ucb1"),
            };
            let slot_idx = learners[f].slot_of_path(pid).expect("selected path is tracked");
            chosen[f] = Some((pid, pid));
            let route = fc.routes[slot_idx].clone();
            for _ in 0..a {
                uid += 1;
                counters.injected += 1;
                fifos[fc.src.index()].push_back(Packet {
                    uid,
                    flow: f as u16,
                    level: 0,
                    injected_level: 0,
                    injected_slot: t,
                    current_node: fc.src,
                    trace: Vec::new(),
                    pinned: Some(PinnedRoute { links: route.clone(), pos: 0 }),
                    demoted_to_level0: false,
                });
                fifo_total += 1;
            }

            let realized = path_cost(&fc.paths[pid], &w, n_nodes);
            let due = match config.ack_mode {
                AckMode::Instant => t,
                AckMode::PerHop => t + fc.paths[pid].hops() as u64,
            };
            pending.entry(due).or_default().push(PendingUpdate {
                flow: f,
                path_id: pid,
                cost: realized,
                subpath_costs: suffix_costs(&fc.paths[pid], &w, n_nodes),
            });
        }

        // Movement: each node forwards up to `cap` packets that were
        // queued at slot start, in FIFO order, one hop along their routes.
        for (v, len) in snap_lens.iter_mut().enumerate() {
            *len = fifos[v].len().min(u32::MAX as usize) as u32;
        }
        for v in 0..n_nodes {
            let sendable = snap_lens[v].min(config.cap);
            for _ in 0..sendable {
                let mut pkt = fifos[v].pop_front().expect("snapshot promised a packet");
                fifo_total -= 1;
                let route = pkt.pinned.as_mut().expect("pinned packet carries a route");
                let lid = route.links[route.pos];
                route.pos += 1;
                pkt.trace.push((lid, w.get(lid)));
                let to = g.link(lid).dst;
                let dest = setup.dests[setup.flows[pkt.flow as usize].dest_idx];
                if to == dest {
                    counters.delivered += 1;
                    let realized =
                        pkt.trace.iter().map(|(_, wt)| wt).sum::<f64>() / n_nodes as f64;
                    meter.deliver(t - pkt.injected_slot, realized);
                } else {
                    pkt.current_node = to;
                    fifos[to.index()].push_back(pkt);
                    fifo_total += 1;
                }
            }
        }

        while let Some(entry) = pending.first_entry() {
            if *entry.key() > t {
                break;
            }
            for u in entry.remove() {
                learners[u.flow].record_delivery(u.path_id, u.cost, &u.subpath_costs, t)?;
            }
        }

        if counters.injected != fifo_total + counters.delivered {
            counters.conservation_violations += 1;
            debug_assert!(false, "conservation violated at slot {t}");
        }
        if meter.sampled(t) {
            meter.emit(
                t,
                0.0,
                fifo_total,
                join_cells(&chosen, |c| c.0),
                join_cells(&chosen, |c| c.1),
            );
        }
    }

    counters.in_system = fifo_total;
    let mut summary = baseline_summary(config, &setup, &meter, counters);
    for (f, fs) in summary.flows.iter_mut().enumerate() {
        fs.mean_estimates = learners[f].stats().iter().map(|s| s.mean).collect();
        fs.t_counts = learners[f].stats().iter().map(|s| s.count).collect();
    }
    Ok(RunArtifact {
        manifest: setup.manifest,
        metrics: meter.rows,
        summary,
        decision_log: None,
    })
}

fn baseline_summary(config: &SimConfig, setup: &Setup, meter: &Meter, counters: Counters) -> Summary {
    Summary {
        point: config.point_name(),
        algorithm: config.algorithm,
        k: config.k,
        lambda: config.lambda,
        seed: config.seed,
        slots: config.slots,
        avg_delay_us: meter.avg_delay_us(),
        avg_queue_len: meter.avg_queue_len(),
        avg_realized_cost: meter.avg_realized_cost(),
        regret_total: 0.0,
        counters,
        flows: setup
            .flows
            .iter()
            .enumerate()
            .map(|(f, fc)| FlowSummary {
                flow: f,
                l: fc.spanner_ids.len(),
                regret: 0.0,
                mu: fc.mu.clone(),
                mean_estimates: Vec::new(),
                t_counts: Vec::new(),
                eta: Vec::new(),
                shortest_level: fc.shortest_level,
                shortest_level_queue_avg: 0.0,
                concentration_ok: Vec::new(),
                concentration_total: Vec::new(),
            })
            .collect(),
    }
}
