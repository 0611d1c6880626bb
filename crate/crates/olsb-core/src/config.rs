//! Experiment configuration: the JSON document a user writes, validation
//! with field-path diagnostics, and expansion into fully resolved per-run
//! configs.
//!
//! An experiment names sweep axes (`k`, `lambda`, `seeds`, `algorithms`);
//! the cartesian product defines the run points. Each point resolves to a
//! self-contained [`SimConfig`] — inline topology, per-link distributions,
//! explicit level grid — which is what the run manifest records, so any
//! artifact can be re-executed from its manifest alone.

use std::fmt;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link_model::WeightDistribution;
use crate::queueing::CostLevels;
use crate::rng;
use crate::topology::{ExtraLink, Graph, TopologyFile};

pub const SCHEMA_VERSION: u32 = 1;

/// Routing algorithm under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Queue-UCB injection plus budget-constrained backpressure.
    Olsb,
    /// Classic backpressure: one queue per (node, destination), no budgets.
    Backpressure,
    /// Adaptive shortest-path: explore-then-exploit, end-to-end pinned.
    Aspr,
    /// UCB1 on path cost alone, end-to-end pinned.
    Ucb1,
}

impl Algorithm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "olsb" => Some(Algorithm::Olsb),
            "backpressure" => Some(Algorithm::Backpressure),
            "aspr" => Some(Algorithm::Aspr),
            "ucb1" => Some(Algorithm::Ucb1),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algorithm::Olsb => "olsb",
            Algorithm::Backpressure => "backpressure",
            Algorithm::Aspr => "aspr",
            Algorithm::Ucb1 => "ucb1",
        };
        f.write_str(s)
    }
}

/// When cost observations reach the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckMode {
    /// Estimate updated in the same slot as the selection.
    #[default]
    Instant,
    /// Update lands `h` slots later, `h` the selected path's hop count.
    PerHop,
}

impl AckMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "instant" => Some(AckMode::Instant),
            "per_hop" => Some(AckMode::PerHop),
            _ => None,
        }
    }
}

/// Where the topology comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologySource {
    /// Path to a topology JSON document (relative to the config file).
    File { file: String },
    /// Topology inlined in the config.
    Inline { inline: TopologyFile },
    /// Grid with optional directed extra links; `directed` restricts
    /// nearest-neighbor links to point toward higher indices (DAG).
    Grid {
        rows: u16,
        cols: u16,
        #[serde(default)]
        extra_links: Vec<ExtraLink>,
        #[serde(default)]
        directed: bool,
    },
}

/// One traffic flow, endpoints in 1-based grid coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSpec {
    pub src: (u16, u16),
    pub dst: (u16, u16),
    /// Per-flow arrival rate; the experiment-level `lambda` axis overrides
    /// it when present.
    #[serde(default)]
    pub rate: Option<f64>,
}

/// How per-link weight distributions are assigned.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinkModelSpec {
    /// Same distribution on every link.
    Default { default: WeightDistribution },
    /// Explicit distribution per link, in topology link order.
    PerLink { per_link: Vec<WeightDistribution> },
    /// Heterogeneous uniforms: each link gets `uniform(mu - hw, mu + hw)`
    /// with `mu` drawn once from `U[mean_min, mean_max]` under `meta_seed`.
    /// Supports are clipped to `[0, 1]`.
    MetaUniform {
        mean_min: f64,
        mean_max: f64,
        half_width: f64,
        meta_seed: u64,
    },
}

/// Where the cost level grid comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostLevelsSpec {
    /// `m` equal intervals on [0, 1] plus the covering `C_m > 1`.
    Equal { equal: usize },
    /// Explicit `C_0 .. C_M`.
    Explicit { explicit: Vec<f64> },
}

/// The experiment document: base settings plus sweep axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub name: String,
    pub topology: TopologySource,
    pub flows: Vec<FlowSpec>,
    pub links: LinkModelSpec,
    pub cost_levels: CostLevelsSpec,
    /// Sweep axes; the run set is the cartesian product.
    pub k: Vec<f64>,
    pub lambda: Vec<f64>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub slots: u64,
    /// Per-node transmit capacity, packets per slot.
    #[serde(default = "default_cap")]
    pub cap: u32,
    #[serde(default)]
    pub ack_mode: AckMode,
    /// Loop-free enumeration hop bound; default is each flow's min-hop
    /// count plus four.
    #[serde(default)]
    pub max_hops: Option<usize>,
    /// Deterministic shortest-first truncation of the enumerated path set.
    #[serde(default = "default_max_paths")]
    pub max_paths: usize,
    /// Approximation factor for the barycentric spanner.
    #[serde(default = "default_spanner_c")]
    pub spanner_c: f64,
    /// When true the genie in the regret compares over the full enumerated
    /// path set instead of the spanner.
    #[serde(default)]
    pub genie_full_path_set: bool,
    /// Metrics CSV sampling stride in slots.
    #[serde(default = "default_stride")]
    pub stride: u64,
    /// Exploration constant for the adaptive shortest-path baseline.
    #[serde(default = "default_aspr_gamma")]
    pub aspr_gamma: f64,
    /// When true, learning runs also emit a per-decision log
    /// (`decisions.csv`: slot, flow, chosen path, all candidate index
    /// values).
    #[serde(default)]
    pub decision_log: bool,
}

fn default_cap() -> u32 {
    1
}
fn default_max_paths() -> usize {
    200
}
fn default_spanner_c() -> f64 {
    2.0
}
fn default_stride() -> u64 {
    100
}
fn default_aspr_gamma() -> f64 {
    100.0
}

/// A fully resolved single run: everything needed to execute and to
/// reproduce it, with no external references.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub schema_version: u32,
    pub name: String,
    pub topology: TopologyFile,
    pub flows: Vec<FlowSpec>,
    /// One distribution per link, in topology link order.
    pub link_dists: Vec<WeightDistribution>,
    pub cost_levels: Vec<f64>,
    pub k: f64,
    pub lambda: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub slots: u64,
    pub cap: u32,
    pub ack_mode: AckMode,
    pub max_hops: Option<usize>,
    pub max_paths: usize,
    pub spanner_c: f64,
    pub genie_full_path_set: bool,
    pub stride: u64,
    pub aspr_gamma: f64,
    #[serde(default)]
    pub decision_log: bool,
}

impl SimConfig {
    pub fn point_name(&self) -> String {
        format!(
            "{}-{}-k{}-lam{}-seed{}",
            self.name,
            self.algorithm,
            trim_float(self.k),
            trim_float(self.lambda),
            self.seed
        )
    }

    pub fn levels(&self) -> Result<CostLevels> {
        CostLevels::new(self.cost_levels.clone())
    }

    pub fn graph(&self) -> Result<Graph> {
        self.topology.to_graph()
    }
}

fn trim_float(x: f64) -> String {
    format!("{x}").replace('.', "p")
}

impl ExperimentSpec {
    pub fn from_json(json: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(json)?;
        Ok(spec)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut spec = Self::from_json(&json)?;
        // Resolve a relative topology file path against the config's
        // directory so experiments can be launched from anywhere.
        if let TopologySource::File { file } = &spec.topology {
            let p = FsPath::new(file);
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    spec.topology = TopologySource::File {
                        file: dir.join(p).display().to_string(),
                    };
                }
            }
        }
        Ok(spec)
    }

    /// Resolves the topology source; returns the graph plus its canonical
    /// file form.
    pub fn resolve_topology(&self) -> Result<(Graph, TopologyFile)> {
        let file = match &self.topology {
            TopologySource::File { file } => {
                let json = std::fs::read_to_string(file)
                    .map_err(|e| Error::io(file.clone(), e))?;
                serde_json::from_str::<TopologyFile>(&json)?
            }
            TopologySource::Inline { inline } => inline.clone(),
            TopologySource::Grid { rows, cols, extra_links, directed } => {
                let g = if *directed {
                    crate::topology::build_directed_grid(*rows, *cols, extra_links)?
                } else {
                    crate::topology::build_grid_network(*rows, *cols, extra_links)?
                };
                TopologyFile::from_graph(&self.name, &g)?
            }
        };
        let graph = file.to_graph()?;
        Ok((graph, file))
    }

    /// Full validation with field-path diagnostics.
    pub fn validate(&self) -> Result<(Graph, TopologyFile)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let (graph, file) = self.resolve_topology()?;
        if self.flows.is_empty() {
            return Err(Error::config("flows", "at least one flow required"));
        }
        for (i, f) in self.flows.iter().enumerate() {
            if f.src == f.dst {
                return Err(Error::config(format!("flows[{i}]"), "src equals dst"));
            }
            if graph.node_at(f.src.0, f.src.1).is_none() {
                return Err(Error::config(
                    format!("flows[{i}].src"),
                    format!("({}, {}) is not a node", f.src.0, f.src.1),
                ));
            }
            if graph.node_at(f.dst.0, f.dst.1).is_none() {
                return Err(Error::config(
                    format!("flows[{i}].dst"),
                    format!("({}, {}) is not a node", f.dst.0, f.dst.1),
                ));
            }
            if let Some(r) = f.rate {
                if r < 0.0 {
                    return Err(Error::config(format!("flows[{i}].rate"), "negative rate"));
                }
            }
        }
        match &self.links {
            LinkModelSpec::Default { default } => default.validate("links.default")?,
            LinkModelSpec::PerLink { per_link } => {
                if per_link.len() != graph.n_links() {
                    return Err(Error::config(
                        "links.per_link",
                        format!("expected {} entries, got {}", graph.n_links(), per_link.len()),
                    ));
                }
                for (i, d) in per_link.iter().enumerate() {
                    d.validate(&format!("links.per_link[{i}]"))?;
                }
            }
            LinkModelSpec::MetaUniform { mean_min, mean_max, half_width, .. } => {
                if !(0.0..=1.0).contains(mean_min)
                    || !(0.0..=1.0).contains(mean_max)
                    || mean_min > mean_max
                {
                    return Err(Error::config("links.meta_uniform", "mean range outside [0,1]"));
                }
                if *half_width < 0.0 || *half_width > 0.5 {
                    return Err(Error::config(
                        "links.meta_uniform.half_width",
                        "must be in [0, 0.5]",
                    ));
                }
            }
        }
        match &self.cost_levels {
            CostLevelsSpec::Equal { equal } => {
                if *equal < 1 {
                    return Err(Error::config("cost_levels.equal", "need at least 1 level"));
                }
            }
            CostLevelsSpec::Explicit { explicit } => {
                CostLevels::new(explicit.clone())
                    .map_err(|e| Error::config("cost_levels.explicit", e.to_string()))?;
            }
        }
        for (axis, empty) in [
            ("k", self.k.is_empty()),
            ("lambda", self.lambda.is_empty()),
            ("seeds", self.seeds.is_empty()),
            ("algorithms", self.algorithms.is_empty()),
        ] {
            if empty {
                return Err(Error::config(axis, "sweep axis must be non-empty"));
            }
        }
        if self.k.iter().any(|&k| k <= 0.0) {
            return Err(Error::config("k", "K must be positive"));
        }
        if self.lambda.iter().any(|&l| l < 0.0) {
            return Err(Error::config("lambda", "lambda must be nonnegative"));
        }
        if self.cap < 1 {
            return Err(Error::config("cap", "per-node capacity must be >= 1"));
        }
        if self.spanner_c < 1.0 {
            return Err(Error::config("spanner_c", "must be >= 1"));
        }
        if self.stride < 1 {
            return Err(Error::config("stride", "must be >= 1"));
        }
        Ok((graph, file))
    }

    /// Resolved per-link distributions for the given topology.
    pub fn resolve_links(&self, graph: &Graph) -> Vec<WeightDistribution> {
        match &self.links {
            LinkModelSpec::Default { default } => vec![*default; graph.n_links()],
            LinkModelSpec::PerLink { per_link } => per_link.clone(),
            LinkModelSpec::MetaUniform { mean_min, mean_max, half_width, meta_seed } => {
                (0..graph.n_links())
                    .map(|i| {
                        let u = rng::uniform01(*meta_seed, rng::Stream::LinkWeight, i as u64, 0, 1);
                        let mu = mean_min + (mean_max - mean_min) * u;
                        let a = (mu - half_width).max(0.0);
                        let b = (mu + half_width).min(1.0);
                        WeightDistribution::Uniform { a, b }
                    })
                    .collect()
            }
        }
    }

    pub fn resolve_levels(&self) -> Vec<f64> {
        match &self.cost_levels {
            CostLevelsSpec::Equal { equal } => {
                CostLevels::equal_intervals(*equal).values().to_vec()
            }
            CostLevelsSpec::Explicit { explicit } => explicit.clone(),
        }
    }

    /// Expands the sweep product into resolved run configs, in a fixed
    /// (algorithm, k, lambda, seed) order.
    pub fn expand(&self) -> Result<Vec<SimConfig>> {
        let (graph, file) = self.validate()?;
        let link_dists = self.resolve_links(&graph);
        let cost_levels = self.resolve_levels();
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            for &k in &self.k {
                for &lambda in &self.lambda {
                    for &seed in &self.seeds {
                        out.push(SimConfig {
                            schema_version: SCHEMA_VERSION,
                            name: self.name.clone(),
                            topology: file.clone(),
                            flows: self.flows.clone(),
                            link_dists: link_dists.clone(),
                            cost_levels: cost_levels.clone(),
                            k,
                            lambda,
                            seed,
                            algorithm,
                            slots: self.slots,
                            cap: self.cap,
                            ack_mode: self.ack_mode,
                            max_hops: self.max_hops,
                            max_paths: self.max_paths,
                            spanner_c: self.spanner_c,
                            genie_full_path_set: self.genie_full_path_set,
                            stride: self.stride,
                            aspr_gamma: self.aspr_gamma,
                            decision_log: self.decision_log,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// The canonical 64-node experiment network: an 8x8 grid whose
/// nearest-neighbor links point toward higher row/column indices, plus
/// seven long-hop links, for 119 directed links total.
pub fn canonical_topology() -> TopologyFile {
    let extras = canonical_extra_links();
    let g = crate::topology::build_directed_grid(8, 8, &extras).expect("static topology");
    TopologyFile::from_graph("grid8x8-longhop", &g).expect("grid carries coordinates")
}

/// The seven long-hop links layered over the canonical grid. Several
/// flows get a distinctly cheapest corridor through them, and three
/// corridors meet at node (5,3), which saturates under single-path
/// routing at high load.
pub fn canonical_extra_links() -> Vec<ExtraLink> {
    vec![
        ExtraLink { src: (1, 2), dst: (5, 3) },
        ExtraLink { src: (5, 3), dst: (8, 6) },
        ExtraLink { src: (5, 3), dst: (7, 8) },
        ExtraLink { src: (2, 6), dst: (7, 8) },
        ExtraLink { src: (4, 1), dst: (6, 6) },
        ExtraLink { src: (3, 4), dst: (5, 7) },
        ExtraLink { src: (6, 1), dst: (8, 2) },
    ]
}

/// Number of equal cost-level intervals in the canonical grid.
pub const CANONICAL_LEVELS: usize = 336;

/// Canonical per-link weight distributions.
///
/// The level grid has bin width `1/336`; one grid-link weight normalized
/// by the 64 nodes spans just under four bins, so every grid hop consumes
/// exactly four budget bins with a small deterministic margin, and path
/// cost supports stay strictly inside one bin. The long-hop links carry a
/// constant one-bin weight, making them both the cheap corridors and the
/// paths whose budget arithmetic is exact.
pub fn canonical_link_model() -> Vec<WeightDistribution> {
    let bin_raw = 64.0 / CANONICAL_LEVELS as f64;
    let round6 = |x: f64| (x * 1e6).round() / 1e6;
    let grid_mu = 4.0 * bin_raw - 0.012;
    let grid = WeightDistribution::Uniform {
        a: round6(grid_mu - 0.003),
        b: round6(grid_mu + 0.003),
    };
    let long_hop = WeightDistribution::Constant { c: round6(bin_raw) };
    let mut dists = vec![grid; 112];
    dists.extend(vec![long_hop; 7]);
    dists
}

/// The canonical experiment document for one load regime.
pub fn canonical_experiment(name: &str, lambda: f64, slots: u64) -> ExperimentSpec {
    ExperimentSpec {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        topology: TopologySource::Inline { inline: canonical_topology() },
        flows: canonical_flows(),
        links: LinkModelSpec::PerLink { per_link: canonical_link_model() },
        cost_levels: CostLevelsSpec::Equal { equal: CANONICAL_LEVELS },
        k: vec![0.1, 1.0, 10.0],
        lambda: vec![lambda],
        seeds: (1..=20).collect(),
        algorithms: vec![
            Algorithm::Olsb,
            Algorithm::Backpressure,
            Algorithm::Aspr,
            Algorithm::Ucb1,
        ],
        slots,
        cap: 4,
        ack_mode: AckMode::Instant,
        max_hops: Some(9),
        max_paths: 3,
        spanner_c: 2.0,
        genie_full_path_set: false,
        stride: 100,
        aspr_gamma: 400.0,
        decision_log: false,
    }
}

/// The nine canonical flows: two share a source, two share a destination,
/// plus five more spread across the grid.
pub fn canonical_flows() -> Vec<FlowSpec> {
    [
        ((1, 2), (4, 4)),
        ((1, 2), (8, 4)),
        ((2, 2), (3, 7)),
        ((2, 6), (8, 8)),
        ((3, 3), (8, 6)),
        ((3, 4), (5, 8)),
        ((4, 1), (6, 8)),
        ((5, 3), (7, 8)),
        ((5, 4), (8, 8)),
    ]
    .into_iter()
    .map(|(src, dst)| FlowSpec { src, dst, rate: None })
    .collect()
}
