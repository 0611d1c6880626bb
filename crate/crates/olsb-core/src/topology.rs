//! Directed-graph representation, loop-free path enumeration, and grid
//! network construction.
//!
//! Nodes are dense indices. Grid-built graphs additionally carry
//! `(row, col)` coordinates (1-based) so flow endpoints can be written the
//! way experiment tables list them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Dense node index, stable for a given graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense directed-link index into [`Graph::links`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub u32);

impl LinkId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One directed link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
}

/// Directed graph with per-node outgoing adjacency.
///
/// Immutable after construction; safe to share read-only across concurrent
/// simulation runs.
#[derive(Debug, Clone)]
pub struct Graph {
    n_nodes: usize,
    links: Vec<Link>,
    /// Outgoing link ids per node, sorted by destination node id.
    adj_out: Vec<Vec<LinkId>>,
    /// Optional (row, col) coordinate per node, 1-based.
    coords: Option<Vec<(u16, u16)>>,
}

impl Graph {
    /// Builds a graph from an explicit link list. Rejects self-loops and
    /// duplicate directed links; `context` names the source document for
    /// diagnostics.
    pub fn from_links(n_nodes: usize, links: Vec<Link>, context: &str) -> Result<Self> {
        let mut seen: BTreeMap<(u32, u32), usize> = BTreeMap::new();
        for (i, link) in links.iter().enumerate() {
            if link.src.index() >= n_nodes || link.dst.index() >= n_nodes {
                return Err(Error::Topology(format!(
                    "{context}: links[{i}] references node out of range (src {}, dst {}, nodes {n_nodes})",
                    link.src.0, link.dst.0
                )));
            }
            if link.src == link.dst {
                return Err(Error::Topology(format!(
                    "{context}: links[{i}] is a self-loop on node {}",
                    link.src.0
                )));
            }
            if let Some(prev) = seen.insert((link.src.0, link.dst.0), i) {
                return Err(Error::Topology(format!(
                    "{context}: links[{i}] duplicates links[{prev}] ({} -> {})",
                    link.src.0, link.dst.0
                )));
            }
        }
        let mut adj_out = vec![Vec::new(); n_nodes];
        for (i, link) in links.iter().enumerate() {
            adj_out[link.src.index()].push(LinkId(i as u32));
        }
        for out in &mut adj_out {
            out.sort_by_key(|lid| links[lid.index()].dst.0);
        }
        Ok(Graph {
            n_nodes,
            links,
            adj_out,
            coords: None,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    #[inline]
    pub fn link(&self, id: LinkId) -> Link {
        self.links[id.index()]
    }

    /// Outgoing links of `v`, sorted by destination id.
    #[inline]
    pub fn out_links(&self, v: NodeId) -> &[LinkId] {
        &self.adj_out[v.index()]
    }

    pub fn coords(&self) -> Option<&[(u16, u16)]> {
        self.coords.as_deref()
    }

    /// Node id for a 1-based (row, col) coordinate, when the graph carries
    /// coordinates.
    pub fn node_at(&self, row: u16, col: u16) -> Option<NodeId> {
        let coords = self.coords.as_ref()?;
        coords
            .iter()
            .position(|&c| c == (row, col))
            .map(|i| NodeId(i as u32))
    }

    /// Minimum hop counts from every node to `dst` (reverse BFS);
    /// `usize::MAX` marks unreachable nodes.
    pub fn hop_distances_to(&self, dst: NodeId) -> Vec<usize> {
        let mut rev_adj = vec![Vec::new(); self.n_nodes];
        for link in &self.links {
            rev_adj[link.dst.index()].push(link.src);
        }
        let mut dist = vec![usize::MAX; self.n_nodes];
        dist[dst.index()] = 0;
        let mut frontier = vec![dst];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for v in frontier {
                let d = dist[v.index()] + 1;
                for &u in &rev_adj[v.index()] {
                    if dist[u.index()] == usize::MAX {
                        dist[u.index()] = d;
                        next.push(u);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    /// Fewest-hop path from `src` to `dst` with deterministic tie-breaking
    /// (lowest next-node id), or `None` when unreachable.
    pub fn min_hop_path(&self, src: NodeId, dst: NodeId) -> Option<Vec<LinkId>> {
        let dist = self.hop_distances_to(dst);
        if dist[src.index()] == usize::MAX {
            return None;
        }
        let mut links = Vec::with_capacity(dist[src.index()]);
        let mut v = src;
        while v != dst {
            // adj_out is sorted by destination id, so the first strictly
            // descending-in-distance neighbor is the deterministic choice.
            let lid = *self.out_links(v).iter().find(|lid| {
                let to = self.link(**lid).dst;
                dist[to.index()] != usize::MAX && dist[to.index()] + 1 == dist[v.index()]
            })?;
            links.push(lid);
            v = self.link(lid).dst;
        }
        Some(links)
    }
}

/// A loop-free path, stored as the ordered link sequence plus the implied
/// node sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub id: usize,
    pub links: Vec<LinkId>,
    pub nodes: Vec<NodeId>,
}

impl Path {
    pub fn src(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn dst(&self) -> NodeId {
        *self.nodes.last().expect("path has at least two nodes")
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }

    /// 0/1 incidence vector over the graph's links.
    pub fn incidence(&self, n_links: usize) -> Vec<f64> {
        let mut row = vec![0.0; n_links];
        for lid in &self.links {
            row[lid.index()] = 1.0;
        }
        row
    }
}

/// Directed extra link for grid construction, in 1-based (row, col)
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraLink {
    pub src: (u16, u16),
    pub dst: (u16, u16),
}

/// Builds a `rows x cols` grid with bidirectional nearest-neighbor links
/// plus the given directed extra links. Node ids are row-major; node
/// coordinates are 1-based.
pub fn build_grid_network(rows: u16, cols: u16, extra: &[ExtraLink]) -> Result<Graph> {
    if rows < 1 || cols < 1 {
        return Err(Error::config("grid", "rows and cols must be >= 1"));
    }
    let node = |r: u16, c: u16| NodeId(((r - 1) as u32) * cols as u32 + (c - 1) as u32);
    let mut links = Vec::new();
    for r in 1..=rows {
        for c in 1..=cols {
            if c < cols {
                links.push(Link { src: node(r, c), dst: node(r, c + 1) });
                links.push(Link { src: node(r, c + 1), dst: node(r, c) });
            }
            if r < rows {
                links.push(Link { src: node(r, c), dst: node(r + 1, c) });
                links.push(Link { src: node(r + 1, c), dst: node(r, c) });
            }
        }
    }
    for (i, e) in extra.iter().enumerate() {
        let ok = |(r, c): (u16, u16)| (1..=rows).contains(&r) && (1..=cols).contains(&c);
        if !ok(e.src) || !ok(e.dst) {
            return Err(Error::config(
                format!("grid.extra_links[{i}]"),
                format!("coordinate out of range for {rows}x{cols} grid"),
            ));
        }
        links.push(Link { src: node(e.src.0, e.src.1), dst: node(e.dst.0, e.dst.1) });
    }
    let mut graph = Graph::from_links((rows as usize) * (cols as usize), links, "grid")?;
    graph.coords = Some(
        (1..=rows)
            .flat_map(|r| (1..=cols).map(move |c| (r, c)))
            .collect(),
    );
    Ok(graph)
}

/// Builds a grid whose nearest-neighbor links only point toward higher row
/// and column indices (a DAG), plus directed extras. This is the canonical
/// experiment topology family: 8x8 with 7 extras gives 119 directed links.
pub fn build_directed_grid(rows: u16, cols: u16, extra: &[ExtraLink]) -> Result<Graph> {
    if rows < 1 || cols < 1 {
        return Err(Error::config("grid", "rows and cols must be >= 1"));
    }
    let node = |r: u16, c: u16| NodeId(((r - 1) as u32) * cols as u32 + (c - 1) as u32);
    let mut links = Vec::new();
    for r in 1..=rows {
        for c in 1..=cols {
            if c < cols {
                links.push(Link { src: node(r, c), dst: node(r, c + 1) });
            }
            if r < rows {
                links.push(Link { src: node(r, c), dst: node(r + 1, c) });
            }
        }
    }
    for (i, e) in extra.iter().enumerate() {
        let ok = |(r, c): (u16, u16)| (1..=rows).contains(&r) && (1..=cols).contains(&c);
        if !ok(e.src) || !ok(e.dst) {
            return Err(Error::config(
                format!("grid.extra_links[{i}]"),
                format!("coordinate out of range for {rows}x{cols} grid"),
            ));
        }
        links.push(Link { src: node(e.src.0, e.src.1), dst: node(e.dst.0, e.dst.1) });
    }
    let mut graph = Graph::from_links((rows as usize) * (cols as usize), links, "directed grid")?;
    graph.coords = Some(
        (1..=rows)
            .flat_map(|r| (1..=cols).map(move |c| (r, c)))
            .collect(),
    );
    Ok(graph)
}

/// Enumerates all loop-free paths from `src` to `dst` with at most
/// `max_hops` links, shortest-hop-first and lexicographic (by node
/// sequence) within each hop count. `max_paths` truncates the result
/// deterministically.
///
/// Returned path ids are positions in the returned vector.
pub fn enumerate_paths(
    g: &Graph,
    src: NodeId,
    dst: NodeId,
    max_hops: usize,
    max_paths: Option<usize>,
) -> Vec<Path> {
    assert!(src != dst, "src and dst must differ");
    assert!(max_hops >= 1);
    let cap = max_paths.unwrap_or(usize::MAX);
    let dist = g.hop_distances_to(dst);
    let mut out: Vec<Path> = Vec::new();
    if dist[src.index()] == usize::MAX || cap == 0 {
        return out;
    }

    // Iterative deepening over exact hop counts keeps truncation
    // shortest-hop-first without materializing the full path set.
    for hops in dist[src.index()]..=max_hops {
        if out.len() >= cap {
            break;
        }
        let mut stack_nodes = vec![src];
        let mut stack_links: Vec<LinkId> = Vec::new();
        dfs_exact(
            g, dst, hops, &dist, &mut stack_nodes, &mut stack_links, &mut out, cap,
        );
    }
    for (i, p) in out.iter_mut().enumerate() {
        p.id = i;
    }
    out
}

fn dfs_exact(
    g: &Graph,
    dst: NodeId,
    target_hops: usize,
    dist: &[usize],
    nodes: &mut Vec<NodeId>,
    links: &mut Vec<LinkId>,
    out: &mut Vec<Path>,
    cap: usize,
) {
    if out.len() >= cap {
        return;
    }
    let v = *nodes.last().unwrap();
    if links.len() == target_hops {
        if v == dst {
            out.push(Path {
                id: 0,
                links: links.clone(),
                nodes: nodes.clone(),
            });
        }
        return;
    }
    let remaining = target_hops - links.len();
    for &lid in g.out_links(v) {
        let to = g.link(lid).dst;
        if nodes.contains(&to) {
            continue; // loop-free
        }
        // Prune branches that cannot reach dst in exactly the remaining hops.
        if dist[to.index()] == usize::MAX || dist[to.index()] > remaining - 1 {
            continue;
        }
        if to == dst && remaining != 1 {
            // Visiting dst early would terminate the path short.
            continue;
        }
        nodes.push(to);
        links.push(lid);
        dfs_exact(g, dst, target_hops, dist, nodes, links, out, cap);
        nodes.pop();
        links.pop();
        if out.len() >= cap {
            return;
        }
    }
}

/// Incidence matrix of `paths` over the links of `g`: row `i` is
/// `paths[i]`'s 0/1 incidence vector.
pub fn path_incidence_matrix(paths: &[Path], g: &Graph) -> Matrix {
    let rows: Vec<Vec<f64>> = paths.iter().map(|p| p.incidence(g.n_links())).collect();
    Matrix::from_rows(rows, g.n_links())
}

// ---------------------------------------------------------------------------
// Topology file (JSON)
// ---------------------------------------------------------------------------

/// On-disk topology document: explicit node coordinates and directed links.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyFile {
    pub name: String,
    /// 1-based (row, col) per node; node ids are positions in this list.
    pub nodes: Vec<(u16, u16)>,
    /// Each entry is one directed link, by coordinates.
    pub links: Vec<TopologyLink>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyLink {
    pub src: (u16, u16),
    pub dst: (u16, u16),
}

impl TopologyFile {
    pub fn to_graph(&self) -> Result<Graph> {
        let mut index: BTreeMap<(u16, u16), NodeId> = BTreeMap::new();
        for (i, &coord) in self.nodes.iter().enumerate() {
            if index.insert(coord, NodeId(i as u32)).is_some() {
                return Err(Error::Topology(format!(
                    "{}: nodes[{i}] duplicates coordinate ({}, {})",
                    self.name, coord.0, coord.1
                )));
            }
        }
        let mut links = Vec::with_capacity(self.links.len());
        for (i, l) in self.links.iter().enumerate() {
            let src = *index.get(&l.src).ok_or_else(|| {
                Error::Topology(format!(
                    "{}: links[{i}].src ({}, {}) is not a declared node",
                    self.name, l.src.0, l.src.1
                ))
            })?;
            let dst = *index.get(&l.dst).ok_or_else(|| {
                Error::Topology(format!(
                    "{}: links[{i}].dst ({}, {}) is not a declared node",
                    self.name, l.dst.0, l.dst.1
                ))
            })?;
            links.push(Link { src, dst });
        }
        let mut graph = Graph::from_links(self.nodes.len(), links, &self.name)?;
        graph.coords = Some(self.nodes.clone());
        Ok(graph)
    }

    pub fn from_graph(name: &str, g: &Graph) -> Result<Self> {
        let coords = g
            .coords()
            .ok_or_else(|| Error::Topology("graph carries no coordinates".into()))?;
        Ok(TopologyFile {
            name: name.to_string(),
            nodes: coords.to_vec(),
            links: g
                .links()
                .iter()
                .map(|l| TopologyLink {
                    src: coords[l.src.index()],
                    dst: coords[l.dst.index()],
                })
                .collect(),
        })
    }
}
