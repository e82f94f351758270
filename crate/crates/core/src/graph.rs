//! Undirected social graphs: generation, degree statistics, and the
//! edge-list text format.
//!
//! The generator is preferential attachment: start from a clique of `m`
//! nodes, then attach each new node with `m` edges whose endpoints are drawn
//! proportionally to current degree. This yields the heavy-tailed degree
//! distributions and short path lengths typical of social networks, at any
//! requested size.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::rng::{self, SplitMix64};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("self loops are not allowed (node {0})")]
    SelfLoop(u32),
    #[error("node {0} out of range for graph of {1} nodes")]
    OutOfRange(u32, usize),
    #[error("graph file line {line}: {reason}")]
    Parse { line: usize, reason: &'static str },
    #[error("preferential attachment requires n > m >= 1 (n {n}, m {m})")]
    BadParams { n: usize, m: usize },
}

/// How a graph came to be; carried in the file format for provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphModel {
    Imported,
    BarabasiAlbert { m: usize, seed: u64 },
}

/// Undirected simple graph over nodes `0..n`.
#[derive(Debug, Clone)]
pub struct SocialGraph {
    adjacency: Vec<BTreeSet<u32>>,
    model: GraphModel,
}

impl SocialGraph {
    pub fn new(n_nodes: usize) -> Self {
        SocialGraph {
            adjacency: alloc::vec![BTreeSet::new(); n_nodes],
            model: GraphModel::Imported,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn model(&self) -> &GraphModel {
        &self.model
    }

    pub fn degree(&self, node: u32) -> usize {
        self.adjacency[node as usize].len()
    }

    pub fn neighbors(&self, node: u32) -> impl Iterator<Item = u32> + '_ {
        self.adjacency[node as usize].iter().copied()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adjacency
            .get(u as usize)
            .is_some_and(|a| a.contains(&v))
    }

    /// Adds an undirected edge; idempotent.
    pub fn add_edge(&mut self, u: u32, v: u32) -> Result<(), GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        let n = self.n_nodes();
        if u as usize >= n {
            return Err(GraphError::OutOfRange(u, n));
        }
        if v as usize >= n {
            return Err(GraphError::OutOfRange(v, n));
        }
        self.adjacency[u as usize].insert(v);
        self.adjacency[v as usize].insert(u);
        Ok(())
    }

    /// Removes every edge incident to `node`.
    pub fn clear_node(&mut self, node: u32) {
        let gone: Vec<u32> = self.adjacency[node as usize].iter().copied().collect();
        for v in gone {
            self.adjacency[v as usize].remove(&node);
        }
        self.adjacency[node as usize].clear();
    }

    /// Edges with `u < v`, in deterministic order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, adj)| {
            let u = u as u32;
            adj.iter().copied().filter(move |&v| u < v).map(move |v| (u, v))
        })
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(|a| a.len()).collect()
    }

    /// The `fraction` best-connected (`top = true`) or worst-connected nodes.
    ///
    /// Primary key is degree; ties (common at the minimum degree of
    /// preferential-attachment graphs) are broken by the summed degree of
    /// the node's neighbors, so "worst-connected" means weak in both direct
    /// and two-hop connectivity. At least one node is always returned.
    pub fn degree_percentile_nodes(&self, top: bool, fraction: f64) -> Vec<u32> {
        let n = self.n_nodes();
        let two_hop: Vec<usize> = (0..n as u32)
            .map(|u| self.neighbors(u).map(|v| self.degree(v)).sum())
            .collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| {
            let ka = (self.degree(a), two_hop[a as usize]);
            let kb = (self.degree(b), two_hop[b as usize]);
            if top {
                kb.cmp(&ka).then(a.cmp(&b))
            } else {
                ka.cmp(&kb).then(a.cmp(&b))
            }
        });
        let k = (libm::ceil(n as f64 * fraction) as usize).clamp(1, n);
        order.truncate(k);
        order
    }

    /// Serializes as an edge-list text file: `# model=...` header, then one
    /// `u,v` line per edge.
    pub fn to_edge_list(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        match &self.model {
            GraphModel::Imported => out.push_str("# model=imported\n"),
            GraphModel::BarabasiAlbert { m, seed } => {
                let _ = writeln!(out, "# model=barabasi_albert m={m} seed={seed}");
            }
        }
        let _ = writeln!(out, "# nodes={}", self.n_nodes());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u},{v}");
        }
        out
    }

    /// Parses the edge-list format. Node count comes from the `# nodes=`
    /// header when present, otherwise from the largest endpoint.
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut edges: Vec<(u32, u32)> = Vec::new();
        let mut declared_nodes: Option<usize> = None;
        let mut max_node = 0u32;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("nodes=") {
                    declared_nodes = Some(v.trim().parse().map_err(|_| GraphError::Parse {
                        line,
                        reason: "bad nodes= header",
                    })?);
                }
                continue;
            }
            let mut parts = trimmed.split(',');
            let u: u32 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or(GraphError::Parse {
                    line,
                    reason: "expected u,v",
                })?;
            let v: u32 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or(GraphError::Parse {
                    line,
                    reason: "expected u,v",
                })?;
            if parts.next().is_some() {
                return Err(GraphError::Parse {
                    line,
                    reason: "too many fields",
                });
            }
            if u == v {
                return Err(GraphError::Parse {
                    line,
                    reason: "self loop",
                });
            }
            max_node = max_node.max(u).max(v);
            edges.push((u, v));
        }
        let n = declared_nodes.unwrap_or(max_node as usize + 1);
        let mut g = SocialGraph::new(n);
        for (u, v) in edges {
            g.add_edge(u, v)
                .map_err(|_| GraphError::Parse { line: 0, reason: "endpoint out of range" })?;
        }
        Ok(g)
    }
}

/// Generates a preferential-attachment graph: clique on the first `m` nodes,
/// then each new node attaches with `m` degree-proportional edges.
///
/// Edge count is exactly `C(m,2) + m*(n-m)`. Deterministic per seed.
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<SocialGraph, GraphError> {
    if m < 1 || n <= m {
        return Err(GraphError::BadParams { n, m });
    }
    let mut g = SocialGraph::new(n);
    g.model = GraphModel::BarabasiAlbert { m, seed };
    let mut rng = SplitMix64::new(rng::derive_stream(seed, &[0xBA, n as u64, m as u64]));

    // Degree urn: node id appears once per unit of degree, so a uniform draw
    // is a degree-proportional draw.
    let mut urn: Vec<u32> = Vec::with_capacity(2 * m * n);
    for u in 0..m as u32 {
        for v in 0..u {
            g.add_edge(u, v)?;
            urn.push(u);
            urn.push(v);
        }
    }
    let mut chosen: BTreeSet<u32> = BTreeSet::new();
    for new_node in m as u32..n as u32 {
        chosen.clear();
        if urn.is_empty() {
            // m = 1 and the seed "clique" is a single isolated node: the
            // first attachment is forced.
            chosen.insert(0);
        } else {
            while chosen.len() < m {
                let pick = urn[rng::uniform_below(&mut rng, urn.len())];
                chosen.insert(pick);
            }
        }
        for &target in &chosen {
            g.add_edge(new_node, target)?;
            urn.push(new_node);
            urn.push(target);
        }
    }
    Ok(g)
}
