//! Undirected communication graphs, switching schedules and the
//! sign-based consensus terms used by the agents.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simple undirected graph stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Self-loops are rejected and
    /// duplicate edges collapse.
    pub fn from_edges(nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); nodes];
        for &(u, v) in edges {
            if u >= nodes || v >= nodes {
                return Err(Error::InvalidParameter(format!("edge ({u}, {v}) out of range for {nodes} nodes")));
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop on node {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adjacency })
    }

    /// Like [`Graph::from_edges`] but also insists on connectivity.
    pub fn connected_from_edges(nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let g = Self::from_edges(nodes, edges)?;
        if is_connected(&g) {
            Ok(g)
        } else {
            Err(Error::Disconnected { nodes })
        }
    }

    pub fn complete(nodes: usize) -> Self {
        let adjacency = (0..nodes).map(|i| (0..nodes).filter(|&j| j != i).collect()).collect();
        Self { adjacency }
    }

    pub fn path(nodes: usize) -> Self {
        let edges: Vec<_> = (1..nodes).map(|i| (i - 1, i)).collect();
        Self::from_edges(nodes, &edges).expect("path edges are in range")
    }

    pub fn ring(nodes: usize) -> Self {
        let mut edges: Vec<_> = (1..nodes).map(|i| (i - 1, i)).collect();
        if nodes > 2 {
            edges.push((nodes - 1, 0));
        }
        Self::from_edges(nodes, &edges).expect("ring edges are in range")
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// One `u v` pair per line, zero-based, preceded by a `# nodes N` line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# nodes {}\n", self.node_count());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut nodes = None;
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# nodes") {
                nodes = Some(rest.trim().parse::<usize>().map_err(|e| {
                    Error::Config(format!("edge list line {}: {e}", lineno + 1))
                })?);
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v)),
                _ => return Err(Error::Config(format!("edge list line {}: expected `u v`", lineno + 1))),
            }
        }
        let nodes = nodes.ok_or_else(|| Error::Config("edge list lacks a `# nodes N` header".into()))?;
        Self::from_edges(nodes, &edges)
    }
}

/// Breadth-first reachability from node 0. The empty graph counts as connected.
pub fn is_connected(g: &Graph) -> bool {
    let n = g.node_count();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    reached == n
}

fn components(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        label[s] = id;
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for &v in g.neighbors(u) {
                if label[v] == usize::MAX {
                    label[v] = id;
                    members.push(v);
                }
            }
        }
        out.push(members);
    }
    out
}

/// Erdős–Rényi `G(N, p)` draw made connected by chaining its components
/// through randomly chosen members, in random order.
pub fn random_connected_graph(nodes: usize, edge_prob: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidParameter(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..nodes {
        for v in u + 1..nodes {
            if rng.gen_bool(edge_prob) {
                edges.push((u, v));
            }
        }
    }
    let draw = Graph::from_edges(nodes, &edges)?;
    let mut comps = components(&draw);
    if comps.len() > 1 {
        comps.shuffle(&mut rng);
        let reps: Vec<usize> = comps.iter().map(|c| *c.choose(&mut rng).expect("nonempty")).collect();
        edges.extend(reps.windows(2).map(|w| (w[0], w[1])));
    }
    Graph::connected_from_edges(nodes, &edges)
}

/// `sgn_ε(u)`: zero inside the deadband, the sign outside it.
pub fn sign_deadband(u: f64, eps: f64) -> f64 {
    if u.abs() <= eps {
        0.0
    } else {
        u.signum()
    }
}

/// For each node, `Σ_{j ∈ N_i} sgn_ε(v_j − v_i)` componentwise.
pub fn consensus_drive(values: &[DVector<f64>], g: &Graph, eps: f64) -> Vec<DVector<f64>> {
    debug_assert_eq!(values.len(), g.node_count());
    values
        .iter()
        .enumerate()
        .map(|(i, vi)| {
            let mut out = DVector::zeros(vi.len());
            for &j in g.neighbors(i) {
                for k in 0..vi.len() {
                    out[k] += sign_deadband(values[j][k] - vi[k], eps);
                }
            }
            out
        })
        .collect()
}

/// Flooding max-consensus, `z_i ← max(z_i, max_{j ∈ N_i} z_j)`, run for
/// `N − 1` rounds.
pub fn max_consensus(values: &[f64], g: &Graph) -> Result<Vec<f64>> {
    if values.len() != g.node_count() {
        return Err(Error::Shape { context: "max_consensus", expected: g.node_count(), found: values.len() });
    }
    if !is_connected(g) {
        return Err(Error::Disconnected { nodes: g.node_count() });
    }
    let mut z = values.to_vec();
    for _ in 1..values.len() {
        z = max_round(&z, g);
    }
    Ok(z)
}

/// One synchronous round of max-consensus.
pub fn max_round(z: &[f64], g: &Graph) -> Vec<f64> {
    (0..z.len())
        .map(|i| g.neighbors(i).iter().fold(z[i], |m, &j| m.max(z[j])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Static,
    Switching,
}

/// A piecewise-constant graph signal: graph `k mod len` is active on
/// `[k · dwell, (k + 1) · dwell)`.
#[derive(Debug, Clone)]
pub struct NetworkSchedule {
    mode: ScheduleMode,
    graphs: Vec<Graph>,
    dwell: f64,
}

impl NetworkSchedule {
    pub fn new(mode: ScheduleMode, graphs: Vec<Graph>, dwell: f64) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::InvalidParameter("schedule needs at least one graph".into()));
        }
        if !(dwell > 0.0 && dwell.is_finite()) {
            return Err(Error::InvalidParameter(format!("dwell must be positive, got {dwell}")));
        }
        let nodes = graphs[0].node_count();
        for g in &graphs {
            if g.node_count() != nodes {
                return Err(Error::Shape { context: "schedule graphs", expected: nodes, found: g.node_count() });
            }
            if !is_connected(g) {
                return Err(Error::Disconnected { nodes });
            }
        }
        if mode == ScheduleMode::Static && graphs.len() != 1 {
            return Err(Error::InvalidParameter("a static schedule holds exactly one graph".into()));
        }
        Ok(Self { mode, graphs, dwell })
    }

    pub fn fixed(g: Graph) -> Result<Self> {
        Self::new(ScheduleMode::Static, vec![g], 1.0)
    }

    /// `count` independent random connected graphs, cycled every `dwell`.
    pub fn random_switching(nodes: usize, edge_prob: f64, dwell: f64, count: usize, seed: u64) -> Result<Self> {
        let graphs = (0..count.max(1) as u64)
            .map(|k| random_connected_graph(nodes, edge_prob, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ScheduleMode::Switching, graphs, dwell)
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn dwell(&self) -> f64 {
        self.dwell
    }

    pub fn node_count(&self) -> usize {
        self.graphs[0].node_count()
    }

    pub fn graph_at(&self, t: f64) -> &Graph {
        match self.mode {
            ScheduleMode::Static => &self.graphs[0],
            ScheduleMode::Switching => {
                let slot = (t / self.dwell).floor().max(0.0) as usize;
                &self.graphs[slot % self.graphs.len()]
            }
        }
    }
}
