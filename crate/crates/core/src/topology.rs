//! Undirected communication graphs.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Maximum number of Erdős–Rényi draws before giving up on connectivity.
pub const ER_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Complete,
    ErdosRenyi,
    Grid2D,
    Path,
    /// Read from an edge list; no generator.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopologyParams {
    None,
    Probability(f64),
    Grid { rows: usize, cols: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    kind: GraphKind,
}

impl Graph {
    /// Builds a graph from arbitrary pairs, normalizing to `i < j`.
    /// Self-loops and out-of-range endpoints are rejected; duplicates collapse.
    pub fn from_edges(n: usize, kind: GraphKind, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut edges = BTreeSet::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            edges.insert((a.min(b), a.max(b)));
        }
        Ok(Self { n, edges, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// Edge-list text: `n` on the first line, then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.n);
        for &(i, j) in &self.edges {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, first) = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let n: usize = first
            .parse()
            .map_err(|_| Error::Parse(format!("line 1: expected node count, got {first:?}")))?;
        let mut pairs = Vec::new();
        for (no, line) in lines {
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("line {no}: expected `i j`, got {line:?}")))
            };
            let i = parse(it.next())?;
            let j = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::Parse(format!("line {no}: trailing tokens")));
            }
            pairs.push((i, j));
        }
        Self::from_edges(n, GraphKind::Custom, pairs)
    }
}

/// True iff a breadth-first traversal from node 0 reaches every node.
pub fn is_connected(g: &Graph) -> bool {
    if g.n == 0 {
        return false;
    }
    let adj = g.adjacency();
    let mut seen = vec![false; g.n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    reached == g.n
}

pub fn build_topology(kind: GraphKind, n: usize, params: TopologyParams, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let g = match kind {
        GraphKind::Complete => Graph::from_edges(n, kind, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))?,
        GraphKind::Path => Graph::from_edges(n, kind, (1..n).map(|i| (i - 1, i)))?,
        GraphKind::Grid2D => {
            let (rows, cols) = match params {
                TopologyParams::Grid { rows, cols } => (rows, cols),
                _ => return Err(Error::InvalidParameter("grid graph needs rows and cols".into())),
            };
            if rows * cols != n {
                return Err(Error::BadDimensions { rows, cols, n });
            }
            let mut pairs = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let id = r * cols + c;
                    if c + 1 < cols {
                        pairs.push((id, id + 1));
                    }
                    if r + 1 < rows {
                        pairs.push((id, id + cols));
                    }
                }
            }
            Graph::from_edges(n, kind, pairs)?
        }
        GraphKind::ErdosRenyi => {
            let p = match params {
                TopologyParams::Probability(p) => p,
                _ => return Err(Error::InvalidParameter("Erdos-Renyi graph needs p".into())),
            };
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParameter(format!("edge probability must be in (0, 1], got {p}")));
            }
            let mut rng = rng::seeded(seed);
            for _ in 0..ER_MAX_ATTEMPTS {
                let mut pairs = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random::<f64>() < p {
                            pairs.push((i, j));
                        }
                    }
                }
                let g = Graph::from_edges(n, kind, pairs)?;
                if is_connected(&g) {
                    return Ok(g);
                }
            }
            return Err(Error::NotConnected);
        }
        GraphKind::Custom => {
            return Err(Error::InvalidParameter("custom graphs are loaded, not generated".into()));
        }
    };
    if !is_connected(&g) {
        return Err(Error::NotConnected);
    }
    Ok(g)
}

/// Picks the most square `rows x cols` factorization of `n` (rows <= cols).
pub fn squarest_grid(n: usize) -> (usize, usize) {
    let mut rows = libm::sqrt(n as f64) as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, n / rows)
}
