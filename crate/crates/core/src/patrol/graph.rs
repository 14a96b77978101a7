use std::collections::VecDeque;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DdroError, Result};
use crate::sampling::seeded;

/// Undirected simple graph on nodes `0..n`.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted; the position of an
/// edge in [`Graph::edges`] is the index of its weight in a chain parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    connected: bool,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = DdroError;
    fn try_from(raw: RawGraph) -> Result<Self> {
        Graph::new(raw.nodes, &raw.edges)
    }
}

impl From<Graph> for RawGraph {
    fn from(g: Graph) -> Self {
        RawGraph { nodes: g.n, edges: g.edges }
    }
}

impl Graph {
    /// Builds a graph; duplicate edges collapse, self-loops are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(DdroError::InvalidGraph { reason: "graph has no nodes".into() });
        }
        let mut list = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(DdroError::InvalidGraph { reason: format!("self-loop at node {u}") });
            }
            if u >= n || v >= n {
                return Err(DdroError::InvalidGraph { reason: format!("edge ({u}, {v}) outside 0..{n}") });
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        list.dedup();
        let connected = is_connected(n, &list);
        Ok(Self { n, edges: list, connected })
    }

    /// Parses one `u v` pair per line; `#` starts a comment. The node count is
    /// one past the largest index.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            let bad = || DdroError::InvalidGraph { reason: format!("line {}: expected \"u v\", got {body:?}", lineno + 1) };
            if fields.len() != 2 {
                return Err(bad());
            }
            let u = fields[0].parse::<usize>().map_err(|_| bad())?;
            let v = fields[1].parse::<usize>().map_err(|_| bad())?;
            edges.push((u, v));
        }
        let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().ok_or(DdroError::InvalidGraph { reason: "no edges".into() })?;
        Self::new(n, &edges)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DdroError::InvalidGraph { reason: format!("cannot read {}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    /// Edge-list text accepted by [`Graph::parse`].
    pub fn to_text(&self) -> String {
        self.edges.iter().map(|(u, v)| format!("{u} {v}\n")).collect()
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges)
    }

    /// Random spanning tree plus each remaining pair with probability `extra`.
    pub fn random_connected(n: usize, extra: f64, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut edges = Vec::new();
        for k in 1..n {
            let parent = order[rng.random_range(0..k)];
            edges.push((parent, order[k]));
        }
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(extra.clamp(0.0, 1.0)) {
                    edges.push((u, v));
                }
            }
        }
        Self::new(n, &edges)
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    /// Edge indices incident to each node.
    pub(crate) fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            inc[u].push(e);
            inc[v].push(e);
        }
        inc
    }
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_edge_lists() {
        let g = Graph::parse("# cycle\n0 1\n1 2 # tail comment\n\n2 0\n1 0\n").unwrap();
        assert_eq!(g.nodes(), 3);
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert!(g.is_connected());
        assert_eq!(Graph::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Graph::parse("0 0\n").is_err());
        assert!(Graph::parse("0 x\n").is_err());
        assert!(Graph::parse("0 1 2\n").is_err());
        assert!(Graph::parse("# nothing\n").is_err());
        let e = Graph::from_file("/definitely/missing.txt").unwrap_err();
        assert!(e.to_string().contains("/definitely/missing.txt"));
    }

    #[test]
    fn connectivity() {
        assert!(!Graph::new(4, &[(0, 1), (2, 3)]).unwrap().is_connected());
        for seed in 0..20 {
            let g = Graph::random_connected(20, 0.1, seed).unwrap();
            assert!(g.is_connected());
            assert_eq!(g, Graph::random_connected(20, 0.1, seed).unwrap());
        }
    }

    #[test]
    fn json_roundtrip() {
        let g = Graph::cycle(5).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<Graph>(&s).unwrap(), g);
    }
}
