use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of object types in a scene.
pub const NUM_TYPES: usize = 4;

/// Largest graph size [`enumerate_dags`] will enumerate (2²⁰ candidates).
pub const MAX_ENUM_NODES: usize = 5;

/// Directed graph over object types; an edge `p → c` means type `c`
/// inherits the relation feature from type `p`.
///
/// Stored as a row-major bit mask, bit `p·k + c` set for edge `p → c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationGraph {
    nodes: usize,
    bits: u32,
}

impl RelationGraph {
    pub fn empty(nodes: usize) -> Self {
        RelationGraph { nodes, bits: 0 }
    }

    /// Builds a graph from an edge list, rejecting self-loops and cycles.
    pub fn from_edges(nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if nodes > MAX_ENUM_NODES {
            return Err(Error::Capacity(format!("graph with {nodes} nodes")));
        }
        let mut g = RelationGraph::empty(nodes);
        for &(p, c) in edges {
            if p >= nodes || c >= nodes {
                return Err(Error::param(format!("edge {p}->{c} outside {nodes} nodes")));
            }
            g.bits |= 1 << (p * nodes + c);
        }
        g.validate()?;
        Ok(g)
    }

    /// Builds a graph from a square 0/1 matrix.
    pub fn from_matrix(rows: &[Vec<u8>]) -> Result<Self> {
        let nodes = rows.len();
        if nodes > MAX_ENUM_NODES {
            return Err(Error::Capacity(format!("graph with {nodes} nodes")));
        }
        let mut g = RelationGraph::empty(nodes);
        for (p, row) in rows.iter().enumerate() {
            if row.len() != nodes {
                return Err(Error::param("adjacency matrix is not square"));
            }
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => g.bits |= 1 << (p * nodes + c),
                    _ => return Err(Error::param(format!("adjacency entry {v} is not binary"))),
                }
            }
        }
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if (0..self.nodes).any(|i| self.has_edge(i, i)) {
            return Err(Error::param("relation graph has a self-loop"));
        }
        if self.topological_order().is_none() {
            return Err(Error::param("relation graph has a cycle"));
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.bits >> (parent * self.nodes + child) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn edge_count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn parents(&self, child: usize) -> Vec<usize> {
        (0..self.nodes).filter(|&p| self.has_edge(p, child)).collect()
    }

    /// Kahn's algorithm, always taking the smallest ready node; `None` when
    /// the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes;
        let mut indegree: Vec<usize> = (0..n).map(|c| self.parents(c).len()).collect();
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n).find(|&v| !done[v] && indegree[v] == 0)?;
            done[next] = true;
            order.push(next);
            for c in 0..n {
                if self.has_edge(next, c) {
                    indegree[c] -= 1;
                }
            }
        }
        Some(order)
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.nodes)
            .map(|p| (0..self.nodes).map(|c| self.has_edge(p, c) as u8).collect())
            .collect()
    }

    /// Row-major 0/1 flatten.
    pub fn flatten(&self) -> Vec<f64> {
        let n = self.nodes;
        (0..n * n).map(|i| (self.bits >> i & 1) as f64).collect()
    }
}

impl Serialize for RelationGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_matrix().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RelationGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<u8>>::deserialize(d)?;
        RelationGraph::from_matrix(&rows).map_err(serde::de::Error::custom)
    }
}

/// All acyclic, zero-diagonal `k × k` adjacency matrices, ordered
/// lexicographically by their row-major flatten.
pub fn enumerate_dags(k: usize) -> Result<Vec<RelationGraph>> {
    if k > MAX_ENUM_NODES {
        return Err(Error::Capacity(format!(
            "DAG enumeration supports at most {MAX_ENUM_NODES} nodes, got {k}"
        )));
    }
    let off_diag: Vec<usize> = (0..k * k).filter(|i| i / k.max(1) != i % k.max(1)).collect();
    let free = off_diag.len();
    let mut out = Vec::new();
    for code in 0u32..(1u32 << free) {
        let mut bits = 0u32;
        for (pos, &cell) in off_diag.iter().enumerate() {
            // first off-diagonal cell is the most significant digit
            if code >> (free - 1 - pos) & 1 == 1 {
                bits |= 1 << cell;
            }
        }
        let g = RelationGraph { nodes: k, bits };
        if g.topological_order().is_some() {
            out.push(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        assert_eq!(enumerate_dags(1).unwrap().len(), 1);
        assert_eq!(enumerate_dags(2).unwrap().len(), 3);
        assert_eq!(enumerate_dags(3).unwrap().len(), 25);
        assert!(matches!(enumerate_dags(6), Err(Error::Capacity(_))));
    }

    #[test]
    fn order_is_lexicographic_and_starts_empty() {
        let dags = enumerate_dags(3).unwrap();
        assert!(dags[0].is_empty());
        let keys: Vec<Vec<Vec<u8>>> = dags.iter().map(|g| g.to_matrix()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn rejects_cycles_and_loops() {
        assert!(RelationGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(RelationGraph::from_edges(3, &[(1, 1)]).is_err());
        assert!(RelationGraph::from_matrix(&[vec![0, 2], vec![0, 0]]).is_err());
    }

    #[test]
    fn topological_order_respects_edges() {
        let g = RelationGraph::from_edges(4, &[(3, 0), (0, 2), (1, 2)]).unwrap();
        let order = g.topological_order().unwrap();
        let pos = |v: usize| order.iter().position(|&x| x == v).unwrap();
        assert!(pos(3) < pos(0) && pos(0) < pos(2) && pos(1) < pos(2));
    }

    #[test]
    fn matrix_round_trip() {
        let g = RelationGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(RelationGraph::from_matrix(&g.to_matrix()).unwrap(), g);
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(json, "[[0,1,0,0],[0,0,0,0],[0,0,0,1],[0,0,0,0]]");
    }
}
