//! Simple undirected graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A simple undirected graph with edge-indexed adjacency.
///
/// `adjacency[v]` lists the indices of edges incident to `v` in increasing
/// order. This order fixes the axis order of vertex tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    max_degree: usize,
}

impl Graph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); vertex_count];
        let mut seen = std::collections::BTreeSet::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} = ({u}, {v}) references a vertex outside 0..{vertex_count}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("edge {i} is a self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("edge {i} = ({u}, {v}) is a duplicate")));
            }
            adjacency[u].push(i);
            adjacency[v].push(i);
        }
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Graph {
            vertex_count,
            edges,
            adjacency,
            max_degree,
        })
    }

    pub fn path(n: usize) -> Self {
        Graph::new(n, (1..n).map(|i| (i - 1, i)).collect()).expect("path is simple")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect()).expect("cycle is simple")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Graph::new(n, edges).expect("complete graph is simple")
    }

    /// Star with centre 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Graph::new(leaves + 1, (1..=leaves).map(|i| (0, i)).collect()).expect("star is simple")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Indices of the edges incident to `v`.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Vertices adjacent to `v`, one entry per incident edge.
    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].iter().map(move |&e| {
            let (a, b) = self.edges[e];
            if a == v {
                b
            } else {
                a
            }
        })
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count == 0 {
            return true;
        }
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in self.neighbours(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// All connected simple graphs on `2..=max_vertices` vertices with at most
/// `max_edges` edges and maximum degree at most `max_degree`, one per
/// isomorphism class, in a deterministic order.
pub fn connected_graphs(max_vertices: usize, max_edges: usize, max_degree: usize) -> Vec<Graph> {
    assert!(max_vertices <= 7, "brute-force isomorphism check is factorial in the vertex count");
    let mut out = Vec::new();
    for n in 2..=max_vertices {
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let perms = permutations(n);
        let mut classes = std::collections::BTreeSet::new();
        for mask in 0u64..(1u64 << pairs.len()) {
            if mask.count_ones() as usize > max_edges {
                continue;
            }
            let edges: Vec<_> = (0..pairs.len()).filter(|&i| mask >> i & 1 == 1).map(|i| pairs[i]).collect();
            let g = Graph::new(n, edges).expect("subsets of simple pairs are simple");
            if g.max_degree() > max_degree || !g.is_connected() {
                continue;
            }
            let canon = perms
                .iter()
                .map(|p| {
                    let mut c: Vec<(usize, usize)> = g
                        .edges()
                        .iter()
                        .map(|&(u, v)| (p[u].min(p[v]), p[u].max(p[v])))
                        .collect();
                    c.sort_unstable();
                    c
                })
                .min()
                .expect("at least one permutation");
            if classes.insert(canon) {
                out.push(g);
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    heap_permute(n, &mut p, &mut out);
    out
}

fn heap_permute(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k {
        heap_permute(k - 1, p, out);
        if k % 2 == 0 {
            p.swap(i, k - 1);
        } else {
            p.swap(0, k - 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_loops_and_duplicates() {
        assert!(Graph::new(2, vec![(0, 0)]).is_err());
        assert!(Graph::new(2, vec![(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(2, vec![(0, 2)]).is_err());
    }

    #[test]
    fn adjacency_matches_edges() {
        let g = Graph::star(3);
        assert_eq!(g.max_degree(), 3);
        assert_eq!(g.incident(0), &[0, 1, 2]);
        assert_eq!(g.incident(2), &[1]);
    }

    #[test]
    fn small_connected_graph_counts() {
        // Known counts of connected graphs up to isomorphism: 1, 2, 6 on 2, 3, 4 vertices.
        let by_n = |n| connected_graphs(n, 10, 10).into_iter().filter(|g| g.vertex_count() == n).count();
        assert_eq!(by_n(2), 1);
        assert_eq!(by_n(3), 2);
        assert_eq!(by_n(4), 6);
        assert_eq!(by_n(5), 21);
    }
}
