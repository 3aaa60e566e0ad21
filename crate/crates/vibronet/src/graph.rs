//! Graph machinery for stabilizability analysis and control placement:
//! bidirected-edge detection, unidirected residuals, acyclicity checks with
//! witnesses, and the one-orientation-per-pair placement loop.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Directed graph on nodes `0..n` with set semantics for edges and no
/// self-loops. Edges are `(from, to)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

/// Result of an acyclicity check: either a topological order of all nodes or
/// a directed cycle (as a node sequence; the edge from the last node back to
/// the first closes it).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DagCheck {
    Acyclic { order: Vec<usize> },
    Cyclic { cycle: Vec<usize> },
}

impl DirectedGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (from, to) in edges {
            if from >= n || to >= n {
                return Err(Error::InvalidInput(format!(
                    "edge {from} -> {to} out of range for {n} nodes"
                )));
            }
            if from == to {
                return Err(Error::InvalidInput(format!("self-loop on node {from}")));
            }
            set.insert((from, to));
        }
        Ok(Self { n, edges: set })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn contains(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    fn with_edge(&self, edge: (usize, usize)) -> Self {
        let mut g = self.clone();
        g.edges.insert(edge);
        g
    }

    /// Edges whose reverse is also present. The returned set is symmetric:
    /// both orientations of every reciprocal pair are included.
    pub fn bidirected_edges(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .copied()
            .filter(|&(a, b)| self.edges.contains(&(b, a)))
            .collect()
    }

    /// Reciprocal pairs as unordered `(min, max)` tuples, sorted.
    pub fn bidirected_pairs(&self) -> Vec<(usize, usize)> {
        self.bidirected_edges()
            .into_iter()
            .filter(|&(a, b)| a < b)
            .collect()
    }

    /// The graph left after deleting every bidirected edge.
    pub fn unidirected_residual(&self) -> DirectedGraph {
        let bidirected = self.bidirected_edges();
        DirectedGraph {
            n: self.n,
            edges: self.edges.difference(&bidirected).copied().collect(),
        }
    }

    /// Kahn's algorithm; on failure a directed cycle is recovered by walking
    /// the remaining (all-cyclic-reachable) subgraph.
    pub fn check_dag(&self) -> DagCheck {
        let mut indegree = vec![0usize; self.n];
        let mut adjacency = vec![Vec::new(); self.n];
        for &(from, to) in &self.edges {
            indegree[to] += 1;
            adjacency[from].push(to);
        }
        let mut queue: Vec<usize> = (0..self.n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(self.n);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            order.push(v);
            for &w in &adjacency[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    queue.push(w);
                }
            }
        }
        if order.len() == self.n {
            return DagCheck::Acyclic { order };
        }
        // Every remaining node has positive in-degree, so following any
        // predecessor chain from one of them must revisit a node.
        let start = (0..self.n).find(|&v| indegree[v] > 0).expect("cyclic node");
        let mut pred = vec![usize::MAX; self.n];
        for &(from, to) in &self.edges {
            if indegree[from] > 0 && indegree[to] > 0 {
                pred[to] = from;
            }
        }
        let mut seen = vec![false; self.n];
        let mut v = start;
        while !seen[v] {
            seen[v] = true;
            v = pred[v];
        }
        let mut cycle = vec![v];
        let mut w = pred[v];
        while w != v {
            cycle.push(w);
            w = pred[w];
        }
        cycle.reverse();
        DagCheck::Cyclic { cycle }
    }

    pub fn is_dag(&self) -> bool {
        matches!(self.check_dag(), DagCheck::Acyclic { .. })
    }

    pub fn topological_order(&self) -> Result<Vec<usize>> {
        match self.check_dag() {
            DagCheck::Acyclic { order } => Ok(order),
            DagCheck::Cyclic { cycle } => Err(Error::Cyclic(cycle)),
        }
    }
}

/// Structural verdict: the system is vibrationally stabilizable whenever the
/// unidirected residual is acyclic. The condition is sufficient only; a
/// cyclic residual leaves the question open.
#[derive(Debug, Clone)]
pub struct Stabilizability {
    pub stabilizable: bool,
    pub residual: DirectedGraph,
    pub check: DagCheck,
}

pub fn structural_stabilizability(graph: &DirectedGraph) -> Stabilizability {
    let residual = graph.unidirected_residual();
    let check = residual.check_dag();
    Stabilizability {
        stabilizable: matches!(check, DagCheck::Acyclic { .. }),
        residual,
        check,
    }
}

/// Outcome of control placement: for each bidirected pair exactly one
/// orientation is kept and the other is selected for vibration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementResult {
    /// Edges to vibrate (the functionally removed orientations).
    pub control_set: BTreeSet<(usize, usize)>,
    /// Orientations kept in the functional graph.
    pub kept_set: BTreeSet<(usize, usize)>,
    /// Residual plus kept orientations; always acyclic.
    pub final_graph: DirectedGraph,
}

/// Selects, pair by pair, one orientation to keep so that residual + kept
/// stays acyclic throughout; everything not kept becomes the control set.
///
/// Pairs are visited in sorted `(min, max)` order and for each pair the
/// orientation `min -> max` is tried first, so the outcome is deterministic
/// even when both orientations would do.
pub fn place_controls(graph: &DirectedGraph) -> Result<PlacementResult> {
    let verdict = structural_stabilizability(graph);
    let DagCheck::Acyclic { .. } = verdict.check else {
        let DagCheck::Cyclic { cycle } = verdict.check else {
            unreachable!()
        };
        return Err(Error::NotStabilizable { cycle });
    };

    let mut extended = verdict.residual;
    let mut kept = BTreeSet::new();
    for (a, b) in graph.bidirected_pairs() {
        let orientation = [(a, b), (b, a)]
            .into_iter()
            .find(|&e| extended.with_edge(e).is_dag())
            .expect("one orientation of a reciprocal-free pair always extends a DAG");
        extended = extended.with_edge(orientation);
        kept.insert(orientation);
    }
    let control_set = graph
        .bidirected_edges()
        .difference(&kept)
        .copied()
        .collect();
    Ok(PlacementResult {
        control_set,
        kept_set: kept,
        final_graph: extended,
    })
}

/// Relabelling that makes every edge point from a lower to a higher new
/// index, i.e. the permuted system matrix has strictly lower-triangular
/// off-diagonal support. `perm[old] = new`.
pub fn topological_permutation(graph: &DirectedGraph) -> Result<Vec<usize>> {
    let order = graph.topological_order()?;
    let mut perm = vec![0usize; graph.node_count()];
    for (rank, &node) in order.iter().enumerate() {
        perm[node] = rank;
    }
    Ok(perm)
}
