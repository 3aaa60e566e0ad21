//! Linear network systems `x' = (D + A) x`.
//!
//! A system is a set of nodes with scalar intrinsic dynamics `d_i` (the
//! diagonal `D`) plus weighted directed edges (the adjacency `A`). The weight
//! of edge `from -> to` lives at matrix entry `(to, from)`, so column `j` of
//! the matrix collects the couplings leaving node `j`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

/// Directed coupling `from -> to`. Indices are 0-based in memory; files use
/// 1-based node ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// A validated linear network system.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSystem {
    n: usize,
    d: Vec<f64>,
    edges: Vec<Edge>,
}

impl NetworkSystem {
    /// Builds a system from intrinsic dynamics and an edge list.
    ///
    /// Rejects out-of-range indices, self-loops, duplicate `(from, to)`
    /// pairs, and zero or non-finite weights. Zero-weight edges are rejected
    /// because an absent coupling and a zero coupling must stay
    /// indistinguishable: the graph support and the matrix support coincide.
    pub fn new(d: Vec<f64>, edges: Vec<Edge>) -> Result<Self> {
        let n = d.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty node set".into()));
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite intrinsic dynamics".into(),
            ));
        }
        let mut edges = edges;
        edges.sort_by_key(|e| (e.from, e.to));
        for pair in edges.windows(2) {
            if pair[0].from == pair[1].from && pair[0].to == pair[1].to {
                return Err(Error::InvalidInput(format!(
                    "duplicate edge {} -> {}",
                    pair[0].from + 1,
                    pair[0].to + 1
                )));
            }
        }
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidInput(format!(
                    "edge {} -> {} out of range for {} nodes",
                    e.from + 1,
                    e.to + 1,
                    n
                )));
            }
            if e.from == e.to {
                return Err(Error::InvalidInput(format!(
                    "self-loop on node {}; intrinsic dynamics belong in d",
                    e.from + 1
                )));
            }
            if e.weight == 0.0 || !e.weight.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "edge {} -> {} has invalid weight {}",
                    e.from + 1,
                    e.to + 1,
                    e.weight
                )));
            }
        }
        Ok(Self { n, d, edges })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Intrinsic dynamics, one rate per node.
    pub fn intrinsic(&self) -> &[f64] {
        &self.d
    }

    /// Edges sorted by `(from, to)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Weight of edge `from -> to`, i.e. matrix entry `(to, from)`.
    pub fn weight(&self, from: usize, to: usize) -> Option<f64> {
        self.edges
            .iter()
            .find(|e| e.from == from && e.to == to)
            .map(|e| e.weight)
    }

    /// Assembles the system matrix `M = D + A`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, di) in self.d.iter().enumerate() {
            m[(i, i)] = *di;
        }
        for e in &self.edges {
            m[(e.to, e.from)] = e.weight;
        }
        m
    }

    /// Structure-only view of the coupling graph.
    pub fn graph(&self) -> DirectedGraph {
        DirectedGraph::new(self.n, self.edges.iter().map(|e| (e.from, e.to)))
            .expect("validated edges form a valid graph")
    }

    /// Checks the modelling conditions: every node individually stable
    /// (`d_i < 0`) and every reciprocal coupling pair sign-consistent.
    /// Findings are reported, not rejected, so deliberately perturbed systems
    /// can still be constructed and analysed.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut diagonals_stable = true;
        for (i, di) in self.d.iter().enumerate() {
            if *di >= 0.0 {
                diagonals_stable = false;
                violations.push(Violation {
                    i,
                    j: i,
                    message: format!("node {} has non-negative intrinsic dynamics {di}", i + 1),
                });
            }
        }
        let mut sign_consistent = true;
        for e in &self.edges {
            if e.from < e.to {
                if let Some(back) = self.weight(e.to, e.from) {
                    if e.weight.signum() != back.signum() {
                        sign_consistent = false;
                        violations.push(Violation {
                            i: e.from,
                            j: e.to,
                            message: format!(
                                "reciprocal pair {}<->{} has opposite signs ({} vs {})",
                                e.from + 1,
                                e.to + 1,
                                e.weight,
                                back
                            ),
                        });
                    }
                }
            }
        }
        ValidationReport {
            diagonals_stable,
            sign_consistent,
            violations,
        }
    }

    /// Reads a system from a JSON network file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        file.into_system()
    }

    /// Writes the system as a JSON network file (1-based ids).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            nodes: self
                .d
                .iter()
                .enumerate()
                .map(|(i, d)| NodeRecord { id: i + 1, d: *d })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    from: e.from + 1,
                    to: e.to + 1,
                    weight: e.weight,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network file serializes")
    }
}

/// Outcome of [`NetworkSystem::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// True iff every `d_i < 0`.
    pub diagonals_stable: bool,
    /// True iff every reciprocal coupling pair has matching signs.
    pub sign_consistent: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.diagonals_stable && self.sign_consistent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// 0-based node pair; `i == j` marks a diagonal finding.
    pub i: usize,
    pub j: usize,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: usize,
    d: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    from: usize,
    to: usize,
    weight: f64,
}

impl NetworkFile {
    fn into_system(self) -> Result<NetworkSystem> {
        let n = self.nodes.len();
        let mut d = vec![f64::NAN; n];
        let mut seen = vec![false; n];
        for node in &self.nodes {
            if node.id == 0 || node.id > n {
                return Err(Error::Parse {
                    location: format!("node id {}", node.id),
                    message: format!("ids must cover 1..={n} exactly"),
                });
            }
            if seen[node.id - 1] {
                return Err(Error::Parse {
                    location: format!("node id {}", node.id),
                    message: "duplicate node id".into(),
                });
            }
            seen[node.id - 1] = true;
            d[node.id - 1] = node.d;
        }
        let edges = self
            .edges
            .iter()
            .map(|e| {
                if e.from == 0 || e.to == 0 {
                    return Err(Error::Parse {
                        location: format!("edge {} -> {}", e.from, e.to),
                        message: "node ids are 1-based".into(),
                    });
                }
                Ok(Edge {
                    from: e.from - 1,
                    to: e.to - 1,
                    weight: e.weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkSystem::new(d, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(d: &[f64], edges: &[(usize, usize, f64)]) -> NetworkSystem {
        NetworkSystem::new(
            d.to_vec(),
            edges
                .iter()
                .map(|&(from, to, weight)| Edge { from, to, weight })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn matrix_places_edge_weight_at_to_from() {
        let s = sys(&[-1.0, -1.0], &[(0, 1, 1.0)]);
        let m = s.matrix();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]));
    }

    #[test]
    fn single_node_matrix() {
        let s = sys(&[-3.0], &[]);
        assert_eq!(s.matrix(), DMatrix::from_row_slice(1, 1, &[-3.0]));
    }

    #[test]
    fn three_node_matrix() {
        let s = sys(&[-1.0, -2.0, -3.0], &[(0, 1, 2.0), (1, 0, 0.5)]);
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[-1.0, 0.5, 0.0, 2.0, -2.0, 0.0, 0.0, 0.0, -3.0],
        );
        assert_eq!(s.matrix(), expected);
    }

    #[test]
    fn off_diagonal_support_equals_edge_set() {
        let s = sys(
            &[-1.0, -2.0, -0.5, -1.5],
            &[(0, 1, 1.0), (1, 0, -2.0), (2, 3, 0.25), (0, 3, 3.0)],
        );
        let m = s.matrix();
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                let has_edge = s.weight(j, i).is_some();
                assert_eq!(m[(i, j)] != 0.0, has_edge, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn validate_reports_stable_consistent() {
        let s = sys(&[-1.0, -2.0], &[(0, 1, 1.0), (1, 0, 1.0)]);
        let report = s.validate();
        assert!(report.diagonals_stable);
        assert!(report.sign_consistent);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn validate_flags_nonnegative_diagonal() {
        let s = sys(&[-1.0, 0.5], &[]);
        let report = s.validate();
        assert!(!report.diagonals_stable);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].i, 1);
    }

    #[test]
    fn validate_flags_sign_mismatch() {
        let s = sys(&[-1.0, -1.0], &[(0, 1, 1.0), (1, 0, -1.0)]);
        let report = s.validate();
        assert!(!report.sign_consistent);
    }

    #[test]
    fn rejects_duplicate_edge() {
        let err = NetworkSystem::new(
            vec![-1.0, -1.0],
            vec![
                Edge {
                    from: 0,
                    to: 1,
                    weight: 1.0,
                },
                Edge {
                    from: 0,
                    to: 1,
                    weight: 2.0,
                },
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn rejects_zero_weight_and_self_loop() {
        assert!(NetworkSystem::new(
            vec![-1.0, -1.0],
            vec![Edge {
                from: 0,
                to: 1,
                weight: 0.0
            }]
        )
        .is_err());
        assert!(NetworkSystem::new(
            vec![-1.0],
            vec![Edge {
                from: 0,
                to: 0,
                weight: 1.0
            }]
        )
        .is_err());
    }

    #[test]
    fn minimal_document_loads() {
        let s = NetworkSystem::from_json(r#"{"nodes":[{"id":1,"d":-2.0}],"edges":[]}"#).unwrap();
        assert_eq!(s.node_count(), 1);
        assert_eq!(s.intrinsic(), &[-2.0]);
    }

    #[test]
    fn duplicate_edge_document_fails() {
        let text = r#"{"nodes":[{"id":1,"d":-1.0},{"id":2,"d":-1.0}],
            "edges":[{"from":1,"to":2,"weight":1.0},{"from":1,"to":2,"weight":2.0}]}"#;
        assert!(NetworkSystem::from_json(text).is_err());
    }

    #[test]
    fn unknown_key_fails_with_location() {
        let text = r#"{"nodes":[{"id":1,"d":-1.0,"mass":3.0}],"edges":[]}"#;
        match NetworkSystem::from_json(text) {
            Err(Error::Parse { location, .. }) => assert!(location.contains("line")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_weight_fails() {
        let text = r#"{"nodes":[{"id":1,"d":-1.0},{"id":2,"d":-1.0}],
            "edges":[{"from":1,"to":2,"weight":"big"}]}"#;
        assert!(matches!(
            NetworkSystem::from_json(text),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn round_trip_preserves_structure() {
        let s = sys(
            &[-1.0, -2.5, -0.3, -1.000000001, -2.9999999],
            &[(0, 1, 1.5), (1, 0, 0.1), (2, 4, -2.25), (3, 2, 1e-9)],
        );
        let back = NetworkSystem::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_system() -> impl Strategy<Value = NetworkSystem> {
            (2usize..7).prop_flat_map(|n| {
                let d = proptest::collection::vec(-3.0f64..-0.01, n);
                let edges = proptest::collection::btree_set((0..n, 0..n), 0..(n * (n - 1) / 2))
                    .prop_map(move |set| {
                        set.into_iter()
                            .filter(|(a, b)| a != b)
                            .enumerate()
                            .map(|(k, (from, to))| Edge {
                                from,
                                to,
                                weight: 0.1 + 0.37 * (k as f64 + 1.0),
                            })
                            .collect::<Vec<_>>()
                    });
                (d, edges).prop_map(|(d, e)| NetworkSystem::new(d, e).unwrap())
            })
        }

        proptest! {
            #[test]
            fn json_round_trip_is_identity(s in arb_system()) {
                let back = NetworkSystem::from_json(&s.to_json()).unwrap();
                prop_assert_eq!(s, back);
            }

            #[test]
            fn matrix_diagonal_is_intrinsic(s in arb_system()) {
                let m = s.matrix();
                for (i, di) in s.intrinsic().iter().enumerate() {
                    prop_assert_eq!(m[(i, i)], *di);
                }
            }
        }
    }
}
