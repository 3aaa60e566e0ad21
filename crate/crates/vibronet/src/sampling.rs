//! Random network instances for experiments, tests, and benchmarks: stable
//! nodes, an acyclic unidirected part, plus a handful of sign-consistent
//! reciprocal pairs. Everything is driven by a caller-supplied RNG, so runs
//! are reproducible from a seed.

use rand::Rng;

use crate::averaging::has_chained_controls;
use crate::graph::place_controls;
use crate::model::{Edge, NetworkSystem};

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    /// Inclusive node-count range.
    pub node_range: (usize, usize),
    /// Intrinsic dynamics are `-magnitude` with magnitude in this range.
    pub diag_magnitude: (f64, f64),
    /// Minimum pairwise gap between intrinsic rates. Keeps spectra
    /// well-separated so spectral comparisons stay well-conditioned.
    pub min_diag_gap: f64,
    /// Coupling magnitudes; signs are random (shared within a pair).
    pub weight_magnitude: (f64, f64),
    /// Inclusive range for the number of reciprocal pairs.
    pub pair_range: (usize, usize),
    /// Expected out-edges per node in the unidirected part.
    pub edge_rate: f64,
    /// Resample until the placement's control set has no head-to-tail
    /// chains — the closed-form average's validity domain.
    pub chain_free_controls: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            node_range: (4, 10),
            diag_magnitude: (0.1, 3.0),
            min_diag_gap: 0.02,
            weight_magnitude: (0.1, 3.0),
            pair_range: (1, 4),
            edge_rate: 1.8,
            chain_free_controls: false,
        }
    }
}

fn random_magnitude(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    rng.gen_range(range.0..range.1)
}

fn shuffled(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// Draws one instance. The unidirected part is a random DAG (edges follow a
/// hidden node order); reciprocal pairs go on unordered node pairs that are
/// not yet adjacent, shared endpoints allowed.
pub fn random_network(cfg: &SuiteConfig, rng: &mut impl Rng) -> NetworkSystem {
    'instance: loop {
        let n = rng.gen_range(cfg.node_range.0..=cfg.node_range.1);
        let d = loop {
            let d: Vec<f64> = (0..n)
                .map(|_| -random_magnitude(rng, cfg.diag_magnitude))
                .collect();
            let mut sorted = d.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if n < 2 || sorted.windows(2).all(|w| w[1] - w[0] >= cfg.min_diag_gap) {
                break d;
            }
        };

        let order = shuffled(n, rng);
        let p = (cfg.edge_rate / (n.max(2) as f64 - 1.0)).min(0.5);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.gen::<f64>() < p {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    edges.push(Edge {
                        from: order[a],
                        to: order[b],
                        weight: sign * random_magnitude(rng, cfg.weight_magnitude),
                    });
                }
            }
        }

        let wanted_pairs = rng.gen_range(cfg.pair_range.0..=cfg.pair_range.1);
        let mut placed = 0;
        let mut attempts = 0;
        while placed < wanted_pairs && attempts < 200 {
            attempts += 1;
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i == j {
                continue;
            }
            let adjacent = edges
                .iter()
                .any(|e| (e.from == i && e.to == j) || (e.from == j && e.to == i));
            if adjacent {
                continue;
            }
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            edges.push(Edge {
                from: i,
                to: j,
                weight: sign * random_magnitude(rng, cfg.weight_magnitude),
            });
            edges.push(Edge {
                from: j,
                to: i,
                weight: sign * random_magnitude(rng, cfg.weight_magnitude),
            });
            placed += 1;
        }
        if placed < cfg.pair_range.0 {
            continue 'instance;
        }

        let sys = NetworkSystem::new(d, edges).expect("sampled edges are valid");
        if cfg.chain_free_controls {
            let placement = place_controls(&sys.graph()).expect("residual is a DAG");
            let cells: Vec<(usize, usize)> = placement
                .control_set
                .iter()
                .map(|&(from, to)| (to, from))
                .collect();
            if has_chained_controls(&cells) {
                continue 'instance;
            }
        }
        return sys;
    }
}

/// Random acyclic network (no reciprocal pairs at all).
pub fn random_dag_network(cfg: &SuiteConfig, rng: &mut impl Rng) -> NetworkSystem {
    let mut cfg = cfg.clone();
    cfg.pair_range = (0, 0);
    cfg.chain_free_controls = false;
    random_network(&cfg, rng)
}

/// Multiplies all coupling weights by `factor` until the spectral abscissa
/// reaches `target_abscissa`, returning the destabilized system and its
/// abscissa. `None` if 200 rounds never get there (e.g. no feedback loop to
/// amplify).
pub fn scale_couplings_until_unstable(
    sys: &NetworkSystem,
    factor: f64,
    target_abscissa: f64,
) -> Option<(NetworkSystem, f64)> {
    assert!(factor > 1.0);
    let mut edges: Vec<Edge> = sys.edges().to_vec();
    for _ in 0..200 {
        let candidate = NetworkSystem::new(sys.intrinsic().to_vec(), edges.clone())
            .expect("scaling keeps the structure valid");
        let alpha = crate::stability::spectrum(&candidate.matrix())
            .expect("spectrum of finite matrix")
            .abscissa;
        if alpha >= target_abscissa {
            return Some((candidate, alpha));
        }
        for e in &mut edges {
            e.weight *= factor;
        }
    }
    None
}
