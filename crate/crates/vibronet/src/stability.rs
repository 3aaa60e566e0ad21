//! Spectral analysis: eigenvalues, spectral abscissa, Hurwitz tests, and the
//! triangularizable-network shortcut that reads the spectrum off the
//! diagonal.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::NetworkSystem;

/// Full eigenvalue set of a real square matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex<f64>>,
    /// Largest real part.
    pub abscissa: f64,
}

impl Spectrum {
    fn from_eigenvalues(eigenvalues: Vec<Complex<f64>>) -> Self {
        let abscissa = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            eigenvalues,
            abscissa,
        }
    }

    pub fn to_report(&self) -> SpectrumReport {
        SpectrumReport {
            eigenvalues: self
                .eigenvalues
                .iter()
                .map(|z| ComplexPair { re: z.re, im: z.im })
                .collect(),
            abscissa: self.abscissa,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<ComplexPair>,
    pub abscissa: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComplexPair {
    pub re: f64,
    pub im: f64,
}

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_SWEEPS: usize = 10_000;

/// Dense nonsymmetric eigensolve (real Schur reduction).
pub fn spectrum(matrix: &DMatrix<f64>) -> Result<Spectrum> {
    assert_eq!(matrix.nrows(), matrix.ncols(), "square matrix required");
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(matrix.clone(), SCHUR_EPS, SCHUR_MAX_SWEEPS)
        .ok_or(Error::NonConvergence {
            iterations: SCHUR_MAX_SWEEPS,
            last_change: f64::NAN,
        })?;
    Ok(Spectrum::from_eigenvalues(
        schur.complex_eigenvalues().iter().copied().collect(),
    ))
}

/// True iff the spectral abscissa is strictly below `-margin`.
pub fn is_hurwitz(matrix: &DMatrix<f64>, margin: f64) -> Result<bool> {
    Ok(spectrum(matrix)?.abscissa < -margin)
}

/// Spectrum of a network whose coupling graph is acyclic: a topological
/// relabelling triangularizes the matrix, so the eigenvalues are exactly the
/// intrinsic dynamics. No eigensolve; serves as ground truth for `spectrum`.
pub fn dag_spectrum(sys: &NetworkSystem) -> Result<Spectrum> {
    sys.graph().topological_order()?;
    Ok(Spectrum::from_eigenvalues(
        sys.intrinsic()
            .iter()
            .map(|&d| Complex::new(d, 0.0))
            .collect(),
    ))
}

/// Greedy multiset distance: repeatedly matches the closest remaining pair
/// and returns the largest matched distance (infinite on length mismatch).
/// Eigensolver output order is unspecified, so comparisons go through this.
pub fn spectral_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst = 0.0f64;
    for _ in 0..a.len() {
        let mut best = f64::INFINITY;
        let mut pick = (0, 0);
        for (i, za) in a.iter().enumerate() {
            if used_a[i] {
                continue;
            }
            for (j, zb) in b.iter().enumerate() {
                if used_b[j] {
                    continue;
                }
                let d = (za - zb).norm();
                if d < best {
                    best = d;
                    pick = (i, j);
                }
            }
        }
        used_a[pick.0] = true;
        used_b[pick.1] = true;
        worst = worst.max(best);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Edge, NetworkSystem};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn diagonal_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let s = spectrum(&m).unwrap();
        assert_relative_eq!(s.abscissa, -1.0, max_relative = 1e-12);
        assert!(spectral_distance(
            &s.eigenvalues,
            &[Complex::new(-1.0, 0.0), Complex::new(-2.0, 0.0)]
        ) < 1e-12);
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let s = spectrum(&m).unwrap();
        assert!(s.abscissa.abs() < 1e-12);
        assert!(spectral_distance(
            &s.eigenvalues,
            &[Complex::new(0.0, 1.0), Complex::new(0.0, -1.0)]
        ) < 1e-12);
        assert!(!is_hurwitz(&m, 0.0).unwrap());
    }

    #[test]
    fn companion_matrix_roots() {
        // companion of x^2 - 3x + 2, roots 1 and 2
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 3.0]);
        let s = spectrum(&m).unwrap();
        assert!(spectral_distance(
            &s.eigenvalues,
            &[Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)]
        ) < 1e-10);
    }

    #[test]
    fn hurwitz_margin() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        assert!(is_hurwitz(&m, 0.0).unwrap());
        assert!(is_hurwitz(&m, 0.5).unwrap());
        assert!(!is_hurwitz(&m, 1.0).unwrap());
    }

    #[test]
    fn dag_spectrum_examples() {
        let chain = NetworkSystem::new(
            vec![-1.0, -2.0, -3.0],
            vec![
                Edge {
                    from: 0,
                    to: 1,
                    weight: 17.0,
                },
                Edge {
                    from: 1,
                    to: 2,
                    weight: -5.0,
                },
            ],
        )
        .unwrap();
        let s = dag_spectrum(&chain).unwrap();
        assert_eq!(s.abscissa, -1.0);
        let eig = spectrum(&chain.matrix()).unwrap();
        assert!(spectral_distance(&s.eigenvalues, &eig.eigenvalues) < 1e-10);

        let single = NetworkSystem::new(vec![-0.25], vec![]).unwrap();
        assert_eq!(dag_spectrum(&single).unwrap().eigenvalues[0].re, -0.25);

        let cyclic = NetworkSystem::new(
            vec![-1.0, -1.0],
            vec![
                Edge {
                    from: 0,
                    to: 1,
                    weight: 1.0,
                },
                Edge {
                    from: 1,
                    to: 0,
                    weight: 1.0,
                },
            ],
        )
        .unwrap();
        assert!(matches!(dag_spectrum(&cyclic), Err(Error::Cyclic(_))));
    }

    #[test]
    fn random_dag_spectrum_matches_eigensolver() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let n = 10;
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.gen::<f64>() < 0.3 {
                    edges.push(Edge {
                        from: a,
                        to: b,
                        weight: rng.gen_range(-2.0..2.0f64).max(0.1),
                    });
                }
            }
        }
        let d: Vec<f64> = (0..n).map(|k| -0.2 - 0.27 * k as f64).collect();
        let sys = NetworkSystem::new(d, edges).unwrap();
        let oracle = dag_spectrum(&sys).unwrap();
        let solved = spectrum(&sys.matrix()).unwrap();
        assert!(spectral_distance(&oracle.eigenvalues, &solved.eigenvalues) < 1e-8);
    }

    #[test]
    fn spectrum_is_permutation_invariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = 6;
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.5..1.5));
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let permuted = DMatrix::from_fn(n, n, |i, j| {
                m[(perm.iter().position(|&p| p == i).unwrap(),
                   perm.iter().position(|&p| p == j).unwrap())]
            });
            let a = spectrum(&m).unwrap();
            let b = spectrum(&permuted).unwrap();
            assert!(spectral_distance(&a.eigenvalues, &b.eigenvalues) < 1e-8);
        }
    }
}
