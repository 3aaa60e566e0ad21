//! Sinusoidal vibration schedules constrained to the network's sparsity
//! pattern, and the amplitude/frequency design that functionally removes the
//! targeted couplings.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One vibrated matrix entry: `v(s) = amplitude * sin(frequency * s + phase)`
/// added at `(row, col)` in the fast timescale `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibrationEntry {
    pub row: usize,
    pub col: usize,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// A full vibration schedule plus the timescale parameter `epsilon`: the
/// physical input applied to the system is `(1/epsilon) * V(t/epsilon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VibrationSchedule {
    pub entries: Vec<VibrationEntry>,
    pub epsilon: f64,
}

/// Phase convention for designed schedules. `Sine` is the plain `sin(ωs)`
/// form; `Cosine` shifts by -pi/2, which makes each vibration's primitive
/// zero-mean so numeric and closed-form averaging agree entrywise instead of
/// only spectrally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignPhase {
    Sine,
    Cosine,
}

impl DesignPhase {
    pub fn radians(self) -> f64 {
        match self {
            DesignPhase::Sine => 0.0,
            DesignPhase::Cosine => -std::f64::consts::FRAC_PI_2,
        }
    }
}

/// Frequency multiplier radicands: 1 followed by the primes. Square roots of
/// distinct squarefree integers have pairwise irrational ratios, which keeps
/// all designed frequencies incommensurable.
fn radicand(k: usize) -> u64 {
    if k == 0 {
        return 1;
    }
    let mut found = 0;
    let mut candidate = 1u64;
    while found < k {
        candidate += 1;
        if (2..=candidate / 2).all(|d| candidate % d != 0) {
            found += 1;
        }
    }
    candidate
}

/// Designs amplitudes and frequencies that zero the averaged value of every
/// controlled entry.
///
/// `controls` are edges `(from, to)`; the vibration for edge `(j, i)` sits on
/// matrix entry `(i, j)`. Entries are ordered by `(row, col)` and the k-th
/// gets frequency `omega_base * sqrt(q_k)` with `q = 1, 2, 3, 5, 7, ...`;
/// its amplitude is `frequency * sqrt(2 * m_ij / m_ji)`, which makes the
/// averaged entry `m_ij - (amplitude/frequency)^2 / 2 * m_ji` vanish exactly.
pub fn design_vibrations(
    matrix: &DMatrix<f64>,
    controls: &BTreeSet<(usize, usize)>,
    omega_base: f64,
) -> Result<VibrationSchedule> {
    design_vibrations_with_phase(matrix, controls, omega_base, DesignPhase::Sine)
}

pub fn design_vibrations_with_phase(
    matrix: &DMatrix<f64>,
    controls: &BTreeSet<(usize, usize)>,
    omega_base: f64,
    phase: DesignPhase,
) -> Result<VibrationSchedule> {
    if !(omega_base > 0.0) {
        return Err(Error::InvalidInput(format!(
            "omega_base must be positive, got {omega_base}"
        )));
    }
    let mut cells: Vec<(usize, usize)> = controls.iter().map(|&(from, to)| (to, from)).collect();
    cells.sort_unstable();
    let mut entries = Vec::with_capacity(cells.len());
    for (k, &(row, col)) in cells.iter().enumerate() {
        let forward = matrix[(row, col)];
        let backward = matrix[(col, row)];
        if forward == 0.0 || backward == 0.0 {
            return Err(Error::Design {
                row: row + 1,
                col: col + 1,
                reason: "entry is not part of a bidirected pair".into(),
            });
        }
        if forward.signum() != backward.signum() {
            return Err(Error::Design {
                row: row + 1,
                col: col + 1,
                reason: format!("sign-inconsistent pair ({forward} vs {backward})"),
            });
        }
        let frequency = omega_base * (radicand(k) as f64).sqrt();
        let amplitude = frequency * (2.0 * forward / backward).sqrt();
        entries.push(VibrationEntry {
            row,
            col,
            amplitude,
            frequency,
            phase: phase.radians(),
        });
    }
    Ok(VibrationSchedule {
        entries,
        epsilon: 1.0,
    })
}

impl VibrationSchedule {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
            epsilon: 1.0,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True iff every scheduled entry sits on a nonzero entry of `matrix`.
    pub fn respects_sparsity(&self, matrix: &DMatrix<f64>) -> bool {
        self.entries
            .iter()
            .all(|e| e.row < matrix.nrows() && e.col < matrix.ncols() && matrix[(e.row, e.col)] != 0.0)
    }

    pub fn max_frequency(&self) -> f64 {
        self.entries.iter().map(|e| e.frequency).fold(0.0, f64::max)
    }

    pub fn min_frequency(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.frequency)
            .fold(f64::INFINITY, f64::min)
    }

    /// `V(s)` in the fast timescale.
    pub fn matrix_at(&self, n: usize, s: f64) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(n, n);
        self.add_matrix_at(s, 1.0, &mut v);
        v
    }

    /// `(1/epsilon) * V(t/epsilon)` in physical time.
    pub fn scaled_matrix_at(&self, n: usize, t: f64) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(n, n);
        self.add_matrix_at(t / self.epsilon, 1.0 / self.epsilon, &mut v);
        v
    }

    /// Adds `scale * V(s)` into `out` without allocating.
    pub(crate) fn add_matrix_at(&self, s: f64, scale: f64, out: &mut DMatrix<f64>) {
        for e in &self.entries {
            out[(e.row, e.col)] += scale * e.amplitude * (e.frequency * s + e.phase).sin();
        }
    }

    /// Controlled cells as `(row, col)` matrix positions.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(|e| (e.row, e.col)).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScheduleFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        file.into_schedule()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = ScheduleFile {
            epsilon: self.epsilon,
            entries: self
                .entries
                .iter()
                .map(|e| EntryRecord {
                    row: e.row + 1,
                    col: e.col + 1,
                    mu: e.amplitude,
                    omega: e.frequency,
                    phi: e.phase,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("schedule serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    epsilon: f64,
    entries: Vec<EntryRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRecord {
    row: usize,
    col: usize,
    mu: f64,
    omega: f64,
    phi: f64,
}

impl ScheduleFile {
    fn into_schedule(self) -> Result<VibrationSchedule> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Parse {
                location: "epsilon".into(),
                message: format!("epsilon must be positive, got {}", self.epsilon),
            });
        }
        let mut entries = Vec::with_capacity(self.entries.len());
        for r in &self.entries {
            if r.row == 0 || r.col == 0 {
                return Err(Error::Parse {
                    location: format!("entry ({},{})", r.row, r.col),
                    message: "row/col are 1-based".into(),
                });
            }
            if !(r.omega > 0.0) {
                return Err(Error::Parse {
                    location: format!("entry ({},{})", r.row, r.col),
                    message: format!("frequency must be positive, got {}", r.omega),
                });
            }
            entries.push(VibrationEntry {
                row: r.row - 1,
                col: r.col - 1,
                amplitude: r.mu,
                frequency: r.omega,
                phase: r.phi,
            });
        }
        for a in 0..entries.len() {
            for b in (a + 1)..entries.len() {
                if entries[a].frequency == entries[b].frequency {
                    return Err(Error::Parse {
                        location: format!("entry ({},{})", entries[b].row + 1, entries[b].col + 1),
                        message: "frequencies must be pairwise distinct".into(),
                    });
                }
            }
        }
        Ok(VibrationSchedule {
            entries,
            epsilon: self.epsilon,
        })
    }
}
