//! Fixed-step time-domain integration of the uncontrolled and vibrationally
//! controlled systems, trajectory classification, and the empirical scan for
//! the timescale range where the control actually stabilizes.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::averaging::functional_matrix_closed_form;
use crate::design::VibrationSchedule;
use crate::error::{Error, Result};
use crate::exec;
use crate::stability::spectrum;

/// Cap on stored samples; long runs are decimated (the integration itself is
/// unaffected and the final state is always kept).
const MAX_STORED: usize = 400_000;

const DECAY_RATIO: f64 = 0.5;
const GROWTH_RATIO: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimMeta {
    pub system: String,
    pub schedule: String,
    pub epsilon: Option<f64>,
    pub dt: f64,
    /// Every `stride`-th integration step was stored.
    pub stride: usize,
    pub blew_up: bool,
    pub warnings: Vec<String>,
}

/// Time-stamped state samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub meta: SimMeta,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has samples")
    }

    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |x| x.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t}"));
            for v in x.iter() {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decay {
    Decaying,
    Growing,
    Inconclusive,
}

/// Peak-norm comparison between the first and last window of a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct DecayVerdict {
    pub classification: Decay,
    /// Peak norm over the last window divided by peak norm over the first.
    pub shrink_factor: f64,
}

fn rk4_run(
    x0: &DVector<f64>,
    t_final: f64,
    dt: f64,
    mut rhs: impl FnMut(f64, &DVector<f64>, &mut DVector<f64>),
) -> (Vec<f64>, Vec<DVector<f64>>, f64, usize, bool) {
    let n = x0.len();
    let steps = (t_final / dt).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let stride = steps.div_ceil(MAX_STORED).max(1);

    let mut times = Vec::with_capacity(steps / stride + 2);
    let mut states = Vec::with_capacity(steps / stride + 2);
    times.push(0.0);
    states.push(x0.clone());

    let mut x = x0.clone();
    let mut stage = DVector::zeros(n);
    let mut k = [
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
    ];
    let mut blew_up = false;
    for step in 0..steps {
        let t = h * step as f64;
        rhs(t, &x, &mut k[0]);
        stage.copy_from(&x);
        stage.axpy(0.5 * h, &k[0], 1.0);
        rhs(t + 0.5 * h, &stage, &mut k[1]);
        stage.copy_from(&x);
        stage.axpy(0.5 * h, &k[1], 1.0);
        rhs(t + 0.5 * h, &stage, &mut k[2]);
        stage.copy_from(&x);
        stage.axpy(h, &k[2], 1.0);
        rhs(t + h, &stage, &mut k[3]);
        let w = h / 6.0;
        x.axpy(w, &k[0], 1.0);
        x.axpy(2.0 * w, &k[1], 1.0);
        x.axpy(2.0 * w, &k[2], 1.0);
        x.axpy(w, &k[3], 1.0);
        if x.iter().any(|v| !v.is_finite()) {
            blew_up = true;
            break;
        }
        if (step + 1) % stride == 0 || step + 1 == steps {
            times.push(h * (step + 1) as f64);
            states.push(x.clone());
        }
    }
    (times, states, h, stride, blew_up)
}

/// Integrates `x' = M x` with classical fourth-order Runge-Kutta. Blow-up to
/// non-finite values truncates and flags the trajectory instead of erroring.
pub fn simulate_lti(m: &DMatrix<f64>, x0: &DVector<f64>, t_final: f64, dt: f64) -> Trajectory {
    let mut warnings = Vec::new();
    let norm = inf_norm(m);
    if dt * norm > 0.1 {
        warnings.push(format!(
            "dt * ||M|| = {:.3} above 0.1; the step may be too coarse",
            dt * norm
        ));
    }
    run_schedule(m, &VibrationSchedule::empty(), x0, t_final, dt, warnings)
}

/// Integrates the controlled system `x' = (M + (1/eps) V(t/eps)) x`.
///
/// The step must put at least 50 samples inside each period of the fastest
/// scaled frequency; silent aliasing of the vibrations is refused.
pub fn simulate_controlled(
    m: &DMatrix<f64>,
    sched: &VibrationSchedule,
    x0: &DVector<f64>,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_final > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need positive dt and t_final (dt {dt}, t_final {t_final})"
        )));
    }
    if !sched.is_empty() {
        let max_dt = std::f64::consts::TAU * sched.epsilon / (50.0 * sched.max_frequency());
        if dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::UnderResolvedStep { dt, max_dt });
        }
    }
    Ok(run_schedule(m, sched, x0, t_final, dt, Vec::new()))
}

fn run_schedule(
    m: &DMatrix<f64>,
    sched: &VibrationSchedule,
    x0: &DVector<f64>,
    t_final: f64,
    dt: f64,
    warnings: Vec<String>,
) -> Trajectory {
    let n = m.nrows();
    let mut coeff = DMatrix::zeros(n, n);
    let inv_eps = 1.0 / sched.epsilon;
    let (times, states, h, stride, blew_up) = rk4_run(x0, t_final, dt, |t, x, out| {
        coeff.copy_from(m);
        sched.add_matrix_at(t * inv_eps, inv_eps, &mut coeff);
        coeff.mul_to(x, out);
    });
    Trajectory {
        times,
        states,
        meta: SimMeta {
            system: String::new(),
            schedule: String::new(),
            epsilon: if sched.is_empty() {
                None
            } else {
                Some(sched.epsilon)
            },
            dt: h,
            stride,
            blew_up,
            warnings,
        },
    }
}

/// Compares peak norms over the leading and trailing `window` of the
/// trajectory. Peaks rather than endpoint samples, so fast intra-period
/// ripple from the vibrations does not bias the verdict.
pub fn classify_decay(traj: &Trajectory, window: f64) -> Result<DecayVerdict> {
    let (Some(&t0), Some(&t1)) = (traj.times.first(), traj.times.last()) else {
        return Err(Error::InvalidInput("empty trajectory".into()));
    };
    if !(window > 0.0) || t1 - t0 < 2.0 * window {
        return Err(Error::InvalidInput(format!(
            "trajectory span {} shorter than two windows of {window}",
            t1 - t0
        )));
    }
    let mut first_peak = 0.0f64;
    let mut last_peak = 0.0f64;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let norm = x.norm();
        if *t <= t0 + window {
            first_peak = first_peak.max(norm);
        }
        if *t >= t1 - window {
            last_peak = last_peak.max(norm);
        }
    }
    let shrink_factor = if traj.meta.blew_up {
        f64::INFINITY
    } else {
        last_peak / first_peak
    };
    let classification = if shrink_factor < DECAY_RATIO {
        Decay::Decaying
    } else if shrink_factor > GROWTH_RATIO {
        Decay::Growing
    } else {
        Decay::Inconclusive
    };
    Ok(DecayVerdict {
        classification,
        shrink_factor,
    })
}

/// A sensible fixed step for the controlled system: at least 50 samples per
/// fastest scaled period, and small against the instantaneous coefficient
/// magnitude `||M|| + mu_max/eps` so the explicit integrator stays accurate.
pub fn recommended_dt(m: &DMatrix<f64>, sched: &VibrationSchedule) -> f64 {
    let norm = inf_norm(m);
    let mut dt = 0.2 / norm.max(1e-12);
    if !sched.is_empty() {
        let amp = sched
            .entries
            .iter()
            .map(|e| e.amplitude.abs())
            .fold(0.0, f64::max);
        dt = dt.min(0.2 / (norm + amp / sched.epsilon));
        dt = dt.min(std::f64::consts::TAU * sched.epsilon / (50.0 * sched.max_frequency()));
    }
    dt
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Logarithmically spaced grid, inclusive of both endpoints.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && points >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (llo + (lhi - llo) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Default timescale grid for [`find_epsilon_threshold`]: 1e-3 ..= 10.
pub fn default_epsilon_grid() -> Vec<f64> {
    log_grid(1e-3, 10.0, 13)
}

#[derive(Debug, Clone)]
pub struct EpsilonScan {
    /// Largest grid value below which (inclusive) every grid point decays.
    pub threshold: f64,
    pub table: Vec<(f64, DecayVerdict)>,
}

/// Scans the timescale parameter over a grid, simulating and classifying
/// each point. Requires the schedule's averaged matrix to be Hurwitz, since
/// otherwise no timescale can be expected to stabilize. Grid points are
/// independent and evaluated in parallel.
pub fn find_epsilon_threshold(
    m: &DMatrix<f64>,
    sched: &VibrationSchedule,
    x0: &DVector<f64>,
    grid: &[f64],
) -> Result<EpsilonScan> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty epsilon grid".into()));
    }
    let functional = functional_matrix_closed_form(m, sched)?;
    let alpha = spectrum(&functional.matrix)?.abscissa;
    if alpha >= 0.0 {
        return Err(Error::NotHurwitz { abscissa: alpha });
    }
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t_final = 2.0 * (1e4f64).ln() / alpha.abs();

    let verdicts = exec::map_indexed(sorted.len(), |k| {
        let eps = sorted[k];
        let trial = sched.clone().with_epsilon(eps);
        let dt = recommended_dt(m, &trial);
        let window = if trial.is_empty() {
            t_final / 10.0
        } else {
            (5.0 * std::f64::consts::TAU * eps / trial.min_frequency()).min(t_final / 4.0)
        };
        let traj = simulate_controlled(m, &trial, x0, t_final, dt)?;
        classify_decay(&traj, window)
    });

    let mut table = Vec::with_capacity(sorted.len());
    for (eps, verdict) in sorted.iter().zip(verdicts) {
        table.push((*eps, verdict?));
    }
    let mut threshold = None;
    for (eps, verdict) in &table {
        if verdict.classification == Decay::Decaying {
            threshold = Some(*eps);
        } else {
            break;
        }
    }
    match threshold {
        Some(threshold) => Ok(EpsilonScan { threshold, table }),
        None => Err(Error::ThresholdNotFound),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::design_vibrations;
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;

    #[test]
    fn scalar_exponential() {
        let m = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let traj = simulate_lti(&m, &DVector::from_vec(vec![1.0]), 1.0, 1e-3);
        assert_relative_eq!(traj.final_state()[0], (-1.0f64).exp(), epsilon = 1e-8);
        assert!(!traj.meta.blew_up);
    }

    #[test]
    fn zero_matrix_is_constant() {
        let m = DMatrix::zeros(2, 2);
        let x0 = DVector::from_vec(vec![1.0, -2.0]);
        let traj = simulate_lti(&m, &x0, 5.0, 0.01);
        for x in &traj.states {
            assert_eq!(x, &x0);
        }
    }

    #[test]
    fn rotation_preserves_norm() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let traj = simulate_lti(&m, &DVector::from_vec(vec![1.0, 0.0]), 10.0, 1e-3);
        for x in &traj.states {
            assert_relative_eq!(x.norm(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn controlled_with_empty_schedule_is_bit_identical_to_lti() {
        let m = DMatrix::from_row_slice(2, 2, &[-0.3, 1.1, 0.4, -0.8]);
        let x0 = DVector::from_vec(vec![1.0, 1.0]);
        let lti = simulate_lti(&m, &x0, 3.0, 0.01);
        let controlled =
            simulate_controlled(&m, &VibrationSchedule::empty(), &x0, 3.0, 0.01).unwrap();
        assert_eq!(lti.times, controlled.times);
        assert_eq!(lti.states, controlled.states);
    }

    #[test]
    fn under_resolved_step_is_refused() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let controls: BTreeSet<_> = [(0usize, 1usize)].into_iter().collect();
        let sched = design_vibrations(&m, &controls, 10.0)
            .unwrap()
            .with_epsilon(0.01);
        // period of the scaled vibration is ~6.3e-3; dt must be <= ~1.3e-4
        let err = simulate_controlled(&m, &sched, &DVector::from_vec(vec![1.0, 1.0]), 1.0, 1e-3)
            .unwrap_err();
        assert!(matches!(err, Error::UnderResolvedStep { .. }));
    }

    #[test]
    fn blow_up_is_flagged_with_partial_trajectory() {
        let m = DMatrix::from_row_slice(1, 1, &[200.0]);
        let traj = simulate_lti(&m, &DVector::from_vec(vec![1.0]), 40.0, 0.05);
        assert!(traj.meta.blew_up);
        assert!(!traj.states.is_empty());
        assert!(traj.times.last().unwrap() < &40.0);
        assert!(!traj.meta.warnings.is_empty()); // dt * ||M|| = 10
    }

    #[test]
    fn classification_examples() {
        let decay = simulate_lti(
            &DMatrix::from_row_slice(1, 1, &[-1.0]),
            &DVector::from_vec(vec![1.0]),
            10.0,
            0.01,
        );
        assert_eq!(
            classify_decay(&decay, 1.0).unwrap().classification,
            Decay::Decaying
        );

        let growth = simulate_lti(
            &DMatrix::from_row_slice(1, 1, &[1.0]),
            &DVector::from_vec(vec![1.0]),
            10.0,
            0.01,
        );
        assert_eq!(
            classify_decay(&growth, 1.0).unwrap().classification,
            Decay::Growing
        );

        let constant = simulate_lti(
            &DMatrix::zeros(1, 1),
            &DVector::from_vec(vec![1.0]),
            10.0,
            0.01,
        );
        let verdict = classify_decay(&constant, 1.0).unwrap();
        assert_eq!(verdict.classification, Decay::Inconclusive);
        assert_relative_eq!(verdict.shrink_factor, 1.0);
    }

    #[test]
    fn classify_requires_two_windows() {
        let traj = simulate_lti(
            &DMatrix::zeros(1, 1),
            &DVector::from_vec(vec![1.0]),
            1.0,
            0.01,
        );
        assert!(classify_decay(&traj, 0.6).is_err());
    }

    #[test]
    fn halving_dt_barely_moves_terminal_state() {
        let m = DMatrix::from_row_slice(2, 2, &[-0.5, 2.0, 1.0, -1.5]);
        let x0 = DVector::from_vec(vec![1.0, 1.0]);
        let coarse = simulate_lti(&m, &x0, 8.0, 0.02);
        let fine = simulate_lti(&m, &x0, 8.0, 0.01);
        let rel = (coarse.final_state() - fine.final_state()).norm() / fine.final_state().norm();
        assert!(rel < 1e-4, "relative change {rel}");
    }

    #[test]
    fn epsilon_scan_on_designed_two_node_instance() {
        // unstable reciprocal pair; removing one orientation stabilizes
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 1.0, -1.0]);
        let controls: BTreeSet<_> = [(1usize, 0usize)].into_iter().collect(); // edge 1->0, entry (0,1)
        let sched = design_vibrations(&m, &controls, 1.0).unwrap();
        let x0 = DVector::from_vec(vec![1.0, 1.0]);
        let grid = [1e-3, 1e-2, 1e-1];
        let scan = find_epsilon_threshold(&m, &sched, &x0, &grid).unwrap();
        assert!(scan.threshold >= 1e-3);
        assert_eq!(
            scan.table[0].1.classification,
            Decay::Decaying,
            "smallest epsilon must decay"
        );
        for (eps, verdict) in &scan.table {
            if *eps <= scan.threshold {
                assert_eq!(verdict.classification, Decay::Decaying);
            }
        }
    }

    #[test]
    fn epsilon_scan_requires_hurwitz_functional_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = find_epsilon_threshold(
            &m,
            &VibrationSchedule::empty(),
            &DVector::from_vec(vec![1.0, 1.0]),
            &[0.1, 1.0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotHurwitz { .. }));
    }

    #[test]
    fn epsilon_scan_with_no_schedule_on_stable_system() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let grid = [0.01, 0.1, 1.0];
        let scan = find_epsilon_threshold(
            &m,
            &VibrationSchedule::empty(),
            &DVector::from_vec(vec![1.0, 1.0]),
            &grid,
        )
        .unwrap();
        assert_eq!(scan.threshold, 1.0);
        assert!(scan
            .table
            .iter()
            .all(|(_, v)| v.classification == Decay::Decaying));
    }

    #[test]
    fn csv_shape() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let traj = simulate_lti(&m, &DVector::from_vec(vec![1.0, 2.0]), 0.1, 0.05);
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2");
        assert!(csv.lines().count() >= 3);
    }
}
