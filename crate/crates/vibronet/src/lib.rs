//! Open-loop vibrational stabilization of linear network systems.
//!
//! The library decides, from network structure alone, whether a system
//! `x' = (D + A) x` of individually stable nodes can be stabilized by
//! injecting zero-mean high-frequency vibrations into existing couplings; it
//! places those vibrations (one orientation of each reciprocal pair), designs
//! their amplitudes and frequencies, and verifies the result three ways:
//! averaging analysis (closed form against a numeric quadrature oracle),
//! time-domain simulation of the controlled system, and frequency-domain
//! robustness bounds.
//!
//! The central objects are [`model::NetworkSystem`] (the dynamics),
//! [`graph::PlacementResult`] (which couplings to vibrate),
//! [`design::VibrationSchedule`] (the sinusoids), and
//! [`averaging::FunctionalMatrix`] (the averaged system the control
//! effectively realizes).

pub mod averaging;
pub mod design;
pub mod error;
pub mod exec;
pub mod graph;
pub mod model;
pub mod robustness;
pub mod sampling;
pub mod sim;
pub mod stability;

pub use averaging::{
    averaged_matrix_numeric, functional_matrix_closed_form, functional_network, AveragingMethod,
    FunctionalMatrix,
};
pub use design::{design_vibrations, DesignPhase, VibrationSchedule};
pub use error::{Error, Result};
pub use graph::{place_controls, structural_stabilizability, DirectedGraph, PlacementResult};
pub use model::{Edge, NetworkSystem};
pub use robustness::{hinf_norm, stress_test, ursr_lower_bound};
pub use sim::{classify_decay, find_epsilon_threshold, simulate_controlled, simulate_lti};
pub use stability::{dag_spectrum, is_hurwitz, spectrum, Spectrum};
