//! Simulation and fitting toolkit for a spin-photon quantum phase switch: a
//! charged quantum dot strongly coupled to a one-sided optical cavity.
//!
//! Units throughout: linear frequencies and rates in GHz, times in ns, pulse
//! powers in μW, phases in radians.

pub mod cli;
pub mod config;
pub mod cqed;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod fidelity;
pub mod spin;
pub mod table;

pub use cqed::{
    branch_intensity, channel_intensity, cooperativity, on_resonance_coefficients,
    reflect_polarization, reflection_amplitude, Analyzer, CavitySpinParams, JonesVector,
    PolarizationState, ReflectedPhoton, ReflectionAmplitude, SpinBranch, TransitionParams,
};
pub use error::{Error, Result};
pub use fidelity::{
    conditional_phase, fidelity_report, spin_backaction, switching_fidelity, FidelityReport,
    PhaseShiftResult,
};
pub use num_complex::Complex64;
pub use spin::{
    larmor_precess, larmor_precess_segment, optical_pump, rotate, rotation_angle_from_power,
    DephasingEnvelope, SpinEnvironment, SpinState,
};
