//! Simulated experiments built from the cavity, switch and spin models.

mod fringe;
mod montecarlo;
mod ramsey;
mod spectra;

pub use fringe::{
    fringe_phase_fit, ramsey_fringe_visibility, wrap_to_pi, FringeFit, VisibilityFit,
    VisibilityFitOptions,
};
pub use montecarlo::{
    angular_distance, conditional_phase_experiment, expected_phase_switch, fringe_shift,
    normalize_coincidences, sample_photon_number, simulate_phase_switch, CoincidenceSeries,
    ConditionalPhaseResult, ControlPulseConfig, PhaseSwitchCounts, PhaseSwitchExpectation,
};
pub use ramsey::{
    ramsey_fringe, ramsey_p_down, ramsey_p_down_with_control, ramsey_population_map,
    ControlReflection, RamseyConfig,
};
pub use spectra::{linear_grid, probe_spectrum};
