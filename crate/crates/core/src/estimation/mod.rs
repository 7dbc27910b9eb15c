//! Parameter recovery from measured or simulated spectra.

mod fits;
mod optimizer;
mod spectrum;

pub use fits::{
    add_peak_normalized_noise, fit_bare_cavity, fit_bare_cavity_joint, fit_coupled, fit_mixture,
    model_spectrum, AmplitudeMode, BareCavityFit, BareFitOptions, CavityCalibration, CoupledFit,
    CoupledFitOptions, MixtureFitOptions,
};
pub use optimizer::{least_squares, FitResult, LeastSquaresOptions};
pub use spectrum::{convolve_gaussian, Spectrum};
