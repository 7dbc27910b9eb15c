//! Reflection from a one-sided cavity containing a spin-selective emitter.
//!
//! All rates and detunings are linear frequencies in GHz (the ν = ω/2π
//! convention). Every expression below depends only on ratios of rates, so
//! the choice of unit cancels as long as it is applied uniformly.
//!
//! Detunings are measured as `ν_probe − ν_cavity`; a transition's own
//! detuning is `ν_transition − ν_cavity`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Ground-state spin orientation of the trapped electron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinBranch {
    Up,
    Down,
}

impl SpinBranch {
    pub fn other(self) -> Self {
        match self {
            SpinBranch::Up => SpinBranch::Down,
            SpinBranch::Down => SpinBranch::Up,
        }
    }
}

impl fmt::Display for SpinBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpinBranch::Up => "up",
            SpinBranch::Down => "down",
        })
    }
}

/// One optical transition of the charged dot and the spin state it couples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionParams {
    pub detuning_from_cavity: f64,
    pub g: f64,
    pub gamma: f64,
    pub branch: SpinBranch,
}

impl TransitionParams {
    pub fn new(branch: SpinBranch, detuning_from_cavity: f64, g: f64, gamma: f64) -> Result<Self> {
        let t = Self {
            detuning_from_cavity,
            g,
            gamma,
            branch,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.detuning_from_cavity.is_finite() {
            return Err(Error::domain("transition detuning must be finite"));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::domain(format!(
                "coupling g must be >= 0, got {}",
                self.g
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!(
                "dipole decay gamma must be > 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Cavity decay rates plus the list of dot transitions.
///
/// Which spin branch a transition belongs to is carried by the transition
/// itself, so the same cavity can host any assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct CavitySpinParams {
    pub kappa: f64,
    pub kappa_ex: f64,
    pub transitions: Vec<TransitionParams>,
    /// Reflection amplitude of the polarization orthogonal to the cavity mode.
    pub r_x: Complex64,
}

impl CavitySpinParams {
    pub fn new(kappa: f64, kappa_ex: f64, transitions: Vec<TransitionParams>) -> Result<Self> {
        let p = Self {
            kappa,
            kappa_ex,
            transitions,
            r_x: Complex64::new(1.0, 0.0),
        };
        p.validate()?;
        Ok(p)
    }

    /// Bare cavity described by its total decay rate and interference contrast.
    pub fn bare(kappa: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::domain(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Self::new(kappa, alpha * kappa, Vec::new())
    }

    pub fn with_transition(mut self, t: TransitionParams) -> Result<Self> {
        t.validate()?;
        self.transitions.push(t);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::domain(format!(
                "kappa must be > 0, got {}",
                self.kappa
            )));
        }
        if !(self.kappa_ex >= 0.0 && self.kappa_ex <= self.kappa) {
            return Err(Error::domain(format!(
                "kappa_ex must satisfy 0 <= kappa_ex <= kappa, got {} (kappa = {})",
                self.kappa_ex, self.kappa
            )));
        }
        if !(self.r_x.is_finite() && self.r_x.norm() <= 1.0 + 1e-12) {
            return Err(Error::domain(
                "r_x must be a passive reflection amplitude (|r_x| <= 1)",
            ));
        }
        for t in &self.transitions {
            t.validate()?;
        }
        Ok(())
    }

    /// Interference contrast `κ_ex / κ`.
    pub fn alpha(&self) -> f64 {
        self.kappa_ex / self.kappa
    }

    pub fn branch_transitions(
        &self,
        branch: SpinBranch,
    ) -> impl Iterator<Item = &TransitionParams> {
        self.transitions.iter().filter(move |t| t.branch == branch)
    }
}

/// Complex reflection coefficient of the cavity-polarized mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionAmplitude(pub Complex64);

impl ReflectionAmplitude {
    pub fn real(r: f64) -> Self {
        Self(Complex64::new(r, 0.0))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }

    pub fn norm(self) -> f64 {
        self.0.norm()
    }

    pub fn arg(self) -> f64 {
        self.0.arg()
    }
}

/// `C = 2g² / (κγ)`.
pub fn cooperativity(g: f64, kappa: f64, gamma: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::domain(format!("kappa must be > 0, got {kappa}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::domain(format!("gamma must be > 0, got {gamma}")));
    }
    Ok(2.0 * g * g / (kappa * gamma))
}

/// Reflection coefficients `(r_up, r_down)` for a probe resonant with both the
/// cavity and the spin-up transition.
pub fn on_resonance_coefficients(alpha: f64, cooperativity: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if !(cooperativity >= 0.0) {
        return Err(Error::domain(format!(
            "cooperativity must be >= 0, got {cooperativity}"
        )));
    }
    let r_up = 1.0 - 2.0 * alpha / (1.0 + cooperativity);
    let r_down = -(2.0 * alpha - 1.0);
    Ok((r_up, r_down))
}

/// Input-output reflection coefficient of the cavity mode for one spin branch:
///
/// `r(δ) = 1 − κ_ex / (iδ + κ/2 + Σ_j g_j² / (i(δ − δ_j) + γ_j))`
///
/// where the sum runs over the transitions attached to `branch`.
pub fn reflection_amplitude(
    params: &CavitySpinParams,
    branch: SpinBranch,
    probe_detuning: f64,
) -> ReflectionAmplitude {
    let mut denom = Complex64::new(params.kappa / 2.0, probe_detuning);
    for t in params.branch_transitions(branch) {
        if t.g == 0.0 {
            continue;
        }
        let dot = Complex64::new(t.gamma, probe_detuning - t.detuning_from_cavity);
        denom += t.g * t.g / dot;
    }
    ReflectionAmplitude(Complex64::new(1.0, 0.0) - params.kappa_ex / denom)
}

/// Unnormalized two-component Jones vector in the `{|x⟩, |y⟩}` basis, where
/// `|y⟩` is parallel to the cavity-mode polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub x: Complex64,
    pub y: Complex64,
}

impl JonesVector {
    pub fn new(x: Complex64, y: Complex64) -> Self {
        Self { x, y }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x.norm_sqr() + self.y.norm_sqr()
    }

    /// `⟨other|self⟩`.
    pub fn inner(&self, other: &JonesVector) -> Complex64 {
        other.x.conj() * self.x + other.y.conj() * self.y
    }
}

/// Normalized photon polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState(JonesVector);

impl PolarizationState {
    pub fn new(c_x: Complex64, c_y: Complex64) -> Result<Self> {
        Self::normalize(JonesVector::new(c_x, c_y))
    }

    pub fn normalize(v: JonesVector) -> Result<Self> {
        let n2 = v.norm_sqr();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::DegenerateState(format!(
                "cannot normalize Jones vector with squared norm {n2}"
            )));
        }
        let n = n2.sqrt();
        Ok(Self(JonesVector::new(v.x / n, v.y / n)))
    }

    /// `(|x⟩ + i|y⟩)/√2`.
    pub fn right_circular() -> Self {
        Self(JonesVector::new(
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            I * FRAC_1_SQRT_2,
        ))
    }

    /// `(|x⟩ − i|y⟩)/√2`.
    pub fn left_circular() -> Self {
        Self(JonesVector::new(
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            -I * FRAC_1_SQRT_2,
        ))
    }

    pub fn x() -> Self {
        Self(JonesVector::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ))
    }

    pub fn y() -> Self {
        Self(JonesVector::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ))
    }

    pub fn c_x(&self) -> Complex64 {
        self.0.x
    }

    pub fn c_y(&self) -> Complex64 {
        self.0.y
    }

    pub fn jones(&self) -> JonesVector {
        self.0
    }

    /// `|⟨other|self⟩|²`.
    pub fn overlap(&self, other: &PolarizationState) -> f64 {
        self.0.inner(&other.0).norm_sqr()
    }
}

/// Photon state after reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectedPhoton {
    /// Reflected amplitudes before renormalization.
    pub amplitudes: JonesVector,
    /// Renormalized output state, i.e. conditioned on the photon coming back.
    pub state: PolarizationState,
}

impl ReflectedPhoton {
    /// Probability weight of the photon surviving reflection.
    pub fn weight(&self) -> f64 {
        self.amplitudes.norm_sqr()
    }
}

/// Apply the cavity reflection to a photon: `|y⟩` picks up `r`, `|x⟩` picks up `r_x`.
pub fn reflect_polarization(
    r: ReflectionAmplitude,
    psi_in: &PolarizationState,
    r_x: Complex64,
) -> Result<ReflectedPhoton> {
    let amplitudes = JonesVector::new(r_x * psi_in.c_x(), r.0 * psi_in.c_y());
    let state = PolarizationState::normalize(amplitudes)?;
    Ok(ReflectedPhoton { amplitudes, state })
}

/// Polarization analyzer in the detection path, referenced to a
/// right-circular input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analyzer {
    #[serde(alias = "co")]
    CoCircular,
    #[serde(alias = "cross")]
    CrossCircular,
    X,
    Y,
}

impl Analyzer {
    pub fn state(self) -> PolarizationState {
        match self {
            Analyzer::CoCircular => PolarizationState::right_circular(),
            Analyzer::CrossCircular => PolarizationState::left_circular(),
            Analyzer::X => PolarizationState::x(),
            Analyzer::Y => PolarizationState::y(),
        }
    }
}

impl fmt::Display for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Analyzer::CoCircular => "co",
            Analyzer::CrossCircular => "cross",
            Analyzer::X => "x",
            Analyzer::Y => "y",
        })
    }
}

/// Intensity transmitted by the analyzer, `|⟨analyzer|ψ⟩|²`, for unnormalized
/// reflected amplitudes.
pub fn channel_intensity(psi_out: &JonesVector, analyzer: Analyzer) -> f64 {
    psi_out.inner(&analyzer.state().jones()).norm_sqr()
}

/// Detected intensity for a right-circular probe reflected off one spin branch.
pub fn branch_intensity(
    params: &CavitySpinParams,
    branch: SpinBranch,
    probe_detuning: f64,
    analyzer: Analyzer,
) -> f64 {
    let r = reflection_amplitude(params, branch, probe_detuning);
    let rc = PolarizationState::right_circular();
    let out = JonesVector::new(params.r_x * rc.c_x(), r.0 * rc.c_y());
    channel_intensity(&out, analyzer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn device_cavity() -> CavitySpinParams {
        CavitySpinParams::new(
            35.9,
            0.81 * 35.9,
            vec![TransitionParams::new(SpinBranch::Up, 0.0, 10.2, 2.9).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn cooperativity_values() {
        let c = cooperativity(10.2, 35.9, 2.9).unwrap();
        assert!((c - 2.0).abs() < 0.01, "{c}");
        assert_eq!(cooperativity(0.0, 35.9, 2.9).unwrap(), 0.0);
        let c2 = cooperativity(20.4, 35.9, 2.9).unwrap();
        assert!((c2 / c - 4.0).abs() < 1e-12);
        assert!(cooperativity(1.0, 0.0, 1.0).is_err());
        assert!(cooperativity(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn on_resonance_limits() {
        let (up, down) = on_resonance_coefficients(1.0, 1e12).unwrap();
        assert!((up - 1.0).abs() < 1e-9);
        assert_eq!(down, -1.0);
        let (_, down) = on_resonance_coefficients(0.5, 3.0).unwrap();
        assert_eq!(down, 0.0);
        let (up, down) = on_resonance_coefficients(0.81, 2.0).unwrap();
        assert!((up - 0.46).abs() < 1e-12);
        assert!((down + 0.62).abs() < 1e-12);
        assert!(on_resonance_coefficients(1.2, 1.0).is_err());
        assert!(on_resonance_coefficients(-0.1, 1.0).is_err());
    }

    #[test]
    fn reflection_reduces_to_on_resonance_formula() {
        let p = device_cavity();
        let r_down = reflection_amplitude(&p, SpinBranch::Down, 0.0);
        assert!((r_down.0 - Complex64::new(-0.62, 0.0)).norm() < 1e-12);

        let c = cooperativity(10.2, 35.9, 2.9).unwrap();
        let (expected_up, _) = on_resonance_coefficients(0.81, c).unwrap();
        let r_up = reflection_amplitude(&p, SpinBranch::Up, 0.0);
        assert!((r_up.0 - Complex64::new(expected_up, 0.0)).norm() < 1e-12);
        assert!((r_up.0.re - 0.46).abs() < 1e-3);
    }

    #[test]
    fn far_detuned_cavity_is_a_mirror() {
        let r = reflection_amplitude(&device_cavity(), SpinBranch::Up, 1e6);
        assert!((r.0 - Complex64::new(1.0, 0.0)).norm() < 1e-4);
    }

    #[test]
    fn reflection_flips_circular_polarization() {
        let rc = PolarizationState::right_circular();
        let out = reflect_polarization(
            ReflectionAmplitude::real(1.0),
            &rc,
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        assert!((out.state.overlap(&rc) - 1.0).abs() < 1e-12);

        let out = reflect_polarization(
            ReflectionAmplitude::real(-1.0),
            &rc,
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        assert!((out.state.overlap(&PolarizationState::left_circular()) - 1.0).abs() < 1e-12);

        let out = reflect_polarization(
            ReflectionAmplitude::real(-0.62),
            &rc,
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        let cross = channel_intensity(&out.amplitudes, Analyzer::CrossCircular);
        assert!((cross - 1.62f64.powi(2) / 4.0).abs() < 1e-12);
        assert!((cross - 0.656).abs() < 1e-3);
    }

    #[test]
    fn zero_output_is_degenerate() {
        let rc = PolarizationState::right_circular();
        let err = reflect_polarization(
            ReflectionAmplitude::real(0.0),
            &rc,
            Complex64::new(0.0, 0.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateState(_)));
    }

    #[test]
    fn analyzer_projections() {
        let rc = PolarizationState::right_circular().jones();
        assert!((channel_intensity(&rc, Analyzer::CoCircular) - 1.0).abs() < 1e-15);
        assert!(channel_intensity(&rc, Analyzer::CrossCircular).abs() < 1e-15);
        assert!((channel_intensity(&rc, Analyzer::X) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bare_cavity_is_lorentzian_of_width_kappa() {
        let p = CavitySpinParams::bare(35.9, 0.81).unwrap();
        let peak = branch_intensity(&p, SpinBranch::Down, 0.0, Analyzer::CrossCircular);
        let half = branch_intensity(&p, SpinBranch::Down, 35.9 / 2.0, Analyzer::CrossCircular);
        assert!((half / peak - 0.5).abs() < 1e-12);
        for d in [1.0, 7.0, 40.0] {
            let r = reflection_amplitude(&p, SpinBranch::Up, d).0;
            let lorentz =
                Complex64::new(1.0, 0.0) - 2.0 * 0.81 / Complex64::new(1.0, 2.0 * d / 35.9);
            assert!((r - lorentz).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(CavitySpinParams::new(35.9, 40.0, vec![]).is_err());
        assert!(CavitySpinParams::new(0.0, 0.0, vec![]).is_err());
        assert!(TransitionParams::new(SpinBranch::Up, 0.0, -1.0, 1.0).is_err());
        assert!(TransitionParams::new(SpinBranch::Up, 0.0, 1.0, 0.0).is_err());
    }
}
