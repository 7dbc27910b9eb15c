//! Switch figures of merit: photon switching fidelity, the spin-conditional
//! phase, and the back-action of a reflected photon on the spin.

use std::f64::consts::TAU;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::cqed::{
    reflect_polarization, reflection_amplitude, CavitySpinParams, PolarizationState,
    ReflectionAmplitude, SpinBranch,
};
use crate::error::{Error, Result};
use crate::spin::SpinState;

/// Photon-side switch performance at one probe detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityReport {
    pub f_up: f64,
    pub f_down: f64,
    pub r_up: Complex64,
    pub r_down: Complex64,
}

/// Spin phase imprinted by one reflected photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShiftResult {
    /// `arg r_up − arg r_down`, wrapped to `[0, 2π)`.
    pub delta_phi: f64,
    pub detuning: f64,
}

/// Fidelity of the reflected photon with the ideal switch output, conditioned
/// on the photon being collected.
///
/// For a right-circular input the ideal output is right-circular for
/// `SpinBranch::Up` and left-circular for `SpinBranch::Down`, which gives
/// `F = |1 ± r|² / (2(1 + |r|²))`.
pub fn switching_fidelity(r: Complex64, target: SpinBranch) -> f64 {
    let ideal = match target {
        SpinBranch::Up => PolarizationState::right_circular(),
        SpinBranch::Down => PolarizationState::left_circular(),
    };
    match reflect_polarization(
        ReflectionAmplitude(r),
        &PolarizationState::right_circular(),
        Complex64::new(1.0, 0.0),
    ) {
        Ok(out) => out.state.overlap(&ideal).clamp(0.0, 1.0),
        // unreachable with r_x = 1 and a circular input
        Err(_) => 0.0,
    }
}

/// Switching fidelities of both spin branches at `detuning`.
pub fn fidelity_report(params: &CavitySpinParams, detuning: f64) -> FidelityReport {
    let r_up = reflection_amplitude(params, SpinBranch::Up, detuning).value();
    let r_down = reflection_amplitude(params, SpinBranch::Down, detuning).value();
    FidelityReport {
        f_up: switching_fidelity(r_up, SpinBranch::Up),
        f_down: switching_fidelity(r_down, SpinBranch::Down),
        r_up,
        r_down,
    }
}

pub(crate) fn wrap_to_tau(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Relative phase between the two spin branches' reflection amplitudes.
pub fn conditional_phase(params: &CavitySpinParams, detuning: f64) -> Result<PhaseShiftResult> {
    let r_up = reflection_amplitude(params, SpinBranch::Up, detuning);
    let r_down = reflection_amplitude(params, SpinBranch::Down, detuning);
    if r_up.norm() == 0.0 || r_down.norm() == 0.0 {
        return Err(Error::UndefinedPhase(format!(
            "reflection amplitude vanishes at detuning {detuning} GHz (|r_up| = {}, |r_down| = {})",
            r_up.norm(),
            r_down.norm()
        )));
    }
    // arg of the product avoids branch-cut noise when both amplitudes are real
    let delta = (r_up.value() * r_down.value().conj()).arg();
    Ok(PhaseShiftResult {
        delta_phi: wrap_to_tau(delta),
        detuning,
    })
}

/// Effect of one cavity-polarized photon on the spin.
///
/// The coherence picks up the phase of `r_up·conj(r_down)`. When
/// `condition_on_detection` is set the state is additionally projected onto
/// the reflected outcome, `ρ → MρM† / p` with `M = diag(r_up, r_down)`.
/// The returned probability is `p = p_up|r_up|² + p_down|r_down|²` either way.
pub fn spin_backaction(
    spin: &SpinState,
    r_up: Complex64,
    r_down: Complex64,
    condition_on_detection: bool,
) -> Result<(SpinState, f64)> {
    let p_det = spin.p_up() * r_up.norm_sqr() + spin.p_down() * r_down.norm_sqr();
    let rho = spin.matrix();
    let out = if condition_on_detection {
        if !(p_det > 0.0) {
            return Err(Error::ImpossibleCondition(
                "photon detection has zero probability for this spin state".into(),
            ));
        }
        let m = Matrix2::new(
            r_up,
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            r_down,
        );
        let mut next = m * rho * m.adjoint() / Complex64::new(p_det, 0.0);
        // restore exact Hermiticity and trace lost to rounding
        next[(1, 0)] = next[(0, 1)].conj();
        let tr = next[(0, 0)].re + next[(1, 1)].re;
        next[(0, 0)] = Complex64::new(next[(0, 0)].re / tr, 0.0);
        next[(1, 1)] = Complex64::new(next[(1, 1)].re / tr, 0.0);
        SpinState::from_matrix_unchecked(next)
    } else {
        let prod = r_up * r_down.conj();
        let phase = if prod.norm() > 0.0 {
            prod / prod.norm()
        } else {
            Complex64::new(0.0, 0.0)
        };
        let mut next = *rho;
        next[(0, 1)] *= phase;
        next[(1, 0)] = next[(0, 1)].conj();
        SpinState::from_matrix_unchecked(next)
    };
    Ok((out, p_det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cqed::TransitionParams;
    use std::f64::consts::PI;

    fn device() -> CavitySpinParams {
        CavitySpinParams::new(
            35.9,
            0.81 * 35.9,
            vec![TransitionParams::new(SpinBranch::Up, 0.0, 10.2, 2.9).unwrap()],
        )
        .unwrap()
    }

    fn closed_form(r: Complex64, target: SpinBranch) -> f64 {
        let s = match target {
            SpinBranch::Up => 1.0,
            SpinBranch::Down => -1.0,
        };
        (Complex64::new(1.0, 0.0) + s * r).norm_sqr() / (2.0 * (1.0 + r.norm_sqr()))
    }

    #[test]
    fn fidelity_values() {
        let one = Complex64::new(1.0, 0.0);
        assert!((switching_fidelity(one, SpinBranch::Up) - 1.0).abs() < 1e-15);
        let zero = Complex64::new(0.0, 0.0);
        assert!((switching_fidelity(zero, SpinBranch::Up) - 0.5).abs() < 1e-15);
        assert!((switching_fidelity(zero, SpinBranch::Down) - 0.5).abs() < 1e-15);
        let f_up = switching_fidelity(Complex64::new(0.46, 0.0), SpinBranch::Up);
        let f_down = switching_fidelity(Complex64::new(-0.62, 0.0), SpinBranch::Down);
        assert!((f_up - 0.88).abs() < 0.005, "{f_up}");
        assert!((f_down - 0.95).abs() < 0.005, "{f_down}");
    }

    #[test]
    fn fidelity_matches_closed_form_for_complex_r() {
        for (re, im) in [(0.3, 0.4), (-0.7, 0.1), (0.0, -0.9), (0.2, 0.2)] {
            let r = Complex64::new(re, im);
            for t in [SpinBranch::Up, SpinBranch::Down] {
                assert!((switching_fidelity(r, t) - closed_form(r, t)).abs() < 1e-14);
            }
            let real = Complex64::new(re, 0.0);
            assert!(
                (switching_fidelity(real, SpinBranch::Up)
                    - switching_fidelity(-real, SpinBranch::Down))
                .abs()
                    < 1e-15
            );
        }
    }

    #[test]
    fn report_from_cavity_model() {
        let rep = fidelity_report(&device(), 0.0);
        assert!((rep.f_up - 0.88).abs() < 0.005);
        assert!((rep.f_down - 0.95).abs() < 0.005);
    }

    #[test]
    fn conditional_phase_values() {
        let p = device();
        let res = conditional_phase(&p, 0.0).unwrap();
        assert_eq!(res.delta_phi, PI);
        let res = conditional_phase(&p, 7.3).unwrap();
        assert!(
            (res.delta_phi / PI - 0.59).abs() < 0.02,
            "{}",
            res.delta_phi / PI
        );
        let uncoupled = CavitySpinParams::bare(35.9, 0.81).unwrap();
        assert_eq!(conditional_phase(&uncoupled, 3.0).unwrap().delta_phi, 0.0);
        let far = conditional_phase(&p, 1e5).unwrap().delta_phi;
        assert!(far < 1e-3 || TAU - far < 1e-3);
    }

    #[test]
    fn zero_amplitude_gives_undefined_phase() {
        // α = 1/2 with no coupling makes r_down vanish on resonance
        let p = CavitySpinParams::bare(10.0, 0.5).unwrap();
        assert!(matches!(
            conditional_phase(&p, 0.0),
            Err(Error::UndefinedPhase(_))
        ));
    }

    #[test]
    fn ideal_backaction_flips_superposition() {
        let plus = SpinState::pure(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        let (s, p) = spin_backaction(
            &plus,
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            false,
        )
        .unwrap();
        let minus = SpinState::pure(Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0));
        assert!((s.matrix() - minus.matrix()).norm() < 1e-15);
        assert!((p - 1.0).abs() < 1e-15);
        let (s, p) = spin_backaction(
            &plus,
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            true,
        )
        .unwrap();
        assert!((s.matrix() - plus.matrix()).norm() < 1e-15);
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conditioned_backaction_coherence() {
        let plus = SpinState::pure(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        let (ru, rd) = (0.46, -0.62);
        let (s, p) = spin_backaction(
            &plus,
            Complex64::new(ru, 0.0),
            Complex64::new(rd, 0.0),
            true,
        )
        .unwrap();
        let b = s.bloch();
        let transverse = (b.x * b.x + b.y * b.y).sqrt();
        let expected = 2.0 * ru * rd.abs() / (ru * ru + rd * rd);
        assert!((transverse - expected).abs() < 1e-12);
        assert!((transverse - 0.957).abs() < 1e-3);
        assert!((s.coherence().arg().abs() - PI).abs() < 1e-12);
        assert!((p - (ru * ru + rd * rd) / 2.0).abs() < 1e-15);
        s.check().unwrap();
    }

    #[test]
    fn conditioning_on_impossible_detection() {
        let err = spin_backaction(
            &SpinState::down(),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            true,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ImpossibleCondition(_)));
    }
}
