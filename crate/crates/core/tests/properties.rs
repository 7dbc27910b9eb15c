use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use num_complex::Complex64;
use proptest::prelude::*;
use qps::estimation::{convolve_gaussian, Spectrum};
use qps::experiment::{linear_grid, normalize_coincidences, probe_spectrum};
use qps::{
    conditional_phase, larmor_precess, larmor_precess_segment, reflection_amplitude, rotate,
    switching_fidelity, Analyzer, CavitySpinParams, DephasingEnvelope, SpinBranch, SpinEnvironment,
    SpinState, TransitionParams,
};

fn axis() -> impl Strategy<Value = Vector3<f64>> {
    (0.0..PI, 0.0..TAU)
        .prop_map(|(t, p)| Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos()))
}

fn state() -> impl Strategy<Value = SpinState> {
    (axis(), 0.0..=1.0f64).prop_map(|(n, r)| SpinState::from_bloch(n * r).unwrap())
}

fn env(t2: f64) -> SpinEnvironment {
    SpinEnvironment {
        larmor_freq: 3.7,
        t2_star: t2,
        pump_time_constant: 1.27,
        init_fidelity: 1.0,
        envelope: DephasingEnvelope::Gaussian,
    }
}

fn params() -> impl Strategy<Value = CavitySpinParams> {
    (
        1.0..80.0f64,
        0.05..=1.0f64,
        -30.0..30.0f64,
        0.0..30.0f64,
        0.1..20.0f64,
    )
        .prop_map(|(k, a, d, g, gamma)| {
            CavitySpinParams::bare(k, a)
                .unwrap()
                .with_transition(TransitionParams::new(SpinBranch::Up, d, g, gamma).unwrap())
                .unwrap()
        })
}

proptest! {
    #[test]
    fn rotation_preserves_purity(s in state(), angle in -10.0..10.0f64, n in axis()) {
        let r = rotate(&s, angle, n).unwrap();
        prop_assert!((r.purity() - s.purity()).abs() < 1e-10);
    }

    #[test]
    fn precession_keeps_sz(s in state(), tau in 0.0..5.0f64, t2 in 0.1..5.0f64) {
        let r = larmor_precess(&s, tau, &env(t2)).unwrap();
        prop_assert!((r.bloch().z - s.bloch().z).abs() < 1e-12);
    }

    #[test]
    fn precession_rotation_composes(s in state(), t1 in 0.0..2.0f64, t2 in 0.0..2.0f64, t2s in 0.2..3.0f64) {
        // rotation parts add; Gaussian envelopes of separate calls multiply
        let e = env(t2s);
        let twice = larmor_precess(&larmor_precess(&s, t1, &e).unwrap(), t2, &e).unwrap();
        let once = larmor_precess(&s, t1 + t2, &env(f64::INFINITY)).unwrap();
        let d = (-(t1 * t1 + t2 * t2) / (t2s * t2s)).exp();
        prop_assert!((twice.coherence() - once.coherence() * d).norm() < 1e-12);
        // segments of one window reproduce the unsegmented envelope
        let seg = larmor_precess_segment(&larmor_precess(&s, t1, &e).unwrap(), t1, t2, &e).unwrap();
        let whole = larmor_precess(&s, t1 + t2, &e).unwrap();
        prop_assert!((seg.coherence() - whole.coherence()).norm() < 1e-12);
    }

    #[test]
    fn fidelity_is_a_probability(m in 0.0..=1.0f64, a in -PI..PI) {
        let r = Complex64::from_polar(m, a);
        for b in [SpinBranch::Up, SpinBranch::Down] {
            let f = switching_fidelity(r, b);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        }
        let sum = switching_fidelity(r, SpinBranch::Up) + switching_fidelity(r, SpinBranch::Down);
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_phase_is_wrapped(p in params(), d in -100.0..100.0f64) {
        if let Ok(r) = conditional_phase(&p, d) {
            prop_assert!((0.0..TAU).contains(&r.delta_phi));
            let ru = reflection_amplitude(&p, SpinBranch::Up, d).value();
            let rd = reflection_amplitude(&p, SpinBranch::Down, d).value();
            let direct = (ru * rd.conj()).arg();
            prop_assert!(((r.delta_phi - direct).rem_euclid(TAU)).min((direct - r.delta_phi).rem_euclid(TAU)) < 1e-12);
        }
    }

    #[test]
    fn coincidence_probabilities_lie_in_unit_interval(c in proptest::collection::vec(0u64..1_000_000, 1..50)) {
        match normalize_coincidences(&c) {
            Ok(p) => {
                prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
                let max = p.iter().copied().fold(0.0, f64::max);
                let min = p.iter().copied().fold(1.0, f64::min);
                prop_assert!((max + min - 1.0).abs() < 1e-12);
            }
            Err(_) => prop_assert!(c.iter().all(|&x| x == 0)),
        }
    }

    #[test]
    fn convolution_commutes_with_scaling(k in 0.1..10.0f64, fwhm in 0.0..20.0f64, kappa in 5.0..50.0f64) {
        let x = linear_grid(-100.0, 100.0, 0.5).unwrap();
        let y: Vec<f64> = x.iter().map(|d| 1.0 / (1.0 + (2.0 * d / kappa).powi(2))).collect();
        let s = Spectrum::new(x, y, Analyzer::CrossCircular).unwrap();
        let a = convolve_gaussian(&s.scaled(k).unwrap(), fwhm).unwrap();
        let b = convolve_gaussian(&s, fwhm).unwrap().scaled(k).unwrap();
        for (u, v) in a.intensities().iter().zip(b.intensities()) {
            prop_assert!((u - v).abs() <= 1e-12 * k);
        }
    }

    #[test]
    fn mixtures_are_bracketed(p in params(), p_down in 0.0..=1.0f64, fwhm in 0.0..10.0f64) {
        let x = linear_grid(-80.0, 80.0, 1.0).unwrap();
        let up = probe_spectrum(&p, (1.0, 0.0), fwhm, Analyzer::CrossCircular, &x).unwrap();
        let down = probe_spectrum(&p, (0.0, 1.0), fwhm, Analyzer::CrossCircular, &x).unwrap();
        let mix = probe_spectrum(&p, (1.0 - p_down, p_down), fwhm, Analyzer::CrossCircular, &x).unwrap();
        for i in 0..x.len() {
            let (a, b) = (up.intensities()[i], down.intensities()[i]);
            let m = mix.intensities()[i];
            prop_assert!(m >= a.min(b) - 1e-12 && m <= a.max(b) + 1e-12);
        }
    }
}
