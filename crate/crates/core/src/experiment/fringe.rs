use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::estimation::{least_squares, FitResult, LeastSquaresOptions};
use crate::spin::DephasingEnvelope;

/// Sinusoidal fringe `offset + amplitude·cos(2π·ν_L·τ + phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeFit {
    /// Wrapped to `(−π, π]`.
    pub phase: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// `amplitude / offset`.
    pub visibility: f64,
    pub fit: FitResult,
}

/// Wrap an angle to `(−π, π]`.
pub fn wrap_to_pi(phi: f64) -> f64 {
    let w = phi - TAU * ((phi - PI) / TAU).ceil();
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

fn projection(taus: &[f64], values: &[f64], omega: f64) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut c, mut s) = (0.0, 0.0);
    for (t, v) in taus.iter().zip(values) {
        c += (v - mean) * (omega * t).cos();
        s += (v - mean) * (omega * t).sin();
    }
    let amp = 2.0 * (c * c + s * s).sqrt() / n;
    (mean, amp, (-s).atan2(c))
}

fn check_samples(taus: &[f64], values: &[f64]) -> Result<()> {
    if taus.len() != values.len() {
        return Err(Error::domain(format!(
            "{} delays but {} fringe samples",
            taus.len(),
            values.len()
        )));
    }
    if values.iter().chain(taus).any(|v| !v.is_finite()) {
        return Err(Error::domain("fringe samples must be finite"));
    }
    Ok(())
}

/// Least-squares fit of a sinusoid at the known Larmor frequency.
pub fn fringe_phase_fit(taus: &[f64], samples: &[f64], larmor_freq: f64) -> Result<FringeFit> {
    check_samples(taus, samples)?;
    if samples.len() < 5 {
        return Err(Error::domain(format!(
            "fringe fit needs at least 5 samples, got {}",
            samples.len()
        )));
    }
    if !(larmor_freq != 0.0 && larmor_freq.is_finite()) {
        return Err(Error::domain("larmor_freq must be non-zero"));
    }
    let span = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - taus.iter().copied().fold(f64::INFINITY, f64::min);
    if span * larmor_freq.abs() < 1.0 - 1e-9 {
        return Err(Error::domain(format!(
            "delays span {span} ns, less than one Larmor period ({} ns)",
            1.0 / larmor_freq.abs()
        )));
    }
    let omega = TAU * larmor_freq;
    let (a0, b0, phi0) = projection(taus, samples, omega);
    let model = |p: &[f64]| -> Vec<f64> {
        taus.iter()
            .map(|t| p[0] + p[1] * (omega * t + p[2]).cos())
            .collect()
    };
    let ls = LeastSquaresOptions::named(["offset", "amplitude", "phase"]).with_starts(vec![vec![
        a0,
        b0.max(1e-3),
        phi0 + 0.5,
    ]]);
    let fit = least_squares(model, &[a0, b0.max(1e-3), phi0], samples, &ls)?.require_converged()?;
    let (offset, mut amplitude, mut phase) = (fit.values[0], fit.values[1], fit.values[2]);
    if amplitude < 0.0 {
        amplitude = -amplitude;
        phase += PI;
    }
    let phase = wrap_to_pi(phase);
    Ok(FringeFit {
        phase,
        amplitude,
        offset,
        visibility: if offset != 0.0 {
            amplitude / offset
        } else {
            f64::INFINITY
        },
        fit,
    })
}

/// Decay of the Ramsey fringe envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityFit {
    /// `f64::INFINITY` when no decay is resolved.
    pub t2_star: f64,
    pub t2_star_uncertainty: f64,
    /// Fitted fringe visibility at each delay.
    pub visibility: Vec<f64>,
    pub phase: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VisibilityFitOptions {
    pub envelope: DephasingEnvelope,
    /// Known pumping time constant whose `e^{−τ/(2τ_p)}` coherence loss is
    /// divided out of the envelope.
    pub pump_time_constant: Option<f64>,
}

/// Fit `a + b·D(τ)·cos(2π·ν_L·τ + φ)` to fringe populations, where `D` is the
/// dephasing envelope (times the known pumping decay), and report T2*.
pub fn ramsey_fringe_visibility(
    taus: &[f64],
    populations: &[f64],
    larmor_freq: f64,
    opts: &VisibilityFitOptions,
) -> Result<VisibilityFit> {
    check_samples(taus, populations)?;
    if populations.len() < 6 {
        return Err(Error::Underdetermined(format!(
            "envelope fit needs at least 6 samples, got {}",
            populations.len()
        )));
    }
    let span = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - taus.iter().copied().fold(f64::INFINITY, f64::min);
    if !(larmor_freq.is_finite() && span * larmor_freq.abs() >= 2.0 - 1e-9) {
        return Err(Error::Underdetermined(format!(
            "delays cover {:.3} Larmor periods; at least 2 are needed",
            span * larmor_freq.abs()
        )));
    }
    if opts.envelope == DephasingEnvelope::None {
        return Err(Error::domain(
            "cannot estimate T2* with the dephasing envelope disabled",
        ));
    }
    let omega = TAU * larmor_freq;
    let pump = |t: f64| {
        opts.pump_time_constant
            .map_or(1.0, |tp| (-t / (2.0 * tp)).exp())
    };
    // rate = 1/T2* keeps the infinite-coherence limit at a finite boundary
    let envelope = |t: f64, rate: f64| {
        if rate == 0.0 {
            1.0
        } else {
            opts.envelope.factor(t, 1.0 / rate)
        }
    };
    let model = |p: &[f64]| -> Vec<f64> {
        taus.iter()
            .map(|&t| p[0] + p[1] * envelope(t, p[3]) * pump(t) * (omega * t + p[2]).cos())
            .collect()
    };
    let (a0, b0, phi0) = projection(taus, populations, omega);
    let rates = [0.0, 0.5 / span, 1.0 / span, 3.0 / span];
    let starts: Vec<Vec<f64>> = rates
        .iter()
        .skip(1)
        .map(|&r| vec![a0, 2.0 * b0, phi0, r])
        .collect();
    let ls = LeastSquaresOptions::named(["offset", "amplitude", "phase", "rate"])
        .bounds(
            vec![f64::NEG_INFINITY, 0.0, -2.0 * TAU, 0.0],
            vec![f64::INFINITY, f64::INFINITY, 2.0 * TAU, 1e3 / span],
        )
        .with_starts(starts);
    let fit = least_squares(model, &[a0, b0.max(1e-6), phi0, rates[0]], populations, &ls)?
        .require_converged()?;
    let (a, b, phi, rate) = (fit.values[0], fit.values[1], fit.values[2], fit.values[3]);
    let (sb, srate) = (fit.uncertainties[1], fit.uncertainties[3]);
    if !(b > 0.0) || !(sb.is_finite()) || b <= 3.0 * sb {
        return Err(Error::Underdetermined(format!(
            "no resolvable fringe: amplitude {b:.3e} with uncertainty {sb:.3e}"
        )));
    }
    let rate_floor = 1e-9 / span;
    let (t2_star, t2_unc) = if rate <= rate_floor {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (1.0 / rate, srate / (rate * rate))
    };
    let visibility = taus
        .iter()
        .map(|&t| {
            if a != 0.0 {
                b * envelope(t, rate) * pump(t) / a
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(VisibilityFit {
        t2_star,
        t2_star_uncertainty: t2_unc,
        visibility,
        phase: wrap_to_pi(phi),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn taus(n: usize, max: f64) -> Vec<f64> {
        (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn wraps() {
        assert_eq!(wrap_to_pi(PI), PI);
        assert!((wrap_to_pi(-PI) - PI).abs() < 1e-15);
        assert!((wrap_to_pi(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_to_pi(0.1 + 4.0 * TAU) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn exact_cosine_has_zero_phase() {
        let t = taus(41, 1.0);
        let y: Vec<f64> = t
            .iter()
            .map(|t| 0.5 + 0.4 * (TAU * 3.0 * t).cos())
            .collect();
        let f = fringe_phase_fit(&t, &y, 3.0).unwrap();
        assert!(f.phase.abs() < 1e-9, "{}", f.phase);
        assert!((f.amplitude - 0.4).abs() < 1e-9);
        assert!((f.visibility - 0.8).abs() < 1e-9);
    }

    #[test]
    fn recovers_injected_shift() {
        let t = taus(41, 1.0);
        let shift = 1.09 * PI - PI;
        let y: Vec<f64> = t
            .iter()
            .map(|t| 0.5 + 0.3 * (TAU * 2.5 * t + shift).cos())
            .collect();
        let f = fringe_phase_fit(&t, &y, 2.5).unwrap();
        assert!((f.phase - shift).abs() < 1e-9);
        // a negative-amplitude start is folded into the phase
        let y: Vec<f64> = t
            .iter()
            .map(|t| 0.5 - 0.3 * (TAU * 2.5 * t).cos())
            .collect();
        let f = fringe_phase_fit(&t, &y, 2.5).unwrap();
        assert!(f.amplitude > 0.0);
        assert!((f.phase.abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn fringe_preconditions() {
        let t = taus(4, 1.0);
        assert!(fringe_phase_fit(&t, &[0.0; 4], 3.0).is_err());
        let t = taus(10, 0.2);
        assert!(fringe_phase_fit(&t, &[0.0; 10], 3.0).is_err());
    }

    #[test]
    fn t2_round_trip() {
        let t = taus(101, 1.0);
        let y: Vec<f64> = t
            .iter()
            .map(|&t| 0.5 + 0.5 * (-(t / 0.94f64).powi(2)).exp() * (TAU * 4.0 * t).cos())
            .collect();
        let v = ramsey_fringe_visibility(&t, &y, 4.0, &VisibilityFitOptions::default()).unwrap();
        assert!((v.t2_star - 0.94).abs() < 1e-6, "{}", v.t2_star);
        assert!((v.visibility[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infinite_t2_gives_constant_visibility() {
        let t = taus(101, 1.0);
        let y: Vec<f64> = t
            .iter()
            .map(|&t| 0.5 + 0.5 * (TAU * 4.0 * t).cos())
            .collect();
        let v = ramsey_fringe_visibility(&t, &y, 4.0, &VisibilityFitOptions::default()).unwrap();
        assert!(v.t2_star > 1e3, "{}", v.t2_star);
        assert!(v.visibility.iter().all(|x| (x - 1.0).abs() < 1e-6));
    }

    #[test]
    fn noise_without_fringe_is_underdetermined() {
        let t = taus(101, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.0, 0.02).unwrap();
        let y: Vec<f64> = t.iter().map(|_| 0.5 + n.sample(&mut rng)).collect();
        let err =
            ramsey_fringe_visibility(&t, &y, 4.0, &VisibilityFitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Underdetermined(_)), "{err}");
    }

    #[test]
    fn too_few_periods() {
        let t = taus(50, 0.3);
        let y: Vec<f64> = t
            .iter()
            .map(|&t| 0.5 + 0.5 * (TAU * 4.0 * t).cos())
            .collect();
        assert!(matches!(
            ramsey_fringe_visibility(&t, &y, 4.0, &VisibilityFitOptions::default()),
            Err(Error::Underdetermined(_))
        ));
    }
}
