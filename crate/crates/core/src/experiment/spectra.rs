use crate::cqed::{Analyzer, CavitySpinParams};
use crate::error::{Error, Result};
use crate::estimation::{model_spectrum, Spectrum};

/// Probe reflection spectrum of a spin mixture `(p_up, p_down)`, optionally
/// convolved with the probe's Gaussian intensity spectrum of FWHM
/// `probe_fwhm`.
pub fn probe_spectrum(
    params: &CavitySpinParams,
    spin_mixture: (f64, f64),
    probe_fwhm: f64,
    channel: Analyzer,
    detunings: &[f64],
) -> Result<Spectrum> {
    let (p_up, p_down) = spin_mixture;
    if !((0.0..=1.0).contains(&p_up) && (0.0..=1.0).contains(&p_down))
        || (p_up + p_down - 1.0).abs() > 1e-9
    {
        return Err(Error::domain(format!(
            "spin populations must be in [0, 1] and sum to 1, got ({p_up}, {p_down})"
        )));
    }
    if !(probe_fwhm >= 0.0) {
        return Err(Error::domain(format!(
            "probe_fwhm must be >= 0, got {probe_fwhm}"
        )));
    }
    let fwhm = (probe_fwhm > 0.0).then_some(probe_fwhm);
    if let (Some(f), [first, .., last]) = (fwhm, detunings) {
        if f > last - first {
            return Err(Error::domain(format!(
                "probe_fwhm {f} GHz exceeds the detuning span"
            )));
        }
    }
    let y = model_spectrum(params, p_up, detunings, channel, fwhm, 0.0, 1.0, 0.0);
    Ok(Spectrum::new(
        detunings.to_vec(),
        y.into_iter().map(|v| v.max(0.0)).collect(),
        channel,
    )?
    .with_convolution(fwhm))
}

/// Evenly spaced grid from `min` to `max` inclusive.
pub fn linear_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::domain(format!(
            "invalid grid min={min} max={max} step={step}"
        )));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    if n > 10_000_000 {
        return Err(Error::domain(format!("grid of {n} points is too large")));
    }
    Ok((0..n).map(|i| min + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cqed::{SpinBranch, TransitionParams};

    fn device() -> CavitySpinParams {
        CavitySpinParams::bare(35.9, 0.81)
            .unwrap()
            .with_transition(TransitionParams::new(SpinBranch::Up, 0.0, 10.2, 2.9).unwrap())
            .unwrap()
    }

    #[test]
    fn spin_down_branch_is_bare_and_symmetric() {
        let x = linear_grid(-100.0, 100.0, 0.5).unwrap();
        let s = probe_spectrum(&device(), (0.0, 1.0), 0.0, Analyzer::CrossCircular, &x).unwrap();
        let y = s.intensities();
        for i in 0..y.len() {
            assert!((y[i] - y[y.len() - 1 - i]).abs() < 1e-14);
        }
        let peak = y[200];
        assert!((peak - 0.81f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn spin_up_branch_shows_rabi_doublet() {
        let x = linear_grid(-60.0, 60.0, 0.01).unwrap();
        let s = probe_spectrum(&device(), (1.0, 0.0), 0.0, Analyzer::CrossCircular, &x).unwrap();
        let y = s.intensities();
        let centre = x.iter().position(|v| v.abs() < 1e-9).unwrap();
        let maxima: Vec<usize> = (1..y.len() - 1)
            .filter(|&i| y[i] > y[i - 1] && y[i] > y[i + 1])
            .collect();
        assert_eq!(maxima.len(), 2, "{maxima:?}");
        assert!(y[centre] < y[maxima[0]]);

        // independent brute-force evaluation of |κ_ex / (2D)|²
        let cross = |d: f64| {
            let dot = num_complex::Complex64::new(2.9, d);
            let denom = num_complex::Complex64::new(35.9 / 2.0, d) + 10.2 * 10.2 / dot;
            (0.81 * 35.9 / denom).norm_sqr() / 4.0
        };
        let best = x
            .iter()
            .copied()
            .filter(|d| *d > 0.0)
            .max_by(|a, b| cross(*a).total_cmp(&cross(*b)))
            .unwrap();
        let sep = x[maxima[1]] - x[maxima[0]];
        assert!(
            (sep - 2.0 * best).abs() < 0.02 + 1e-9,
            "{sep} vs {}",
            2.0 * best
        );
        // for these rates the reflection maxima sit just outside ±g
        assert!(sep > 2.0 * 10.2 && sep < 2.5 * 10.2, "{sep}");
    }

    #[test]
    fn convolution_lowers_and_widens_while_preserving_area() {
        let x = linear_grid(-150.0, 150.0, 0.1).unwrap();
        let bare = CavitySpinParams::bare(35.9, 0.81).unwrap();
        let sharp = probe_spectrum(&bare, (0.0, 1.0), 0.0, Analyzer::CrossCircular, &x).unwrap();
        let soft = probe_spectrum(&bare, (0.0, 1.0), 7.0, Analyzer::CrossCircular, &x).unwrap();
        let (a, b): (f64, f64) = (
            sharp.intensities().iter().sum(),
            soft.intensities().iter().sum(),
        );
        assert!(((a - b) / a).abs() < 1e-6);
        let peak = |s: &Spectrum| s.intensities().iter().copied().fold(0.0, f64::max);
        assert!(peak(&soft) < peak(&sharp));
        let half = peak(&soft) / 2.0;
        let wide = soft.intensities().iter().filter(|v| **v > half).count();
        let narrow = sharp
            .intensities()
            .iter()
            .filter(|v| **v > peak(&sharp) / 2.0)
            .count();
        assert!(wide > narrow);
        assert_eq!(soft.convolution_fwhm, Some(7.0));
    }

    #[test]
    fn mixture_bracketed_by_pure_branches() {
        let x = linear_grid(-80.0, 80.0, 1.0).unwrap();
        let p = device();
        let up = probe_spectrum(&p, (1.0, 0.0), 7.0, Analyzer::CrossCircular, &x).unwrap();
        let down = probe_spectrum(&p, (0.0, 1.0), 7.0, Analyzer::CrossCircular, &x).unwrap();
        let mix = probe_spectrum(&p, (0.26, 0.74), 7.0, Analyzer::CrossCircular, &x).unwrap();
        for i in 0..x.len() {
            let (lo, hi) = if up.intensities()[i] < down.intensities()[i] {
                (up.intensities()[i], down.intensities()[i])
            } else {
                (down.intensities()[i], up.intensities()[i])
            };
            assert!(mix.intensities()[i] >= lo - 1e-15 && mix.intensities()[i] <= hi + 1e-15);
        }
    }

    #[test]
    fn populations_must_sum_to_one() {
        let x = linear_grid(-80.0, 80.0, 1.0).unwrap();
        assert!(probe_spectrum(&device(), (0.5, 0.6), 0.0, Analyzer::CrossCircular, &x).is_err());
    }
}
