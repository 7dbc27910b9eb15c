//! Spectral fits: bare cavity, strongly coupled dot, and spin mixture.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::optimizer::{least_squares, FitResult, LeastSquaresOptions};
use super::spectrum::{convolve_on_grid, Spectrum};
use crate::cqed::{branch_intensity, Analyzer, CavitySpinParams, SpinBranch, TransitionParams};
use crate::error::{Error, Result};

/// Cavity parameters held fixed while fitting the dot or the spin mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityCalibration {
    pub kappa: f64,
    pub alpha: f64,
    /// Cavity resonance on the spectrum's detuning axis.
    pub center: f64,
    /// Detected intensity per unit reflected intensity.
    pub amplitude: f64,
    pub offset: f64,
}

impl CavityCalibration {
    /// Unit amplitude, no background, cavity at zero detuning.
    pub fn ideal(kappa: f64, alpha: f64) -> Self {
        Self {
            kappa,
            alpha,
            center: 0.0,
            amplitude: 1.0,
            offset: 0.0,
        }
    }

    pub fn from_params(params: &CavitySpinParams) -> Self {
        Self::ideal(params.kappa, params.alpha())
    }

    fn bare_params(&self) -> Result<CavitySpinParams> {
        CavitySpinParams::bare(self.kappa, self.alpha)
    }
}

/// Model spectrum `A·I(δ − center) + offset` for a spin mixture, with the
/// spectrum's instrument convolution applied before scaling.
#[allow(clippy::too_many_arguments)]
pub fn model_spectrum(
    params: &CavitySpinParams,
    p_up: f64,
    detunings: &[f64],
    channel: Analyzer,
    convolution_fwhm: Option<f64>,
    center: f64,
    amplitude: f64,
    offset: f64,
) -> Vec<f64> {
    let p_down = 1.0 - p_up;
    let raw: Vec<f64> = detunings
        .iter()
        .map(|&d| {
            let d = d - center;
            let mut v = 0.0;
            if p_up != 0.0 {
                v += p_up * branch_intensity(params, SpinBranch::Up, d, channel);
            }
            if p_down != 0.0 {
                v += p_down * branch_intensity(params, SpinBranch::Down, d, channel);
            }
            v
        })
        .collect();
    let raw = match convolution_fwhm {
        Some(f) if f > 0.0 => convolve_on_grid(detunings, &raw, f),
        _ => raw,
    };
    raw.into_iter().map(|v| amplitude * v + offset).collect()
}

/// Add zero-mean Gaussian noise with standard deviation `relative_sigma`
/// times the spectrum's peak. Samples are clipped at zero.
pub fn add_peak_normalized_noise<R: Rng + ?Sized>(
    spectrum: &Spectrum,
    relative_sigma: f64,
    rng: &mut R,
) -> Result<Spectrum> {
    let peak = spectrum.intensities().iter().copied().fold(0.0, f64::max);
    let normal =
        Normal::new(0.0, relative_sigma * peak).map_err(|e| Error::domain(e.to_string()))?;
    let noisy = spectrum
        .intensities()
        .iter()
        .map(|v| (v + normal.sample(rng)).max(0.0))
        .collect();
    Ok(
        Spectrum::new(spectrum.detunings().to_vec(), noisy, spectrum.channel)?
            .with_convolution(spectrum.convolution_fwhm),
    )
}

fn check_not_flat(spectrum: &Spectrum) -> Result<()> {
    let (lo, hi) = spectrum
        .intensities()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi - lo <= 1e-12 * hi.abs().max(1e-300) {
        return Err(Error::DegenerateData(
            "spectrum is flat; no cavity feature to fit".into(),
        ));
    }
    Ok(())
}

fn peak_type(channel: Analyzer) -> bool {
    matches!(channel, Analyzer::CrossCircular)
}

/// Width of the dominant feature at half its height above/below the edge level.
fn feature_width(spectrum: &Spectrum) -> Option<f64> {
    let y = spectrum.intensities();
    let x = spectrum.detunings();
    let n = y.len();
    let edge = 0.5 * (y[0] + y[n - 1]);
    let dev: Vec<f64> = y.iter().map(|v| (v - edge).abs()).collect();
    let (imax, &dmax) = dev.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = dmax / 2.0;
    let left = (0..imax).rev().find(|&i| dev[i] < half)?;
    let right = (imax..n).find(|&i| dev[i] < half)?;
    Some(x[right] - x[left])
}

fn feature_center(spectrum: &Spectrum) -> f64 {
    let y = spectrum.intensities();
    let pick = if peak_type(spectrum.channel) {
        y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))
    } else {
        y.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))
    };
    spectrum.detunings()[pick.map_or(0, |(i, _)| i)]
}

/// How the overall detected-intensity scale is treated in the bare fit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AmplitudeMode {
    /// Fixed at 1 (intensities relative to the off-resonant mirror level)
    /// for a single channel, free when fitting co- and cross-polarized
    /// spectra jointly.
    #[default]
    Auto,
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BareFitOptions {
    pub amplitude: AmplitudeMode,
}

/// Result of a bare-cavity fit with parameters `kappa, alpha, center,
/// amplitude, offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct BareCavityFit {
    pub result: FitResult,
}

impl BareCavityFit {
    pub fn calibration(&self) -> CavityCalibration {
        let v = |n: &str| self.result.value(n).expect("bare fit parameter");
        CavityCalibration {
            kappa: v("kappa"),
            alpha: v("alpha"),
            center: v("center"),
            amplitude: v("amplitude"),
            offset: v("offset"),
        }
    }
}

/// Fit a single decoupled-cavity spectrum.
pub fn fit_bare_cavity(spectrum: &Spectrum, opts: &BareFitOptions) -> Result<BareCavityFit> {
    fit_bare_cavity_joint(std::slice::from_ref(spectrum), opts)
}

/// Fit one or more decoupled-cavity spectra sharing `kappa, alpha, center,
/// amplitude` and a common background `offset`.
pub fn fit_bare_cavity_joint(spectra: &[Spectrum], opts: &BareFitOptions) -> Result<BareCavityFit> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::domain("no spectra to fit"))?;
    let total: usize = spectra.iter().map(Spectrum::len).sum();
    if total < 8 {
        return Err(Error::domain(format!(
            "bare cavity fit needs at least 8 points, got {total}"
        )));
    }
    for s in spectra {
        check_not_flat(s)?;
    }
    let fixed_amplitude = match opts.amplitude {
        AmplitudeMode::Auto if spectra.len() == 1 => Some(1.0),
        AmplitudeMode::Auto | AmplitudeMode::Free => None,
        AmplitudeMode::Fixed(a) => Some(a),
    };

    let data: Vec<f64> = spectra
        .iter()
        .flat_map(|s| s.intensities().iter().copied())
        .collect();
    let center0 = feature_center(first);
    let kappa0 = feature_width(first)
        .unwrap_or(first.span() / 4.0)
        .max(1e-6 * first.span());
    let amp0 = fixed_amplitude.unwrap_or_else(|| {
        spectra
            .iter()
            .find(|s| !peak_type(s.channel))
            .map(|s| s.intensities()[0].max(s.intensities()[s.len() - 1]))
            .unwrap_or(1.0)
    });
    let offset0 = 0.0;

    // full parameter vector: kappa, alpha, center, offset, [amplitude]
    let unpack = |p: &[f64]| -> (f64, f64, f64, f64, f64) {
        (
            p[0],
            p[1],
            p[2],
            p[3],
            fixed_amplitude.unwrap_or_else(|| p[4]),
        )
    };
    let model = |p: &[f64]| -> Vec<f64> {
        let (kappa, alpha, center, offset, amp) = unpack(p);
        let Ok(params) = CavitySpinParams::bare(kappa, alpha) else {
            return vec![f64::NAN; data.len()];
        };
        spectra
            .iter()
            .flat_map(|s| {
                model_spectrum(
                    &params,
                    0.0,
                    s.detunings(),
                    s.channel,
                    s.convolution_fwhm,
                    center,
                    amp,
                    offset,
                )
            })
            .collect()
    };

    let span = first.span();
    let (lo_d, hi_d) = (first.detunings()[0], first.detunings()[first.len() - 1]);
    let mut names = vec!["kappa", "alpha", "center", "offset"];
    let mut lower = vec![1e-9 * span, 0.0, lo_d, f64::NEG_INFINITY];
    let mut upper = vec![10.0 * span, 1.0, hi_d, f64::INFINITY];
    let mut x0 = vec![kappa0, 0.6, center0, offset0];
    if fixed_amplitude.is_none() {
        names.push("amplitude");
        lower.push(0.0);
        upper.push(f64::INFINITY);
        x0.push(amp0);
    }
    let starts: Vec<Vec<f64>> = [0.3, 0.9]
        .iter()
        .map(|&a| {
            let mut s = x0.clone();
            s[1] = a;
            s
        })
        .chain(std::iter::once({
            let mut s = x0.clone();
            s[0] = 2.0 * kappa0;
            s
        }))
        .collect();
    let ls = LeastSquaresOptions::named(names)
        .bounds(lower, upper)
        .with_starts(starts);
    let fit = least_squares(model, &x0, &data, &ls)?.require_converged()?;

    // report amplitude even when it was held fixed
    let mut result = fit;
    if let Some(a) = fixed_amplitude {
        result.names.push("amplitude".into());
        result.values.push(a);
        result.uncertainties.push(0.0);
    }
    let kappa = result.value("kappa").unwrap();
    if span < 2.0 * kappa {
        return Err(Error::domain(format!(
            "spectrum spans {span} GHz, less than twice the fitted kappa ({kappa} GHz)"
        )));
    }
    Ok(BareCavityFit { result })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledFitOptions {
    /// Spin branch the fitted transition couples.
    pub branch: SpinBranch,
    /// Additional transitions present in the model.
    pub extra_transitions: Vec<TransitionParams>,
    /// Float the extra transitions' `g`, `gamma` and detuning instead of
    /// holding them at the given values.
    pub float_extra: bool,
    /// Probability level of the F-test that decides whether the coupled
    /// model improves significantly on the bare one.
    pub significance: f64,
}

impl Default for CoupledFitOptions {
    fn default() -> Self {
        Self {
            branch: SpinBranch::Up,
            extra_transitions: Vec::new(),
            float_extra: false,
            significance: 0.999,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledFit {
    /// Parameters `g, gamma, dot_detuning`, then `g_k, gamma_k, detuning_k`
    /// for each floated extra transition.
    pub result: FitResult,
    /// `g > κ/4`.
    pub strong_coupling: bool,
    /// The bare-cavity model explains the data as well as the coupled one.
    pub bare_sufficient: bool,
    /// Some estimate has an uncertainty above half its magnitude.
    pub ambiguous: bool,
    pub bare_rss: f64,
}

impl CoupledFit {
    pub fn g(&self) -> f64 {
        self.result.value("g").unwrap()
    }

    pub fn gamma(&self) -> f64 {
        self.result.value("gamma").unwrap()
    }

    pub fn dot_detuning(&self) -> f64 {
        self.result.value("dot_detuning").unwrap()
    }
}

fn coupled_params(
    calib: &CavityCalibration,
    opts: &CoupledFitOptions,
    p: &[f64],
) -> Result<CavitySpinParams> {
    let mut params = calib.bare_params()?.with_transition(TransitionParams {
        detuning_from_cavity: p[2],
        g: p[0],
        gamma: p[1],
        branch: opts.branch,
    })?;
    for (k, t) in opts.extra_transitions.iter().enumerate() {
        let t = if opts.float_extra {
            TransitionParams {
                g: p[3 + 3 * k],
                gamma: p[4 + 3 * k],
                detuning_from_cavity: p[5 + 3 * k],
                branch: t.branch,
            }
        } else {
            *t
        };
        params = params.with_transition(t)?;
    }
    Ok(params)
}

/// Fit the dot coupling `g`, dipole decay `gamma` and dot detuning to a
/// spectrum of a pure spin branch, holding the cavity calibration fixed.
pub fn fit_coupled(
    spectrum: &Spectrum,
    calib: &CavityCalibration,
    opts: &CoupledFitOptions,
) -> Result<CoupledFit> {
    check_not_flat(spectrum)?;
    let p_up = match opts.branch {
        SpinBranch::Up => 1.0,
        SpinBranch::Down => 0.0,
    };
    let x = spectrum.detunings();
    let data = spectrum.intensities();
    let eval = |params: &CavitySpinParams| {
        model_spectrum(
            params,
            p_up,
            x,
            spectrum.channel,
            spectrum.convolution_fwhm,
            calib.center,
            calib.amplitude,
            calib.offset,
        )
    };

    // pre-fit residual against the bare model locates the dot
    let bare = eval(&calib.bare_params()?);
    let bare_rss: f64 = bare.iter().zip(data).map(|(m, d)| (m - d).powi(2)).sum();
    let dot0 = x[bare
        .iter()
        .zip(data)
        .enumerate()
        .max_by(|a, b| (a.1 .0 - a.1 .1).abs().total_cmp(&(b.1 .0 - b.1 .1).abs()))
        .map_or(0, |(i, _)| i)]
        - calib.center;

    let model = |p: &[f64]| -> Vec<f64> {
        match coupled_params(calib, opts, p) {
            Ok(params) => eval(&params),
            Err(_) => vec![f64::NAN; data.len()],
        }
    };

    let k = calib.kappa;
    let (lo_d, hi_d) = (x[0] - calib.center, x[x.len() - 1] - calib.center);
    let mut names: Vec<String> = vec!["g".into(), "gamma".into(), "dot_detuning".into()];
    let mut lower = vec![0.0, 1e-6 * k, lo_d];
    let mut upper = vec![10.0 * k, 10.0 * k, hi_d];
    let mut tail = Vec::new();
    if opts.float_extra {
        for (i, t) in opts.extra_transitions.iter().enumerate() {
            names.extend([
                format!("g_{}", i + 1),
                format!("gamma_{}", i + 1),
                format!("detuning_{}", i + 1),
            ]);
            lower.extend([0.0, 1e-6 * k, lo_d]);
            upper.extend([10.0 * k, 10.0 * k, hi_d]);
            tail.extend([t.g, t.gamma, t.detuning_from_cavity]);
        }
    }
    let start = |g: f64, gamma: f64| -> Vec<f64> {
        let mut s = vec![g, gamma, dot0];
        s.extend(&tail);
        s
    };
    let x0 = start(0.25 * k, 0.1 * k);
    let mut starts = Vec::new();
    for g in [0.1, 0.25, 0.5] {
        for gamma in [0.03, 0.2] {
            starts.push(start(g * k, gamma * k));
        }
    }
    starts.push(start(0.0, 0.1 * k));
    let ls = LeastSquaresOptions::named(names)
        .bounds(lower, upper)
        .with_starts(starts);
    let result = least_squares(model, &x0, data, &ls)?.require_converged()?;

    let n = data.len() as f64;
    let p = result.values.len() as f64;
    let floor = 1e-24 * (1.0 + data.iter().map(|v| v * v).sum::<f64>());
    let bare_sufficient = if result.rss <= floor {
        bare_rss <= floor
    } else if n > p {
        let f = ((bare_rss - result.rss).max(0.0) / p) / (result.rss / (n - p));
        let crit = FisherSnedecor::new(p, n - p)
            .map(|d| d.inverse_cdf(opts.significance))
            .unwrap_or(f64::INFINITY);
        f < crit
    } else {
        false
    };
    let ambiguous = result
        .values
        .iter()
        .zip(&result.uncertainties)
        .any(|(v, u)| !(u.is_finite() && *u <= 0.5 * v.abs()));
    let g = result.value("g").unwrap();
    Ok(CoupledFit {
        strong_coupling: g > calib.kappa / 4.0,
        bare_sufficient,
        ambiguous,
        bare_rss,
        result,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MixtureFitOptions {
    /// Minimum peak difference between the two branch spectra for the
    /// mixture to be identifiable. Defaults to `1e-9` of the data peak.
    pub noise_floor: Option<f64>,
}

/// Fit the spin-down population of a two-branch mixture with all physical
/// parameters known. The single parameter `p_down` stays in `[0, 1]`.
pub fn fit_mixture(
    spectrum: &Spectrum,
    params: &CavitySpinParams,
    calib: &CavityCalibration,
    opts: &MixtureFitOptions,
) -> Result<FitResult> {
    let x = spectrum.detunings();
    let data = spectrum.intensities();
    let eval = |p_up: f64| {
        model_spectrum(
            params,
            p_up,
            x,
            spectrum.channel,
            spectrum.convolution_fwhm,
            calib.center,
            calib.amplitude,
            calib.offset,
        )
    };
    let up = eval(1.0);
    let down = eval(0.0);
    let separation = up
        .iter()
        .zip(&down)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let peak = data.iter().copied().fold(0.0, f64::max);
    let floor = opts.noise_floor.unwrap_or(1e-9 * peak);
    if separation <= floor {
        return Err(Error::Underdetermined(format!(
            "branch spectra differ by at most {separation:.3e}, below the noise floor {floor:.3e}"
        )));
    }
    let model = |p: &[f64]| -> Vec<f64> {
        let pd = p[0];
        up.iter()
            .zip(&down)
            .map(|(u, d)| (1.0 - pd) * u + pd * d)
            .collect()
    };
    let ls = LeastSquaresOptions::named(["p_down"])
        .bounds(vec![0.0], vec![1.0])
        .with_starts(vec![vec![0.2], vec![0.8]]);
    least_squares(model, &[0.5], data, &ls)?.require_converged()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(min: f64, max: f64, step: f64) -> Vec<f64> {
        let n = ((max - min) / step).round() as usize + 1;
        (0..n).map(|i| min + i as f64 * step).collect()
    }

    fn device() -> CavitySpinParams {
        CavitySpinParams::bare(35.9, 0.81)
            .unwrap()
            .with_transition(TransitionParams::new(SpinBranch::Up, 0.0, 10.2, 2.9).unwrap())
            .unwrap()
    }

    fn synth(params: &CavitySpinParams, p_up: f64, channel: Analyzer, x: &[f64]) -> Spectrum {
        let y = model_spectrum(params, p_up, x, channel, None, 0.0, 1.0, 0.0);
        Spectrum::new(x.to_vec(), y, channel).unwrap()
    }

    #[test]
    fn noiseless_bare_fit_is_exact() {
        let x = grid(-100.0, 100.0, 1.0);
        let s = synth(
            &CavitySpinParams::bare(35.9, 0.81).unwrap(),
            0.0,
            Analyzer::CrossCircular,
            &x,
        );
        let fit = fit_bare_cavity(&s, &BareFitOptions::default()).unwrap();
        let c = fit.calibration();
        assert!((c.kappa - 35.9).abs() < 1e-8 * 35.9, "{c:?}");
        assert!((c.alpha - 0.81).abs() < 1e-8, "{c:?}");
        assert!(c.center.abs() < 1e-8);
    }

    #[test]
    fn joint_co_cross_fit_frees_amplitude() {
        let x = grid(-100.0, 100.0, 1.0);
        let p = CavitySpinParams::bare(35.9, 0.81).unwrap();
        let mk = |ch| {
            let y = model_spectrum(&p, 0.0, &x, ch, None, 2.5, 3.0, 0.05);
            Spectrum::new(x.clone(), y, ch).unwrap()
        };
        let fit = fit_bare_cavity_joint(
            &[mk(Analyzer::CoCircular), mk(Analyzer::CrossCircular)],
            &BareFitOptions::default(),
        )
        .unwrap();
        let c = fit.calibration();
        assert!((c.kappa - 35.9).abs() < 1e-6, "{c:?}");
        assert!((c.alpha - 0.81).abs() < 1e-7);
        assert!((c.amplitude - 3.0).abs() < 1e-6);
        assert!((c.center - 2.5).abs() < 1e-6);
        assert!((c.offset - 0.05).abs() < 1e-7);
    }

    #[test]
    fn flat_spectrum_is_degenerate() {
        let x = grid(-100.0, 100.0, 1.0);
        let s = Spectrum::new(x.clone(), vec![0.3; x.len()], Analyzer::CrossCircular).unwrap();
        assert!(matches!(
            fit_bare_cavity(&s, &BareFitOptions::default()),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn narrow_span_rejected() {
        let x = grid(-20.0, 20.0, 1.0);
        let s = synth(
            &CavitySpinParams::bare(35.9, 0.81).unwrap(),
            0.0,
            Analyzer::CrossCircular,
            &x,
        );
        assert!(matches!(
            fit_bare_cavity(&s, &BareFitOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn translation_covariance() {
        let x = grid(-100.0, 100.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = synth(
            &CavitySpinParams::bare(35.9, 0.81).unwrap(),
            0.0,
            Analyzer::CrossCircular,
            &x,
        );
        let noisy = add_peak_normalized_noise(&s, 0.01, &mut rng).unwrap();
        let a = fit_bare_cavity(&noisy, &BareFitOptions::default())
            .unwrap()
            .calibration();
        let b = fit_bare_cavity(&noisy.shifted(12.5).unwrap(), &BareFitOptions::default())
            .unwrap()
            .calibration();
        assert!((b.center - a.center - 12.5).abs() < 1e-6, "{a:?} {b:?}");
        assert!((b.kappa - a.kappa).abs() < 1e-6 * a.kappa);
        assert!((b.alpha - a.alpha).abs() < 1e-6);
    }

    #[test]
    fn uncertainties_shrink_with_density() {
        let p = CavitySpinParams::bare(35.9, 0.81).unwrap();
        let sigma_kappa = |step: f64, seed: u64| {
            let x = grid(-100.0, 100.0, step);
            let s = synth(&p, 0.0, Analyzer::CrossCircular, &x);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy = add_peak_normalized_noise(&s, 0.01, &mut rng).unwrap();
            fit_bare_cavity(&noisy, &BareFitOptions::default())
                .unwrap()
                .result
                .uncertainty("kappa")
                .unwrap()
        };
        // average over a few realizations to tame the scatter of s²
        let coarse: f64 = (0..4).map(|s| sigma_kappa(2.0, s)).sum::<f64>() / 4.0;
        let fine: f64 = (0..4).map(|s| sigma_kappa(0.5, 100 + s)).sum::<f64>() / 4.0;
        let ratio = coarse / fine;
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn coupled_fit_noiseless() {
        let x = grid(-100.0, 100.0, 0.5);
        let s = synth(&device(), 1.0, Analyzer::CrossCircular, &x);
        let fit = fit_coupled(
            &s,
            &CavityCalibration::ideal(35.9, 0.81),
            &CoupledFitOptions::default(),
        )
        .unwrap();
        assert!((fit.g() - 10.2).abs() < 1e-6, "{:?}", fit.result);
        assert!((fit.gamma() - 2.9).abs() < 1e-5);
        assert!(fit.dot_detuning().abs() < 1e-6);
        assert!(fit.strong_coupling);
        assert!(!fit.bare_sufficient);
    }

    #[test]
    fn coupled_fit_on_uncoupled_data_flags_bare_model() {
        let x = grid(-100.0, 100.0, 1.0);
        let bare = CavitySpinParams::bare(35.9, 0.81).unwrap();
        let s = synth(&bare, 1.0, Analyzer::CrossCircular, &x);
        let fit = fit_coupled(
            &s,
            &CavityCalibration::ideal(35.9, 0.81),
            &CoupledFitOptions::default(),
        )
        .unwrap();
        assert!(fit.g() < 0.05, "{:?}", fit.result);
        assert!(fit.bare_sufficient);
        assert!(!fit.strong_coupling);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noisy = add_peak_normalized_noise(&s, 0.01, &mut rng).unwrap();
        let fit = fit_coupled(
            &noisy,
            &CavityCalibration::ideal(35.9, 0.81),
            &CoupledFitOptions::default(),
        )
        .unwrap();
        assert!(fit.bare_sufficient, "{:?}", fit);
    }

    #[test]
    fn coupled_fit_with_fixed_and_floated_second_transition() {
        let x = grid(-100.0, 100.0, 0.5);
        let sigma2 = TransitionParams::new(SpinBranch::Up, -27.0, 4.0, 2.0).unwrap();
        let truth = device().with_transition(sigma2).unwrap();
        let s = synth(&truth, 1.0, Analyzer::CrossCircular, &x);
        let calib = CavityCalibration::ideal(35.9, 0.81);
        let fixed = CoupledFitOptions {
            extra_transitions: vec![sigma2],
            ..CoupledFitOptions::default()
        };
        let fit = fit_coupled(&s, &calib, &fixed).unwrap();
        assert!((fit.g() - 10.2).abs() < 1e-5);

        let floated = CoupledFitOptions {
            extra_transitions: vec![TransitionParams {
                g: 3.0,
                gamma: 3.0,
                detuning_from_cavity: -25.0,
                ..sigma2
            }],
            float_extra: true,
            ..CoupledFitOptions::default()
        };
        let fit = fit_coupled(&s, &calib, &floated).unwrap();
        assert!((fit.g() - 10.2).abs() < 1e-3, "{:?}", fit.result);
        assert!((fit.result.value("g_1").unwrap() - 4.0).abs() < 1e-2);
        assert!((fit.result.value("detuning_1").unwrap() + 27.0).abs() < 1e-2);
    }

    #[test]
    fn mixture_fit() {
        let x = grid(-100.0, 100.0, 1.0);
        let p = device();
        let calib = CavityCalibration::from_params(&p);
        let s = synth(&p, 0.5, Analyzer::CrossCircular, &x);
        let fit = fit_mixture(&s, &p, &calib, &MixtureFitOptions::default()).unwrap();
        assert!((fit.values[0] - 0.5).abs() < 1e-6);

        let s = synth(&p, 0.0, Analyzer::CrossCircular, &x);
        let fit = fit_mixture(&s, &p, &calib, &MixtureFitOptions::default()).unwrap();
        assert!(
            fit.values[0] <= 1.0 && fit.values[0] >= 1.0 - 1e-6,
            "{:?}",
            fit
        );
    }

    #[test]
    fn indistinguishable_branches() {
        let x = grid(-100.0, 100.0, 1.0);
        let bare = CavitySpinParams::bare(35.9, 0.81).unwrap();
        let s = synth(&bare, 0.5, Analyzer::CrossCircular, &x);
        let err = fit_mixture(
            &s,
            &bare,
            &CavityCalibration::from_params(&bare),
            &MixtureFitOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Underdetermined(_)));
    }

    #[test]
    fn convolved_mixture_round_trip() {
        let x = grid(-100.0, 100.0, 0.5);
        let p = device();
        let y = model_spectrum(
            &p,
            0.3,
            &x,
            Analyzer::CrossCircular,
            Some(7.0),
            0.0,
            1.0,
            0.0,
        );
        let s = Spectrum::new(x, y, Analyzer::CrossCircular)
            .unwrap()
            .with_convolution(Some(7.0));
        let fit = fit_mixture(
            &s,
            &p,
            &CavityCalibration::from_params(&p),
            &MixtureFitOptions::default(),
        )
        .unwrap();
        assert!((fit.values[0] - 0.7).abs() < 1e-6);
    }
}
