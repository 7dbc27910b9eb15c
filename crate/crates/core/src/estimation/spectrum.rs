use crate::cqed::Analyzer;
use crate::error::{Error, Result};

/// Sampled intensity spectrum on a strictly increasing detuning grid (GHz).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    detunings: Vec<f64>,
    intensities: Vec<f64>,
    pub channel: Analyzer,
    /// FWHM of the Gaussian instrument response already folded into the data.
    pub convolution_fwhm: Option<f64>,
}

impl Spectrum {
    pub fn new(detunings: Vec<f64>, intensities: Vec<f64>, channel: Analyzer) -> Result<Self> {
        if detunings.len() != intensities.len() {
            return Err(Error::domain(format!(
                "{} detunings but {} intensities",
                detunings.len(),
                intensities.len()
            )));
        }
        if detunings.is_empty() {
            return Err(Error::domain("spectrum has no points"));
        }
        for (i, w) in detunings.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::domain(format!(
                    "detunings must be strictly increasing (index {}: {} then {})",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        if let Some(d) = detunings.iter().find(|d| !d.is_finite()) {
            return Err(Error::domain(format!("non-finite detuning {d}")));
        }
        if let Some((i, v)) = intensities
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::domain(format!(
                "intensity at index {i} must be finite and >= 0, got {v}"
            )));
        }
        Ok(Self {
            detunings,
            intensities,
            channel,
            convolution_fwhm: None,
        })
    }

    pub fn with_convolution(mut self, fwhm: Option<f64>) -> Self {
        self.convolution_fwhm = fwhm.filter(|f| *f > 0.0);
        self
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.detunings
            .iter()
            .copied()
            .zip(self.intensities.iter().copied())
    }

    pub fn span(&self) -> f64 {
        self.detunings[self.len() - 1] - self.detunings[0]
    }

    /// Trapezoidal integral of the intensity.
    pub fn area(&self) -> f64 {
        self.detunings
            .windows(2)
            .zip(self.intensities.windows(2))
            .map(|(d, v)| 0.5 * (d[1] - d[0]) * (v[0] + v[1]))
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut s = Self::new(
            self.detunings.clone(),
            self.intensities.iter().map(|v| v * factor).collect(),
            self.channel,
        )?;
        s.convolution_fwhm = self.convolution_fwhm;
        Ok(s)
    }

    pub fn shifted(&self, delta: f64) -> Result<Self> {
        let mut s = Self::new(
            self.detunings.iter().map(|d| d + delta).collect(),
            self.intensities.clone(),
            self.channel,
        )?;
        s.convolution_fwhm = self.convolution_fwhm;
        Ok(s)
    }
}

pub(crate) fn is_uniform(x: &[f64]) -> bool {
    if x.len() < 3 {
        return true;
    }
    let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    x.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-6 * h)
}

/// Discrete Gaussian kernel on a grid of spacing `step`, normalized to unit sum.
fn gaussian_kernel(step: f64, fwhm: f64) -> Vec<f64> {
    let sigma = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let half = (5.0 * sigma / step).ceil() as isize;
    let mut w: Vec<f64> = (-half..=half)
        .map(|k| {
            let x = k as f64 * step;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Index into a sequence of length `n` continued by even (half-sample)
/// reflection across both ends.
fn reflect(m: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = m.rem_euclid(period);
    if m >= n as isize {
        (period - 1 - m) as usize
    } else {
        m as usize
    }
}

/// Gaussian convolution of uniformly sampled values.
///
/// The signal is extended by reflection at the grid edges. With a symmetric
/// kernel this makes the convolution matrix symmetric with unit row sums,
/// so the sum of the samples is preserved exactly.
pub(crate) fn convolve_uniform(values: &[f64], step: f64, fwhm: f64) -> Vec<f64> {
    if fwhm <= 0.0 || values.len() < 2 {
        return values.to_vec();
    }
    let kernel = gaussian_kernel(step, fwhm);
    let half = (kernel.len() / 2) as isize;
    let n = values.len();
    (0..n as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * values[reflect(i + k as isize - half, n)])
                .sum()
        })
        .collect()
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    match x.binary_search_by(|v| v.partial_cmp(&at).unwrap()) {
        Ok(i) => y[i],
        Err(0) => y[0],
        Err(i) if i >= x.len() => y[x.len() - 1],
        Err(i) => {
            let t = (at - x[i - 1]) / (x[i] - x[i - 1]);
            y[i - 1] + t * (y[i] - y[i - 1])
        }
    }
}

/// Convolve the sampled values on grid `x` with a unit-area Gaussian.
/// Non-uniform grids are resampled at their smallest spacing first.
pub(crate) fn convolve_on_grid(x: &[f64], y: &[f64], fwhm: f64) -> Vec<f64> {
    if fwhm <= 0.0 || x.len() < 2 {
        return y.to_vec();
    }
    if is_uniform(x) {
        let step = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
        return convolve_uniform(y, step, fwhm);
    }
    let min_step = x
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let span = x[x.len() - 1] - x[0];
    let n = ((span / min_step).round() as usize + 1).clamp(x.len(), 1 << 20);
    let step = span / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| x[0] + i as f64 * step).collect();
    let resampled: Vec<f64> = grid.iter().map(|&g| interpolate(x, y, g)).collect();
    let smoothed = convolve_uniform(&resampled, step, fwhm);
    x.iter()
        .map(|&v| interpolate(&grid, &smoothed, v))
        .collect()
}

/// Convolve a spectrum's intensity with a unit-area Gaussian of the given FWHM.
pub fn convolve_gaussian(spectrum: &Spectrum, fwhm: f64) -> Result<Spectrum> {
    if !(fwhm >= 0.0) || !fwhm.is_finite() {
        return Err(Error::domain(format!(
            "fwhm must be finite and >= 0, got {fwhm}"
        )));
    }
    if fwhm == 0.0 {
        return Ok(spectrum.clone());
    }
    if fwhm > spectrum.span() {
        return Err(Error::domain(format!(
            "fwhm {fwhm} GHz exceeds the spectral span {} GHz",
            spectrum.span()
        )));
    }
    let smoothed = convolve_on_grid(spectrum.detunings(), spectrum.intensities(), fwhm)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let mut out = Spectrum::new(spectrum.detunings().to_vec(), smoothed, spectrum.channel)?;
    out.convolution_fwhm = Some(match spectrum.convolution_fwhm {
        Some(prev) => prev.hypot(fwhm),
        None => fwhm,
    });
    Ok(out)
}
