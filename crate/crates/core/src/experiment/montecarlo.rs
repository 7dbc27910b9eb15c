//! Photon-conditioned spin phase switch: shot-by-shot Monte Carlo and its
//! exact ensemble expectation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::fringe::{fringe_phase_fit, FringeFit};
use super::ramsey::RamseyConfig;
use crate::cqed::{reflection_amplitude, CavitySpinParams, SpinBranch};
use crate::error::{Error, Result};
use crate::fidelity::{spin_backaction, wrap_to_tau};
use crate::spin::SpinState;

/// Weak control pulse injected between the two rotation pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPulseConfig {
    /// Mean photon number coupled to the cavity per pulse.
    pub mean_photons_coupled: f64,
    /// Control detuning from the cavity, GHz.
    pub detuning: f64,
    /// Pulse length in ps. Treated as instantaneous on spin timescales.
    pub duration_ps: f64,
    /// Arrival time as a fraction of the rotation-pulse delay.
    pub arrival_fraction: f64,
    /// Probability that a reflected control photon is detected.
    pub detection_efficiency: f64,
}

impl ControlPulseConfig {
    pub fn new(mean_photons_coupled: f64, detuning: f64) -> Self {
        Self {
            mean_photons_coupled,
            detuning,
            duration_ps: 63.0,
            arrival_fraction: 0.5,
            detection_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photons_coupled >= 0.0) || !self.mean_photons_coupled.is_finite() {
            return Err(Error::domain(format!(
                "mean_photons_coupled must be finite and >= 0, got {}",
                self.mean_photons_coupled
            )));
        }
        if !self.detuning.is_finite() {
            return Err(Error::domain("control detuning must be finite"));
        }
        if !(self.duration_ps >= 0.0) {
            return Err(Error::domain(format!(
                "control duration must be >= 0, got {}",
                self.duration_ps
            )));
        }
        if !(0.0..=1.0).contains(&self.arrival_fraction) {
            return Err(Error::domain(format!(
                "arrival_fraction must lie in [0, 1], got {}",
                self.arrival_fraction
            )));
        }
        if !(self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0) {
            return Err(Error::domain(format!(
                "detection_efficiency must lie in (0, 1], got {}",
                self.detection_efficiency
            )));
        }
        Ok(())
    }
}

/// Coincidence counts and the conditioned probabilities derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceSeries {
    pub taus: Vec<f64>,
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
}

impl CoincidenceSeries {
    pub fn new(taus: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if taus.len() != counts.len() {
            return Err(Error::domain("delay and count arrays differ in length"));
        }
        let probabilities = normalize_coincidences(&counts)?;
        Ok(Self {
            taus,
            counts,
            probabilities,
        })
    }
}

/// `P(τ) = C(τ) / (max C + min C)`.
pub fn normalize_coincidences(counts: &[u64]) -> Result<Vec<f64>> {
    let (Some(&max), Some(&min)) = (counts.iter().max(), counts.iter().min()) else {
        return Err(Error::domain("coincidence counts must be non-empty"));
    };
    if max == 0 {
        return Err(Error::DivisionByZero(
            "all coincidence counts are zero".into(),
        ));
    }
    let norm = (max + min) as f64;
    Ok(counts.iter().map(|&c| c as f64 / norm).collect())
}

/// Poisson photon number; `mean = 0` consumes no randomness.
pub fn sample_photon_number<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist =
        Poisson::new(mean).map_err(|e| Error::domain(format!("photon number mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Raw tallies per delay. Shot `j` is assigned to delay index `j mod N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSwitchCounts {
    pub shots_per_tau: Vec<u64>,
    /// Readout fired with the control pulse blocked.
    pub blocked: Vec<u64>,
    /// Readout fired with the control pulse on, ignoring heralds.
    pub unconditioned: Vec<u64>,
    /// At least one reflected control photon was detected.
    pub heralds: Vec<u64>,
    /// Herald and readout coincidence, `C(τ)`.
    pub conditioned: Vec<u64>,
}

impl PhaseSwitchCounts {
    fn zeros(n: usize) -> Self {
        Self {
            shots_per_tau: vec![0; n],
            blocked: vec![0; n],
            unconditioned: vec![0; n],
            heralds: vec![0; n],
            conditioned: vec![0; n],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in [
            (&mut self.shots_per_tau, &other.shots_per_tau),
            (&mut self.blocked, &other.blocked),
            (&mut self.unconditioned, &other.unconditioned),
            (&mut self.heralds, &other.heralds),
            (&mut self.conditioned, &other.conditioned),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self
    }
}

/// Ensemble averages of the Monte Carlo tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSwitchExpectation {
    pub blocked: Vec<f64>,
    pub unconditioned: Vec<f64>,
    pub herald_probability: Vec<f64>,
    /// Readout probability given a herald. Independent of detection efficiency.
    pub conditioned: Vec<f64>,
}

struct Prepared {
    cfgs: Vec<RamseyConfig>,
    arrivals: Vec<f64>,
    before: Vec<SpinState>,
    p_blocked: Vec<f64>,
    r_up: Complex64,
    r_down: Complex64,
}

fn prepare(
    ramsey: &RamseyConfig,
    control: &ControlPulseConfig,
    params: &CavitySpinParams,
    taus: &[f64],
) -> Result<Prepared> {
    control.validate()?;
    params.validate()?;
    if taus.is_empty() {
        return Err(Error::domain("delay grid must be non-empty"));
    }
    let mut p = Prepared {
        cfgs: Vec::with_capacity(taus.len()),
        arrivals: Vec::with_capacity(taus.len()),
        before: Vec::with_capacity(taus.len()),
        p_blocked: Vec::with_capacity(taus.len()),
        r_up: reflection_amplitude(params, SpinBranch::Up, control.detuning).value(),
        r_down: reflection_amplitude(params, SpinBranch::Down, control.detuning).value(),
    };
    for &tau in taus {
        let cfg = ramsey.with_tau(tau);
        cfg.validate()?;
        let t = control.arrival_fraction * tau;
        let before = cfg.state_before_control(t)?;
        p.p_blocked.push(cfg.finish_from(&before, t)?);
        p.cfgs.push(cfg);
        p.arrivals.push(t);
        p.before.push(before);
    }
    Ok(p)
}

impl Prepared {
    fn reflect_probability(&self, s: &SpinState) -> f64 {
        s.p_up() * self.r_up.norm_sqr() + s.p_down() * self.r_down.norm_sqr()
    }

    fn shot(
        &self,
        seed: u64,
        j: u64,
        control: &ControlPulseConfig,
        acc: &mut PhaseSwitchCounts,
    ) -> Result<()> {
        let i = (j % self.cfgs.len() as u64) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j);
        let u_read: f64 = rng.random();
        let u_herald: f64 = rng.random();
        let n = sample_photon_number(&mut rng, control.mean_photons_coupled)?;
        let mut state = self.before[i];
        let mut reflected = false;
        for _ in 0..n {
            let hit = rng.random::<f64>() < self.reflect_probability(&state);
            state = spin_backaction(&state, self.r_up, self.r_down, hit)?.0;
            reflected |= hit;
        }
        let p_control = if n == 0 {
            self.p_blocked[i]
        } else {
            self.cfgs[i].finish_from(&state, self.arrivals[i])?
        };
        let fired = u_read < p_control;
        let herald = reflected && u_herald < control.detection_efficiency;
        acc.shots_per_tau[i] += 1;
        acc.blocked[i] += u64::from(u_read < self.p_blocked[i]);
        acc.unconditioned[i] += u64::from(fired);
        acc.heralds[i] += u64::from(herald);
        acc.conditioned[i] += u64::from(herald && fired);
        Ok(())
    }
}

/// Run `shots` independent shots spread round-robin over `taus`.
///
/// Each shot draws from its own ChaCha8 stream keyed by `(seed, shot index)`,
/// so the counts do not depend on thread count or scheduling. A photon that
/// is not reflected still imprints the unconditioned phase.
pub fn simulate_phase_switch(
    ramsey: &RamseyConfig,
    control: &ControlPulseConfig,
    params: &CavitySpinParams,
    taus: &[f64],
    shots: u64,
    seed: u64,
) -> Result<PhaseSwitchCounts> {
    if shots == 0 {
        return Err(Error::domain("shots must be >= 1"));
    }
    let prep = prepare(ramsey, control, params, taus)?;
    let n = taus.len();
    (0..shots)
        .into_par_iter()
        .try_fold(
            || PhaseSwitchCounts::zeros(n),
            |mut acc, j| {
                prep.shot(seed, j, control, &mut acc)?;
                Ok(acc)
            },
        )
        .try_reduce(|| PhaseSwitchCounts::zeros(n), |a, b| Ok(a.merge(b)))
}

/// Exact expectation of [`simulate_phase_switch`] by enumerating photon
/// numbers and reflection patterns.
pub fn expected_phase_switch(
    ramsey: &RamseyConfig,
    control: &ControlPulseConfig,
    params: &CavitySpinParams,
    taus: &[f64],
) -> Result<PhaseSwitchExpectation> {
    let prep = prepare(ramsey, control, params, taus)?;
    let nbar = control.mean_photons_coupled;
    let eta = control.detection_efficiency;
    let mut out = PhaseSwitchExpectation {
        blocked: prep.p_blocked.clone(),
        unconditioned: Vec::with_capacity(taus.len()),
        herald_probability: Vec::with_capacity(taus.len()),
        conditioned: Vec::with_capacity(taus.len()),
    };
    for i in 0..taus.len() {
        // (weight, readout-weighted sum) for patterns with and without a reflection
        let mut sums = [(0.0, 0.0); 2];
        let mut pn = (-nbar).exp();
        let mut n = 0u32;
        let mut tail = 1.0;
        while tail > 1e-16 && n < 200 {
            enumerate(&prep, i, prep.before[i], n, pn, false, &mut sums)?;
            tail -= pn;
            n += 1;
            pn *= nbar / n as f64;
            if nbar == 0.0 {
                break;
            }
        }
        let [(w0, s0), (w1, s1)] = sums;
        out.unconditioned.push((s0 + s1) / (w0 + w1));
        out.herald_probability.push(eta * w1);
        out.conditioned
            .push(if w1 > 0.0 { s1 / w1 } else { f64::NAN });
    }
    Ok(out)
}

fn enumerate(
    prep: &Prepared,
    i: usize,
    state: SpinState,
    remaining: u32,
    weight: f64,
    reflected: bool,
    sums: &mut [(f64, f64); 2],
) -> Result<()> {
    if weight < 1e-20 {
        return Ok(());
    }
    if remaining == 0 {
        let p = prep.cfgs[i].finish_from(&state, prep.arrivals[i])?;
        let slot = &mut sums[usize::from(reflected)];
        slot.0 += weight;
        slot.1 += weight * p;
        return Ok(());
    }
    let q = prep.reflect_probability(&state);
    if q > 0.0 {
        let s = spin_backaction(&state, prep.r_up, prep.r_down, true)?.0;
        enumerate(prep, i, s, remaining - 1, weight * q, true, sums)?;
    }
    if q < 1.0 {
        let s = spin_backaction(&state, prep.r_up, prep.r_down, false)?.0;
        enumerate(
            prep,
            i,
            s,
            remaining - 1,
            weight * (1.0 - q),
            reflected,
            sums,
        )?;
    }
    Ok(())
}

/// Outcome of the photon-conditioned Ramsey experiment.
#[derive(Debug, Clone)]
pub struct ConditionalPhaseResult {
    pub taus: Vec<f64>,
    pub counts: PhaseSwitchCounts,
    pub blocked: Vec<f64>,
    pub unconditioned: Vec<f64>,
    pub conditioned: CoincidenceSeries,
    pub blocked_fit: FringeFit,
    pub unconditioned_fit: FringeFit,
    pub conditioned_fit: FringeFit,
    /// Conditioned fringe phase relative to the blocked fringe, in `[0, 2π)`.
    pub conditioned_shift: f64,
    /// Unconditioned fringe phase relative to the blocked fringe, in `[0, 2π)`.
    pub unconditioned_shift: f64,
}

/// Spin phase imprinted on the fringe, `φ_blocked − φ`, in `[0, 2π)`.
///
/// A spin phase `Δ` delays the fringe to `cos(ωτ − Δ)`, so the fitted phase is
/// `−Δ` relative to the reference.
pub fn fringe_shift(reference: &FringeFit, shifted: &FringeFit) -> f64 {
    wrap_to_tau(reference.phase - shifted.phase)
}

/// Distance of an angle from zero on the circle, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_to_tau(a - b);
    d.min(std::f64::consts::TAU - d)
}

fn fraction(counts: &[u64], shots: &[u64]) -> Vec<f64> {
    counts
        .iter()
        .zip(shots)
        .map(|(&c, &n)| if n > 0 { c as f64 / n as f64 } else { 0.0 })
        .collect()
}

/// Simulate the experiment and extract the fringe phase shifts.
pub fn conditional_phase_experiment(
    ramsey: &RamseyConfig,
    control: &ControlPulseConfig,
    params: &CavitySpinParams,
    taus: &[f64],
    shots: u64,
    seed: u64,
) -> Result<ConditionalPhaseResult> {
    let counts = simulate_phase_switch(ramsey, control, params, taus, shots, seed)?;
    if counts.conditioned.iter().all(|&c| c == 0) {
        return Err(Error::InsufficientStatistics(format!(
            "no heralded coincidences in {shots} shots (mean photon number {})",
            control.mean_photons_coupled
        )));
    }
    let larmor = ramsey.env.larmor_freq;
    let blocked = fraction(&counts.blocked, &counts.shots_per_tau);
    let unconditioned = fraction(&counts.unconditioned, &counts.shots_per_tau);
    let conditioned = CoincidenceSeries::new(taus.to_vec(), counts.conditioned.clone())?;
    let blocked_fit = fringe_phase_fit(taus, &blocked, larmor)?;
    let unconditioned_fit = fringe_phase_fit(taus, &unconditioned, larmor)?;
    let conditioned_fit = fringe_phase_fit(taus, &conditioned.probabilities, larmor)?;
    Ok(ConditionalPhaseResult {
        taus: taus.to_vec(),
        conditioned_shift: fringe_shift(&blocked_fit, &conditioned_fit),
        unconditioned_shift: fringe_shift(&blocked_fit, &unconditioned_fit),
        counts,
        blocked,
        unconditioned,
        conditioned,
        blocked_fit,
        unconditioned_fit,
        conditioned_fit,
    })
}
