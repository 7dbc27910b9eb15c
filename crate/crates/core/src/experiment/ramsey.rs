use nalgebra::Vector3;
use num_complex::Complex64;

use crate::cqed::SpinBranch;
use crate::error::{Error, Result};
use crate::fidelity::spin_backaction;
use crate::spin::{
    larmor_precess_segment, optical_pump, rotate, rotation_angle_from_power, SpinEnvironment,
    SpinState,
};

/// Two-pulse Ramsey sequence. All times in ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseyConfig {
    /// Rotation angle of each pulse about x.
    pub theta: f64,
    /// Delay between the rotation pulses.
    pub tau: f64,
    /// Delay from the second rotation to the readout probe.
    pub dt: f64,
    pub env: SpinEnvironment,
    pub repetition_period: f64,
    /// Keep the pumping laser on between pulses and before readout.
    pub pump_during_delay: bool,
}

impl RamseyConfig {
    pub fn new(theta: f64, tau: f64, env: SpinEnvironment) -> Self {
        Self {
            theta,
            tau,
            dt: 0.0,
            env,
            repetition_period: 13.0,
            pump_during_delay: false,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if !self.theta.is_finite() {
            return Err(Error::domain("rotation angle must be finite"));
        }
        if !(self.tau >= 0.0) || !(self.dt >= 0.0) {
            return Err(Error::domain(format!(
                "tau and dt must be >= 0, got {} and {}",
                self.tau, self.dt
            )));
        }
        if !(self.repetition_period > 0.0) || self.tau + self.dt > self.repetition_period {
            return Err(Error::domain(format!(
                "tau + dt = {} ns does not fit in the repetition period {} ns",
                self.tau + self.dt,
                self.repetition_period
            )));
        }
        Ok(())
    }

    fn free_segment(&self, spin: &SpinState, start: f64, len: f64) -> Result<SpinState> {
        let s = larmor_precess_segment(spin, start, len, &self.env)?;
        if self.pump_during_delay {
            optical_pump(&s, len, &self.env, SpinBranch::Up)
        } else {
            Ok(s)
        }
    }

    /// State just before a control pulse at `arrival` ns into the delay.
    pub(crate) fn state_before_control(&self, arrival: f64) -> Result<SpinState> {
        let s = self.env.initial_state(SpinBranch::Up);
        let s = rotate(&s, self.theta, Vector3::x())?;
        self.free_segment(&s, 0.0, arrival)
    }

    /// Finish the sequence from the control pulse onward and return p_down.
    pub(crate) fn finish_from(&self, spin: &SpinState, arrival: f64) -> Result<f64> {
        let s = self.free_segment(spin, arrival, self.tau - arrival)?;
        let s = rotate(&s, self.theta, Vector3::x())?;
        let s = if self.pump_during_delay {
            optical_pump(&s, self.dt, &self.env, SpinBranch::Up)?
        } else {
            s
        };
        Ok(s.p_down().clamp(0.0, 1.0))
    }
}

/// Spin-down population read out after the sequence.
pub fn ramsey_p_down(cfg: &RamseyConfig) -> Result<f64> {
    cfg.validate()?;
    let s = cfg.state_before_control(0.0)?;
    cfg.finish_from(&s, 0.0)
}

/// A single control photon reflected at `arrival_fraction·τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlReflection {
    pub r_up: Complex64,
    pub r_down: Complex64,
    /// Project onto the reflected outcome rather than applying only the phase.
    pub conditioned: bool,
    pub arrival_fraction: f64,
}

/// p_down when one control photon interacts with the spin mid-sequence.
pub fn ramsey_p_down_with_control(cfg: &RamseyConfig, control: &ControlReflection) -> Result<f64> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&control.arrival_fraction) {
        return Err(Error::domain(format!(
            "arrival_fraction must lie in [0, 1], got {}",
            control.arrival_fraction
        )));
    }
    let t = control.arrival_fraction * cfg.tau;
    let s = cfg.state_before_control(t)?;
    let (s, _) = spin_backaction(&s, control.r_up, control.r_down, control.conditioned)?;
    cfg.finish_from(&s, t)
}

/// p_down over the `powers × taus` grid, one row per power.
pub fn ramsey_population_map(
    base: &RamseyConfig,
    powers_uw: &[f64],
    p_pi_half_uw: f64,
    taus: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if powers_uw.is_empty() || taus.is_empty() {
        return Err(Error::domain("power and delay grids must be non-empty"));
    }
    powers_uw
        .iter()
        .map(|&p| {
            let theta = rotation_angle_from_power(p, p_pi_half_uw)?;
            taus.iter()
                .map(|&tau| {
                    ramsey_p_down(&RamseyConfig {
                        theta,
                        tau,
                        ..*base
                    })
                })
                .collect()
        })
        .collect()
}

/// p_down along a delay scan at fixed rotation angle.
pub fn ramsey_fringe(base: &RamseyConfig, taus: &[f64]) -> Result<Vec<f64>> {
    taus.iter()
        .map(|&tau| ramsey_p_down(&base.with_tau(tau)))
        .collect()
}
