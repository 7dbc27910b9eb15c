//! JSON run configuration with strict schema and field-path validation.
//!
//! Frequencies are linear GHz, times ns, pulse powers μW.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cqed::{CavitySpinParams, SpinBranch, TransitionParams};
use crate::error::{Error, Result};
use crate::experiment::{linear_grid, ControlPulseConfig, RamseyConfig};
use crate::spin::{rotation_angle_from_power, DephasingEnvelope, SpinEnvironment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub kappa: f64,
    pub kappa_ex: f64,
    /// Reflection of the uncoupled polarization as `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_x: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub branch: SpinBranch,
    /// Transition frequency minus cavity frequency.
    pub detuning: f64,
    pub g: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub larmor_freq: Option<f64>,
    pub t2_star: f64,
    pub pump_time_constant: f64,
    #[serde(default = "one")]
    pub init_fidelity: f64,
    #[serde(default)]
    pub dephasing: DephasingEnvelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseySection {
    #[serde(default = "forty")]
    pub pulse_power: f64,
    #[serde(default = "forty")]
    pub p_pi_half: f64,
    #[serde(default)]
    pub tau_min: f64,
    #[serde(default = "one")]
    pub tau_max: f64,
    #[serde(default = "tau_step")]
    pub tau_step: f64,
    #[serde(default)]
    pub dt: f64,
    #[serde(default)]
    pub pump_during_delay: bool,
    #[serde(default = "thirteen")]
    pub repetition_period: f64,
}

impl Default for RamseySection {
    fn default() -> Self {
        Self {
            pulse_power: forty(),
            p_pi_half: forty(),
            tau_min: 0.0,
            tau_max: one(),
            tau_step: tau_step(),
            dt: 0.0,
            pump_during_delay: false,
            repetition_period: thirteen(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    #[serde(default)]
    pub mean_photons_coupled: f64,
    #[serde(default)]
    pub detuning: f64,
    #[serde(default = "duration_ps")]
    pub duration_ps: f64,
    #[serde(default = "half")]
    pub arrival_fraction: f64,
    #[serde(default = "one")]
    pub detection_efficiency: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            mean_photons_coupled: 0.0,
            detuning: 0.0,
            duration_ps: duration_ps(),
            arrival_fraction: half(),
            detection_efficiency: one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// Gaussian FWHM of the probe intensity spectrum. 0 disables convolution.
    #[serde(default)]
    pub fwhm: f64,
    #[serde(default = "det_min")]
    pub detuning_min: f64,
    #[serde(default = "det_max")]
    pub detuning_max: f64,
    #[serde(default = "half")]
    pub detuning_step: f64,
    #[serde(default = "half")]
    pub mixture_p_down: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            fwhm: 0.0,
            detuning_min: det_min(),
            detuning_max: det_max(),
            detuning_step: half(),
            mixture_p_down: half(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn forty() -> f64 {
    40.0
}
fn thirteen() -> f64 {
    13.0
}
fn tau_step() -> f64 {
    0.025
}
fn duration_ps() -> f64 {
    63.0
}
fn det_min() -> f64 {
    -100.0
}
fn det_max() -> f64 {
    100.0
}
fn default_shots() -> u64 {
    1_000_000
}

/// Complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cavity: CavitySection,
    #[serde(default)]
    pub transitions: Vec<TransitionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<SpinSection>,
    #[serde(default)]
    pub ramsey: RamseySection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be finite and >= 0, got {v}"),
        ))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {v}")))
    }
}

fn unit_interval(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(field, format!("must lie in [0, 1], got {v}")))
    }
}

fn grid(prefix: &str, min: f64, max: f64, step: f64) -> Result<()> {
    finite(&format!("{prefix}_min"), min)?;
    finite(&format!("{prefix}_max"), max)?;
    positive(&format!("{prefix}_step"), step)?;
    if max < min {
        return Err(Error::config(
            format!("{prefix}_max"),
            format!("must be >= {prefix}_min ({min}), got {max}"),
        ));
    }
    Ok(())
}

impl RunConfig {
    /// Parse and validate JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every physical invariant, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let c = &self.cavity;
        positive("cavity.kappa", c.kappa)?;
        positive("cavity.kappa_ex", c.kappa_ex)?;
        if c.kappa_ex > c.kappa {
            return Err(Error::config(
                "cavity.kappa_ex",
                format!(
                    "must not exceed cavity.kappa ({}), got {}",
                    c.kappa, c.kappa_ex
                ),
            ));
        }
        if let Some([re, im]) = c.r_x {
            finite("cavity.r_x", re)?;
            finite("cavity.r_x", im)?;
            if re.hypot(im) > 1.0 + 1e-12 {
                return Err(Error::config("cavity.r_x", "magnitude must not exceed 1"));
            }
        }
        for (i, t) in self.transitions.iter().enumerate() {
            finite(&format!("transitions[{i}].detuning"), t.detuning)?;
            non_negative(&format!("transitions[{i}].g"), t.g)?;
            positive(&format!("transitions[{i}].gamma"), t.gamma)?;
        }
        if let Some(s) = &self.spin {
            if let Some(f) = s.larmor_freq {
                finite("spin.larmor_freq", f)?;
            }
            positive("spin.t2_star", s.t2_star)?;
            positive("spin.pump_time_constant", s.pump_time_constant)?;
            unit_interval("spin.init_fidelity", s.init_fidelity)?;
        }
        let r = &self.ramsey;
        non_negative("ramsey.pulse_power", r.pulse_power)?;
        positive("ramsey.p_pi_half", r.p_pi_half)?;
        grid("ramsey.tau", r.tau_min, r.tau_max, r.tau_step)?;
        non_negative("ramsey.tau_min", r.tau_min)?;
        non_negative("ramsey.dt", r.dt)?;
        positive("ramsey.repetition_period", r.repetition_period)?;
        if r.tau_max + r.dt > r.repetition_period {
            return Err(Error::config(
                "ramsey.tau_max",
                format!(
                    "tau_max + dt must fit in the repetition period ({} ns)",
                    r.repetition_period
                ),
            ));
        }
        let k = &self.control;
        non_negative("control.mean_photons_coupled", k.mean_photons_coupled)?;
        finite("control.detuning", k.detuning)?;
        non_negative("control.duration_ps", k.duration_ps)?;
        unit_interval("control.arrival_fraction", k.arrival_fraction)?;
        if !(k.detection_efficiency > 0.0 && k.detection_efficiency <= 1.0) {
            return Err(Error::config(
                "control.detection_efficiency",
                format!("must lie in (0, 1], got {}", k.detection_efficiency),
            ));
        }
        let p = &self.probe;
        non_negative("probe.fwhm", p.fwhm)?;
        grid(
            "probe.detuning",
            p.detuning_min,
            p.detuning_max,
            p.detuning_step,
        )?;
        unit_interval("probe.mixture_p_down", p.mixture_p_down)?;
        if self.shots == 0 {
            return Err(Error::config("shots", "must be >= 1"));
        }
        Ok(())
    }

    pub fn cavity_params(&self) -> Result<CavitySpinParams> {
        let transitions = self
            .transitions
            .iter()
            .map(|t| TransitionParams::new(t.branch, t.detuning, t.g, t.gamma))
            .collect::<Result<Vec<_>>>()?;
        let mut p = CavitySpinParams::new(self.cavity.kappa, self.cavity.kappa_ex, transitions)?;
        if let Some([re, im]) = self.cavity.r_x {
            p.r_x = Complex64::new(re, im);
        }
        Ok(p)
    }

    fn spin_section(&self) -> Result<&SpinSection> {
        self.spin
            .as_ref()
            .ok_or_else(|| Error::MissingField("spin".into()))
    }

    /// Spin environment; the Larmor frequency has no default and must be set.
    pub fn spin_environment(&self) -> Result<SpinEnvironment> {
        let s = self.spin_section()?;
        let larmor_freq = s
            .larmor_freq
            .ok_or_else(|| Error::MissingField("spin.larmor_freq".into()))?;
        let env = SpinEnvironment {
            larmor_freq,
            t2_star: s.t2_star,
            pump_time_constant: s.pump_time_constant,
            init_fidelity: s.init_fidelity,
            envelope: s.dephasing,
        };
        env.validate()?;
        Ok(env)
    }

    /// Ramsey sequence at the configured pulse power, with `tau = tau_min`.
    pub fn ramsey_config(&self) -> Result<RamseyConfig> {
        let r = &self.ramsey;
        let theta = rotation_angle_from_power(r.pulse_power, r.p_pi_half)?;
        Ok(RamseyConfig {
            theta,
            tau: r.tau_min,
            dt: r.dt,
            env: self.spin_environment()?,
            repetition_period: r.repetition_period,
            pump_during_delay: r.pump_during_delay,
        })
    }

    pub fn control_pulse(&self) -> ControlPulseConfig {
        let k = &self.control;
        ControlPulseConfig {
            mean_photons_coupled: k.mean_photons_coupled,
            detuning: k.detuning,
            duration_ps: k.duration_ps,
            arrival_fraction: k.arrival_fraction,
            detection_efficiency: k.detection_efficiency,
        }
    }

    pub fn tau_grid(&self) -> Result<Vec<f64>> {
        linear_grid(
            self.ramsey.tau_min,
            self.ramsey.tau_max,
            self.ramsey.tau_step,
        )
    }

    pub fn detuning_grid(&self) -> Result<Vec<f64>> {
        linear_grid(
            self.probe.detuning_min,
            self.probe.detuning_max,
            self.probe.detuning_step,
        )
    }
}

/// A parsed configuration with the SHA-256 of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
}

/// Read, parse and validate a configuration file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    Ok(LoadedConfig {
        config: RunConfig::from_json(&text)?,
        sha256: hex::encode(Sha256::digest(text.as_bytes())),
    })
}
