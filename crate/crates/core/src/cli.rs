//! Command-line surface.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::config::{parse_config, LoadedConfig};
use crate::cqed::{cooperativity, on_resonance_coefficients, Analyzer, SpinBranch};
use crate::error::{Error, Result};
use crate::estimation::{
    fit_bare_cavity, fit_coupled, fit_mixture, BareFitOptions, CavityCalibration,
    CoupledFitOptions, FitResult, MixtureFitOptions,
};
use crate::experiment::{
    conditional_phase_experiment, linear_grid, probe_spectrum, ramsey_fringe, ramsey_population_map,
};
use crate::fidelity::{conditional_phase, fidelity_report};
use crate::table::{read_spectrum_csv, write_table, write_table_to, Cell, Provenance, Table};

#[derive(Debug, Parser)]
#[command(
    name = "qps",
    version,
    about = "Spin-photon quantum phase switch simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe reflection spectrum for a spin state.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: DetuningRange,
        #[arg(long, value_enum, default_value_t = SpinArg::Up)]
        spin: SpinArg,
        #[arg(long, value_enum, default_value_t = ChannelArg::Cross)]
        channel: ChannelArg,
    },
    /// Fit a measured spectrum.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Spectrum CSV with header `detuning_ghz,intensity`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelArg::Bare)]
        model: ModelArg,
        #[arg(long, value_enum, default_value_t = ChannelArg::Cross)]
        channel: ChannelArg,
        /// Branch fitted by the coupled model.
        #[arg(long, value_enum, default_value_t = SpinArg::Up)]
        spin: SpinArg,
    },
    /// Switching fidelities and on-resonance reflection coefficients.
    Fidelity {
        #[command(flatten)]
        common: Common,
        /// Probe detuning in GHz.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        detuning: f64,
    },
    /// Ramsey fringe, or a power × delay population map when a power range is given.
    Ramsey {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: TauRange,
        #[arg(long)]
        power_min: Option<f64>,
        #[arg(long)]
        power_max: Option<f64>,
        #[arg(long)]
        power_step: Option<f64>,
        /// Larmor frequency in GHz, overriding the config.
        #[arg(long, allow_hyphen_values = true)]
        larmor_freq: Option<f64>,
    },
    /// Spin-conditional photon phase over a detuning sweep.
    Phase {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: DetuningRange,
    },
    /// Photon-conditioned Ramsey Monte Carlo.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: TauRange,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        nbar: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        control_detuning: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        larmor_freq: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "QPS_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DetuningRange {
    #[arg(long, allow_hyphen_values = true)]
    pub detuning_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub detuning_max: Option<f64>,
    #[arg(long, visible_alias = "step")]
    pub detuning_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TauRange {
    #[arg(long)]
    pub tau_min: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub tau_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpinArg {
    Up,
    Down,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Co,
    Cross,
}

impl From<ChannelArg> for Analyzer {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Co => Analyzer::CoCircular,
            ChannelArg::Cross => Analyzer::CrossCircular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Bare,
    Coupled,
    Mixture,
}

struct Ctx {
    loaded: LoadedConfig,
    out: Option<PathBuf>,
    seed: u64,
    command: &'static str,
}

impl Ctx {
    fn new(common: &Common, command: &'static str) -> Result<Self> {
        let loaded = parse_config(&common.config)?;
        let seed = common.seed.unwrap_or(loaded.config.seed);
        let out = common
            .out
            .clone()
            .or_else(|| loaded.config.output.as_ref().map(PathBuf::from));
        Ok(Self {
            loaded,
            out,
            seed,
            command,
        })
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            command: self.command.into(),
            config_sha256: self.loaded.sha256.clone(),
            seed: self.seed,
        }
    }

    fn emit_table(&self, table: &Table, stdout: &mut dyn Write) -> Result<()> {
        match &self.out {
            Some(p) => write_table(table, &self.provenance(), p),
            None => write_table_to(table, &self.provenance(), stdout),
        }
    }

    fn emit_json(&self, value: &Value, stdout: &mut dyn Write) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        match &self.out {
            Some(p) => write_file(p, text.as_bytes()),
            None => stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("writing stdout", e)),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn or(o: Option<f64>, d: f64) -> f64 {
    o.unwrap_or(d)
}

fn fit_json(r: &FitResult) -> Value {
    let params: serde_json::Map<String, Value> = r
        .names
        .iter()
        .zip(r.values.iter().zip(&r.uncertainties))
        .map(|(n, (v, u))| {
            (
                n.clone(),
                json!({ "value": v, "uncertainty": finite_or_null(*u) }),
            )
        })
        .collect();
    json!({
        "parameters": params,
        "rss": r.rss,
        "converged": r.converged,
        "iterations": r.iterations,
        "n_points": r.n_points,
    })
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Execute a parsed command, writing results to `stdout` unless an output
/// file is configured.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Spectrum {
            common,
            range,
            spin,
            channel,
        } => {
            let ctx = Ctx::new(common, "spectrum")?;
            let cfg = &ctx.loaded.config;
            let p = &cfg.probe;
            let x = linear_grid(
                or(range.detuning_min, p.detuning_min),
                or(range.detuning_max, p.detuning_max),
                or(range.detuning_step, p.detuning_step),
            )?;
            let mix = match spin {
                SpinArg::Up => (1.0, 0.0),
                SpinArg::Down => (0.0, 1.0),
                SpinArg::Mixture => (1.0 - p.mixture_p_down, p.mixture_p_down),
            };
            let s = probe_spectrum(&cfg.cavity_params()?, mix, p.fwhm, (*channel).into(), &x)?;
            let mut t = Table::from_spectrum(&s);
            t.note(format!(
                "channel={} p_up={} p_down={} probe_fwhm_ghz={}",
                s.channel, mix.0, mix.1, p.fwhm
            ));
            ctx.emit_table(&t, stdout)
        }
        Command::Fit {
            common,
            data,
            model,
            channel,
            spin,
        } => {
            let ctx = Ctx::new(common, "fit")?;
            let cfg = &ctx.loaded.config;
            let fwhm = (cfg.probe.fwhm > 0.0).then_some(cfg.probe.fwhm);
            let spec = read_spectrum_csv(data, (*channel).into())?.with_convolution(fwhm);
            let params = cfg.cavity_params()?;
            let value = match model {
                ModelArg::Bare => {
                    let f = fit_bare_cavity(&spec, &BareFitOptions::default())?;
                    json!({ "model": "bare", "fit": fit_json(&f.result) })
                }
                ModelArg::Coupled => {
                    let branch = match spin {
                        SpinArg::Down => SpinBranch::Down,
                        _ => SpinBranch::Up,
                    };
                    let extra = params.branch_transitions(branch).skip(1).copied().collect();
                    let opts = CoupledFitOptions {
                        branch,
                        extra_transitions: extra,
                        ..CoupledFitOptions::default()
                    };
                    let f = fit_coupled(&spec, &CavityCalibration::from_params(&params), &opts)?;
                    json!({
                        "model": "coupled",
                        "fit": fit_json(&f.result),
                        "strong_coupling": f.strong_coupling,
                        "bare_sufficient": f.bare_sufficient,
                        "ambiguous": f.ambiguous,
                        "bare_rss": f.bare_rss,
                    })
                }
                ModelArg::Mixture => {
                    let f = fit_mixture(
                        &spec,
                        &params,
                        &CavityCalibration::from_params(&params),
                        &MixtureFitOptions::default(),
                    )?;
                    json!({ "model": "mixture", "fit": fit_json(&f) })
                }
            };
            ctx.emit_json(&value, stdout)
        }
        Command::Fidelity { common, detuning } => {
            let ctx = Ctx::new(common, "fidelity")?;
            let params = ctx.loaded.config.cavity_params()?;
            let rep = fidelity_report(&params, *detuning);
            let resonant: Vec<Value> = params
                .branch_transitions(SpinBranch::Up)
                .filter(|t| t.g > 0.0)
                .take(1)
                .map(|t| -> Result<Value> {
                    let c = cooperativity(t.g, params.kappa, t.gamma)?;
                    let (r_up, r_down) = on_resonance_coefficients(params.alpha(), c)?;
                    Ok(json!({
                        "cooperativity": c,
                        "r_up": r_up,
                        "r_down": r_down,
                        "strong_coupling": t.g > params.kappa / 4.0,
                    }))
                })
                .collect::<Result<_>>()?;
            let value = json!({
                "detuning_ghz": detuning,
                "f_up": rep.f_up,
                "f_down": rep.f_down,
                "r_up": [rep.r_up.re, rep.r_up.im],
                "r_down": [rep.r_down.re, rep.r_down.im],
                "on_resonance": resonant.into_iter().next().unwrap_or(Value::Null),
            });
            ctx.emit_json(&value, stdout)
        }
        Command::Ramsey {
            common,
            range,
            power_min,
            power_max,
            power_step,
            larmor_freq,
        } => {
            let mut ctx = Ctx::new(common, "ramsey")?;
            if let (Some(f), Some(spin)) = (larmor_freq, ctx.loaded.config.spin.as_mut()) {
                spin.larmor_freq = Some(*f);
            }
            let cfg = &ctx.loaded.config;
            let r = &cfg.ramsey;
            let taus = linear_grid(
                or(range.tau_min, r.tau_min),
                or(range.tau_max, r.tau_max),
                or(range.tau_step, r.tau_step),
            )?;
            let base = cfg.ramsey_config()?;
            let table = match (power_min, power_max, power_step) {
                (None, None, None) => {
                    let p = ramsey_fringe(&base, &taus)?;
                    let mut t = Table::new(["tau_ns", "p_down"]);
                    for (tau, p) in taus.iter().zip(p) {
                        t.push(vec![(*tau).into(), p.into()]);
                    }
                    t
                }
                (lo, hi, step) => {
                    let powers = linear_grid(
                        or(*lo, 0.0),
                        or(*hi, 4.0 * r.p_pi_half),
                        or(*step, r.p_pi_half / 8.0),
                    )?;
                    let map = ramsey_population_map(&base, &powers, r.p_pi_half, &taus)?;
                    let mut t = Table::new(["power_uw", "tau_ns", "p_down"]);
                    for (pw, row) in powers.iter().zip(map) {
                        for (tau, p) in taus.iter().zip(row) {
                            t.push(vec![(*pw).into(), (*tau).into(), p.into()]);
                        }
                    }
                    t
                }
            };
            ctx.emit_table(&table, stdout)
        }
        Command::Phase { common, range } => {
            let ctx = Ctx::new(common, "phase")?;
            let cfg = &ctx.loaded.config;
            let p = &cfg.probe;
            let x = linear_grid(
                or(range.detuning_min, p.detuning_min),
                or(range.detuning_max, p.detuning_max),
                or(range.detuning_step, p.detuning_step),
            )?;
            let params = cfg.cavity_params()?;
            let mut t = Table::new(["detuning_ghz", "delta_phi_rad", "delta_phi_over_pi"]);
            for d in x {
                let r = conditional_phase(&params, d)?;
                t.push(vec![
                    d.into(),
                    r.delta_phi.into(),
                    (r.delta_phi / PI).into(),
                ]);
            }
            ctx.emit_table(&t, stdout)
        }
        Command::Montecarlo {
            common,
            range,
            shots,
            nbar,
            control_detuning,
            larmor_freq,
        } => {
            let mut ctx = Ctx::new(common, "montecarlo")?;
            if let (Some(f), Some(spin)) = (larmor_freq, ctx.loaded.config.spin.as_mut()) {
                spin.larmor_freq = Some(*f);
            }
            let cfg = &ctx.loaded.config;
            let r = &cfg.ramsey;
            let taus = linear_grid(
                or(range.tau_min, r.tau_min),
                or(range.tau_max, r.tau_max),
                or(range.tau_step, r.tau_step),
            )?;
            let mut control = cfg.control_pulse();
            control.mean_photons_coupled = or(*nbar, control.mean_photons_coupled);
            control.detuning = or(*control_detuning, control.detuning);
            let shots = shots.unwrap_or(cfg.shots);
            let res = conditional_phase_experiment(
                &cfg.ramsey_config()?,
                &control,
                &cfg.cavity_params()?,
                &taus,
                shots,
                ctx.seed,
            )?;
            let mut t = Table::new([
                "tau_ns",
                "shots",
                "p_down_blocked",
                "p_down_unconditioned",
                "heralds",
                "coincidences",
                "p_conditioned",
            ]);
            for i in 0..taus.len() {
                t.push(vec![
                    Cell::Float(taus[i]),
                    Cell::Int(res.counts.shots_per_tau[i]),
                    Cell::Float(res.blocked[i]),
                    Cell::Float(res.unconditioned[i]),
                    Cell::Int(res.counts.heralds[i]),
                    Cell::Int(res.counts.conditioned[i]),
                    Cell::Float(res.conditioned.probabilities[i]),
                ]);
            }
            t.note(format!(
                "shots={shots} nbar={} control_detuning_ghz={}",
                control.mean_photons_coupled, control.detuning
            ));
            t.note(format!(
                "conditioned_shift_rad={:.16e} conditioned_shift_over_pi={:.16e}",
                res.conditioned_shift,
                res.conditioned_shift / PI
            ));
            t.note(format!(
                "unconditioned_shift_rad={:.16e} unconditioned_shift_over_pi={:.16e}",
                res.unconditioned_shift,
                res.unconditioned_shift / PI
            ));
            t.note(format!(
                "visibility_blocked={:.6} visibility_unconditioned={:.6} visibility_conditioned={:.6}",
                res.blocked_fit.visibility, res.unconditioned_fit.visibility, res.conditioned_fit.visibility
            ));
            ctx.emit_table(&t, stdout)
        }
    }
}

/// Machine-readable error report written to stderr by the binary.
pub fn error_json(e: &Error) -> String {
    json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}
