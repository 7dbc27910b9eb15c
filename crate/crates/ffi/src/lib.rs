//! C ABI over the `qps` simulator.
//!
//! Every function returns a [`QpsStatus`]; results go through out-pointers.
//! On failure, [`qps_last_error_message`] describes the most recent error on
//! the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qps::config::RunConfig;
use qps::experiment::{conditional_phase_experiment, normalize_coincidences, probe_spectrum};
use qps::{
    conditional_phase, cooperativity, fidelity_report, on_resonance_coefficients,
    reflection_amplitude, switching_fidelity, Analyzer, CavitySpinParams, Complex64, Error,
    SpinBranch, TransitionParams,
};

/// Result code of every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    DegenerateState = 4,
    UndefinedPhase = 5,
    ImpossibleCondition = 6,
    DivisionByZero = 7,
    InsufficientStatistics = 8,
    DegenerateData = 9,
    Underdetermined = 10,
    NonConvergence = 11,
    Config = 12,
    MissingField = 13,
    Parse = 14,
    Table = 15,
    Io = 16,
    Panic = 99,
}

impl From<&Error> for QpsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => QpsStatus::Domain,
            Error::DegenerateState(_) => QpsStatus::DegenerateState,
            Error::UndefinedPhase(_) => QpsStatus::UndefinedPhase,
            Error::ImpossibleCondition(_) => QpsStatus::ImpossibleCondition,
            Error::DivisionByZero(_) => QpsStatus::DivisionByZero,
            Error::InsufficientStatistics(_) => QpsStatus::InsufficientStatistics,
            Error::DegenerateData(_) => QpsStatus::DegenerateData,
            Error::Underdetermined(_) => QpsStatus::Underdetermined,
            Error::NonConvergence { .. } => QpsStatus::NonConvergence,
            Error::Config { .. } => QpsStatus::Config,
            Error::MissingField(_) => QpsStatus::MissingField,
            Error::Parse { .. } => QpsStatus::Parse,
            Error::Table { .. } => QpsStatus::Table,
            Error::Io { .. } => QpsStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpsSpinBranch {
    Up = 0,
    Down = 1,
}

impl From<QpsSpinBranch> for SpinBranch {
    fn from(b: QpsSpinBranch) -> Self {
        match b {
            QpsSpinBranch::Up => SpinBranch::Up,
            QpsSpinBranch::Down => SpinBranch::Down,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpsChannel {
    Co = 0,
    Cross = 1,
    X = 2,
    Y = 3,
}

impl From<QpsChannel> for Analyzer {
    fn from(c: QpsChannel) -> Self {
        match c {
            QpsChannel::Co => Analyzer::CoCircular,
            QpsChannel::Cross => Analyzer::CrossCircular,
            QpsChannel::X => Analyzer::X,
            QpsChannel::Y => Analyzer::Y,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QpsFidelity {
    pub f_up: f64,
    pub f_down: f64,
    pub r_up_re: f64,
    pub r_up_im: f64,
    pub r_down_re: f64,
    pub r_down_im: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QpsPhaseSwitchSummary {
    /// Conditioned fringe phase relative to the blocked one, radians in `[0, 2π)`.
    pub conditioned_shift: f64,
    pub unconditioned_shift: f64,
    pub conditioned_visibility: f64,
    pub coincidences: u64,
    pub heralds: u64,
}

/// Opaque cavity-plus-dot model.
pub struct QpsCavity {
    params: CavitySpinParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(QpsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

type Res<T = ()> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> Res) -> QpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QpsStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            QpsStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Res {
    if p.is_null() {
        Err(Failure(QpsStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must point to `n` readable values when `n > 0`.
unsafe fn slice<'a, T>(p: *const T, n: usize, name: &str) -> Res<&'a [T]> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn qps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a cavity with no transitions. Free with [`qps_cavity_free`].
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn qps_cavity_new(
    kappa: f64,
    kappa_ex: f64,
    out: *mut *mut QpsCavity,
) -> QpsStatus {
    guard(|| {
        non_null(out, "out")?;
        let params = CavitySpinParams::new(kappa, kappa_ex, Vec::new())?;
        *out = Box::into_raw(Box::new(QpsCavity { params }));
        Ok(())
    })
}

/// Build a cavity from the `cavity` and `transitions` sections of a JSON
/// run configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qps_cavity_from_config_json(
    json: *const c_char,
    out: *mut *mut QpsCavity,
) -> QpsStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(QpsStatus::InvalidUtf8, e.to_string()))?;
        let params = RunConfig::from_json(text)?.cavity_params()?;
        *out = Box::into_raw(Box::new(QpsCavity { params }));
        Ok(())
    })
}

/// # Safety
/// `cavity` must come from a constructor in this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn qps_cavity_add_transition(
    cavity: *mut QpsCavity,
    branch: QpsSpinBranch,
    detuning: f64,
    g: f64,
    gamma: f64,
) -> QpsStatus {
    guard(|| {
        non_null(cavity, "cavity")?;
        let c = &mut *cavity;
        let t = TransitionParams::new(branch.into(), detuning, g, gamma)?;
        c.params = c.params.clone().with_transition(t)?;
        Ok(())
    })
}

/// Release a cavity. Null is ignored.
///
/// # Safety
/// `cavity` must be null or come from a constructor in this library, and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qps_cavity_free(cavity: *mut QpsCavity) {
    if !cavity.is_null() {
        drop(Box::from_raw(cavity));
    }
}

/// # Safety
/// `cavity` must be live; `out_re` and `out_im` writable.
#[no_mangle]
pub unsafe extern "C" fn qps_cavity_reflection(
    cavity: *const QpsCavity,
    branch: QpsSpinBranch,
    detuning: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> QpsStatus {
    guard(|| {
        non_null(cavity, "cavity")?;
        non_null(out_re, "out_re")?;
        non_null(out_im, "out_im")?;
        let r = reflection_amplitude(&(*cavity).params, branch.into(), detuning).value();
        *out_re = r.re;
        *out_im = r.im;
        Ok(())
    })
}

/// Spin-conditional photon phase in `[0, 2π)`.
///
/// # Safety
/// `cavity` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qps_cavity_conditional_phase(
    cavity: *const QpsCavity,
    detuning: f64,
    out: *mut f64,
) -> QpsStatus {
    guard(|| {
        non_null(cavity, "cavity")?;
        non_null(out, "out")?;
        *out = conditional_phase(&(*cavity).params, detuning)?.delta_phi;
        Ok(())
    })
}

/// # Safety
/// `cavity` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qps_cavity_fidelity(
    cavity: *const QpsCavity,
    detuning: f64,
    out: *mut QpsFidelity,
) -> QpsStatus {
    guard(|| {
        non_null(cavity, "cavity")?;
        non_null(out, "out")?;
        let r = fidelity_report(&(*cavity).params, detuning);
        *out = QpsFidelity {
            f_up: r.f_up,
            f_down: r.f_down,
            r_up_re: r.r_up.re,
            r_up_im: r.r_up.im,
            r_down_re: r.r_down.re,
            r_down_im: r.r_down.im,
        };
        Ok(())
    })
}

/// Probe spectrum of the spin mixture `(p_up, 1 − p_up)` on `n` strictly
/// increasing detunings, written to `out[0..n]`.
///
/// # Safety
/// `cavity` must be live; `detunings` readable and `out` writable for `n` values.
#[no_mangle]
pub unsafe extern "C" fn qps_cavity_spectrum(
    cavity: *const QpsCavity,
    p_up: f64,
    probe_fwhm: f64,
    channel: QpsChannel,
    detunings: *const f64,
    n: usize,
    out: *mut f64,
) -> QpsStatus {
    guard(|| {
        non_null(cavity, "cavity")?;
        let x = slice(detunings, n, "detunings")?;
        if n > 0 {
            non_null(out, "out")?;
        }
        let s = probe_spectrum(
            &(*cavity).params,
            (p_up, 1.0 - p_up),
            probe_fwhm,
            channel.into(),
            x,
        )?;
        if n > 0 {
            ptr::copy_nonoverlapping(s.intensities().as_ptr(), out, n);
        }
        Ok(())
    })
}

/// `C = 2g²/(κγ)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qps_cooperativity(
    g: f64,
    kappa: f64,
    gamma: f64,
    out: *mut f64,
) -> QpsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = cooperativity(g, kappa, gamma)?;
        Ok(())
    })
}

/// Resonant reflection coefficients for the coupled and uncoupled branch.
///
/// # Safety
/// `out_up` and `out_down` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qps_on_resonance(
    alpha: f64,
    cooperativity: f64,
    out_up: *mut f64,
    out_down: *mut f64,
) -> QpsStatus {
    guard(|| {
        non_null(out_up, "out_up")?;
        non_null(out_down, "out_down")?;
        let (u, d) = on_resonance_coefficients(alpha, cooperativity)?;
        *out_up = u;
        *out_down = d;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qps_switching_fidelity(
    r_re: f64,
    r_im: f64,
    target: QpsSpinBranch,
    out: *mut f64,
) -> QpsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = switching_fidelity(Complex64::new(r_re, r_im), target.into());
        Ok(())
    })
}

/// `P(τ) = C(τ) / (max C + min C)`.
///
/// # Safety
/// `counts` readable and `out` writable for `n` values.
#[no_mangle]
pub unsafe extern "C" fn qps_normalize_coincidences(
    counts: *const u64,
    n: usize,
    out: *mut f64,
) -> QpsStatus {
    guard(|| {
        let c = slice(counts, n, "counts")?;
        let p = normalize_coincidences(c)?;
        non_null(out, "out")?;
        ptr::copy_nonoverlapping(p.as_ptr(), out, n);
        Ok(())
    })
}

/// Run the photon-conditioned Ramsey Monte Carlo described by a JSON run
/// configuration over its delay grid.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qps_phase_switch_run(
    json: *const c_char,
    shots: u64,
    seed: u64,
    out: *mut QpsPhaseSwitchSummary,
) -> QpsStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(QpsStatus::InvalidUtf8, e.to_string()))?;
        let cfg = RunConfig::from_json(text)?;
        let r = conditional_phase_experiment(
            &cfg.ramsey_config()?,
            &cfg.control_pulse(),
            &cfg.cavity_params()?,
            &cfg.tau_grid()?,
            shots,
            seed,
        )?;
        *out = QpsPhaseSwitchSummary {
            conditioned_shift: r.conditioned_shift,
            unconditioned_shift: r.unconditioned_shift,
            conditioned_visibility: r.conditioned_fit.visibility,
            coincidences: r.counts.conditioned.iter().sum(),
            heralds: r.counts.heralds.iter().sum(),
        };
        Ok(())
    })
}
