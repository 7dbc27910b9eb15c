//! Electron-spin qubit channels: rotations, Larmor precession with
//! inhomogeneous dephasing, and optical pumping.
//!
//! Basis ordering is `{|↑⟩, |↓⟩}`; Bloch vectors follow `ρ = (1 + s·σ)/2`, so
//! `|↑⟩` sits at `s_z = +1`. Times are in ns and frequencies in GHz.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cqed::SpinBranch;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// 2×2 density matrix of the spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    rho: Matrix2<Complex64>,
}

impl SpinState {
    /// Build from a density matrix after checking Hermiticity, unit trace and
    /// positivity to 1e-12.
    pub fn from_matrix(rho: Matrix2<Complex64>) -> Result<Self> {
        let s = Self { rho };
        s.check()?;
        Ok(s)
    }

    pub(crate) fn from_matrix_unchecked(rho: Matrix2<Complex64>) -> Self {
        Self { rho }
    }

    pub fn up() -> Self {
        Self::pure(ONE, ZERO)
    }

    pub fn down() -> Self {
        Self::pure(ZERO, ONE)
    }

    pub fn basis(branch: SpinBranch) -> Self {
        match branch {
            SpinBranch::Up => Self::up(),
            SpinBranch::Down => Self::down(),
        }
    }

    /// `(a|↑⟩ + b|↓⟩)` normalized.
    pub fn pure(a: Complex64, b: Complex64) -> Self {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (a, b) = (a / n, b / n);
        Self {
            rho: Matrix2::new(a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj()),
        }
    }

    /// Incoherent mixture with `p_up` in `|↑⟩`.
    pub fn mixed(p_up: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_up) {
            return Err(Error::domain(format!(
                "population must lie in [0, 1], got {p_up}"
            )));
        }
        Ok(Self {
            rho: Matrix2::new(
                Complex64::new(p_up, 0.0),
                ZERO,
                ZERO,
                Complex64::new(1.0 - p_up, 0.0),
            ),
        })
    }

    pub fn from_bloch(s: Vector3<f64>) -> Result<Self> {
        if s.norm() > 1.0 + 1e-12 {
            return Err(Error::domain(format!(
                "Bloch vector length {} exceeds 1",
                s.norm()
            )));
        }
        let rho = Matrix2::new(
            Complex64::new((1.0 + s.z) / 2.0, 0.0),
            Complex64::new(s.x / 2.0, -s.y / 2.0),
            Complex64::new(s.x / 2.0, s.y / 2.0),
            Complex64::new((1.0 - s.z) / 2.0, 0.0),
        );
        Ok(Self { rho })
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.rho
    }

    pub fn p_up(&self) -> f64 {
        self.rho[(0, 0)].re
    }

    pub fn p_down(&self) -> f64 {
        self.rho[(1, 1)].re
    }

    pub fn population(&self, branch: SpinBranch) -> f64 {
        match branch {
            SpinBranch::Up => self.p_up(),
            SpinBranch::Down => self.p_down(),
        }
    }

    /// `ρ_{↑↓}`.
    pub fn coherence(&self) -> Complex64 {
        self.rho[(0, 1)]
    }

    pub fn bloch(&self) -> Vector3<f64> {
        let c = self.coherence();
        Vector3::new(2.0 * c.re, -2.0 * c.im, self.p_up() - self.p_down())
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// Verify the density-matrix invariants.
    pub fn check(&self) -> Result<()> {
        const TOL: f64 = 1e-12;
        let r = &self.rho;
        if r.iter().any(|z| !z.is_finite()) {
            return Err(Error::domain("density matrix has non-finite entries"));
        }
        if (r[(0, 1)] - r[(1, 0)].conj()).norm() > TOL
            || r[(0, 0)].im.abs() > TOL
            || r[(1, 1)].im.abs() > TOL
        {
            return Err(Error::domain("density matrix is not Hermitian"));
        }
        if (r.trace().re - 1.0).abs() > TOL {
            return Err(Error::domain(format!(
                "density matrix trace {} != 1",
                r.trace().re
            )));
        }
        // smallest eigenvalue of a 2x2 Hermitian matrix
        let a = r[(0, 0)].re;
        let d = r[(1, 1)].re;
        let disc = ((a - d) / 2.0).powi(2) + r[(0, 1)].norm_sqr();
        let lambda_min = (a + d) / 2.0 - disc.sqrt();
        if lambda_min < -TOL {
            return Err(Error::domain(format!(
                "density matrix has negative eigenvalue {lambda_min}"
            )));
        }
        Ok(())
    }

    fn conjugate_by(&self, u: &Matrix2<Complex64>) -> Self {
        Self {
            rho: u * self.rho * u.adjoint(),
        }
    }

    fn scale_coherence(&mut self, factor: Complex64) {
        self.rho[(0, 1)] *= factor;
        self.rho[(1, 0)] = self.rho[(0, 1)].conj();
    }
}

/// Shape of the inhomogeneous-dephasing envelope applied during free precession.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DephasingEnvelope {
    /// `exp(−(τ/T2*)²)`, matching quasi-static nuclear-field broadening.
    #[default]
    Gaussian,
    /// `exp(−τ/T2*)`.
    Exponential,
    /// No dephasing.
    None,
}

impl DephasingEnvelope {
    /// Coherence decay factor after free evolution for `tau`.
    pub fn factor(self, tau: f64, t2_star: f64) -> f64 {
        if !t2_star.is_finite() {
            return 1.0;
        }
        let x = tau / t2_star;
        match self {
            DephasingEnvelope::Gaussian => (-x * x).exp(),
            DephasingEnvelope::Exponential => (-x).exp(),
            DephasingEnvelope::None => 1.0,
        }
    }
}

/// Environment of the spin qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinEnvironment {
    pub larmor_freq: f64,
    pub t2_star: f64,
    pub pump_time_constant: f64,
    /// Population placed in the pumped state by initialization.
    pub init_fidelity: f64,
    pub envelope: DephasingEnvelope,
}

impl SpinEnvironment {
    pub fn validate(&self) -> Result<()> {
        if !self.larmor_freq.is_finite() {
            return Err(Error::domain("larmor_freq must be finite"));
        }
        if !(self.t2_star > 0.0) {
            return Err(Error::domain(format!(
                "t2_star must be > 0, got {}",
                self.t2_star
            )));
        }
        if !(self.pump_time_constant > 0.0) {
            return Err(Error::domain(format!(
                "pump_time_constant must be > 0, got {}",
                self.pump_time_constant
            )));
        }
        if !(0.0..=1.0).contains(&self.init_fidelity) {
            return Err(Error::domain(format!(
                "init_fidelity must lie in [0, 1], got {}",
                self.init_fidelity
            )));
        }
        Ok(())
    }

    /// State left by optical pumping into `target` at the configured fidelity.
    pub fn initial_state(&self, target: SpinBranch) -> SpinState {
        let p_up = match target {
            SpinBranch::Up => self.init_fidelity,
            SpinBranch::Down => 1.0 - self.init_fidelity,
        };
        SpinState::mixed(p_up).expect("init_fidelity validated")
    }
}

/// `U = exp(−i·angle·(n·σ)/2)`, applied as `UρU†`.
pub fn rotate(spin: &SpinState, angle: f64, axis: Vector3<f64>) -> Result<SpinState> {
    if ((axis.norm() - 1.0).abs() > 1e-9) || !angle.is_finite() {
        return Err(Error::domain(format!(
            "rotation axis must be a unit vector, |n| = {}",
            axis.norm()
        )));
    }
    Ok(spin.conjugate_by(&rotation_unitary(angle, axis)))
}

pub(crate) fn rotation_unitary(angle: f64, n: Vector3<f64>) -> Matrix2<Complex64> {
    let (s, c) = (angle / 2.0).sin_cos();
    let c = Complex64::new(c, 0.0);
    // −i sin(θ/2) (n·σ)
    let m00 = Complex64::new(0.0, -s * n.z);
    let m01 = Complex64::new(-s * n.y, -s * n.x);
    let m10 = Complex64::new(s * n.y, -s * n.x);
    let m11 = Complex64::new(0.0, s * n.z);
    Matrix2::new(c + m00, m01, m10, c + m11)
}

/// Rotation angle of a picosecond pulse; the angle scales with field amplitude,
/// `θ = (π/2)·√(P / P_π/2)`.
pub fn rotation_angle_from_power(power_uw: f64, p_pi_half_uw: f64) -> Result<f64> {
    if !(power_uw >= 0.0) {
        return Err(Error::domain(format!(
            "pulse power must be >= 0, got {power_uw}"
        )));
    }
    if !(p_pi_half_uw > 0.0) {
        return Err(Error::domain(format!(
            "p_pi_half must be > 0, got {p_pi_half_uw}"
        )));
    }
    Ok(FRAC_PI_2 * (power_uw / p_pi_half_uw).sqrt())
}

/// Free precession for `tau` ns: a z-rotation by `2π·ν_L·τ` and the dephasing
/// envelope on the coherence.
///
/// Envelopes of successive calls multiply, giving `exp(−(t1² + t2²)/T2*²)`
/// rather than `exp(−(t1 + t2)²/T2*²)` for the Gaussian shape. Callers that
/// split one free-evolution window should use [`larmor_precess_segment`].
pub fn larmor_precess(spin: &SpinState, tau: f64, env: &SpinEnvironment) -> Result<SpinState> {
    larmor_precess_segment(spin, 0.0, tau, env)
}

/// Free precession over `[start, start + tau]` of a window that began at 0.
///
/// The dephasing factor is `D(start + tau) / D(start)`, so segments compose to
/// the same envelope as an unsegmented window.
pub fn larmor_precess_segment(
    spin: &SpinState,
    start: f64,
    tau: f64,
    env: &SpinEnvironment,
) -> Result<SpinState> {
    if !(tau >= 0.0) || !(start >= 0.0) {
        return Err(Error::domain(format!(
            "precession time must be >= 0, got {tau}"
        )));
    }
    let phi = TAU * env.larmor_freq * tau;
    let decay = if start == 0.0 {
        env.envelope.factor(tau, env.t2_star)
    } else {
        env.envelope.factor(start + tau, env.t2_star) / env.envelope.factor(start, env.t2_star)
    };
    let mut out = *spin;
    // Rz(φ) multiplies ρ_{↑↓} by e^{−iφ}
    out.scale_coherence(Complex64::from_polar(decay, -phi));
    Ok(out)
}

/// Optical pumping toward `target`: amplitude damping with time constant
/// `pump_time_constant`. The wrong-state population decays as `e^{−t/τ_p}`
/// and the coherence as `e^{−t/(2τ_p)}`. Inhomogeneous dephasing is carried
/// by [`larmor_precess`] over the same interval.
pub fn optical_pump(
    spin: &SpinState,
    duration: f64,
    env: &SpinEnvironment,
    target: SpinBranch,
) -> Result<SpinState> {
    if !(duration >= 0.0) {
        return Err(Error::domain(format!(
            "pump duration must be >= 0, got {duration}"
        )));
    }
    if duration == 0.0 {
        return Ok(*spin);
    }
    let keep = (-duration / env.pump_time_constant).exp();
    let (t, w) = match target {
        SpinBranch::Up => (0, 1),
        SpinBranch::Down => (1, 0),
    };
    let mut rho = spin.rho;
    let moved = rho[(w, w)].re * (1.0 - keep);
    rho[(w, w)] = Complex64::new(rho[(w, w)].re * keep, 0.0);
    rho[(t, t)] = Complex64::new(rho[(t, t)].re + moved, 0.0);
    let mut out = SpinState { rho };
    out.scale_coherence(Complex64::new(keep.sqrt(), 0.0));
    Ok(out)
}
