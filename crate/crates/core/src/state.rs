//! Single-spin states and physical constants.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinError};
use crate::matrix::StateVector;
use crate::tolerance::{NORM_TOL, POLAR_INPUT_TOL};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_BOLTZMANN: f64 = 1.380_649e-23;
/// Proton gyromagnetic ratio in rad·s⁻¹·T⁻¹.
pub const PROTON_GAMMA: f64 = 2.675_221_874_4e8;

/// Maps an angle onto (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let x = phi.rem_euclid(TAU);
    if x > PI {
        x - TAU
    } else {
        x
    }
}

/// Amplitude/phase form of a spin-½ state: x₂ = r₂e^{iφ₂}, x₁ = r₁e^{iφ₁}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub r1: f64,
    pub r2: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl PolarState {
    /// Validates the amplitudes, rescales them to exact unit norm and wraps the phases.
    pub fn new(r1: f64, r2: f64, phi1: f64, phi2: f64) -> Result<Self> {
        if ![r1, r2, phi1, phi2].iter().all(|v| v.is_finite()) {
            return Err(SpinError::NonFinite { context: "polar state" });
        }
        if r1 < 0.0 || r2 < 0.0 {
            return Err(SpinError::InvalidArgument(format!(
                "amplitudes must be non-negative, got r1 = {r1}, r2 = {r2}"
            )));
        }
        let norm2 = r1 * r1 + r2 * r2;
        if (norm2 - 1.0).abs() > POLAR_INPUT_TOL {
            return Err(SpinError::NormViolation {
                deviation: norm2 - 1.0,
            });
        }
        let scale = norm2.sqrt();
        Ok(Self {
            r1: r1 / scale,
            r2: r2 / scale,
            phi1: wrap_phase(phi1),
            phi2: wrap_phase(phi2),
        })
    }

    /// Ground state |−⟩ (r₁ = 1).
    pub fn ground() -> Self {
        Self { r1: 1.0, r2: 0.0, phi1: 0.0, phi2: 0.0 }
    }

    /// Longitudinal polarization r₂² − r₁².
    pub fn polarization(&self) -> f64 {
        self.r2 * self.r2 - self.r1 * self.r1
    }
}

/// Two-amplitude spin-½ state, x₂ (|+⟩) listed first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub x2: Complex64,
    pub x1: Complex64,
}

impl SpinState {
    pub fn new(x2: Complex64, x1: Complex64) -> Result<Self> {
        let s = Self { x2, x1 };
        if ![x2.re, x2.im, x1.re, x1.im].iter().all(|v| v.is_finite()) {
            return Err(SpinError::NonFinite { context: "spin state" });
        }
        s.check_norm()?;
        Ok(s)
    }

    pub fn ground() -> Self {
        Self {
            x2: Complex64::new(0.0, 0.0),
            x1: Complex64::new(1.0, 0.0),
        }
    }

    pub fn excited() -> Self {
        Self {
            x2: Complex64::new(1.0, 0.0),
            x1: Complex64::new(0.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x2.norm_sqr() + self.x1.norm_sqr()
    }

    pub fn check_norm(&self) -> Result<()> {
        let deviation = self.norm_sqr() - 1.0;
        if deviation.abs() > NORM_TOL {
            Err(SpinError::NormViolation { deviation })
        } else {
            Ok(())
        }
    }

    pub fn to_vector(&self) -> StateVector {
        StateVector::from_raw(vec![self.x2, self.x1])
    }

    pub fn from_vector(v: &StateVector) -> Result<Self> {
        match v.amplitudes() {
            [x2, x1] => Self::new(*x2, *x1),
            other => Err(SpinError::DimensionMismatch {
                expected: 2,
                found: other.len(),
            }),
        }
    }

    pub fn polar(&self) -> PolarState {
        PolarState {
            r1: self.x1.norm(),
            r2: self.x2.norm(),
            phi1: wrap_phase(self.x1.arg()),
            phi2: wrap_phase(self.x2.arg()),
        }
    }

    /// x̄₁·x₂, the transverse term of the state.
    pub fn coherence(&self) -> Complex64 {
        self.x1.conj() * self.x2
    }
}

/// Builds x₂ = r₂e^{iφ₂}, x₁ = r₁e^{iφ₁}.
pub fn make_state(p: &PolarState) -> Result<SpinState> {
    let p = PolarState::new(p.r1, p.r2, p.phi1, p.phi2)?;
    SpinState::new(
        Complex64::from_polar(p.r2, p.phi2),
        Complex64::from_polar(p.r1, p.phi1),
    )
}

/// Gyromagnetic ratio and reduced Planck constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub gamma: f64,
    pub hbar: f64,
}

impl PhysicalConstants {
    pub fn new(gamma: f64, hbar: f64) -> Result<Self> {
        if !gamma.is_finite() || !hbar.is_finite() {
            return Err(SpinError::NonFinite { context: "physical constants" });
        }
        if hbar <= 0.0 {
            return Err(SpinError::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        if gamma == 0.0 {
            return Err(SpinError::InvalidArgument("gamma must be nonzero".into()));
        }
        Ok(Self { gamma, hbar })
    }

    pub fn proton() -> Self {
        Self { gamma: PROTON_GAMMA, hbar: HBAR }
    }

    /// γ = ħ = 1, so Hamiltonians read directly in rad/s.
    pub fn unit() -> Self {
        Self { gamma: 1.0, hbar: 1.0 }
    }

    /// Precession frequency ω = −γB.
    pub fn omega(&self, b_tesla: f64) -> f64 {
        -self.gamma * b_tesla
    }

    /// γħ, the susceptibility scale.
    pub fn chi_scale(&self) -> f64 {
        self.gamma * self.hbar
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::proton()
    }
}
