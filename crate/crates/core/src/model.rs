//! Rigid-body plant with LuGre friction.
//!
//! The plant is a single inertia driven by an input torque and opposed by a
//! friction torque `F`:
//!
//! ```text
//! J·dw/dt = -F + u
//! dz/dt   = w - σ0·|w|·z / h(w)
//! F       = σ0·z + σ1·dz/dt + Fv·w
//! h(w)    = Fc + (Fs - Fc)·exp(-(w/ws)²)
//! ```
//!
//! `z` is the average bristle deflection. It cannot be measured; the velocity
//! `w` can.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// LuGre friction coefficients in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionParams {
    /// Bristle stiffness, N·m/rad.
    pub sigma0: f64,
    /// Bristle damping, N·m·s/rad.
    pub sigma1: f64,
    /// Coulomb friction level, N·m.
    pub fc: f64,
    /// Stiction level, N·m.
    pub fs: f64,
    /// Viscous coefficient, N·m·s/rad.
    pub fv: f64,
    /// Stribeck velocity, rad/s.
    pub ws: f64,
}

impl FrictionParams {
    pub fn new(sigma0: f64, sigma1: f64, fc: f64, fs: f64, fv: f64, ws: f64) -> Result<Self, ParamError> {
        let p = Self { sigma0, sigma1, fc, fs, fv, ws };
        p.validate()?;
        Ok(p)
    }

    /// Servo test-bench values used throughout the examples and presets.
    pub const fn table1() -> Self {
        Self { sigma0: 260.0, sigma1: 0.6, fc: 0.285, fs: 0.335, fv: 0.018, ws: 0.01 }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let fields = [
            ("sigma0", self.sigma0),
            ("sigma1", self.sigma1),
            ("fc", self.fc),
            ("fs", self.fs),
            ("fv", self.fv),
            ("ws", self.ws),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(ParamError::NotFinite { field: name });
            }
        }
        positive("sigma0", self.sigma0)?;
        non_negative("sigma1", self.sigma1)?;
        non_negative("fv", self.fv)?;
        positive("ws", self.ws)?;
        non_negative("fc", self.fc)?;
        non_negative("fs", self.fs)?;
        if self.c2() <= 0.0 {
            return Err(ParamError::Invalid { field: "fc", reason: "fc and fs cannot both be zero".into() });
        }
        Ok(())
    }

    /// Lower bound of the Stribeck curve, `min(Fs, Fc)`.
    pub fn c1(&self) -> f64 {
        self.fs.min(self.fc)
    }

    /// Upper bound of the Stribeck curve, `max(Fs, Fc)`.
    pub fn c2(&self) -> f64 {
        self.fs.max(self.fc)
    }
}

impl Default for FrictionParams {
    fn default() -> Self {
        Self::table1()
    }
}

/// Mechanical plant parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Total inertia, kg·m².
    pub j: f64,
}

impl PlantParams {
    pub fn new(j: f64) -> Result<Self, ParamError> {
        let p = Self { j };
        p.validate()?;
        Ok(p)
    }

    pub const fn table1() -> Self {
        Self { j: 0.0022 }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !self.j.is_finite() {
            return Err(ParamError::NotFinite { field: "j" });
        }
        positive("j", self.j)
    }
}

impl Default for PlantParams {
    fn default() -> Self {
        Self::table1()
    }
}

/// Position, velocity and bristle deflection of the plant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub theta: f64,
    pub w: f64,
    pub z: f64,
}

impl PlantState {
    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.w.is_finite() && self.z.is_finite()
    }
}

/// Time derivatives of [`PlantState`] together with the friction torque they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantDerivatives {
    pub dtheta: f64,
    pub dw: f64,
    pub dz: f64,
    pub friction: f64,
}

/// Sign with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Stribeck curve `h(w) = Fc + (Fs - Fc)·exp(-(w/ws)²)`.
pub fn stribeck_h(w: f64, p: &FrictionParams) -> f64 {
    let r = w / p.ws;
    p.fc + (p.fs - p.fc) * (-r * r).exp()
}

/// Bristle deflection rate `w - σ0·|w|·z/h(w)`.
///
/// The same expression drives the plant and the natural observer copy.
pub fn deflection_rate(z: f64, w: f64, p: &FrictionParams) -> f64 {
    w - p.sigma0 * w.abs() * z / stribeck_h(w, p)
}

/// Friction torque `σ0·z + σ1·dz/dt + Fv·w`.
pub fn friction_torque(z: f64, dz: f64, w: f64, p: &FrictionParams) -> f64 {
    p.sigma0 * z + p.sigma1 * dz + p.fv * w
}

/// Full plant right-hand side under input torque `u`.
pub fn lugre_derivatives(s: &PlantState, u: f64, p: &FrictionParams, jp: &PlantParams) -> PlantDerivatives {
    let dz = deflection_rate(s.z, s.w, p);
    let friction = friction_torque(s.z, dz, s.w, p);
    PlantDerivatives { dtheta: s.w, dw: (u - friction) / jp.j, dz, friction }
}

/// Steady-state (classical) friction map reached when `dz/dt → 0`.
pub fn static_friction(w: f64, p: &FrictionParams) -> f64 {
    let r = w / p.ws;
    let s = sgn(w);
    p.fc * s + (p.fs - p.fc) * (-r * r).exp() * s + p.fv * w
}

/// Deflection `h(w)·sgn(w)/σ0` at which `dz/dt = 0` for constant `w`.
pub fn steady_state_deflection(w: f64, p: &FrictionParams) -> f64 {
    stribeck_h(w, p) * sgn(w) / p.sigma0
}

fn positive(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(ParamError::Invalid { field, reason: format!("must be > 0, got {value}") })
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(ParamError::Invalid { field, reason: format!("must be >= 0, got {value}") })
    }
}
