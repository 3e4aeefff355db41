//! PI/PID controller, reference pre-filter and feed-forward.
//!
//! Controllers act on `e = reference − measurement` and are advanced once per
//! simulation step with the error held constant over the step. Integrator and
//! filter states use the exact solution for a held input, so the discrete
//! behaviour does not depend on how the plant is integrated.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::model::PlantParams;

/// `C(s) = Kp + Kd·s + Ki/(s·(τ·s + 1))`.
///
/// `tau = 0` is the pure integrator. `kd_filter` is an optional first-order
/// smoothing time constant on the backward-difference derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    #[serde(default)]
    pub kd: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub kd_filter: f64,
}

impl PidConfig {
    pub const fn pi(kp: f64, ki: f64) -> Self {
        Self { kp, ki, kd: 0.0, tau: 0.0, kd_filter: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (field, v) in
            [("kp", self.kp), ("ki", self.ki), ("kd", self.kd), ("tau", self.tau), ("kd_filter", self.kd_filter)]
        {
            if !v.is_finite() {
                return Err(ParamError::NotFinite { field });
            }
            if v < 0.0 {
                return Err(ParamError::invalid(field, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Continuous-time transfer function evaluated at `s`.
    pub fn transfer(&self, s: Complex64) -> Complex64 {
        let integral = self.ki / (s * (self.tau * s + 1.0));
        self.kp + self.kd * s + integral
    }
}

/// Internal states of [`pid_step`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    /// `∫e dt`.
    pub integrator: f64,
    /// Output of the integral path when `tau > 0` (already scaled by `Ki`).
    pub filter_state: f64,
    /// Smoothed derivative estimate.
    pub derivative: f64,
    pub prev_error: Option<f64>,
}

/// Advances the controller by `dt` with `e` held and returns the output at the
/// end of the step.
pub fn pid_step(cfg: &PidConfig, state: ControllerState, e: f64, dt: f64) -> (f64, ControllerState) {
    let mut next = state;
    next.integrator = state.integrator + e * dt;

    let integral_out = if cfg.tau > 0.0 {
        let a = (-dt / cfg.tau).exp();
        // Exact response of the lag to the ramp of the integrator over the step.
        next.filter_state =
            a * state.filter_state + (1.0 - a) * cfg.ki * state.integrator + cfg.ki * e * (dt - cfg.tau * (1.0 - a));
        next.filter_state
    } else {
        next.filter_state = cfg.ki * next.integrator;
        next.filter_state
    };

    let raw_derivative = state.prev_error.map_or(0.0, |prev| (e - prev) / dt);
    next.derivative = if cfg.kd_filter > 0.0 {
        let b = (-dt / cfg.kd_filter).exp();
        b * state.derivative + (1.0 - b) * raw_derivative
    } else {
        raw_derivative
    };
    next.prev_error = Some(e);

    (cfg.kp * e + cfg.kd * next.derivative + integral_out, next)
}

/// First-order reference pre-filter `a/(s + a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefilterConfig {
    pub pole: f64,
    pub enabled: bool,
}

impl PrefilterConfig {
    pub const fn disabled() -> Self {
        Self { pole: 1.0, enabled: false }
    }

    pub const fn low_pass(pole: f64) -> Self {
        Self { pole, enabled: true }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.enabled && !(self.pole.is_finite() && self.pole > 0.0) {
            return Err(ParamError::invalid("pole", format!("must be > 0 when enabled, got {}", self.pole)));
        }
        Ok(())
    }

    /// First and second derivatives of the filter output given the raw
    /// reference `r`, its derivative `dr` and the current output `y`.
    pub fn output_derivatives(&self, y: f64, r: f64, dr: f64) -> (f64, f64) {
        let a = self.pole;
        let dy = a * (r - y);
        (dy, a * (dr - dy))
    }
}

impl Default for PrefilterConfig {
    fn default() -> Self {
        Self::disabled()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrefilterState {
    pub output: f64,
}

/// Advances the pre-filter by `dt` with `r` held; returns the output at the
/// end of the step. A disabled filter passes `r` through.
pub fn prefilter_step(cfg: &PrefilterConfig, state: PrefilterState, r: f64, dt: f64) -> (f64, PrefilterState) {
    if !cfg.enabled {
        return (r, PrefilterState { output: r });
    }
    let decay = (-cfg.pole * dt).exp();
    let output = decay * state.output + (1.0 - decay) * r;
    (output, PrefilterState { output })
}

/// Torque `J·d²θ_ref/dt²` injected ahead of the loop.
pub fn feedforward_term(ref_accel: f64, jp: &PlantParams) -> f64 {
    jp.j * ref_accel
}
