//! Friction observers.
//!
//! Three families are implemented:
//!
//! * the natural observer, an exact copy of the bristle dynamics driven by the
//!   measured velocity;
//! * the existing observer-controller, which adds a `-k·e` correction built
//!   from the tracking error of the surrounding loop;
//! * the proposed two-state observer, which also estimates the velocity and
//!   feeds the velocity estimation error `w - ŵ` back into both states:
//!
//! ```text
//! dẑ/dt   = w - σ0·|w|·ẑ/h(w) + K1·(w - ŵ)
//! J·dŵ/dt = -σ0·ẑ - σ1·dẑ/dt - Fv·w + u + K2·(w - ŵ)
//! ```
//!
//! The proposed observer comes with three gain regimes (time-varying,
//! bounded-velocity and exponential) plus a manually specified constant pair.

use serde::{Deserialize, Serialize};

use crate::analysis::LyapunovSpec;
use crate::error::ParamError;
use crate::model::{deflection_rate, friction_torque, stribeck_h, FrictionParams, PlantParams};

/// Estimated deflection and velocity. `w_hat` is only propagated by the
/// proposed observer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObserverState {
    pub z_hat: f64,
    pub w_hat: f64,
}

/// Estimation errors `z - ẑ`, `w - ŵ` and `F - F̂`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObserverErrors {
    pub e_z: f64,
    pub e_w: f64,
    pub e_f: f64,
}

impl ObserverErrors {
    pub fn new(z: f64, w: f64, friction: f64, est: &ObserverState, f_hat: f64) -> Self {
        Self { e_z: z - est.z_hat, e_w: w - est.w_hat, e_f: friction - f_hat }
    }
}

/// Gain pair of the proposed observer at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposedGains {
    pub k1: f64,
    pub k2: f64,
}

impl ProposedGains {
    /// `K3 = (K2 - σ1·K1)/J`, the effective damping of the velocity error.
    pub fn k3(&self, p: &FrictionParams, jp: &PlantParams) -> f64 {
        (self.k2 - p.sigma1 * self.k1) / jp.j
    }
}

/// Constant gains of the exponential regime together with the Lyapunov
/// coefficients they were built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Observer variant and its gain rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainSchedule {
    Natural,
    Existing {
        k: f64,
    },
    /// Fixed `K1`, `K2` chosen by hand.
    ProposedConstant {
        k1: f64,
        k2: f64,
    },
    /// `K1(w)`, `K2(w)` recomputed from the measured velocity at every evaluation.
    ProposedTimeVarying {
        a: f64,
        c: f64,
        alpha: f64,
    },
    /// `K1(w)` time-varying, `K2` constant from the velocity bound `m`.
    ProposedBounded {
        a: f64,
        c: f64,
        alpha: f64,
        m: f64,
    },
    /// Constant gains making `A·e_z² + B·e_z·e_w + C·e_w²` a strict Lyapunov function.
    ProposedExponential {
        c: f64,
        alpha: f64,
        beta: f64,
    },
}

impl GainSchedule {
    pub fn name(&self) -> &'static str {
        match self {
            GainSchedule::Natural => "natural",
            GainSchedule::Existing { .. } => "existing",
            GainSchedule::ProposedConstant { .. } => "proposed_constant",
            GainSchedule::ProposedTimeVarying { .. } => "proposed_time_varying",
            GainSchedule::ProposedBounded { .. } => "proposed_bounded",
            GainSchedule::ProposedExponential { .. } => "proposed_exponential",
        }
    }

    pub fn validate(&self, p: &FrictionParams) -> Result<(), ParamError> {
        let check = |field: &'static str, v: f64| -> Result<(), ParamError> {
            if !v.is_finite() {
                Err(ParamError::NotFinite { field })
            } else if v <= 0.0 {
                Err(ParamError::invalid(field, format!("must be > 0, got {v}")))
            } else {
                Ok(())
            }
        };
        match *self {
            GainSchedule::Natural => Ok(()),
            GainSchedule::Existing { k } => check("k", k),
            GainSchedule::ProposedConstant { k1, k2 } => {
                if !k1.is_finite() {
                    return Err(ParamError::NotFinite { field: "k1" });
                }
                if !k2.is_finite() {
                    return Err(ParamError::NotFinite { field: "k2" });
                }
                Ok(())
            }
            GainSchedule::ProposedTimeVarying { a, c, alpha } => {
                check("a", a)?;
                check("c", c)?;
                check("alpha", alpha)
            }
            GainSchedule::ProposedBounded { a, c, alpha, m } => {
                check("a", a)?;
                check("c", c)?;
                check("alpha", alpha)?;
                check("m", m)?;
                if p.c1() <= 0.0 {
                    return Err(ParamError::invalid("fc", "bounded gain regime needs min(Fs, Fc) > 0"));
                }
                Ok(())
            }
            GainSchedule::ProposedExponential { c, alpha, beta } => {
                check("c", c)?;
                check("alpha", alpha)?;
                check("beta", beta)
            }
        }
    }

    pub fn is_proposed(&self) -> bool {
        !matches!(self, GainSchedule::Natural | GainSchedule::Existing { .. })
    }

    /// Gains of the proposed observer at measured velocity `w`; `None` for the
    /// single-state observers.
    pub fn gains(&self, w: f64, p: &FrictionParams, jp: &PlantParams) -> Option<ProposedGains> {
        match *self {
            GainSchedule::Natural | GainSchedule::Existing { .. } => None,
            GainSchedule::ProposedConstant { k1, k2 } => Some(ProposedGains { k1, k2 }),
            GainSchedule::ProposedTimeVarying { a, c, alpha } => {
                Some(proposed_gains_time_varying(w, a, c, alpha, p, jp))
            }
            GainSchedule::ProposedBounded { a, c, alpha, m } => {
                let k1 = proposed_gains_time_varying(w, a, c, alpha, p, jp).k1;
                let k2 = bounded_k2(a, c, alpha, m, p, jp);
                Some(ProposedGains { k1, k2 })
            }
            GainSchedule::ProposedExponential { c, alpha, beta } => {
                let g = proposed_gains_exponential(c, alpha, beta, p, jp);
                Some(ProposedGains { k1: g.k1, k2: g.k2 })
            }
        }
    }

    /// Quadratic Lyapunov form associated with the gain regime, if it has one.
    pub fn lyapunov_spec(&self, p: &FrictionParams, jp: &PlantParams) -> Option<LyapunovSpec> {
        match *self {
            GainSchedule::ProposedTimeVarying { a, c, .. } | GainSchedule::ProposedBounded { a, c, .. } => {
                Some(LyapunovSpec { a, b: 0.0, c })
            }
            GainSchedule::ProposedExponential { c, alpha, beta } => {
                let g = proposed_gains_exponential(c, alpha, beta, p, jp);
                Some(LyapunovSpec { a: g.a, b: g.b, c: g.c })
            }
            _ => None,
        }
    }
}

/// Natural observer: `dẑ/dt = w - σ0·|w|·ẑ/h(w)`.
pub fn natural_observer_derivative(z_hat: f64, w: f64, p: &FrictionParams) -> f64 {
    deflection_rate(z_hat, w, p)
}

/// Natural observer with the `-k·e` correction, `e` = measured − reference.
pub fn existing_observer_derivative(z_hat: f64, w: f64, e: f64, k: f64, p: &FrictionParams) -> f64 {
    deflection_rate(z_hat, w, p) - k * e
}

/// Control law paired with the existing observer:
/// `u = -C(s)e + F̂ + J·d²θ_ref/dt²`.
///
/// `controller_term` is the already evaluated `-C(s)e`.
pub fn existing_control_law(controller_term: f64, f_hat: f64, ref_accel: f64, jp: &PlantParams) -> f64 {
    controller_term + f_hat + jp.j * ref_accel
}

/// Friction estimate `σ0·ẑ + σ1·dẑ/dt + Fv·w`.
pub fn friction_estimate(z_hat: f64, dz_hat: f64, w: f64, p: &FrictionParams) -> f64 {
    friction_torque(z_hat, dz_hat, w, p)
}

/// Time-varying gains that cancel the cross term of `A·e_z² + C·e_w²`.
///
/// `K1 = (C·σ0/(A·J))·(σ1·|w|/h(w) − 1)`, `K2 = α + σ1·K1`, hence `K3 = α/J`.
pub fn proposed_gains_time_varying(
    w: f64,
    a: f64,
    c: f64,
    alpha: f64,
    p: &FrictionParams,
    jp: &PlantParams,
) -> ProposedGains {
    let k1 = c * p.sigma0 / (a * jp.j) * (p.sigma1 * w.abs() / stribeck_h(w, p) - 1.0);
    ProposedGains { k1, k2: alpha + p.sigma1 * k1 }
}

/// Constant `K2` for trajectories with `|w| ≤ m`.
pub fn proposed_gains_bounded(
    a: f64,
    c: f64,
    alpha: f64,
    m: f64,
    p: &FrictionParams,
    jp: &PlantParams,
) -> Result<f64, ParamError> {
    if p.c1() <= 0.0 {
        return Err(ParamError::invalid("fc", "bounded gain regime needs min(Fs, Fc) > 0"));
    }
    Ok(bounded_k2(a, c, alpha, m, p, jp))
}

fn bounded_k2(a: f64, c: f64, alpha: f64, m: f64, p: &FrictionParams, jp: &PlantParams) -> f64 {
    alpha + c / (a * jp.j) * p.sigma0 * p.sigma1 * (m / p.c1() - 1.0)
}

/// Step-by-step constant gain construction for exponential convergence.
///
/// ```text
/// B  = 2·C·σ1/J
/// A  = B·σ1/(2J) + β/2
/// K1 = −2·C·(σ1·α + σ0)/(β·J)
/// K3 = −σ1·K1/J + α
/// K2 = J·α            (= J·K3 + σ1·K1)
/// ```
pub fn proposed_gains_exponential(
    c: f64,
    alpha: f64,
    beta: f64,
    p: &FrictionParams,
    jp: &PlantParams,
) -> ExponentialGains {
    let j = jp.j;
    let b = 2.0 * c * p.sigma1 / j;
    let a = b * p.sigma1 / (2.0 * j) + beta / 2.0;
    let k1 = -2.0 * c * (p.sigma1 * alpha + p.sigma0) / (beta * j);
    let k3 = -p.sigma1 * k1 / j + alpha;
    // Equal to J·K3 + σ1·K1, without the cancellation.
    let k2 = j * alpha;
    ExponentialGains { k1, k2, k3, a, b, c, alpha, beta }
}

/// Right-hand side of the proposed observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposedDerivatives {
    pub dz_hat: f64,
    pub dw_hat: f64,
    pub f_hat: f64,
}

pub fn proposed_observer_derivatives(
    s: &ObserverState,
    w: f64,
    u: f64,
    gains: ProposedGains,
    p: &FrictionParams,
    jp: &PlantParams,
) -> ProposedDerivatives {
    let e_w = w - s.w_hat;
    let dz_hat = deflection_rate(s.z_hat, w, p) + gains.k1 * e_w;
    let f_hat = friction_estimate(s.z_hat, dz_hat, w, p);
    let dw_hat = (-f_hat + u + gains.k2 * e_w) / jp.j;
    ProposedDerivatives { dz_hat, dw_hat, f_hat }
}

/// Estimation error dynamics of the proposed observer on a matched plant.
///
/// ```text
/// de_z/dt = −σ0·|w|/h(w)·e_z − K1·e_w
/// de_w/dt = −(σ0/J)·e_z − (σ1/J)·de_z/dt − (K2/J)·e_w
/// ```
pub fn error_derivatives(
    e_z: f64,
    e_w: f64,
    w: f64,
    gains: ProposedGains,
    p: &FrictionParams,
    jp: &PlantParams,
) -> (f64, f64) {
    let de_z = -p.sigma0 * w.abs() / stribeck_h(w, p) * e_z - gains.k1 * e_w;
    let de_w = (-p.sigma0 * e_z - p.sigma1 * de_z - gains.k2 * e_w) / jp.j;
    (de_z, de_w)
}

/// Deflection-side evaluation of an observer: `dẑ/dt`, `F̂` and the proposed
/// gains in force. None of these depend on the applied torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionEstimate {
    pub dz_hat: f64,
    pub f_hat: f64,
    pub gains: Option<ProposedGains>,
}

/// Evaluates the deflection estimate of the observer selected by `schedule`.
///
/// `track_err` is the loop error `measured − reference`; only the existing
/// observer uses it.
pub fn estimate_friction(
    schedule: &GainSchedule,
    s: &ObserverState,
    w: f64,
    track_err: f64,
    p: &FrictionParams,
    jp: &PlantParams,
) -> FrictionEstimate {
    let gains = schedule.gains(w, p, jp);
    let dz_hat = match (*schedule, gains) {
        (_, Some(g)) => deflection_rate(s.z_hat, w, p) + g.k1 * (w - s.w_hat),
        (GainSchedule::Existing { k }, None) => existing_observer_derivative(s.z_hat, w, track_err, k, p),
        _ => natural_observer_derivative(s.z_hat, w, p),
    };
    FrictionEstimate { dz_hat, f_hat: friction_estimate(s.z_hat, dz_hat, w, p), gains }
}

/// `dŵ/dt` under applied torque `u`. Single-state observers leave `ŵ` frozen.
pub fn velocity_estimate_rate(est: &FrictionEstimate, s: &ObserverState, w: f64, u: f64, jp: &PlantParams) -> f64 {
    match est.gains {
        Some(g) => (-est.f_hat + u + g.k2 * (w - s.w_hat)) / jp.j,
        None => 0.0,
    }
}

/// Derivatives and friction estimate of any observer variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverOutput {
    pub dz_hat: f64,
    pub dw_hat: f64,
    pub f_hat: f64,
    pub gains: Option<ProposedGains>,
}

pub fn observer_output(
    schedule: &GainSchedule,
    s: &ObserverState,
    w: f64,
    u: f64,
    track_err: f64,
    p: &FrictionParams,
    jp: &PlantParams,
) -> ObserverOutput {
    let est = estimate_friction(schedule, s, w, track_err, p, jp);
    let dw_hat = velocity_estimate_rate(&est, s, w, u, jp);
    ObserverOutput { dz_hat: est.dz_hat, dw_hat, f_hat: est.f_hat, gains: est.gains }
}
