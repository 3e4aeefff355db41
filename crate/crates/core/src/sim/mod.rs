//! Fixed-step simulation of the plant, observer and controller.
//!
//! Continuous states (plant and observer) are integrated with classical RK4.
//! The controller and pre-filter are discrete and advance once per step; their
//! output is held over the step. The friction compensation term is a function
//! of the continuous states and is re-evaluated at every Runge-Kutta stage.

mod config;
mod rk4;
mod signal;
mod trajectory;

pub use config::{
    Compensation, InitialConditions, LoopKind, ObserverConfig, PlantConfig, ScenarioConfig, MAX_FRICTION_DT,
};
pub use rk4::{integrate_step_rk4, StageTime, DIVERGENCE_LIMIT};
pub use signal::{ReferenceSignal, Side};
pub use trajectory::{CsvError, Sample, Trajectory, CSV_HEADER};

use crate::analysis::{lyapunov_derivative, LyapunovSpec};
use crate::control::{pid_step, prefilter_step, ControllerState, PrefilterState};
use crate::error::{ParamError, SimError};
use crate::model::{deflection_rate, friction_torque, FrictionParams, PlantParams};
use crate::observers::{estimate_friction, velocity_estimate_rate, GainSchedule, ObserverState, ProposedGains};

/// Inputs held constant over one closed-loop step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeldInputs {
    /// Controller output.
    pub v: f64,
    /// Feed-forward torque.
    pub feedforward: f64,
    /// Filtered reference the loop is tracking.
    pub reference: f64,
}

/// Right-hand side of the closed loop and the signals it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<const N: usize> {
    pub dx: [f64; N],
    pub friction: f64,
    pub f_hat: Option<f64>,
    pub u: f64,
    pub gains: Option<ProposedGains>,
}

/// Closed-loop state `[θ, w, z, ẑ, ŵ]`.
pub type LoopState = [f64; 5];

/// Continuous part of a velocity or position loop.
#[derive(Debug, Clone, Copy)]
pub struct ClosedLoopDynamics {
    loop_kind: LoopKind,
    plant: FrictionParams,
    observer_friction: FrictionParams,
    jp: PlantParams,
    schedule: Option<GainSchedule>,
    compensation: Compensation,
    friction_enabled: bool,
}

impl ClosedLoopDynamics {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            loop_kind: cfg.loop_kind,
            plant: cfg.plant.friction,
            observer_friction: cfg.observer_friction(),
            jp: cfg.plant_params(),
            schedule: cfg.observer.map(|o| o.schedule),
            compensation: cfg.compensation,
            friction_enabled: cfg.friction_enabled,
        }
    }

    fn measured(&self, x: &LoopState) -> f64 {
        match self.loop_kind {
            LoopKind::Position => x[0],
            _ => x[1],
        }
    }

    pub fn evaluate(&self, x: &LoopState, held: &HeldInputs) -> Evaluation<5> {
        let [_, w, z, z_hat, w_hat] = *x;
        let (dz, friction) = if self.friction_enabled {
            let dz = deflection_rate(z, w, &self.plant);
            (dz, friction_torque(z, dz, w, &self.plant))
        } else {
            (0.0, 0.0)
        };

        let obs = ObserverState { z_hat, w_hat };
        let track_err = self.measured(x) - held.reference;
        let estimate =
            self.schedule.map(|s| estimate_friction(&s, &obs, w, track_err, &self.observer_friction, &self.jp));

        let compensation = match self.compensation {
            Compensation::None => 0.0,
            Compensation::Observer => estimate.map_or(0.0, |e| e.f_hat),
            Compensation::Oracle => friction,
        };
        let u = held.v + held.feedforward + compensation;

        let (dz_hat, dw_hat) = match &estimate {
            Some(e) => (e.dz_hat, velocity_estimate_rate(e, &obs, w, u, &self.jp)),
            None => (0.0, 0.0),
        };

        Evaluation {
            dx: [w, (u - friction) / self.jp.j, dz, dz_hat, dw_hat],
            friction,
            f_hat: estimate.map(|e| e.f_hat),
            u,
            gains: estimate.and_then(|e| e.gains),
        }
    }

    /// Integrates over `substeps` RK4 steps of `dt / substeps` with `held` fixed.
    pub fn advance(
        &self,
        t: f64,
        x: &LoopState,
        held: &HeldInputs,
        dt: f64,
        substeps: usize,
    ) -> Result<LoopState, SimError> {
        let h = dt / substeps as f64;
        let mut state = *x;
        for i in 0..substeps {
            state = integrate_step_rk4(|_, s| self.evaluate(s, held).dx, t + i as f64 * h, &state, h)?;
        }
        Ok(state)
    }
}

/// Runs a scenario. Open-loop observer scenarios are forwarded to
/// [`run_open_loop_observer`].
pub fn run_closed_loop(cfg: &ScenarioConfig) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    if cfg.loop_kind == LoopKind::OpenLoopObserver {
        return run_open_loop_observer(&OpenLoopConfig::try_from(cfg)?);
    }

    let jp = cfg.plant_params();
    let dynamics = ClosedLoopDynamics::new(cfg);
    let observer_friction = cfg.observer_friction();
    let lyapunov = lyapunov_for(cfg.observer.as_ref(), &observer_friction, &jp);
    let init = &cfg.initial;

    let mut x: LoopState = [init.theta, init.w, init.z, init.z_hat, init.w_hat.unwrap_or(init.w)];
    let mut pid = ControllerState::default();
    let mut prefilter = PrefilterState { output: dynamics.measured(&x) };

    let steps = cfg.steps();
    let mut samples = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let r = cfg.reference.value(t);
        let dr = cfg.reference.derivative(t);
        let (reference, dref, ddref) = if cfg.prefilter.enabled {
            let (dy, ddy) = cfg.prefilter.output_derivatives(prefilter.output, r, dr);
            (prefilter.output, dy, ddy)
        } else {
            (r, dr, cfg.reference.second_derivative(t))
        };
        let ref_accel = match cfg.loop_kind {
            LoopKind::Position => ddref,
            _ => dref,
        };
        let feedforward = if cfg.feedforward { jp.j * ref_accel } else { 0.0 };

        let track_err = reference - dynamics.measured(&x);
        let (v, pid_next) = pid_step(&cfg.controller, pid, track_err, cfg.dt);
        let held = HeldInputs { v, feedforward, reference };

        let eval = dynamics.evaluate(&x, &held);
        let mut sample = Sample {
            t,
            theta: x[0],
            w: x[1],
            z: x[2],
            friction: eval.friction,
            u: eval.u,
            v: Some(v),
            ref_raw: Some(r),
            ref_filtered: Some(reference),
            track_err: Some(track_err),
            ..Sample::default()
        };
        if let Some(obs) = &cfg.observer {
            fill_observer_channels(&mut sample, obs.schedule.is_proposed(), x[3], x[4], eval.f_hat);
            fill_lyapunov(&mut sample, lyapunov.as_ref(), eval.gains, &observer_friction, &jp);
        }
        samples.push(sample);

        if k == steps {
            break;
        }
        x = integrate_step_rk4(|_, s| dynamics.evaluate(s, &held).dx, t, &x, cfg.dt)?;
        pid = pid_next;
        prefilter = prefilter_step(&cfg.prefilter, prefilter, r, cfg.dt).1;
    }
    Ok(Trajectory { dt: cfg.dt, samples })
}

/// Observer evaluation under a prescribed plant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenLoopConfig {
    /// Prescribed plant velocity `w(t)`.
    pub velocity: ReferenceSignal,
    pub plant: PlantConfig,
    pub observer: ObserverConfig,
    pub dt: f64,
    pub duration: f64,
    /// `w` is ignored; `w_hat` defaults to `w(0)`.
    pub initial: InitialConditions,
}

impl OpenLoopConfig {
    pub fn new(velocity: ReferenceSignal, schedule: GainSchedule, dt: f64, duration: f64) -> Self {
        Self {
            velocity,
            plant: PlantConfig::default(),
            observer: ObserverConfig::new(schedule),
            dt,
            duration,
            initial: InitialConditions::default(),
        }
    }

    pub fn with_initial(mut self, z: f64, z_hat: f64, w_hat: Option<f64>) -> Self {
        self.initial.z = z;
        self.initial.z_hat = z_hat;
        self.initial.w_hat = w_hat;
        self
    }

    pub fn observer_friction(&self) -> FrictionParams {
        self.observer.friction.unwrap_or(self.plant.friction)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ParamError::invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(ParamError::invalid("duration", format!("must be >= dt, got {}", self.duration)));
        }
        if self.dt > MAX_FRICTION_DT {
            return Err(ParamError::invalid("dt", format!("must be <= {MAX_FRICTION_DT}, got {}", self.dt)));
        }
        self.velocity.validate()?;
        self.plant.params().validate()?;
        self.plant.friction.validate()?;
        let p = self.observer_friction();
        p.validate()?;
        self.observer.schedule.validate(&p)
    }
}

impl TryFrom<&ScenarioConfig> for OpenLoopConfig {
    type Error = ParamError;

    fn try_from(cfg: &ScenarioConfig) -> Result<Self, ParamError> {
        let observer = cfg
            .observer
            .ok_or_else(|| ParamError::invalid("observer", "open-loop observer scenarios need an observer"))?;
        Ok(Self {
            velocity: cfg.reference,
            plant: cfg.plant,
            observer,
            dt: cfg.dt,
            duration: cfg.duration,
            initial: cfg.initial,
        })
    }
}

/// Simulates the plant deflection under a prescribed velocity together with
/// the configured observer. The applied torque is whatever the torque balance
/// `u = J·dw/dt + F` demands, so the observer sees a consistent plant.
pub fn run_open_loop_observer(cfg: &OpenLoopConfig) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let pf = cfg.plant.friction;
    let po = cfg.observer_friction();
    let jp = cfg.plant.params();
    let schedule = cfg.observer.schedule;
    let lyapunov = lyapunov_for(Some(&cfg.observer), &po, &jp);
    let signal = cfg.velocity;

    let eval = |stage: StageTime, x: &[f64; 4]| -> Evaluation<4> {
        let [_, z, z_hat, w_hat] = *x;
        let w = signal.value_from(stage.t, stage.side);
        let dz = deflection_rate(z, w, &pf);
        let friction = friction_torque(z, dz, w, &pf);
        let u = jp.j * signal.derivative(stage.t) + friction;
        let obs = ObserverState { z_hat, w_hat };
        let est = estimate_friction(&schedule, &obs, w, 0.0, &po, &jp);
        let dw_hat = velocity_estimate_rate(&est, &obs, w, u, &jp);
        Evaluation { dx: [w, dz, est.dz_hat, dw_hat], friction, f_hat: Some(est.f_hat), u, gains: est.gains }
    };

    let init = &cfg.initial;
    let mut x = [init.theta, init.z, init.z_hat, init.w_hat.unwrap_or_else(|| signal.value(0.0))];
    let steps = (cfg.duration / cfg.dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let w = signal.value(t);
        let e = eval(StageTime { t, side: Side::Right }, &x);
        let mut sample =
            Sample { t, theta: x[0], w, z: x[1], friction: e.friction, u: e.u, ref_raw: Some(w), ..Sample::default() };
        fill_observer_channels(&mut sample, schedule.is_proposed(), x[2], x[3], e.f_hat);
        fill_lyapunov(&mut sample, lyapunov.as_ref(), e.gains, &po, &jp);
        samples.push(sample);
        if k == steps {
            break;
        }
        x = integrate_step_rk4(|s, st| eval(s, st).dx, t, &x, cfg.dt)?;
    }
    Ok(Trajectory { dt: cfg.dt, samples })
}

fn lyapunov_for(obs: Option<&ObserverConfig>, p: &FrictionParams, jp: &PlantParams) -> Option<LyapunovSpec> {
    let obs = obs?;
    obs.lyapunov.or_else(|| obs.schedule.lyapunov_spec(p, jp))
}

fn fill_observer_channels(sample: &mut Sample, proposed: bool, z_hat: f64, w_hat: f64, f_hat: Option<f64>) {
    sample.z_hat = Some(z_hat);
    sample.e_z = Some(sample.z - z_hat);
    sample.f_hat = f_hat;
    sample.e_f = f_hat.map(|f| sample.friction - f);
    if proposed {
        sample.w_hat = Some(w_hat);
        sample.e_w = Some(sample.w - w_hat);
    }
}

fn fill_lyapunov(
    sample: &mut Sample,
    spec: Option<&LyapunovSpec>,
    gains: Option<ProposedGains>,
    p: &FrictionParams,
    jp: &PlantParams,
) {
    let (Some(spec), Some(gains), Some(e_z), Some(e_w)) = (spec, gains, sample.e_z, sample.e_w) else {
        return;
    };
    sample.lyapunov = Some(spec.value(e_z, e_w));
    sample.lyapunov_rate = Some(lyapunov_derivative(spec, e_z, e_w, sample.w, gains, p, jp));
}
