use serde::{Deserialize, Serialize};

use super::signal::ReferenceSignal;
use crate::analysis::LyapunovSpec;
use crate::control::{PidConfig, PrefilterConfig};
use crate::error::ParamError;
use crate::model::{FrictionParams, PlantParams};
use crate::observers::GainSchedule;

/// Largest step accepted when LuGre friction is simulated.
pub const MAX_FRICTION_DT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    /// PI(D) on velocity, torque output.
    Velocity,
    /// PI(D) on position, torque output.
    Position,
    /// No controller: the reference is imposed as the plant velocity.
    OpenLoopObserver,
}

/// Source of the friction compensation term added to the control torque.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compensation {
    #[default]
    None,
    /// `F̂` from the configured observer.
    Observer,
    /// The plant's true friction torque.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub j: f64,
    pub friction: FrictionParams,
}

impl PlantConfig {
    pub fn params(&self) -> PlantParams {
        PlantParams { j: self.j }
    }
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { j: PlantParams::table1().j, friction: FrictionParams::table1() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub schedule: GainSchedule,
    /// Observer-side friction model; defaults to the plant's.
    #[serde(default)]
    pub friction: Option<FrictionParams>,
    /// Overrides the Lyapunov form implied by the gain regime.
    #[serde(default)]
    pub lyapunov: Option<LyapunovSpec>,
}

impl ObserverConfig {
    pub fn new(schedule: GainSchedule) -> Self {
        Self { schedule, friction: None, lyapunov: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConditions {
    pub theta: f64,
    pub w: f64,
    pub z: f64,
    pub z_hat: f64,
    /// Defaults to the initial plant velocity.
    pub w_hat: Option<f64>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub loop_kind: LoopKind,
    pub reference: ReferenceSignal,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub observer: Option<ObserverConfig>,
    #[serde(default = "default_controller")]
    pub controller: PidConfig,
    #[serde(default)]
    pub prefilter: PrefilterConfig,
    #[serde(default)]
    pub feedforward: bool,
    #[serde(default)]
    pub compensation: Compensation,
    #[serde(default = "default_true")]
    pub friction_enabled: bool,
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub initial: InitialConditions,
}

fn default_controller() -> PidConfig {
    PidConfig::pi(0.0, 0.0)
}

impl ScenarioConfig {
    /// Velocity loop on the servo test bench, no observer, unit velocity step.
    pub fn velocity_baseline() -> Self {
        Self {
            loop_kind: LoopKind::Velocity,
            reference: ReferenceSignal::Step { amplitude: 1.0, start_time: 0.0 },
            plant: PlantConfig::default(),
            observer: None,
            controller: PidConfig::pi(1.6, 0.16),
            prefilter: PrefilterConfig::disabled(),
            feedforward: false,
            compensation: Compensation::None,
            friction_enabled: true,
            dt: 1e-5,
            duration: 10.0,
            initial: InitialConditions::default(),
        }
    }

    /// Position loop on the servo test bench with the `2/(s+2)` pre-filter.
    pub fn position_baseline() -> Self {
        Self {
            loop_kind: LoopKind::Position,
            controller: PidConfig::pi(15.0, 1.55),
            prefilter: PrefilterConfig::low_pass(2.0),
            ..Self::velocity_baseline()
        }
    }

    pub fn plant_params(&self) -> PlantParams {
        self.plant.params()
    }

    /// Friction model used by the observer.
    pub fn observer_friction(&self) -> FrictionParams {
        self.observer.and_then(|o| o.friction).unwrap_or(self.plant.friction)
    }

    /// Number of integration steps; the trajectory holds one more sample.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ParamError::invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(ParamError::invalid("duration", format!("must be >= dt, got {}", self.duration)));
        }
        if self.friction_enabled && self.dt > MAX_FRICTION_DT {
            return Err(ParamError::invalid(
                "dt",
                format!("must be <= {MAX_FRICTION_DT} with friction enabled, got {}", self.dt),
            ));
        }
        self.reference.validate()?;
        self.plant_params().validate()?;
        self.plant.friction.validate()?;
        self.controller.validate()?;
        self.prefilter.validate()?;
        if let Some(obs) = &self.observer {
            let p = self.observer_friction();
            p.validate()?;
            obs.schedule.validate(&p)?;
            if let Some(l) = &obs.lyapunov {
                l.validate().map_err(|e| ParamError::invalid("lyapunov", e.to_string()))?;
            }
        }
        if self.compensation == Compensation::Observer && self.observer.is_none() {
            return Err(ParamError::invalid("compensation", "observer compensation requires an observer"));
        }
        let init = &self.initial;
        for (field, v) in [("theta", init.theta), ("w", init.w), ("z", init.z), ("z_hat", init.z_hat)] {
            if !v.is_finite() {
                return Err(ParamError::NotFinite { field });
            }
        }
        if init.w_hat.is_some_and(|v| !v.is_finite()) {
            return Err(ParamError::NotFinite { field: "w_hat" });
        }
        Ok(())
    }
}
