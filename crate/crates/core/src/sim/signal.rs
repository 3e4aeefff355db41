use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Which one-sided limit to take at a discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `lim_{s→t⁺}`, used at the start of an integration step.
    Right,
    /// `lim_{s→t⁻}`, used at the end of an integration step.
    Left,
}

/// Reference or prescribed signal with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSignal {
    Step {
        amplitude: f64,
        start_time: f64,
    },
    Sinusoid {
        amplitude: f64,
        frequency_hz: f64,
        #[serde(default)]
        phase: f64,
    },
    Ramp {
        slope: f64,
    },
    Constant {
        value: f64,
    },
    DecayingExp {
        amplitude: f64,
        rate: f64,
    },
}

impl ReferenceSignal {
    pub fn validate(&self) -> Result<(), ParamError> {
        let finite = |field: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ParamError::NotFinite { field })
            }
        };
        match *self {
            ReferenceSignal::Step { amplitude, start_time } => {
                finite("amplitude", amplitude)?;
                finite("start_time", start_time)
            }
            ReferenceSignal::Sinusoid { amplitude, frequency_hz, phase } => {
                finite("amplitude", amplitude)?;
                finite("phase", phase)?;
                finite("frequency_hz", frequency_hz)?;
                if frequency_hz <= 0.0 {
                    return Err(ParamError::invalid("frequency_hz", format!("must be > 0, got {frequency_hz}")));
                }
                Ok(())
            }
            ReferenceSignal::Ramp { slope } => finite("slope", slope),
            ReferenceSignal::Constant { value } => finite("value", value),
            ReferenceSignal::DecayingExp { amplitude, rate } => {
                finite("amplitude", amplitude)?;
                finite("rate", rate)?;
                if rate <= 0.0 {
                    return Err(ParamError::invalid("rate", format!("must be > 0, got {rate}")));
                }
                Ok(())
            }
        }
    }

    /// Value at `t`; a step is right-continuous.
    pub fn value(&self, t: f64) -> f64 {
        self.value_from(t, Side::Right)
    }

    pub fn value_from(&self, t: f64, side: Side) -> f64 {
        match *self {
            ReferenceSignal::Step { amplitude, start_time } => {
                let on = match side {
                    Side::Right => t >= start_time,
                    Side::Left => t > start_time,
                };
                if on {
                    amplitude
                } else {
                    0.0
                }
            }
            ReferenceSignal::Sinusoid { amplitude, frequency_hz, phase } => {
                amplitude * (TAU * frequency_hz * t + phase).sin()
            }
            ReferenceSignal::Ramp { slope } => slope * t,
            ReferenceSignal::Constant { value } => value,
            ReferenceSignal::DecayingExp { amplitude, rate } => amplitude * (-rate * t).exp(),
        }
    }

    /// First derivative; the impulse of a step is not represented.
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            ReferenceSignal::Step { .. } | ReferenceSignal::Constant { .. } => 0.0,
            ReferenceSignal::Sinusoid { amplitude, frequency_hz, phase } => {
                let w = TAU * frequency_hz;
                amplitude * w * (w * t + phase).cos()
            }
            ReferenceSignal::Ramp { slope } => slope,
            ReferenceSignal::DecayingExp { amplitude, rate } => -rate * amplitude * (-rate * t).exp(),
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        match *self {
            ReferenceSignal::Step { .. } | ReferenceSignal::Constant { .. } | ReferenceSignal::Ramp { .. } => 0.0,
            ReferenceSignal::Sinusoid { amplitude, frequency_hz, phase } => {
                let w = TAU * frequency_hz;
                -amplitude * w * w * (w * t + phase).sin()
            }
            ReferenceSignal::DecayingExp { amplitude, rate } => rate * rate * amplitude * (-rate * t).exp(),
        }
    }

    /// Times at which the signal is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            ReferenceSignal::Step { start_time, .. } => vec![start_time],
            _ => Vec::new(),
        }
    }
}
