//! LuGre friction simulation and estimation toolkit.
//!
//! * [`model`]: rigid-body plant with LuGre friction.
//! * [`observers`]: natural, existing and proposed friction observers.
//! * [`control`]: PI/PID, reference pre-filter and feed-forward.
//! * [`sim`]: fixed-step RK4 closed-loop and open-loop runners, CSV export.
//! * [`analysis`]: decay fits, excitation integrals, Lyapunov traces, gain
//!   identities, SPR margins and tracking metrics.
//! * [`verify`]: batteries of numeric checks built on the above.

pub mod analysis;
pub mod control;
pub mod error;
pub mod model;
pub mod observers;
pub mod sim;
pub mod verify;

pub use error::{AnalysisError, ParamError, SimError, VerifyError};
