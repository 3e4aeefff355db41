use super::signal::Side;
use crate::error::SimError;

/// Evaluation time of one Runge-Kutta stage.
///
/// The final stage of a step sits at the end of the interval and takes left
/// limits of discontinuous inputs, so a discontinuity on the grid is seen
/// exactly once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTime {
    pub t: f64,
    pub side: Side,
}

/// Magnitude beyond which a state component counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// One classical fourth-order Runge-Kutta step from `t` to `t + dt`.
pub fn integrate_step_rk4<const N: usize, F>(mut f: F, t: f64, x: &[f64; N], dt: f64) -> Result<[f64; N], SimError>
where
    F: FnMut(StageTime, &[f64; N]) -> [f64; N],
{
    let half = 0.5 * dt;
    let k1 = f(StageTime { t, side: Side::Right }, x);
    let k2 = f(StageTime { t: t + half, side: Side::Right }, &axpy(x, half, &k1));
    let k3 = f(StageTime { t: t + half, side: Side::Right }, &axpy(x, half, &k2));
    let k4 = f(StageTime { t: t + dt, side: Side::Left }, &axpy(x, dt, &k3));

    let mut next = *x;
    for i in 0..N {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    check_state(t + dt, &next)?;
    Ok(next)
}

pub(crate) fn check_state(t: f64, x: &[f64]) -> Result<(), SimError> {
    if x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT) {
        Ok(())
    } else {
        Err(SimError::Diverged { t, state: x.to_vec() })
    }
}

fn axpy<const N: usize>(x: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}
