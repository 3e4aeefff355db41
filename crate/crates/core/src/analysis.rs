//! Instruments for checking observer convergence and loop behaviour.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::PidConfig;
use crate::error::AnalysisError;
use crate::model::{stribeck_h, FrictionParams, PlantParams};
use crate::observers::{error_derivatives, ExponentialGains, GainSchedule, ProposedGains};
use crate::sim::{LoopKind, ReferenceSignal, Side, Trajectory};

/// Magnitudes at or below this are treated as numerical zero by the fit.
pub const DECAY_FLOOR: f64 = 1e-14;
/// Minimum number of usable samples for [`fit_decay_rate`].
pub const MIN_FIT_SAMPLES: usize = 10;

/// Quadratic form `V = A·e_z² + B·e_z·e_w + C·e_w²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LyapunovSpec {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let ok = self.a > 0.0 && self.c > 0.0 && self.b * self.b - 4.0 * self.a * self.c < 0.0;
        if ok && self.b.is_finite() {
            Ok(())
        } else {
            Err(AnalysisError::NotPositiveDefinite { a: self.a, b: self.b, c: self.c })
        }
    }

    pub fn value(&self, e_z: f64, e_w: f64) -> f64 {
        self.a * e_z * e_z + self.b * e_z * e_w + self.c * e_w * e_w
    }
}

/// `dV/dt` obtained by substituting the error dynamics of the proposed observer.
pub fn lyapunov_derivative(
    spec: &LyapunovSpec,
    e_z: f64,
    e_w: f64,
    w: f64,
    gains: ProposedGains,
    p: &FrictionParams,
    jp: &PlantParams,
) -> f64 {
    let (de_z, de_w) = error_derivatives(e_z, e_w, w, gains, p, jp);
    (2.0 * spec.a * e_z + spec.b * e_w) * de_z + (spec.b * e_z + 2.0 * spec.c * e_w) * de_w
}

/// Closed form of `dV/dt` for the exponential gain regime:
/// `−σ0·β·(|w|/h)·e_z² − (B·σ0/J)·e_z² − 2·C·α·e_w²`.
pub fn exponential_regime_rate(
    g: &ExponentialGains,
    e_z: f64,
    e_w: f64,
    w: f64,
    p: &FrictionParams,
    jp: &PlantParams,
) -> f64 {
    let ratio = w.abs() / stribeck_h(w, p);
    -p.sigma0 * g.beta * ratio * e_z * e_z - g.b * p.sigma0 / jp.j * e_z * e_z - 2.0 * g.c * g.alpha * e_w * e_w
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrace {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
    pub rate: Vec<f64>,
}

impl LyapunovTrace {
    /// Largest single-step increase of `V`.
    pub fn max_increase(&self) -> f64 {
        self.value.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `V` and analytic `dV/dt` along a trajectory of the proposed observer.
pub fn lyapunov_trace(
    traj: &Trajectory,
    spec: &LyapunovSpec,
    schedule: &GainSchedule,
    p: &FrictionParams,
    jp: &PlantParams,
) -> Result<LyapunovTrace, AnalysisError> {
    spec.validate()?;
    let mut out = LyapunovTrace { t: Vec::new(), value: Vec::new(), rate: Vec::new() };
    for s in &traj.samples {
        let (Some(e_z), Some(e_w), Some(gains)) = (s.e_z, s.e_w, schedule.gains(s.w, p, jp)) else {
            return Err(AnalysisError::InvalidInput(
                "trajectory has no velocity-error channel or the observer has no proposed gains".into(),
            ));
        };
        out.t.push(s.t);
        out.value.push(spec.value(e_z, e_w));
        out.rate.push(lyapunov_derivative(spec, e_z, e_w, s.w, gains, p, jp));
    }
    Ok(out)
}

/// Residuals of the exponential gain construction. Each identity residual is
/// paired with the magnitude of its largest term for relative comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainResiduals {
    /// `2A − B·σ1/J`; must be non-negative (equals `β`).
    pub slack: f64,
    /// `B·K1 + 2C·K3 − 2C·α`.
    pub damping: (f64, f64),
    /// `2C·σ1/J − B`.
    pub cross_velocity: (f64, f64),
    /// `B·K3 + 2C·σ0/J + 2A·K1`.
    pub cross_constant: (f64, f64),
    /// `B² − 4AC + 2βC`.
    pub definiteness: (f64, f64),
    /// `K2 − J·α`.
    pub k2: (f64, f64),
    /// `K2 − J·K3 − σ1·K1`.
    pub k2_consistency: (f64, f64),
}

impl GainResiduals {
    pub fn identities(&self) -> [(&'static str, (f64, f64)); 6] {
        [
            ("B*K1 + 2C*K3 - 2C*alpha", self.damping),
            ("2C*sigma1/J - B", self.cross_velocity),
            ("B*K3 + 2C*sigma0/J + 2A*K1", self.cross_constant),
            ("B^2 - 4AC + 2*beta*C", self.definiteness),
            ("K2 - J*alpha", self.k2),
            ("K2 - J*K3 - sigma1*K1", self.k2_consistency),
        ]
    }

    /// Largest `|residual| / scale` over all identities.
    pub fn max_relative(&self) -> f64 {
        self.identities().iter().map(|(_, (r, s))| relative(*r, *s)).fold(0.0, f64::max)
    }
}

fn relative(residual: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        residual.abs()
    } else {
        residual.abs() / scale
    }
}

fn max_abs(terms: &[f64]) -> f64 {
    terms.iter().fold(0.0f64, |m, t| m.max(t.abs()))
}

pub fn gain_identity_residuals(g: &ExponentialGains, p: &FrictionParams, jp: &PlantParams) -> GainResiduals {
    let j = jp.j;
    let term = |terms: &[f64]| (terms.iter().sum::<f64>(), max_abs(terms));
    GainResiduals {
        slack: 2.0 * g.a - g.b * p.sigma1 / j,
        damping: term(&[g.b * g.k1, 2.0 * g.c * g.k3, -2.0 * g.c * g.alpha]),
        cross_velocity: term(&[2.0 * g.c * p.sigma1 / j, -g.b]),
        cross_constant: term(&[g.b * g.k3, 2.0 * g.c * p.sigma0 / j, 2.0 * g.a * g.k1]),
        definiteness: term(&[g.b * g.b, -4.0 * g.a * g.c, 2.0 * g.beta * g.c]),
        k2: term(&[g.k2, -j * g.alpha]),
        k2_consistency: term(&[g.k2, -j * g.k3, -p.sigma1 * g.k1]),
    }
}

/// `e_z(t) = e_z(0)·exp(−σ0·∫₀ᵗ |w|/h(w) dτ)` for every time in `t_grid`.
///
/// Each grid interval is split at the signal's discontinuities and integrated
/// with composite Simpson on ten sub-intervals.
pub fn closed_form_error_oracle(signal: &ReferenceSignal, e_z0: f64, p: &FrictionParams, t_grid: &[f64]) -> Vec<f64> {
    const REFINE: usize = 10;
    let integrand = |w: f64| w.abs() / stribeck_h(w, p);
    let breaks = signal.breakpoints();

    let simpson = |a: f64, b: f64| -> f64 {
        if b <= a {
            return 0.0;
        }
        let h = (b - a) / REFINE as f64;
        let mut sum = integrand(signal.value_from(a, Side::Right)) + integrand(signal.value_from(b, Side::Left));
        for i in 1..REFINE {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += weight * integrand(signal.value(a + i as f64 * h));
        }
        sum * h / 3.0
    };

    let mut out = Vec::with_capacity(t_grid.len());
    let mut integral = 0.0;
    let mut prev = t_grid.first().map_or(0.0, |&t0| t0.min(0.0));
    for &t in t_grid {
        let mut a = prev;
        for &bp in breaks.iter().filter(|&&bp| bp > prev && bp < t) {
            integral += simpson(a, bp);
            a = bp;
        }
        integral += simpson(a, t);
        prev = t;
        out.push(e_z0 * (-p.sigma0 * integral).exp());
    }
    out
}

/// Smallest integral of `|w|` over any window of length `window` in a
/// uniformly sampled series (trapezoidal rule).
pub fn pe_window_integral(w: &[f64], dt: f64, window: f64) -> Result<f64, AnalysisError> {
    if w.len() < 2 || dt <= 0.0 || window <= 0.0 {
        return Err(AnalysisError::InvalidInput("need at least two samples, dt > 0 and window > 0".into()));
    }
    let span = dt * (w.len() - 1) as f64;
    let n = (window / dt).round() as usize;
    if n == 0 || n > w.len() - 1 {
        return Err(AnalysisError::WindowTooLong { window, span });
    }
    let segment: Vec<f64> = w.windows(2).map(|s| 0.5 * dt * (s[0].abs() + s[1].abs())).collect();
    let mut current: f64 = segment[..n].iter().sum();
    let mut best = current;
    for i in n..segment.len() {
        current += segment[i] - segment[i - n];
        best = best.min(current);
    }
    Ok(best)
}

/// Exponential fit `|e(t)| ≈ c·exp(−rate·t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares fit of `log|e|` against `t`.
///
/// With `window = None` the fit covers the span from the first sample at or
/// below half the initial magnitude to the first sample below `1e−10`.
pub fn fit_decay_rate(t: &[f64], e: &[f64], window: Option<(f64, f64)>) -> Result<DecayFit, AnalysisError> {
    if t.len() != e.len() {
        return Err(AnalysisError::InvalidInput("time and error series differ in length".into()));
    }
    let (start, end) = match window {
        Some(w) => w,
        None => default_fit_window(t, e),
    };
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&ti, &ei) in t.iter().zip(e) {
        if ti >= start && ti <= end && ei.abs() > DECAY_FLOOR {
            xs.push(ti);
            ys.push(ei.abs().ln());
        }
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::InsufficientSamples { required: MIN_FIT_SAMPLES, found: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit { rate: -slope, r_squared, window: (start, end), samples: xs.len() })
}

fn default_fit_window(t: &[f64], e: &[f64]) -> (f64, f64) {
    let Some(&e0) = e.first() else {
        return (0.0, 0.0);
    };
    let half = 0.5 * e0.abs();
    let Some(i0) = e.iter().position(|v| v.abs() <= half) else {
        return (t[0], t[0]);
    };
    let i1 = e[i0..].iter().position(|v| v.abs() < 1e-10).map_or(e.len() - 1, |k| i0 + k);
    (t[i0], t[i1])
}

/// Real part of `T(s) = (σ1·s + σ0)/(J·s² + C(s))` over a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SprMargin {
    /// Smallest `Re T(j2πf)` over the evaluated points.
    pub min_real: f64,
    pub argmin_hz: f64,
    /// Grid frequencies where `|J·s² + C(s)| < 1e−12`; excluded from the minimum.
    pub singular_hz: Vec<f64>,
}

impl SprMargin {
    pub fn is_violated(&self) -> bool {
        self.min_real <= 0.0
    }
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

/// 1000 log-spaced frequencies from 0.01 Hz to 100 kHz.
pub fn default_spr_grid() -> Vec<f64> {
    logspace(1e-2, 1e5, 1000)
}

pub fn spr_margin(
    controller: &PidConfig,
    jp: &PlantParams,
    p: &FrictionParams,
    freq_grid_hz: &[f64],
) -> Result<SprMargin, AnalysisError> {
    if freq_grid_hz.is_empty() || freq_grid_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(AnalysisError::InvalidInput("frequency grid must be non-empty and positive".into()));
    }
    let mut out = SprMargin { min_real: f64::INFINITY, argmin_hz: f64::NAN, singular_hz: Vec::new() };
    for &f in freq_grid_hz {
        let s = Complex64::new(0.0, std::f64::consts::TAU * f);
        let den = jp.j * s * s + controller.transfer(s);
        if den.norm() < 1e-12 {
            out.singular_hz.push(f);
            continue;
        }
        let re = ((p.sigma1 * s + p.sigma0) / den).re;
        if re < out.min_real {
            out.min_real = re;
            out.argmin_hz = f;
        }
    }
    Ok(out)
}

/// Highest grid frequency at which the reference-to-output magnitude of the
/// frictionless loop is still at least `1/√2`.
pub fn closed_loop_bandwidth_hz(controller: &PidConfig, jp: &PlantParams, loop_kind: LoopKind) -> Option<f64> {
    let grid = logspace(1e-2, 1e5, 20_000);
    let gain = |f: f64| {
        let s = Complex64::new(0.0, std::f64::consts::TAU * f);
        let c = controller.transfer(s);
        let plant = match loop_kind {
            LoopKind::Position => jp.j * s * s,
            _ => jp.j * s,
        };
        (c / (plant + c)).norm()
    };
    grid.into_iter().rev().find(|&f| gain(f) >= std::f64::consts::FRAC_1_SQRT_2)
}

/// Tracking quality of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TrackingMetrics {
    pub rmse: f64,
    /// Mean absolute tracking error over the last 10 % of the run.
    pub steady_state_error: f64,
    /// Peak excursion beyond the final reference, as a fraction of it.
    pub overshoot: f64,
    /// Time after which `|error|` stays within 2 % of the peak reference.
    pub settling_time: f64,
}

pub fn tracking_metrics(traj: &Trajectory) -> Result<TrackingMetrics, AnalysisError> {
    let rows: Vec<(f64, f64, f64, f64)> = traj
        .samples
        .iter()
        .filter_map(|s| {
            let err = s.track_err?;
            let reference = s.ref_raw?;
            let measured = s.ref_filtered? - err;
            Some((s.t, err, reference, measured))
        })
        .collect();
    if rows.is_empty() {
        return Err(AnalysisError::InvalidInput("trajectory has no tracking-error channel".into()));
    }
    let n = rows.len() as f64;
    let rmse = (rows.iter().map(|r| r.1 * r.1).sum::<f64>() / n).sqrt();

    let t_end = rows.last().unwrap().0;
    let t_tail = t_end - 0.1 * (t_end - rows[0].0);
    let tail: Vec<f64> = rows.iter().filter(|r| r.0 >= t_tail).map(|r| r.1.abs()).collect();
    let steady_state_error = tail.iter().sum::<f64>() / tail.len() as f64;

    let final_ref = rows.last().unwrap().2;
    let overshoot = if final_ref != 0.0 {
        let peak = rows.iter().map(|r| (r.3 - final_ref) * final_ref.signum()).fold(0.0f64, f64::max);
        peak / final_ref.abs()
    } else {
        0.0
    };

    let band = 0.02 * rows.iter().fold(0.0f64, |m, r| m.max(r.2.abs()));
    let settling_time = rows.iter().rev().find(|r| r.1.abs() > band).map_or(0.0, |r| r.0);

    Ok(TrackingMetrics { rmse, steady_state_error, overshoot, settling_time })
}
