//! Running scenarios and summarising their trajectories.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use lugre_core::analysis::{fit_decay_rate, tracking_metrics, DecayFit, TrackingMetrics};
use lugre_core::sim::{run_closed_loop, Sample, ScenarioConfig, Trajectory};
use lugre_core::verify::Check;
use lugre_core::SimError;

use crate::CliError;

/// Allowed single-step increase of `V`, relative to its largest value.
pub const LYAPUNOV_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelFit {
    pub channel: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<DecayFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Metrics of one simulated variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub variant: String,
    pub csv: PathBuf,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingMetrics>,
    pub decay: Vec<ChannelFit>,
    /// Single-step increase of `V` against its tolerance, when `V` is defined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov_monotone: Option<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub command: &'static str,
    pub variants: Vec<VariantReport>,
    pub report: PathBuf,
}

pub fn simulate(cfg: &ScenarioConfig) -> Result<Trajectory, CliError> {
    run_closed_loop(cfg).map_err(|e| match e {
        SimError::Config(p) => CliError::Config(format!("field `{}`: {p}", p.field())),
        d @ SimError::Diverged { .. } => CliError::Diverged(d.to_string()),
    })
}

pub fn summarise(variant: &str, traj: &Trajectory, csv: PathBuf) -> VariantReport {
    let t = traj.times();
    let mut decay = Vec::new();
    for (channel, values) in [("e_z", defined(traj, |s| s.e_z)), ("e_f", defined(traj, |s| s.e_f))] {
        let Some(values) = values else { continue };
        let (fit, note) = match fit_decay_rate(&t, &values, None) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        decay.push(ChannelFit { channel, fit, note });
    }
    let lyapunov_monotone = defined(traj, |s| s.lyapunov).filter(|v| v.len() > 1).map(|v| {
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let rise = v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        Check::at_most("V max step increase / max V", rise.max(0.0) / scale, LYAPUNOV_TOLERANCE)
    });
    VariantReport {
        variant: variant.to_string(),
        csv,
        samples: traj.len(),
        tracking: tracking_metrics(traj).ok(),
        decay,
        lyapunov_monotone,
    }
}

/// The channel if every sample defines it.
fn defined(traj: &Trajectory, f: impl Fn(&Sample) -> Option<f64>) -> Option<Vec<f64>> {
    traj.samples.iter().map(f).collect()
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    traj.write_csv(BufWriter::new(file)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4e}"))
}

/// Side-by-side metrics table.
pub fn table(report: &RunReport) -> String {
    let mut out = format!("scenario {}\n", report.scenario);
    let width = report.variants.iter().map(|v| v.variant.len()).max().unwrap_or(0).max(7);
    let _ = writeln!(
        out,
        "{:width$}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}  lyapunov",
        "variant", "rmse", "ss_error", "overshoot", "settle_s", "rate_e_z", "rate_e_f"
    );
    for v in &report.variants {
        let tr = v.tracking.as_ref();
        let rate = |ch: &str| v.decay.iter().find(|d| d.channel == ch).and_then(|d| d.fit).map(|f| f.rate);
        let lyap = v.lyapunov_monotone.as_ref().map_or("-", |c| if c.passed { "pass" } else { "FAIL" });
        let _ = writeln!(
            out,
            "{:width$}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}  {lyap}",
            v.variant,
            fmt_opt(tr.map(|m| m.rmse)),
            fmt_opt(tr.map(|m| m.steady_state_error)),
            fmt_opt(tr.map(|m| m.overshoot)),
            fmt_opt(tr.map(|m| m.settling_time)),
            fmt_opt(rate("e_z")),
            fmt_opt(rate("e_f")),
        );
    }
    for v in &report.variants {
        let _ = writeln!(out, "wrote {}", v.csv.display());
    }
    let _ = writeln!(out, "wrote {}", report.report.display());
    out
}
