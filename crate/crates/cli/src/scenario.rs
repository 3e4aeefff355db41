//! Scenario loading, presets, overrides and comparison variants.

use std::path::Path;

use serde_json::Value;

use lugre_core::observers::GainSchedule;
use lugre_core::sim::{Compensation, LoopKind, ObserverConfig, ScenarioConfig};

use crate::CliError;

pub const PRESETS: [(&str, &str); 3] = [
    ("table1-velocity", include_str!("../presets/table1-velocity.json")),
    ("table1-position", include_str!("../presets/table1-position.json")),
    ("open-loop-sinusoid", include_str!("../presets/open-loop-sinusoid.json")),
];

/// A parsed scenario and the identifier used for output file names.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub config: ScenarioConfig,
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn load(config: Option<&Path>, preset: Option<&str>) -> Result<Scenario, CliError> {
    let (id, text) = match (config, preset) {
        (Some(_), Some(_)) => return Err(CliError::Usage("use either --config or --preset, not both".into())),
        (None, None) => return Err(CliError::Usage("one of --config or --preset is required".into())),
        (None, Some(name)) => {
            let text = PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| t.to_string()).ok_or_else(|| {
                CliError::Usage(format!("unknown preset `{name}` (available: {})", preset_names().join(", ")))
            })?;
            (name.to_string(), text)
        }
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let id = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
            (id, text)
        }
    };
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{id}: {e}")))?;
    Ok(Scenario { id: id.clone(), config: from_value(&id, value)? })
}

fn from_value(id: &str, value: Value) -> Result<ScenarioConfig, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{id}: {e}")))
}

/// Applies `--dt` / `--duration` and validates the result.
pub fn finalize(mut sc: Scenario, dt: Option<f64>, duration: Option<f64>) -> Result<Scenario, CliError> {
    if let Some(dt) = dt {
        sc.config.dt = dt;
    }
    if let Some(d) = duration {
        sc.config.duration = d;
    }
    validate(&sc.config)?;
    Ok(sc)
}

pub fn validate(cfg: &ScenarioConfig) -> Result<(), CliError> {
    cfg.validate().map_err(|e| CliError::Config(format!("field `{}`: {e}", e.field())))
}

/// Sets the numeric field at a dotted path such as `controller.ki` or
/// `observer.schedule.alpha`.
pub fn with_field(cfg: &ScenarioConfig, path: &str, value: f64) -> Result<ScenarioConfig, CliError> {
    let mut root = serde_json::to_value(cfg).expect("scenario serialises");
    let mut node = &mut root;
    for key in path.split('.') {
        node = node
            .get_mut(key)
            .ok_or_else(|| CliError::Config(format!("field `{path}` does not exist in the scenario")))?;
    }
    if !node.is_number() {
        return Err(CliError::Config(format!("field `{path}` is not numeric")));
    }
    *node = serde_json::Number::from_f64(value)
        .map(Value::Number)
        .ok_or_else(|| CliError::Config(format!("field `{path}`: value {value} is not finite")))?;
    from_value(path, root)
}

/// Parses `lo:hi:n` with `n >= 1` points, linear or logarithmic.
pub fn parse_range(spec: &str, log: bool) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Usage(format!("range `{spec}` must look like lo:hi:n"));
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(CliError::Usage(format!("range `{spec}` is empty")));
    }
    if log && (lo <= 0.0 || hi <= 0.0) {
        return Err(CliError::Usage("a logarithmic range needs positive bounds".into()));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok(if log {
        lugre_core::analysis::logspace(lo, hi, n)
    } else {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    })
}

pub fn parse_values(spec: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> =
        spec.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect();
    let values = values.map_err(|_| CliError::Usage(format!("values `{spec}` must be comma-separated numbers")))?;
    if values.is_empty() {
        return Err(CliError::Usage("value list is empty".into()));
    }
    Ok(values)
}

/// One member of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    /// Friction removed from the plant.
    NoFriction,
    /// Friction present, nothing added to the control torque.
    Uncompensated,
    /// The plant's own friction torque is fed back.
    Oracle,
    /// The scenario's own observer, used for compensation.
    Observer,
    /// A replacement observer, used for compensation in closed loops.
    Schedule(GainSchedule),
}

pub const VARIANT_HELP: &str = "no-friction, uncompensated, oracle, observer, natural, existing[:k=], \
proposed-constant[:k1=:k2=], proposed-time-varying[:a=:c=:alpha=], proposed-bounded[:a=:c=:alpha=:m=], \
proposed-exponential[:c=:alpha=:beta=]";

pub fn parse_variant(spec: &str) -> Result<(String, Variant), CliError> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default().trim();
    let mut params: Vec<(String, f64)> = Vec::new();
    for part in parts {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("variant parameter `{part}` must be key=value")))?;
        let v: f64 =
            v.trim().parse().map_err(|_| CliError::Usage(format!("variant parameter `{part}` is not numeric")))?;
        params.push((k.trim().to_string(), v));
    }
    let mut take = |key: &str, default: f64| -> f64 {
        match params.iter().position(|(k, _)| k == key) {
            Some(i) => params.remove(i).1,
            None => default,
        }
    };
    let variant = match name {
        "no-friction" => Variant::NoFriction,
        "uncompensated" => Variant::Uncompensated,
        "oracle" => Variant::Oracle,
        "observer" => Variant::Observer,
        "natural" => Variant::Schedule(GainSchedule::Natural),
        "existing" => Variant::Schedule(GainSchedule::Existing { k: take("k", 0.35) }),
        "proposed-constant" => {
            Variant::Schedule(GainSchedule::ProposedConstant { k1: take("k1", -10.24), k2: take("k2", 22.0) })
        }
        "proposed-time-varying" => Variant::Schedule(GainSchedule::ProposedTimeVarying {
            a: take("a", 1.0),
            c: take("c", 1e-4),
            alpha: take("alpha", 0.022),
        }),
        "proposed-bounded" => Variant::Schedule(GainSchedule::ProposedBounded {
            a: take("a", 1.0),
            c: take("c", 1e-4),
            alpha: take("alpha", 0.022),
            m: take("m", 2.0),
        }),
        "proposed-exponential" => Variant::Schedule(GainSchedule::ProposedExponential {
            c: take("c", 1e-4),
            alpha: take("alpha", 10.0),
            beta: take("beta", 1.0),
        }),
        other => return Err(CliError::Usage(format!("unknown variant `{other}` (expected one of: {VARIANT_HELP})"))),
    };
    if let Some((k, _)) = params.first() {
        return Err(CliError::Usage(format!("variant `{name}` has no parameter `{k}`")));
    }
    Ok((spec.trim().to_string(), variant))
}

/// The scenario as modified by a comparison variant.
pub fn apply_variant(base: &ScenarioConfig, variant: &Variant) -> Result<ScenarioConfig, CliError> {
    let mut cfg = *base;
    let open_loop = cfg.loop_kind == LoopKind::OpenLoopObserver;
    match variant {
        Variant::NoFriction | Variant::Uncompensated | Variant::Oracle if open_loop => {
            return Err(CliError::Usage("open-loop scenarios only compare observer variants".into()));
        }
        Variant::NoFriction => {
            cfg.friction_enabled = false;
            cfg.compensation = Compensation::None;
        }
        Variant::Uncompensated => cfg.compensation = Compensation::None,
        Variant::Oracle => cfg.compensation = Compensation::Oracle,
        Variant::Observer => {
            if cfg.observer.is_none() {
                return Err(CliError::Config("field `observer`: the scenario defines no observer".into()));
            }
            if !open_loop {
                cfg.compensation = Compensation::Observer;
            }
        }
        Variant::Schedule(schedule) => {
            let friction = cfg.observer.and_then(|o| o.friction);
            cfg.observer = Some(ObserverConfig { friction, ..ObserverConfig::new(*schedule) });
            if !open_loop {
                cfg.compensation = Compensation::Observer;
            }
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for name in preset_names() {
            let sc = load(None, Some(name)).unwrap();
            validate(&sc.config).unwrap();
        }
        assert_eq!(load(None, Some("table1-velocity")).unwrap().config.controller.kp, 1.6);
        assert!(load(None, Some("table1-position")).unwrap().config.prefilter.enabled);
    }

    #[test]
    fn velocity_preset_matches_builtin_baseline() {
        let sc = load(None, Some("table1-velocity")).unwrap();
        let base = ScenarioConfig::velocity_baseline();
        assert_eq!(sc.config.plant, base.plant);
        assert_eq!(sc.config.controller, base.controller);
        assert_eq!(sc.config.dt, base.dt);
        assert_eq!(sc.config.observer.unwrap().schedule, GainSchedule::ProposedConstant { k1: -10.24, k2: 22.0 });
    }

    #[test]
    fn field_paths() {
        let base = ScenarioConfig::velocity_baseline();
        assert_eq!(with_field(&base, "controller.ki", 0.5).unwrap().controller.ki, 0.5);
        assert!(matches!(with_field(&base, "controller.nope", 0.5), Err(CliError::Config(_))));
        assert!(matches!(with_field(&base, "loop_kind", 0.5), Err(CliError::Config(_))));
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:1:3", false).unwrap(), vec![0.0, 0.5, 1.0]);
        let log = parse_range("0.1:100:4", true).unwrap();
        assert!((log[1] - 1.0).abs() < 1e-12 && (log[3] - 100.0).abs() < 1e-9);
        assert!(matches!(parse_range("0:1:0", false), Err(CliError::Usage(_))));
        assert!(matches!(parse_values(" , "), Err(CliError::Usage(_))));
    }

    #[test]
    fn variants() {
        assert_eq!(parse_variant("existing").unwrap().1, Variant::Schedule(GainSchedule::Existing { k: 0.35 }));
        assert_eq!(
            parse_variant("proposed-exponential:alpha=3").unwrap().1,
            Variant::Schedule(GainSchedule::ProposedExponential { c: 1e-4, alpha: 3.0, beta: 1.0 })
        );
        assert!(parse_variant("existing:q=1").is_err());
        assert!(parse_variant("bogus").is_err());
    }
}
