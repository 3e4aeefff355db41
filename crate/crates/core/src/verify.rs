//! Verification suites.
//!
//! Each suite runs a fixed battery of simulations and instrument calls and
//! returns one [`Check`] per claim, carrying the measured value and the bound it
//! was compared against. Random draws come from a seeded ChaCha stream, so a
//! suite run is reproducible from its seed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    closed_form_error_oracle, exponential_regime_rate, fit_decay_rate, gain_identity_residuals, lyapunov_trace,
    pe_window_integral,
};
use crate::error::{SimError, VerifyError};
use crate::model::{stribeck_h, FrictionParams, PlantParams};
use crate::observers::{proposed_gains_exponential, GainSchedule};
use crate::sim::{run_open_loop_observer, OpenLoopConfig, ReferenceSignal, Trajectory};

/// Number of random `(C, α, β)` draws per parameter set in the gains suite.
pub const GAIN_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Gains,
    Lemmas,
    Oracle,
    All,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Gains => "gains",
            Suite::Lemmas => "lemmas",
            Suite::Oracle => "oracle",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gains" => Ok(Suite::Gains),
            "lemmas" => Ok(Suite::Lemmas),
            "oracle" => Ok(Suite::Oracle),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite `{other}` (expected gains, lemmas, oracle or all)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One verified claim: `value <= tolerance` or `value >= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        // NaN fails either way.
        let passed = value <= tolerance;
        Self { name: name.into(), value, relation: Relation::AtMost, tolerance, passed }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let passed = value >= tolerance;
        Self { name: name.into(), value, relation: Relation::AtLeast, tolerance, passed }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.6e} {op} {:.6e}", self.name, self.value, self.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport, VerifyError> {
    let checks = match suite {
        Suite::Gains => gain_checks(seed),
        Suite::Lemmas => lemma_checks()?,
        Suite::Oracle => oracle_checks()?,
        Suite::All => {
            let mut all = gain_checks(seed);
            all.extend(oracle_checks()?);
            all.extend(lemma_checks()?);
            all
        }
    };
    Ok(SuiteReport { suite, seed, checks })
}

/// Parameter set with `J = σ0 = σ1 = 1`.
pub fn toy_params() -> (FrictionParams, PlantParams) {
    let p = FrictionParams { sigma0: 1.0, sigma1: 1.0, ..FrictionParams::table1() };
    (p, PlantParams { j: 1.0 })
}

/// Uniform draw on `(0, hi]`.
fn draw(rng: &mut ChaCha8Rng, hi: f64) -> f64 {
    hi * (1.0 - rng.gen::<f64>())
}

/// Exponential-regime identities over random `(C, α, β) ∈ (0, 100]³`.
pub fn gain_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (toy_p, toy_j) = toy_params();
    let sets = [("table1", FrictionParams::table1(), PlantParams::table1()), ("toy", toy_p, toy_j)];
    let mut checks = Vec::new();
    for (label, p, jp) in sets {
        let mut worst = [0.0f64; 6];
        let mut names = [""; 6];
        let mut slack_dev = 0.0f64;
        for _ in 0..GAIN_DRAWS {
            let (c, alpha, beta) = (draw(&mut rng, 100.0), draw(&mut rng, 100.0), draw(&mut rng, 100.0));
            let g = proposed_gains_exponential(c, alpha, beta, &p, &jp);
            let r = gain_identity_residuals(&g, &p, &jp);
            for (i, (name, (res, scale))) in r.identities().into_iter().enumerate() {
                names[i] = name;
                let rel = if scale == 0.0 { res.abs() } else { res.abs() / scale };
                worst[i] = worst[i].max(rel);
            }
            // The slack must equal β; relative to 2A, the larger of its two terms.
            slack_dev = slack_dev.max((r.slack - beta).abs() / (2.0 * g.a));
        }
        for (name, w) in names.iter().zip(worst) {
            checks.push(Check::at_most(format!("gains/{label}/{name}"), w, 1e-9));
        }
        checks.push(Check::at_most(format!("gains/{label}/2A - B*sigma1/J - beta"), slack_dev, 1e-9));
    }

    // A 1 % error in K1 must be visible in the constant cross-term identity.
    let (p, jp) = (FrictionParams::table1(), PlantParams::table1());
    let mut g = proposed_gains_exponential(1.0, 1.0, 1.0, &p, &jp);
    g.k1 *= 1.01;
    let (res, scale) = gain_identity_residuals(&g, &p, &jp).cross_constant;
    checks.push(Check::at_least("gains/table1/perturbed K1 detected", res.abs() / scale, 1e-3));
    checks
}

/// Natural-observer initial deflection error used by the oracle and trajectory runs.
pub const E_Z0: f64 = 1e-3;

fn natural_run(signal: ReferenceSignal, dt: f64, duration: f64) -> Result<Trajectory, SimError> {
    run_open_loop_observer(
        &OpenLoopConfig::new(signal, GainSchedule::Natural, dt, duration).with_initial(E_Z0, 0.0, None),
    )
}

fn e_z(traj: &Trajectory) -> Vec<f64> {
    traj.channel(|s| s.e_z)
}

/// Velocity signals of the closed-form cross-validation battery.
pub fn oracle_signals() -> [(&'static str, ReferenceSignal); 4] {
    [
        ("constant", ReferenceSignal::Constant { value: 0.05 }),
        ("step", ReferenceSignal::Step { amplitude: 0.05, start_time: 0.25 }),
        ("sinusoid", ReferenceSignal::Sinusoid { amplitude: 0.05, frequency_hz: 1.0, phase: 0.0 }),
        ("decaying_exp", ReferenceSignal::DecayingExp { amplitude: 0.1, rate: 5.0 }),
    ]
}

/// Simulated natural-observer error against the quadrature closed form.
pub fn oracle_checks() -> Result<Vec<Check>, VerifyError> {
    let p = FrictionParams::table1();
    let mut checks = Vec::new();
    for (label, signal) in oracle_signals() {
        let traj = natural_run(signal, 1e-5, 1.0)?;
        let oracle = closed_form_error_oracle(&signal, E_Z0, &p, &traj.times());
        let dev = e_z(&traj).iter().zip(&oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        checks.push(Check::at_most(format!("oracle/{label}/max |e_z - closed form|"), dev, 1e-6));
    }

    // Limit of the error under an integrable velocity.
    let signal = ReferenceSignal::DecayingExp { amplitude: 0.1, rate: 5.0 };
    let traj = natural_run(signal, 1e-5, 4.0)?;
    let simulated = traj.last().and_then(|s| s.e_z).unwrap_or(f64::NAN);
    let grid: Vec<f64> = (0..=40_000).map(|k| k as f64 * 1e-3).collect();
    let limit = *closed_form_error_oracle(&signal, E_Z0, &p, &grid).last().expect("non-empty grid");
    checks.push(Check::at_most(
        "oracle/decaying_exp/|e_z(inf) - quadrature| / e_z(0)",
        (simulated - limit).abs() / E_Z0,
        1e-6,
    ));
    Ok(checks)
}

/// Amplitude of the sinusoid used for the excitation decay fits. Unit
/// amplitude drives `e_z` below the fit floor within one window.
pub fn pe_decay_amplitude(frequency_hz: f64) -> f64 {
    2e-3 * frequency_hz
}

/// Decay-rate, excitation and Lyapunov trajectory checks and the frozen-plant contrast.
pub fn lemma_checks() -> Result<Vec<Check>, VerifyError> {
    let p = FrictionParams::table1();
    let jp = PlantParams::table1();
    let mut checks = Vec::new();

    for w0 in [0.02, 0.05, 0.2] {
        let traj = natural_run(ReferenceSignal::Constant { value: w0 }, 1e-5, 2.0)?;
        let fit = fit_decay_rate(&traj.times(), &e_z(&traj), None)?;
        let bound = p.sigma0 * w0 / p.c2();
        let exact = p.sigma0 * w0 / stribeck_h(w0, &p);
        checks.push(Check::at_least(
            format!("constant_velocity/w0={w0}/rate / (0.95*sigma0*w0/C2)"),
            fit.rate / (0.95 * bound),
            1.0,
        ));
        checks.push(Check::at_most(
            format!("constant_velocity/w0={w0}/|rate / (sigma0*w0/h) - 1|"),
            (fit.rate / exact - 1.0).abs(),
            0.02,
        ));
    }

    for f in [0.5, 1.0, 5.0] {
        let window = 1.0 / (2.0 * f);
        let dt = 1e-5;
        let unit = ReferenceSignal::Sinusoid { amplitude: 1.0, frequency_hz: f, phase: 0.0 };
        let n = (3.0 * window / dt).round() as usize;
        let w: Vec<f64> = (0..=n).map(|k| unit.value(k as f64 * dt)).collect();
        let beta = pe_window_integral(&w, dt, window)?;
        checks.push(Check::at_most(
            format!("excitation/f={f}/|beta - 1/(pi f)|"),
            (beta - 1.0 / (std::f64::consts::PI * f)).abs(),
            1e-6,
        ));

        let signal = ReferenceSignal::Sinusoid { amplitude: pe_decay_amplitude(f), frequency_hz: f, phase: 0.0 };
        let traj = natural_run(signal, dt, 30.0 * window)?;
        let stride = (window / dt).round() as usize;
        let (t, e): (Vec<f64>, Vec<f64>) =
            traj.samples.iter().step_by(stride).map(|s| (s.t, s.e_z.unwrap_or(f64::NAN))).unzip();
        let fit = fit_decay_rate(&t, &e, Some((0.0, traj.samples.last().map_or(0.0, |s| s.t))))?;
        checks.push(Check::at_least(format!("excitation/f={f}/envelope fit r^2"), fit.r_squared, 0.99));
        checks.push(Check::at_least(format!("excitation/f={f}/envelope rate"), fit.rate, f64::MIN_POSITIVE));
    }

    // Frozen plant: the proposed observer converges, the natural one cannot.
    let frozen = ReferenceSignal::Constant { value: 0.0 };
    let sched = GainSchedule::ProposedExponential { c: 1.0, alpha: 10.0, beta: 1.0 };
    let (ez0, ew0) = (E_Z0, -0.01);
    let traj =
        run_open_loop_observer(&OpenLoopConfig::new(frozen, sched, 2e-8, 0.03).with_initial(E_Z0, 0.0, Some(0.01)))?;
    let last = traj.last().expect("non-empty trajectory");
    checks.push(Check::at_most("frozen/proposed |e_z(T)/e_z(0)|", (last.e_z.unwrap_or(f64::NAN) / ez0).abs(), 1e-3));
    checks.push(Check::at_most("frozen/proposed |e_w(T)/e_w(0)|", (last.e_w.unwrap_or(f64::NAN) / ew0).abs(), 1e-3));
    let traj = natural_run(frozen, 1e-5, 1.0)?;
    let drift = e_z(&traj).iter().fold(0.0f64, |m, e| m.max((e - E_Z0).abs()));
    checks.push(Check::at_most("frozen/natural max |e_z(t) - e_z(0)|", drift, 1e-12));

    let signal = ReferenceSignal::Sinusoid { amplitude: 0.1, frequency_hz: 1.0, phase: 0.0 };
    let regimes = [
        ("time_varying", GainSchedule::ProposedTimeVarying { a: 1.0, c: 1e-4, alpha: 0.022 }, 2.0),
        ("bounded", GainSchedule::ProposedBounded { a: 1.0, c: 1e-4, alpha: 0.022, m: 0.1 }, 2.0),
        ("exponential", GainSchedule::ProposedExponential { c: 1e-4, alpha: 10.0, beta: 1.0 }, 0.2),
    ];
    for (label, sched, duration) in regimes {
        let cfg = OpenLoopConfig::new(signal, sched, 1e-5, duration).with_initial(0.0, 1e-4, Some(0.01));
        let traj = run_open_loop_observer(&cfg)?;
        let spec = sched.lyapunov_spec(&p, &jp).expect("proposed regimes carry a Lyapunov form");
        let trace = lyapunov_trace(&traj, &spec, &sched, &p, &jp)?;
        checks.push(Check::at_most(format!("{label}/max step increase of V"), trace.max_increase(), 1e-9));
        checks.push(Check::at_most(
            format!("{label}/max dV/dt"),
            trace.rate.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            0.0,
        ));

        let e_w = traj.channel(|s| s.e_w);
        if label == "exponential" {
            let t = traj.times();
            let fz = fit_decay_rate(&t, &e_z(&traj), None)?;
            let fw = fit_decay_rate(&t, &e_w, None)?;
            checks.push(Check::at_least(format!("{label}/e_z decay fit r^2"), fz.r_squared, 0.99));
            checks.push(Check::at_least(format!("{label}/e_w decay fit r^2"), fw.r_squared, 0.99));

            let GainSchedule::ProposedExponential { c, alpha, beta } = sched else { unreachable!() };
            let g = proposed_gains_exponential(c, alpha, beta, &p, &jp);
            let worst = traj
                .samples
                .iter()
                .zip(&trace.rate)
                .map(|(s, &rate)| {
                    let closed = exponential_regime_rate(&g, s.e_z.unwrap_or(0.0), s.e_w.unwrap_or(0.0), s.w, &p, &jp);
                    (rate - closed).abs() / closed.abs().max(f64::MIN_POSITIVE)
                })
                .fold(0.0f64, f64::max);
            checks.push(Check::at_most(format!("{label}/dV/dt vs closed form (relative)"), worst, 1e-9));
        } else {
            let (first, last) = (e_w[0], e_w[e_w.len() - 1]);
            checks.push(Check::at_most(format!("{label}/|e_w(T)/e_w(0)|"), (last / first).abs(), 1e-6));
        }
    }
    Ok(checks)
}
