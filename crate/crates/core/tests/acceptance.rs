//! Acceptance criteria, one test per criterion.
//!
//! Every test writes a single `criterion N: PASS|FAIL ...` line straight to
//! stderr (bypassing the test harness capture) before asserting, so a full
//! `cargo test` log always shows the verdict of all eleven criteria.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lugre_core::analysis::{
    closed_form_error_oracle, default_spr_grid, fit_decay_rate, gain_identity_residuals, lyapunov_trace,
    pe_window_integral, spr_margin, tracking_metrics,
};
use lugre_core::control::PidConfig;
use lugre_core::model::{stribeck_h, FrictionParams, PlantParams};
use lugre_core::observers::{proposed_gains_exponential, GainSchedule};
use lugre_core::sim::{
    run_closed_loop, run_open_loop_observer, ClosedLoopDynamics, Compensation, HeldInputs, LoopState, ObserverConfig,
    OpenLoopConfig, ReferenceSignal, ScenarioConfig, Trajectory,
};

const P: FrictionParams = FrictionParams::table1();
const JP: PlantParams = PlantParams::table1();
const E_Z0: f64 = 1e-3;

fn report(n: u32, passed: bool, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let line = format!("criterion {n:>2}: {verdict} {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn natural(signal: ReferenceSignal, dt: f64, duration: f64) -> Trajectory {
    let cfg = OpenLoopConfig::new(signal, GainSchedule::Natural, dt, duration).with_initial(E_Z0, 0.0, None);
    run_open_loop_observer(&cfg).expect("natural observer run")
}

fn e_z(traj: &Trajectory) -> Vec<f64> {
    traj.channel(|s| s.e_z)
}

/// Five-point Gauss-Legendre rule on `[a, b]` split into `n` panels.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    const X: [f64; 5] =
        [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            X.iter().zip(&W).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
        })
        .sum()
}

#[test]
fn criterion_01_gain_identities() {
    let start = Instant::now();
    let toy_p = FrictionParams { sigma0: 1.0, sigma1: 1.0, ..P };
    let toy_j = PlantParams { j: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut worst_lib, mut worst_matrix, mut worst_def, mut worst_k2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (p, jp) in [(P, JP), (toy_p, toy_j)] {
        for _ in 0..1000 {
            let mut draw = || 100.0 * (1.0 - rng.gen::<f64>());
            let (c, alpha, beta) = (draw(), draw(), draw());
            let g = proposed_gains_exponential(c, alpha, beta, &p, &jp);
            worst_lib = worst_lib.max(gain_identity_residuals(&g, &p, &jp).max_relative());

            worst_def =
                worst_def.max((g.b * g.b - 4.0 * g.a * g.c + 2.0 * beta * c).abs() / (g.b * g.b).max(4.0 * g.a * g.c));
            worst_k2 = worst_k2.max((g.k2 - jp.j * alpha).abs() / (jp.j * alpha));

            // Independent check: for the linear error dynamics at any |w|/h, the
            // Lyapunov matrix equation must give the diagonal dissipation
            // −diag(σ0·β·r + B·σ0/J, 2·C·α).
            for r in [0.0, 0.3, 7.0] {
                let (s0, s1, j) = (p.sigma0, p.sigma1, jp.j);
                let m = Matrix2::new(-s0 * r, -g.k1, (-s0 + s1 * s0 * r) / j, (s1 * g.k1 - g.k2) / j);
                let pm = Matrix2::new(g.a, 0.5 * g.b, 0.5 * g.b, g.c);
                let lhs = m.transpose() * pm + pm * m;
                let rhs = Matrix2::new(-(s0 * beta * r + g.b * s0 / j), 0.0, 0.0, -2.0 * c * alpha);
                let scale = (m.transpose() * pm).abs().max().max((pm * m).abs().max());
                worst_matrix = worst_matrix.max((lhs - rhs).abs().max() / scale);
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = worst_lib <= 1e-9
        && worst_matrix <= 1e-9
        && worst_def <= 1e-9
        && worst_k2 <= 1e-9
        && elapsed < Duration::from_secs(1);
    report(
        1,
        passed,
        &format!(
            "library residual {worst_lib:.2e}, Lyapunov matrix residual {worst_matrix:.2e}, B^2-4AC+2bC {worst_def:.2e}, K2-J*alpha {worst_k2:.2e} (tol 1e-9), {elapsed:?} (< 1 s)"
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_02_closed_form_oracle() {
    let start = Instant::now();
    let signals = [
        ("constant", ReferenceSignal::Constant { value: 0.05 }),
        ("step", ReferenceSignal::Step { amplitude: 0.05, start_time: 0.25 }),
        ("sinusoid", ReferenceSignal::Sinusoid { amplitude: 0.05, frequency_hz: 1.0, phase: 0.0 }),
        ("decaying_exp", ReferenceSignal::DecayingExp { amplitude: 0.1, rate: 5.0 }),
    ];
    let mut worst_lib = 0.0f64;
    let mut worst_test = 0.0f64;
    for (_, signal) in signals {
        let traj = natural(signal, 1e-5, 1.0);
        let t = traj.times();
        let lib = closed_form_error_oracle(&signal, E_Z0, &P, &t);
        let sim = e_z(&traj);
        worst_lib = worst_lib.max(sim.iter().zip(&lib).fold(0.0, |m, (a, b)| m.max((a - b).abs())));

        // Test-side oracle on a coarser grid: Gauss-Legendre from 0 to each checkpoint,
        // splitting at the step edge.
        let integrand = |tau: f64| signal.value(tau).abs() / stribeck_h(signal.value(tau), &P);
        for k in (0..t.len()).step_by(5000) {
            let tk = t[k];
            let integral = match signal {
                ReferenceSignal::Step { start_time, .. } if tk > start_time => {
                    gauss_legendre(integrand, start_time, tk, 200)
                }
                ReferenceSignal::Step { .. } => 0.0,
                _ => gauss_legendre(integrand, 0.0, tk, 200),
            };
            let expected = E_Z0 * (-P.sigma0 * integral).exp();
            worst_test = worst_test.max((sim[k] - expected).abs());
        }
    }
    let elapsed = start.elapsed();
    let passed = worst_lib <= 1e-6 && worst_test <= 1e-6 && elapsed < Duration::from_secs(30);
    report(
        2,
        passed,
        &format!("max |e_z - closed form| {worst_lib:.2e} (library), {worst_test:.2e} (Gauss-Legendre), tol 1e-6, {elapsed:?} (< 30 s)"),
    );
    assert!(passed);
}

#[test]
fn criterion_03_constant_velocity_rate() {
    let mut lines = Vec::new();
    let mut passed = true;
    for w0 in [0.02, 0.05, 0.2] {
        let traj = natural(ReferenceSignal::Constant { value: w0 }, 1e-5, 2.0);
        let fit = fit_decay_rate(&traj.times(), &e_z(&traj), None).unwrap();
        let bound = 0.95 * P.sigma0 * w0 / 0.335;
        let h = 0.285 + 0.05 * (-(w0 / 0.01f64).powi(2)).exp();
        let exact = P.sigma0 * w0 / h;
        let ok = fit.rate >= bound && (fit.rate / exact - 1.0).abs() <= 0.02;
        passed &= ok;
        lines.push(format!("w0={w0}: rate {:.4} vs bound {bound:.4}, exact {exact:.4}", fit.rate));
    }
    report(3, passed, &lines.join("; "));
    assert!(passed);
}

#[test]
fn criterion_04_persistent_excitation() {
    let mut lines = Vec::new();
    let mut passed = true;
    let dt = 1e-5;
    for f in [0.5f64, 1.0, 5.0] {
        let window = 1.0 / (2.0 * f);
        let n = (3.0 * window / dt).round() as usize;
        let w: Vec<f64> = (0..=n).map(|k| (std::f64::consts::TAU * f * k as f64 * dt).sin()).collect();
        let beta = pe_window_integral(&w, dt, window).unwrap();
        let beta_err = (beta - 1.0 / (std::f64::consts::PI * f)).abs();

        // A unit-amplitude sinusoid drives e_z through the 1e-14 fit floor in the
        // first half period, so the decay is fitted at a scaled amplitude.
        let amplitude = 2e-3 * f;
        let traj = natural(ReferenceSignal::Sinusoid { amplitude, frequency_hz: f, phase: 0.0 }, dt, 30.0 * window);
        let stride = (window / dt).round() as usize;
        let (t, e): (Vec<f64>, Vec<f64>) = traj.samples.iter().step_by(stride).map(|s| (s.t, s.e_z.unwrap())).unzip();
        let fit = fit_decay_rate(&t, &e, Some((0.0, *t.last().unwrap()))).unwrap();
        let ok = beta_err <= 1e-6 && fit.r_squared >= 0.99 && fit.rate > 0.0;
        passed &= ok;
        lines.push(format!(
            "f={f}: |beta-1/(pi f)| {beta_err:.1e}, envelope r^2 {:.6} rate {:.3}",
            fit.r_squared, fit.rate
        ));
    }
    report(4, passed, &lines.join("; "));
    assert!(passed);
}

#[test]
fn criterion_05_integrable_velocity_counterexample() {
    let signal = ReferenceSignal::DecayingExp { amplitude: 0.1, rate: 5.0 };
    let traj = natural(signal, 1e-5, 4.0);
    let simulated = traj.last().unwrap().e_z.unwrap();

    // With w = 0.1·e^(−5t), dt = −dw/(5w), so ∫₀^∞ |w|/h dt = (1/5)·∫₀^0.1 dw/h(w).
    let integral = gauss_legendre(|w| 1.0 / stribeck_h(w, &P), 0.0, 0.1, 400) / 5.0;
    let limit = E_Z0 * (-P.sigma0 * integral).exp();
    let mismatch = (simulated - limit).abs();
    let ratio = limit / E_Z0;
    let matched = mismatch <= 1e-6;
    let persists = ratio > 0.1;
    report(
        5,
        matched && persists,
        &format!(
            "e_z(inf) {simulated:.6e} vs quadrature {limit:.6e}, |diff| {mismatch:.1e} (tol 1e-6, {}); e_z(inf)/e_z(0) = {ratio:.3e} (needs > 0.1, {})",
            if matched { "ok" } else { "failed" },
            if persists { "ok" } else { "failed" }
        ),
    );
    assert!(matched, "quadrature mismatch {mismatch}");
    assert!(persists, "residual fraction {ratio} is not above 0.1 with the specified signal and parameters");
}

#[test]
fn criterion_06_frozen_plant_contrast() {
    let frozen = ReferenceSignal::Constant { value: 0.0 };
    let sched = GainSchedule::ProposedExponential { c: 1.0, alpha: 10.0, beta: 1.0 };
    // The fast error mode sits near 6.6e7 s^-1 for these gains.
    let cfg = OpenLoopConfig::new(frozen, sched, 2e-8, 0.03).with_initial(E_Z0, 0.0, Some(0.01));
    let traj = run_open_loop_observer(&cfg).unwrap();
    let last = traj.last().unwrap();
    let rz = (last.e_z.unwrap() / E_Z0).abs();
    let rw = (last.e_w.unwrap() / -0.01).abs();
    let nat = natural(frozen, 1e-5, 1.0);
    let drift = e_z(&nat).iter().fold(0.0f64, |m, e| m.max((e - E_Z0).abs()));
    let passed = rz < 1e-3 && rw < 1e-3 && drift <= 1e-12;
    report(
        6,
        passed,
        &format!("proposed |e_z| ratio {rz:.2e}, |e_w| ratio {rw:.2e} (< 1e-3); natural drift {drift:.1e} (<= 1e-12)"),
    );
    assert!(passed);
}

#[test]
fn criterion_07_lyapunov_regimes() {
    let signal = ReferenceSignal::Sinusoid { amplitude: 0.1, frequency_hz: 1.0, phase: 0.0 };
    let regimes = [
        ("time_varying", GainSchedule::ProposedTimeVarying { a: 1.0, c: 1e-4, alpha: 0.022 }, 2.0),
        ("bounded", GainSchedule::ProposedBounded { a: 1.0, c: 1e-4, alpha: 0.022, m: 0.1 }, 2.0),
        ("exponential", GainSchedule::ProposedExponential { c: 1e-4, alpha: 10.0, beta: 1.0 }, 0.2),
    ];
    let mut passed = true;
    let mut lines = Vec::new();
    for (label, sched, duration) in regimes {
        let cfg = OpenLoopConfig::new(signal, sched, 1e-5, duration).with_initial(0.0, 1e-4, Some(0.01));
        let traj = run_open_loop_observer(&cfg).unwrap();
        let spec = sched.lyapunov_spec(&P, &JP).unwrap();
        let trace = lyapunov_trace(&traj, &spec, &sched, &P, &JP).unwrap();
        // V recomputed here from the error channels, independent of the trace.
        let v: Vec<f64> = traj
            .samples
            .iter()
            .map(|s| {
                let (ez, ew) = (s.e_z.unwrap(), s.e_w.unwrap());
                spec.a * ez * ez + spec.b * ez * ew + spec.c * ew * ew
            })
            .collect();
        let max_inc = v.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max);
        let mut ok = max_inc <= 1e-9 && (trace.max_increase() - max_inc).abs() <= 1e-20;
        let e_w = traj.channel(|s| s.e_w);
        if label == "exponential" {
            let t = traj.times();
            let fz = fit_decay_rate(&t, &e_z(&traj), None).unwrap();
            let fw = fit_decay_rate(&t, &e_w, None).unwrap();
            ok &= fz.r_squared >= 0.99 && fw.r_squared >= 0.99;
            lines.push(format!("{label}: max dV {max_inc:.1e}, r^2 e_z {:.5} e_w {:.5}", fz.r_squared, fw.r_squared));
        } else {
            let ratio = (e_w[e_w.len() - 1] / e_w[0]).abs();
            ok &= ratio <= 1e-6;
            lines.push(format!("{label}: max dV {max_inc:.1e}, |e_w(T)/e_w(0)| {ratio:.1e}"));
        }
        passed &= ok;
    }
    report(7, passed, &lines.join("; "));
    assert!(passed);
}

#[test]
fn criterion_08_perfect_compensation() {
    let mut worst = 0.0f64;
    for base in [ScenarioConfig::velocity_baseline(), ScenarioConfig::position_baseline()] {
        let frictionless = run_closed_loop(&ScenarioConfig { friction_enabled: false, ..base }).unwrap();
        let oracle = run_closed_loop(&ScenarioConfig { compensation: Compensation::Oracle, ..base }).unwrap();
        for (a, b) in frictionless.samples.iter().zip(&oracle.samples) {
            worst = worst.max((a.theta - b.theta).abs()).max((a.w - b.w).abs());
        }
    }
    let passed = worst <= 1e-9;
    report(8, passed, &format!("max |theta|,|w| deviation from frictionless loop {worst:.2e} (tol 1e-9)"));
    assert!(passed);
}

fn compensated(base: ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        observer: Some(ObserverConfig::new(GainSchedule::ProposedConstant { k1: -10.24, k2: 22.0 })),
        compensation: Compensation::Observer,
        ..base
    }
}

#[test]
fn criterion_09_servo_scenarios() {
    let start = Instant::now();
    let vel = ScenarioConfig::velocity_baseline();
    let vel_unc = tracking_metrics(&run_closed_loop(&vel).unwrap()).unwrap();
    let vel_comp = tracking_metrics(&run_closed_loop(&compensated(vel)).unwrap()).unwrap();
    let vel_time = start.elapsed();
    let vel_ratio = vel_comp.rmse / vel_unc.rmse;

    let start = Instant::now();
    let pos = ScenarioConfig::position_baseline();
    let pos_unc = tracking_metrics(&run_closed_loop(&pos).unwrap()).unwrap();
    let pos_comp = tracking_metrics(&run_closed_loop(&compensated(pos)).unwrap()).unwrap();
    let pos_time = start.elapsed();
    let pos_ratio = pos_comp.steady_state_error / pos_unc.steady_state_error;

    // With friction removed, a PI on position leaves J·s^3 + Kp·s + Ki, which
    // has no s^2 term and therefore roots in the right half plane.
    let companion = Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.55 / JP.j, -15.0 / JP.j, 0.0);
    let max_re = companion.complex_eigenvalues().iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);

    let vel_ok = vel_ratio <= 0.2 && vel_time < Duration::from_secs(120);
    let pos_ok = pos_ratio <= 0.2 && pos_time < Duration::from_secs(120);
    report(
        9,
        vel_ok && pos_ok,
        &format!(
            "velocity RMS ratio {vel_ratio:.3} (<= 0.2, {vel_time:?}); position steady-state ratio {pos_ratio:.3} (<= 0.2, {pos_time:?}); \
             compensated position loop max Re(pole) {max_re:.4} s^-1"
        ),
    );
    assert!(vel_ok, "velocity scenario ratio {vel_ratio}");
    assert!(pos_ok, "position scenario ratio {pos_ratio}");
}

#[test]
fn criterion_10_integrator_order() {
    let cfg = ScenarioConfig { duration: 0.01, ..compensated(ScenarioConfig::velocity_baseline()) };
    let traj = run_closed_loop(&cfg).unwrap();
    let dynamics = ClosedLoopDynamics::new(&cfg);
    let segment = 4e-3;
    let counts = [8usize, 16, 32, 64];
    let mut orders = Vec::new();
    // Segments start after the velocity has left zero, where |w| is smooth.
    for idx in [20usize, 100, 500] {
        let s = &traj.samples[idx];
        let x: LoopState = [s.theta, s.w, s.z, s.z_hat.unwrap(), s.w_hat.unwrap()];
        let held = HeldInputs { v: s.v.unwrap(), feedforward: 0.0, reference: s.ref_filtered.unwrap() };
        let reference = dynamics.advance(s.t, &x, &held, segment, 2048).unwrap();
        let errors: Vec<f64> = counts
            .iter()
            .map(|&n| {
                let y = dynamics.advance(s.t, &x, &held, segment, n).unwrap();
                (0..5).map(|k| ((y[k] - reference[k]) / reference[k].abs().max(1e-3)).abs()).fold(0.0, f64::max)
            })
            .collect();
        let xs: Vec<f64> = counts.iter().map(|&n| (segment / n as f64).ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        orders.push(slope);
    }
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let passed = min >= 3.5;
    report(10, passed, &format!("measured orders {orders:.3?} (min {min:.3} >= 3.5)"));
    assert!(passed);
}

#[test]
fn criterion_11_spr_margin() {
    let grid = default_spr_grid();
    let pi = PidConfig::pi(1.6, 0.16);
    let margin = spr_margin(&pi, &JP, &P, &grid).unwrap();
    // Re T(jω) = (σ0·(Kp − Jω²) − σ1·Ki) / |Kp − Jω² − j·Ki/ω|².
    let analytic = grid
        .iter()
        .map(|f| {
            let w = std::f64::consts::TAU * f;
            let re_den = pi.kp - JP.j * w * w;
            let im_den = -pi.ki / w;
            (P.sigma0 * re_den - P.sigma1 * pi.ki) / (re_den * re_den + im_den * im_den)
        })
        .fold(f64::INFINITY, f64::min);
    let filtered = PidConfig { tau: 0.01, ..pi };
    let filtered_margin = spr_margin(&filtered, &JP, &P, &grid).unwrap();
    let agrees = (margin.min_real - analytic).abs() <= 1e-9 * analytic.abs();
    let passed = margin.min_real < 0.0 && agrees;
    report(
        11,
        passed,
        &format!(
            "pure-integral PI min Re T {:.6e} at {:.3e} Hz (analytic {analytic:.6e}); filtered integral (tau 0.01) min Re T {:.6e} at {:.3e} Hz (informational)",
            margin.min_real, margin.argmin_hz, filtered_margin.min_real, filtered_margin.argmin_hz
        ),
    );
    assert!(passed);
}
