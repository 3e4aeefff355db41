//! Trajectory-level invariants of the plant and observers.

use proptest::prelude::*;

use lugre_core::analysis::lyapunov_trace;
use lugre_core::model::{lugre_derivatives, static_friction, stribeck_h, FrictionParams, PlantParams, PlantState};
use lugre_core::observers::GainSchedule;
use lugre_core::sim::{integrate_step_rk4, run_open_loop_observer, OpenLoopConfig, ReferenceSignal};

const P: FrictionParams = FrictionParams::table1();
const JP: PlantParams = PlantParams::table1();

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bristle_deflection_stays_bounded(torques in proptest::collection::vec(-2.0f64..2.0, 1..20), z0 in -1.0f64..1.0) {
        let bound = P.c2() / P.sigma0;
        let mut x = [0.0, 0.0, z0 * bound];
        let dt = 1e-5;
        for (i, &u) in torques.iter().enumerate() {
            for k in 0..2000 {
                let t = (i * 2000 + k) as f64 * dt;
                x = integrate_step_rk4(|_, s| {
                    let d = lugre_derivatives(&PlantState { theta: s[0], w: s[1], z: s[2] }, u, &P, &JP);
                    [d.dtheta, d.dw, d.dz]
                }, t, &x, dt).unwrap();
                prop_assert!(x[2].abs() <= bound * (1.0 + 1e-9), "z = {} exceeds {}", x[2], bound);
            }
        }
    }
}

#[test]
fn constant_velocity_friction_converges_to_static_map() {
    // From z(0) = 0 the deflection error decays as exp(−t/τ), τ = h/(σ0·|w|).
    // Ten time constants leave about e^−10 ≈ 4.5e−5 of it; fourteen leave < 1e−6.
    for w in [-0.3, 0.02, 0.05, 0.5] {
        let tau = stribeck_h(w, &P) / (P.sigma0 * f64::abs(w));
        let dt = 1e-5;
        let traj = run_open_loop_observer(&OpenLoopConfig::new(
            ReferenceSignal::Constant { value: w },
            GainSchedule::Natural,
            dt,
            15.0 * tau,
        ))
        .unwrap();
        let target = static_friction(w, &P);
        for (after, tol) in [(10.0, 6e-5), (14.0, 1e-6)] {
            for s in traj.samples.iter().filter(|s| s.t >= after * tau) {
                let rel = (s.friction - target).abs() / target.abs();
                assert!(rel <= tol, "w = {w}: F = {} vs {target} at t = {}", s.friction, s.t);
            }
        }
    }
}

#[test]
fn analytic_lyapunov_rate_matches_finite_differences() {
    let sched = GainSchedule::ProposedExponential { c: 1e-4, alpha: 10.0, beta: 1.0 };
    let signal = ReferenceSignal::Sinusoid { amplitude: 0.1, frequency_hz: 1.0, phase: 0.3 };
    let dt = 1e-5;
    let cfg = OpenLoopConfig::new(signal, sched, dt, 0.01).with_initial(0.0, 1e-4, Some(0.11));
    let traj = run_open_loop_observer(&cfg).unwrap();
    let spec = sched.lyapunov_spec(&P, &JP).unwrap();
    let trace = lyapunov_trace(&traj, &spec, &sched, &P, &JP).unwrap();
    let scale = trace.rate.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    for i in 1..trace.value.len() - 1 {
        let centered = (trace.value[i + 1] - trace.value[i - 1]) / (2.0 * dt);
        assert!(
            (centered - trace.rate[i]).abs() <= 1e-3 * scale,
            "t = {}: {centered} vs {}",
            trace.t[i],
            trace.rate[i]
        );
    }
}

#[test]
fn natural_observer_holds_error_at_rest() {
    let cfg = OpenLoopConfig::new(ReferenceSignal::Constant { value: 0.0 }, GainSchedule::Natural, 1e-4, 1.0)
        .with_initial(1e-3, 0.0, None);
    let traj = run_open_loop_observer(&cfg).unwrap();
    assert!(traj.samples.iter().all(|s| s.e_z == Some(1e-3)));
}

#[test]
fn existing_observer_uses_tracking_error_only_in_closed_loop() {
    // Open loop has no tracking error, so the existing observer coincides with the natural one.
    let signal = ReferenceSignal::Sinusoid { amplitude: 0.05, frequency_hz: 2.0, phase: 0.0 };
    let a = run_open_loop_observer(
        &OpenLoopConfig::new(signal, GainSchedule::Natural, 1e-5, 0.2).with_initial(1e-3, 0.0, None),
    )
    .unwrap();
    let b = run_open_loop_observer(
        &OpenLoopConfig::new(signal, GainSchedule::Existing { k: 0.35 }, 1e-5, 0.2).with_initial(1e-3, 0.0, None),
    )
    .unwrap();
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert_eq!(x.e_z, y.e_z);
    }
}
