//! RK4 against exact solutions of linear systems.

use nalgebra::{Matrix2, Vector2};

use lugre_core::sim::integrate_step_rk4;

fn rk4_error(dt: f64) -> f64 {
    let a = Matrix2::new(0.0, 1.0, -4.0, -0.4);
    let x0 = Vector2::new(1.0, 0.0);
    let exact = (a * 1.0).exp() * x0;
    let mut x = [x0[0], x0[1]];
    let steps = (1.0 / dt).round() as usize;
    for k in 0..steps {
        x = integrate_step_rk4(|_, s| [s[1], -4.0 * s[0] - 0.4 * s[1]], k as f64 * dt, &x, dt).unwrap();
    }
    ((x[0] - exact[0]).powi(2) + (x[1] - exact[1]).powi(2)).sqrt()
}

#[test]
fn global_error_is_fourth_order_against_matrix_exponential() {
    let errors: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| rk4_error(dt)).collect();
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((14.0..18.0).contains(&ratio), "halving ratio {ratio}");
    }
}

#[test]
fn scalar_decay_one_step() {
    let x = integrate_step_rk4(|_, s| [-s[0]], 0.0, &[1.0], 0.1).unwrap();
    assert!((x[0] - 0.904_837_5).abs() < 1e-7);
    assert!((x[0] - (-0.1f64).exp()).abs() < 1e-7);
}

#[test]
fn divergence_is_reported_with_time_and_state() {
    let err = integrate_step_rk4(|_, s| [1e12 * s[0]], 0.5, &[1.0], 1.0).unwrap_err();
    match err {
        lugre_core::SimError::Diverged { t, state } => {
            assert_eq!(t, 1.5);
            assert_eq!(state.len(), 1);
        }
        other => panic!("unexpected error {other:?}"),
    }
}
