use std::f64::consts::PI;

use hopf_soliton::boundary::{boundary_start, StartMethod};
use hopf_soliton::integrator::{
    integrate, integrate_backward, integrate_forward, Direction, IntegratorConfig, IntegratorError,
    Termination,
};
use hopf_soliton::phase::{equilibrium, zeta, PhasePoint, SolitonParams};

fn textbook(n: u32, x: [f64; 2]) -> [f64; 2] {
    let m = 2.0 * n as f64 - 1.0;
    let d = 1.0 - x[0] * x[0] - x[1] * x[1];
    [x[1], m * d / x[0] - x[1] * d.max(0.0).sqrt() - x[0]]
}

/// Classical RK4 on the textbook field with a fixed step.
fn rk4_oracle(n: u32, x0: [f64; 2], h: f64, steps: usize) -> Vec<[f64; 2]> {
    let mut out = vec![x0];
    let mut x = x0;
    for _ in 0..steps {
        let k1 = textbook(n, x);
        let k2 = textbook(n, [x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
        let k3 = textbook(n, [x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
        let k4 = textbook(n, [x[0] + h * k3[0], x[1] + h * k3[1]]);
        for i in 0..2 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(x);
    }
    out
}

#[test]
fn adaptive_run_matches_fixed_step_oracle() {
    for n in 1..=3 {
        let prm = SolitonParams::new(n).unwrap();
        let cfg = IntegratorConfig {
            horizon: 20.0,
            eq_radius: 0.0,
            ..Default::default()
        };
        let t = integrate_forward(&prm, PhasePoint::new(0.3, 0.0), &cfg).unwrap();
        assert_eq!(t.termination, Termination::HorizonReached);
        assert_eq!(t.last().s, 20.0);
        let h = 1e-4;
        let oracle = rk4_oracle(n, [0.3, 0.0], h, 200_000);
        let mut sup: f64 = 0.0;
        for (k, x) in oracle.iter().enumerate().step_by(100) {
            let p = t.interpolate(k as f64 * h).unwrap();
            sup = sup.max((p.u - x[0]).abs()).max((p.v - x[1]).abs());
        }
        assert!(sup < 1e-6, "n = {n}: sup = {sup:e}");
    }
}

#[test]
fn forward_run_spirals_into_equilibrium() {
    let prm = SolitonParams::new(1).unwrap();
    let t = integrate_forward(
        &prm,
        PhasePoint::new(0.3, 0.0),
        &IntegratorConfig::default(),
    )
    .unwrap();
    assert_eq!(t.termination, Termination::EquilibriumReached);
    assert!((t.last().point.u - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    assert!(t.last().s < 500.0);
    assert!(t.min_zeta_increment() >= -1e-12);
    for w in t.theta_unwrapped.windows(2) {
        assert!((w[1] - w[0]).abs() < PI / 4.0 + 1e-12);
    }
    // Clockwise winding around the sink.
    assert!(t.theta_unwrapped.last().unwrap() < &(t.theta_unwrapped[0] - 2.0 * PI));
}

#[test]
fn backward_run_ends_on_the_circle() {
    for n in 1..=3 {
        let prm = SolitonParams::new(n).unwrap();
        let t = integrate_backward(
            &prm,
            PhasePoint::new(0.3, 0.0),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(t.termination, Termination::BoundaryHit);
        let b = t.boundary_point.unwrap();
        assert_eq!(b, t.last().point);
        assert!((b.u * b.u + b.v * b.v - 1.0).abs() < 1e-12);
        assert!(zeta(&prm, &b) < 1e-6);
        assert!(t.last().s < 0.0 && t.min_zeta_increment() >= -1e-12);
        // s decreases monotonically along a backward run.
        assert!(t.samples.windows(2).all(|w| w[1].s < w[0].s));
    }
}

#[test]
fn circle_start_round_trip() {
    let prm = SolitonParams::new(1).unwrap();
    let q = PhasePoint::new(0.5f64.cos(), -0.5f64.sin());
    let cfg = IntegratorConfig::default();
    let st = boundary_start(&prm, q, StartMethod::Perturbation, 0.1, &cfg).unwrap();
    let fcfg = IntegratorConfig {
        horizon: 2.9,
        eq_radius: 0.0,
        ..cfg
    };
    let fwd = integrate(&prm, st.state, 0.1, Direction::Forward, &fcfg).unwrap();
    assert_eq!(fwd.last().s, 3.0);
    let back = integrate(&prm, fwd.last().point, 3.0, Direction::Backward, &cfg).unwrap();
    assert_eq!(back.termination, Termination::BoundaryHit);
    let b = back.boundary_point.unwrap();
    assert!(b.dist(&q) < 1e-4, "landed at ({}, {})", b.u, b.v);
    assert!(back.last().s.abs() < 1e-4);
}

#[test]
fn equilibrium_start_is_a_single_sample() {
    let prm = SolitonParams::new(2).unwrap();
    let t = integrate_forward(&prm, equilibrium(&prm).point, &IntegratorConfig::default()).unwrap();
    assert_eq!(t.samples.len(), 1);
    assert_eq!(t.termination, Termination::EquilibriumReached);
}

#[test]
fn rejects_bad_input() {
    let prm = SolitonParams::new(1).unwrap();
    let cfg = IntegratorConfig::default();
    let r = integrate_forward(&prm, PhasePoint::new(0.9, 0.9), &cfg);
    assert!(matches!(r, Err(IntegratorError::Phase(_))));
    let r = integrate_forward(&prm, PhasePoint::new(-0.1, 0.0), &cfg);
    assert!(matches!(r, Err(IntegratorError::Phase(_))));
    let bad = IntegratorConfig {
        abs_tol: -1.0,
        ..cfg
    };
    assert!(matches!(
        integrate_forward(&prm, PhasePoint::new(0.3, 0.0), &bad),
        Err(IntegratorError::Config(_))
    ));
    let bad = IntegratorConfig { h_min: 1.0, ..cfg };
    assert!(matches!(
        integrate_forward(&prm, PhasePoint::new(0.3, 0.0), &bad),
        Err(IntegratorError::Config(_))
    ));
}
