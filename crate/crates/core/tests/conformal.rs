use std::f64::consts::PI;

use odeim_bd::bethe::{qq_residual, scan_q, linear_grid};
use odeim_bd::conformal::{
    conformal_q_triple, oracle_agreement, rotated_y, solve_y, wronskian3, y_at, z_function, StokesSector,
};
use odeim_bd::params::omega_pow;
use odeim_bd::{ConformalOptions, ConformalParams, ConformalSource, C64};
use proptest::prelude::*;

const S3: f64 = 1.732_050_807_568_877_2;

fn p() -> ConformalParams {
    ConformalParams::new(1.0, 0.1).unwrap()
}

fn opts() -> ConformalOptions {
    ConformalOptions::default()
}

#[test]
fn decay_rate_at_large_x() {
    let sol = solve_y(C64::new(0.0, 0.0), &p(), Some(40.0), 0.5, 1e-13).unwrap();
    let (x, d) = (sol.x()[0], sol.traj.dir[0]);
    assert_eq!(x, 40.0);
    let ratio = d[1] / d[0];
    assert!((ratio.re / -x - 1.0).abs() < 1e-3 && ratio.im.abs() < 1e-8, "{ratio}");
    let mid = sol.x().iter().position(|&x| x <= 20.0).unwrap();
    let (x, d) = (sol.x()[mid], sol.traj.dir[mid]);
    assert!(((d[1] / d[0]).re / -x - 1.0).abs() < 5e-3);
}

#[test]
fn agrees_with_taylor_oracle() {
    let d = oracle_agreement(C64::new(0.0, 0.0), &p(), 0.3, 2.0, 8, 1e-13).unwrap();
    assert!(d < 1e-9, "{d:e}");
}

#[test]
fn smooth_in_energy() {
    let x = C64::new(0.8, 0.0);
    let e = C64::new(0.9, 0.2);
    let y0 = y_at(e, &p(), x, &opts()).unwrap()[0];
    let d = |h: f64| (y_at(e + h, &p(), x, &opts()).unwrap()[0] - y0) / h;
    let (d1, d2) = (d(1e-3), d(5e-4));
    assert!(d1.norm().is_finite());
    assert!((d1 - d2).norm() < 1e-3 * d1.norm());
}

#[test]
fn zero_rotation_is_identity() {
    let x = C64::new(1.1, 0.0);
    let e = C64::new(0.4, 0.0);
    let a = rotated_y(0.0, e, &p(), x, &opts()).unwrap();
    let b = y_at(e, &p(), x, &opts()).unwrap();
    for i in 0..3 {
        assert!((a[i] - b[i]).norm() < 1e-14 * b[i].norm().max(1.0));
    }
}

#[test]
fn rotated_solution_solves_rotated_equation() {
    // y_1 solves y''' = G(y'/x^2 - y/x^3) - (x^3 - E) y with the same E because
    // omega^{-3 alpha} x^{3 alpha} picks up exactly e^{-2 pi i}.
    let pr = p();
    let e = C64::new(0.7, 0.0);
    let x = C64::new(0.9, 0.0);
    let h = 1e-3;
    let y = |xx: C64| rotated_y(1.0, e, &pr, xx, &opts()).unwrap();
    let (ym, y0, yp) = (y(x - h), y(x), y(x + h));
    let yppp = (yp[2] - ym[2]) / (2.0 * h);
    let big_g = pr.big_g();
    let rhs = big_g * (y0[1] / (x * x) - y0[0] / (x * x * x)) - (x * x * x - e) * y0[0];
    assert!((yppp - rhs).norm() < 1e-5 * rhs.norm().max(1.0));
}

#[test]
fn wronskian_constant_and_shift_rule() {
    let target = C64::new(0.0, -3.0 * S3);
    let pr = p();
    for e in [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(-2.0, 0.3), C64::new(3.0, 0.0), C64::new(0.5, -1.0)] {
        let w = wronskian3([-1.0, 0.0, 1.0], e, &pr, C64::new(0.7, 0.0), &opts()).unwrap();
        assert!((w - target).norm() < 1e-8);
    }
    let e = C64::new(0.8, 0.1);
    let w012 = wronskian3([0.0, 1.0, 2.0], e, &pr, C64::new(0.7, 0.0), &opts());
    let rotated = e * omega_pow(1.0, -3.0);
    let wm = wronskian3([-1.0, 0.0, 1.0], rotated, &pr, C64::new(0.7, 0.0), &opts()).unwrap();
    if let Ok(w) = w012 {
        assert!((w - wm).norm() < 1e-8);
    }
    assert!((wm - target).norm() < 1e-8);
}

#[test]
fn z_function_matches_base_solution() {
    let pr = p();
    for e in [C64::new(0.0, 0.0), C64::new(1.5, 0.0)] {
        for x in [0.4, 1.0, 1.8] {
            let x = C64::new(x, 0.0);
            let z = z_function(-0.5, 0.5, e, &pr, x, &opts()).unwrap();
            let y = y_at(e, &pr, x, &opts()).unwrap()[0];
            assert!((z / y - C64::new(0.0, S3)).norm() < 1e-7);
        }
    }
}

#[test]
fn frobenius_exponents() {
    for (a, b) in p().exponents().iter().zip([-0.1, 1.0, 2.1]) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn projection_is_stable_under_matching_point() {
    let e = C64::new(1.2, 0.0);
    let base = conformal_q_triple(e, &p(), &opts()).unwrap();
    let a = ConformalOptions { x_min: Some(0.2), ..opts() };
    let b = ConformalOptions { x_min: Some(0.1), ..opts() };
    let qa = conformal_q_triple(e, &p(), &a).unwrap();
    let qb = conformal_q_triple(e, &p(), &b).unwrap();
    for (x, y) in qa.as_array().iter().zip(qb.as_array().iter()) {
        assert!((x - y).norm() < 1e-6 * x.norm().max(1e-3));
    }
    for (x, y) in qa.as_array().iter().zip(base.as_array().iter()) {
        assert!((x - y).norm() < 1e-6 * x.norm().max(1e-3));
    }
}

#[test]
fn qq_relation_on_real_grid() {
    let src = ConformalSource::new(p());
    let grid = linear_grid(-1.0, 2.0, 5);
    let scan = scan_q(&src, &grid, &[0.0, PI / 3.0, -PI / 3.0]).unwrap();
    for &t in &grid {
        assert!(qq_residual(&scan, t).unwrap().norm() < 1e-6);
    }
}

#[test]
fn stokes_sectors_tile_the_circle() {
    let s0 = StokesSector::new(0.0, 1.0);
    let s1 = StokesSector::new(1.0, 1.0);
    assert!(s0.contains(0.0) && !s0.contains(PI / 6.0 + 1e-9));
    assert!((s0.hi - s1.lo).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn wronskian_is_constant(a in 0.7f64..2.0, g in -0.6f64..0.4, er in -2.0f64..3.0, ei in -1.0f64..1.0) {
        prop_assume!(g.abs() > 0.02);
        let pr = ConformalParams::new(a, g).unwrap();
        let w = wronskian3([-1.0, 0.0, 1.0], C64::new(er, ei), &pr, C64::new(0.8, 0.0), &opts()).unwrap();
        prop_assert!((w - C64::new(0.0, -3.0 * S3)).norm() < 1e-8);
    }
}
