use odeim_bd::numerics::linalg::{zero3, M3, ONE, ZERO};
use odeim_bd::numerics::rk::integrate_ray;
use odeim_bd::numerics::roots::{find_zero, RootOptions};
use odeim_bd::numerics::taylor::{taylor_integrate, AiryLike};
use odeim_bd::C64;
use proptest::prelude::*;

fn airy_system(x: f64) -> M3 {
    // dv/dx = -A v with v = (y, y', y'') and y''' = x y
    let mut a = zero3();
    a[0][1] = -ONE;
    a[1][2] = -ONE;
    a[2][0] = C64::new(-x, 0.0);
    a
}

fn max_rel(a: &[C64; 3], b: &[C64; 3]) -> f64 {
    let scale = b.iter().map(|c| c.norm()).fold(0.0, f64::max);
    (0..3).map(|i| (a[i] - b[i]).norm()).fold(0.0, f64::max) / scale
}

#[test]
fn scalar_triplicate_grows_to_e() {
    let a = |_t: f64| {
        let mut m = zero3();
        for i in 0..3 {
            m[i][i] = -ONE;
        }
        m
    };
    let v = integrate_ray(a, 0.0, 1.0, [ONE; 3], 1e-12).unwrap().end();
    for c in v {
        assert!((c.re - std::f64::consts::E).abs() < 1e-11 && c.im.abs() < 1e-15);
    }
}

#[test]
fn airy_like_against_taylor() {
    let y0 = [ONE, C64::new(-0.3, 0.2), C64::new(0.1, 0.0)];
    let oracle = taylor_integrate(&AiryLike, 0.0, 2.0, y0, 400, 30);
    let adaptive = integrate_ray(airy_system, 0.0, 2.0, y0, 1e-13).unwrap();
    assert!(max_rel(&adaptive.end(), &oracle.last().unwrap().1) < 1e-10);
}

#[test]
fn tighter_tolerance_moves_closer_to_oracle() {
    let y0 = [ONE, ZERO, ZERO];
    let oracle = taylor_integrate(&AiryLike, 0.0, 2.0, y0, 400, 30).last().unwrap().1;
    let loose = integrate_ray(airy_system, 0.0, 2.0, y0, 1e-6).unwrap().end();
    let tight = integrate_ray(airy_system, 0.0, 2.0, y0, 5e-7).unwrap().end();
    let (dl, dt) = (max_rel(&loose, &oracle), max_rel(&tight, &oracle));
    assert!(dt <= dl, "loose {dl:e}, tight {dt:e}");
}

#[test]
fn secant_examples() {
    let r = find_zero(|t| Ok(t * t - 1.0), C64::new(0.9, 0.0), &RootOptions::new(1e-13)).unwrap();
    assert!((r.z - 1.0).norm() < 1e-12);
    let r = find_zero(|t| Ok(t.sin()), C64::new(3.0, 0.0), &RootOptions::new(1e-14)).unwrap();
    assert!((r.z.re - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn secant_reports_failure_without_root() {
    let r = find_zero(|t| Ok(t * t + 1.0 + 0.0 * t.im), C64::new(3.0, 0.0), &RootOptions { window: Some((C64::new(3.0, 0.0), 1.0, 0.01)), ..RootOptions::new(1e-12) });
    assert!(r.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transport_is_reversible(w in 0.1f64..2.0, c in -1.0f64..1.0, span in 0.5f64..4.0) {
        let i = C64::new(0.0, 1.0);
        let a = move |t: f64| {
            let mut m = zero3();
            m[0][0] = i * w * t;
            m[0][1] = C64::new(c, 0.3);
            m[1][0] = i;
            m[1][2] = C64::new(0.5, -c);
            m[2][1] = i * 0.5;
            m[2][2] = -i * t;
            m
        };
        let tol = 1e-11;
        let v0 = [ONE, C64::new(0.3, 0.1), C64::new(-0.2, 0.0)];
        let fwd = integrate_ray(a, 0.0, span, v0, tol).unwrap();
        let back = integrate_ray(a, span, 0.0, fwd.end(), tol).unwrap().end();
        prop_assert!(max_rel(&back, &v0) < 10.0 * tol * (1.0 + fwd.end().iter().map(|z| z.norm()).fold(0.0, f64::max)));
    }

    #[test]
    fn secant_decreases_residual(r0 in -3.0f64..3.0, offset in 0.05f64..0.5) {
        let f = |t: C64| Ok((t - r0) * (t + 7.0));
        let seed = C64::new(r0 + offset, 0.0);
        match find_zero(f, seed, &RootOptions::new(1e-13)) {
            Ok(root) => prop_assert!(root.f_abs <= 1e-6 * root.seed_abs),
            Err(_) => {}
        }
    }
}
