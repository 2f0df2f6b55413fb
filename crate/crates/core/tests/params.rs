use std::f64::consts::PI;

use odeim_bd::params::{energy_of_theta, omega_pow, theta_of_energy};
use odeim_bd::{omega, potential, scaling_map, ModelParams, SpectralPoint, C64};
use proptest::prelude::*;

#[test]
fn potential_examples() {
    let p = ModelParams::new(1.0, 0.1, 1.0).unwrap();
    assert!(potential(C64::new(1.0, 0.0), &p).unwrap().norm() < 1e-15);
    let q = ModelParams::new(1.3, 0.1, 0.7).unwrap();
    assert!(potential(C64::new(0.7, 0.0), &q).unwrap().norm() < 1e-14);
    assert!((potential(C64::new(0.0, 0.0), &q).unwrap() + 0.7f64.powf(3.9)).norm() < 1e-14);
    let r = ModelParams::new(1.0, 0.1, 0.0).unwrap();
    assert!((potential(C64::new(2.0, 0.0), &r).unwrap() - 8.0).norm() < 1e-13);
}

#[test]
fn invalid_parameters() {
    assert!(ModelParams::new(1.0, 0.5, 1.0).is_err());
    assert!(ModelParams::new(1.0, -1.0, 1.0).is_err());
    assert!(ModelParams::new(1.0, 0.1, -0.1).is_err());
    assert!(ModelParams::new(0.0, 0.1, 1.0).is_err());
}

#[test]
fn omega_at_alpha_one() {
    assert!((omega(1.0) - C64::from_polar(1.0, PI / 3.0)).norm() < 1e-15);
}

#[test]
fn scaling_map_at_origin() {
    let p = ModelParams::new(1.2, 0.1, 0.8).unwrap();
    let (e, et) = scaling_map(C64::new(0.0, 0.0), &p).unwrap();
    let s3 = 0.8f64.powf(3.6);
    assert!((e - s3).norm() < 1e-15 && (et - s3).norm() < 1e-15);
    assert!(scaling_map(C64::new(0.0, 0.0), &ModelParams::new(1.0, 0.1, 0.0).unwrap()).is_err());
}

proptest! {
    #[test]
    fn omega_is_a_root_of_unity(a in 0.05f64..5.0) {
        let w = omega(a);
        prop_assert!((w.norm() - 1.0).abs() < 1e-14);
        prop_assert!((w.powf(3.0 * a + 3.0) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn energies_multiply_to_constant(a in 0.6f64..3.0, s in 0.1f64..2.0, re in -2.0f64..2.0, im in -1.0f64..1.0) {
        let p = ModelParams::new(a, 0.1, s).unwrap();
        let sp = SpectralPoint::new(C64::new(re, im), &p).unwrap();
        let target = s.powf(6.0 * a);
        prop_assert!((sp.e * sp.e_tilde - target).norm() < 1e-12 * target.max(1.0));
    }

    #[test]
    fn theta_shift_rotates_energies(a in 0.6f64..3.0, s in 0.1f64..2.0, re in -1.5f64..1.5, k in prop::sample::select(vec![-1.5, -1.0, -0.5, 0.5, 1.0, 1.5])) {
        let p = ModelParams::new(a, 0.1, s).unwrap();
        let theta = C64::new(re, 0.2);
        let (e, et) = scaling_map(theta, &p).unwrap();
        let (e2, et2) = scaling_map(theta - C64::new(0.0, 2.0 * PI * k / 3.0), &p).unwrap();
        prop_assert!((e2 - e * omega_pow(a, -3.0 * a * k)).norm() < 1e-12 * e.norm().max(1.0));
        prop_assert!((et2 - et * omega_pow(a, 3.0 * a * k)).norm() < 1e-12 * et.norm().max(1.0));
    }

    #[test]
    fn energy_theta_round_trip(a in 0.6f64..3.0, re in -3.0f64..3.0, im in -0.5f64..0.5) {
        let theta = C64::new(re, im);
        prop_assert!((theta_of_energy(energy_of_theta(theta, a), a) - theta).norm() < 1e-12);
    }
}
