use std::f64::consts::PI;
use std::sync::OnceLock;

use odeim_bd::field::{eta_eval, fd_residual_2d, local_expansion_coeffs, verify_residual};
use odeim_bd::{solve_field, FieldConfig, FieldSolution, ModelParams};

fn reference() -> &'static FieldSolution {
    static SOL: OnceLock<FieldSolution> = OnceLock::new();
    SOL.get_or_init(|| solve_field(&ModelParams::new(1.0, 0.1, 1.0).unwrap(), &FieldConfig::default()).unwrap())
}

fn exact() -> FieldSolution {
    solve_field(&ModelParams::new(0.3, 0.3, 0.0).unwrap(), &FieldConfig::default()).unwrap()
}

#[test]
fn exact_solution_is_reproduced() {
    let sol = exact();
    assert!(sol.iterations <= 2);
    assert!(sol.residual < 1e-10);
    assert!(sol.eta0.abs() < 1e-9);
    for &rho in [1e-3, 0.05, 1.0, 7.0].iter() {
        let v = eta_eval(&sol, rho, 0.4).unwrap();
        assert!((v.eta + 0.6 * rho.ln()).abs() < 1e-10);
        assert!((v.d_rho + 0.6 / rho).abs() < 1e-8 / rho);
    }
    let lc = local_expansion_coeffs(&sol).unwrap();
    assert!(lc.eta0.abs() < 1e-9);
    assert!(lc.gamma.iter().all(|g| g.abs() < 1e-9));
}

#[test]
fn eight_mode_solve_meets_tolerance() {
    let cfg = FieldConfig { n_modes: 8, ..FieldConfig::default() };
    let sol = solve_field(&ModelParams::new(1.0, 0.1, 1.0).unwrap(), &cfg).unwrap();
    assert!(sol.residual < 1e-8);
    assert!(sol.eta0.is_finite());
}

#[test]
fn independent_residuals() {
    let sol = reference();
    let cfg = FieldConfig::default();
    assert!(verify_residual(sol, 8).unwrap() < 10.0 * cfg.residual_tol);
    let (coarse, fine) = (fd_residual_2d(sol, 64), fd_residual_2d(sol, 128));
    assert!(fine < 1e-3);
    assert!(fine < coarse / 3.0, "second-order convergence in phi: {coarse:e} -> {fine:e}");
}

#[test]
fn periodic_and_even_in_phi() {
    let sol = reference();
    let period = 2.0 * PI / 3.0;
    for &rho in &[0.01, 0.5, 1.0, 3.0] {
        for &phi in &[0.1, 0.7, 1.3] {
            let a = eta_eval(sol, rho, phi).unwrap();
            let b = eta_eval(sol, rho, phi + period).unwrap();
            let c = eta_eval(sol, rho, -phi).unwrap();
            assert!((a.eta - b.eta).abs() < 1e-12);
            assert!((a.eta - c.eta).abs() < 1e-12);
        }
        assert!(eta_eval(sol, rho, 0.0).unwrap().d_phi.abs() < 1e-12);
    }
}

#[test]
fn interpolant_derivatives_match_differences() {
    let sol = reference();
    let (rho, phi, h) = (0.8, 0.3, 1e-4);
    let v = eta_eval(sol, rho, phi).unwrap();
    let dr = (eta_eval(sol, rho + h, phi).unwrap().eta - eta_eval(sol, rho - h, phi).unwrap().eta) / (2.0 * h);
    let dp = (eta_eval(sol, rho, phi + h).unwrap().eta - eta_eval(sol, rho, phi - h).unwrap().eta) / (2.0 * h);
    assert!((v.d_rho - dr).abs() < 1e-6);
    assert!((v.d_phi - dp).abs() < 1e-6);
}

#[test]
fn small_rho_coefficients() {
    let lc = local_expansion_coeffs(reference()).unwrap();
    assert!((lc.c1_fit - lc.c1_predicted).abs() < 1e-3 * lc.c1_predicted.abs());
    // The field equation fixes c2 = +s^{6a} e^{2 eta0}/(1-2g)^2.
    assert!((lc.c2_fit + lc.c2_predicted).abs() < 1e-3 * lc.c2_predicted.abs());
}

#[test]
fn approaches_outer_asymptote() {
    let sol = reference();
    for &rho in sol.rho.iter().filter(|&&r| r >= sol.rho_max() / 4.0) {
        for phi in [0.0f64, 0.4, 1.0] {
            let pp = rho.powi(6) - 2.0 * rho.powi(3) * (3.0 * phi).cos() + 1.0;
            let dev = eta_eval(sol, rho, phi).unwrap().eta + pp.ln() / 3.0;
            assert!(dev.abs() < 1e-4, "rho {rho}: {dev:e}");
        }
    }
}

#[test]
fn grid_refinement_leaves_eta0() {
    let p = ModelParams::new(1.0, 0.1, 1.0).unwrap();
    let base = FieldConfig::default();
    let fine = FieldConfig { n_rho: 4000, ..base.clone() };
    let a = solve_field(&p, &base).unwrap();
    let b = solve_field(&p, &fine).unwrap();
    assert!((a.eta0 - b.eta0).abs() < 1e-5);
}

#[test]
fn json_round_trip_is_exact() {
    let sol = reference();
    let back = FieldSolution::from_json(&sol.to_json().unwrap()).unwrap();
    assert_eq!(back.params, sol.params);
    assert_eq!(back.rho, sol.rho);
    assert_eq!(back.modes, sol.modes);
    assert_eq!((back.eta0, back.residual), (sol.eta0, sol.residual));
    assert_eq!(back.gamma, sol.gamma);
    assert!(sol.to_json().unwrap().contains("odeim-bd/field/v1"));
}

#[test]
fn rejects_bad_config() {
    let p = ModelParams::new(1.0, 0.1, 1.0).unwrap();
    let bad = FieldConfig { rho_min: 2.0, rho_max: 1.0, ..FieldConfig::default() };
    assert!(solve_field(&p, &bad).is_err());
    assert!(serde_json::from_str::<FieldConfig>(r#"{"n_rho": 100, "typo": 1}"#).is_err());
}
