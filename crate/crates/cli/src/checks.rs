use std::f64::consts::PI;

use anyhow::Result;
use odeim_bd::bethe::{
    bae_residual, conformal_limit_study, find_q_zeros, linear_grid, qq_combination, scan_q, QSource, ZeroWindow,
};
use odeim_bd::conformal::{wronskian3, y_at, z_function};
use odeim_bd::massive::{massive_psi_k, massive_u, massive_wronskian};
use odeim_bd::{
    ConformalOptions, ConformalParams, ConformalSource, FieldConfig, FieldSolution, MassiveOptions, MassiveSource, QTriple,
    SourceKind, Which, C64,
};

use crate::config::usage;

pub const SUITES: [&str; 7] = ["wronskian", "zfun", "ufun", "qq", "bae", "conf-limit", "all"];

#[derive(Clone, Debug)]
pub struct CheckRow {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub tol: f64,
}

impl CheckRow {
    pub fn pass(&self) -> bool {
        self.measured.is_finite() && self.measured < self.tol
    }
}

pub struct CheckContext<'a> {
    pub conformal: ConformalParams,
    pub field: Option<&'a FieldSolution>,
    pub field_config: FieldConfig,
    pub s_sequence: Vec<f64>,
}

const S3: f64 = 1.732_050_807_568_877_2;

fn energies() -> [C64; 3] {
    [C64::new(0.0, 0.0), C64::new(0.7, 0.0), C64::new(-1.3, 0.5)]
}

fn row(suite: &'static str, name: impl Into<String>, measured: f64, tol: f64) -> CheckRow {
    CheckRow { suite, name: name.into(), measured, tol }
}

fn fail_row(suite: &'static str, name: impl Into<String>, tol: f64) -> CheckRow {
    row(suite, name, f64::NAN, tol)
}

fn max_or_nan(it: impl Iterator<Item = odeim_bd::Result<f64>>) -> f64 {
    let mut m: f64 = 0.0;
    for v in it {
        match v {
            Ok(v) => m = m.max(v),
            Err(_) => return f64::NAN,
        }
    }
    m
}

pub fn wronskian(ctx: &CheckContext) -> Vec<CheckRow> {
    let opts = ConformalOptions::default();
    let p = &ctx.conformal;
    let target = C64::new(0.0, -3.0 * S3);
    let m = max_or_nan(energies().into_iter().flat_map(|e| {
        [0.6, 1.5].into_iter().map(move |x| wronskian3([-1.0, 0.0, 1.0], e, p, C64::new(x, 0.0), &opts).map(|w| (w - target).norm()))
    }));
    let mut rows = vec![row("wronskian", format!("conformal |W + 3i sqrt3| (alpha={}, g={})", p.alpha, p.g), m, 1e-8)];
    if let Some(sol) = ctx.field {
        let o = MassiveOptions::default();
        let m = max_or_nan([0.0, 0.5, -0.3].into_iter().map(|t| {
            massive_wronskian(sol, C64::new(t, 0.0), [-1.0, 0.0, 1.0], &[0.5, 1.0], &o)
                .map(|ws| ws.iter().map(|w| (w - target).norm()).fold(0.0, f64::max))
        }));
        rows.push(row("wronskian", "massive |W + 3i sqrt3|", m, 1e-6));
    }
    rows
}

pub fn zfun(ctx: &CheckContext) -> Vec<CheckRow> {
    let opts = ConformalOptions::default();
    let p = &ctx.conformal;
    let m = max_or_nan(energies().into_iter().flat_map(|e| {
        [0.3, 1.0, 2.0].into_iter().map(move |x| {
            let x = C64::new(x, 0.0);
            let z = z_function(-0.5, 0.5, e, p, x, &opts)?;
            let y = y_at(e, p, x, &opts)?[0] * C64::new(0.0, S3);
            Ok((z - y).norm() / y.norm())
        })
    }));
    vec![row("zfun", "conformal |z - i sqrt3 y| / |i sqrt3 y|", m, 1e-7)]
}

pub fn ufun(ctx: &CheckContext) -> Vec<CheckRow> {
    let Some(sol) = ctx.field else {
        return vec![fail_row("ufun", "massive u-identity (no field)", 1e-6)];
    };
    let o = MassiveOptions::default();
    let rhos: Vec<f64> = (0..10).map(|i| 0.3 + 0.15 * i as f64).collect();
    let th = C64::new(0.0, 0.0);
    let m = (|| -> odeim_bd::Result<f64> {
        let u = massive_u(sol, th, -0.5, 0.5, &rhos, &o)?;
        let y = massive_psi_k(sol, th, 0.0, &rhos, &o)?;
        Ok(u.iter().zip(&y).map(|(u, y)| (u - C64::new(0.0, S3) * y[0]).norm() / (S3 * y[0].norm())).fold(0.0, f64::max))
    })()
    .unwrap_or(f64::NAN);
    vec![row("ufun", "massive |u - i sqrt3 psi0| / |i sqrt3 psi0|", m, 1e-6)]
}

fn qq_on_grid(src: &dyn QSource, grid: &[C64]) -> f64 {
    match scan_q(src, grid, &[0.0, PI / 3.0, -PI / 3.0]) {
        Ok(scan) => max_or_nan(grid.iter().map(|&t| odeim_bd::bethe::qq_residual(&scan, t).map(|r| r.norm()))),
        Err(_) => f64::NAN,
    }
}

pub fn qq(ctx: &CheckContext) -> Vec<CheckRow> {
    let grid = linear_grid(-0.5, 2.5, 5);
    let cs = ConformalSource::new(ctx.conformal);
    let mut rows = vec![row("qq", "conformal QQ relative residual", qq_on_grid(&cs, &grid), 1e-6)];
    if let Some(sol) = ctx.field {
        rows.push(row("qq", "massive QQ relative residual", qq_on_grid(&MassiveSource::new(sol), &grid), 1e-5));
    }
    rows
}

fn bae_rows(src: &dyn QSource, label: &str, lo: f64, hi: f64, n_grid: usize, count: usize, tol: f64) -> Vec<CheckRow> {
    let scan = match scan_q(src, &linear_grid(lo, hi, n_grid), &[0.0]) {
        Ok(s) => s,
        Err(_) => return vec![fail_row("bae", format!("{label} scan"), tol)],
    };
    let mut rows = Vec::new();
    for which in [Which::Plus, Which::Minus] {
        let found = find_q_zeros(&scan, src, which, ZeroWindow::new(lo, hi), 1e-12);
        let zeros: Vec<C64> = found.zeros.iter().take(count).map(|z| z.theta).collect();
        let name = format!("{label} BAE, first {count} zeros of Q {}", which.as_str());
        if zeros.len() < count {
            rows.push(fail_row("bae", format!("{name} (found {})", zeros.len()), tol));
            continue;
        }
        let m = max_or_nan(zeros.iter().map(|&t| bae_residual(src, t, which).map(|r| r.norm())));
        rows.push(row("bae", name, m, tol));
    }
    rows
}

pub fn bae(ctx: &CheckContext) -> Vec<CheckRow> {
    let cs = ConformalSource::new(ctx.conformal);
    let mut rows = bae_rows(&cs, "conformal", -2.0, 3.2, 27, 3, 1e-4);
    if let Some(sol) = ctx.field {
        rows.extend(bae_rows(&MassiveSource::new(sol), "massive", 0.0, 2.6, 14, 2, 1e-3));
    }
    rows
}

pub fn conf_limit(ctx: &CheckContext) -> Vec<CheckRow> {
    let p = &ctx.conformal;
    let res = conformal_limit_study(
        p.alpha,
        p.g,
        C64::new(0.3, 0.0),
        &ctx.s_sequence,
        Which::Plus,
        &ctx.field_config,
        &MassiveOptions::default(),
        &ConformalOptions::default(),
    );
    let name = format!("conformal-limit drift strictly decreasing along s = {:?}", ctx.s_sequence);
    match res {
        Ok(t) => {
            let worst = t.drift.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
            vec![row("conf-limit", format!("{name}, max drift ratio"), worst, 1.0)]
        }
        Err(_) => vec![fail_row("conf-limit", name, 1.0)],
    }
}

fn find<'a>(rows: &'a [QTriple], theta: C64) -> Option<&'a QTriple> {
    rows.iter().find(|q| (q.theta - theta).norm() < 1e-9 * theta.norm().max(1.0))
}

/// QQ residuals at every row of a Q table that has both partner rows at theta +- i pi/3.
pub fn qq_from_table(source: Option<SourceKind>, rows: &[QTriple], alpha: f64, g: f64) -> Vec<CheckRow> {
    let tol = if source == Some(SourceKind::Massive) { 1e-5 } else { 1e-6 };
    let mut m: f64 = 0.0;
    let mut n = 0;
    for q in rows {
        let (Some(up), Some(down)) = (find(rows, q.theta + C64::new(0.0, PI / 3.0)), find(rows, q.theta - C64::new(0.0, PI / 3.0)))
        else {
            continue;
        };
        n += 1;
        m = m.max(qq_combination(alpha, g, q, up, down).norm());
    }
    if n == 0 {
        return vec![fail_row("qq", "Q file has no theta with both +-i pi/3 partners", tol)];
    }
    vec![row("qq", format!("QQ relative residual over {n} file points"), m, tol)]
}

/// BAE residuals at the rows of a Q table where Q+ or Q- vanishes and all four shifted rows exist.
pub fn bae_from_table(source: Option<SourceKind>, rows: &[QTriple], alpha: f64, g: f64) -> Vec<CheckRow> {
    let tol = if source == Some(SourceKind::Massive) { 1e-3 } else { 1e-4 };
    let shifts = [2.0 * PI / 3.0, -PI / 3.0, -2.0 * PI / 3.0, PI / 3.0];
    let mut m: f64 = 0.0;
    let mut n = 0;
    for q in rows {
        let partners: Vec<&QTriple> = shifts.iter().filter_map(|&d| find(rows, q.theta + C64::new(0.0, d))).collect();
        if partners.len() < 4 {
            continue;
        }
        let row_scale = q.q_plus.norm().max(q.q_zero.norm()).max(q.q_minus.norm());
        let (which, sign) = if q.q_plus.norm() <= q.q_minus.norm() { (Which::Plus, 1.0) } else { (Which::Minus, -1.0) };
        if q.get(which).norm() > 1e-6 * row_scale {
            continue;
        }
        let v: Vec<C64> = partners.iter().map(|p| p.get(which)).collect();
        let ratio = v[0] * v[1] / (v[2] * v[3]);
        let r = ratio * odeim_bd::params::omega_pow(alpha, -sign * (g + 1.0)) + 1.0;
        n += 1;
        m = m.max(if r.is_finite() { r.norm() } else { f64::INFINITY });
    }
    if n == 0 {
        return vec![fail_row("bae", "Q file has no zero of Q+ or Q- with all shifted partners", tol)];
    }
    vec![row("bae", format!("BAE residual over {n} zeros in file"), m, tol)]
}

pub fn run_suite(name: &str, ctx: &CheckContext) -> Result<Vec<CheckRow>> {
    Ok(match name {
        "wronskian" => wronskian(ctx),
        "zfun" => zfun(ctx),
        "ufun" => ufun(ctx),
        "qq" => qq(ctx),
        "bae" => bae(ctx),
        "conf-limit" => conf_limit(ctx),
        "all" => {
            let mut v = Vec::new();
            for s in &SUITES[..6] {
                v.extend(run_suite(s, ctx)?);
            }
            v
        }
        other => return Err(usage(format!("unknown suite {other:?}; expected one of {}", SUITES.join(", ")))),
    })
}

pub fn print_table(rows: &[CheckRow]) {
    println!("{:<11} {:<64} {:>12} {:>10}  result", "suite", "check", "measured", "tolerance");
    for r in rows {
        println!(
            "{:<11} {:<64} {:>12.3e} {:>10.1e}  {}",
            r.suite,
            r.name,
            r.measured,
            r.tol,
            if r.pass() { "PASS" } else { "FAIL" }
        );
    }
}

pub fn suite_needs_field(name: &str) -> bool {
    matches!(name, "ufun" | "all")
}
