//! Conformal-limit spectral problem `y''' = G(y'/x^2 - y/x^3) - (x^{3a} - E) y`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::{cond1, det3, from_columns, solve3, zero3, M3, V3, ZERO};
use crate::numerics::powersum::PowerSum;
use crate::numerics::rk::{integrate_ray_opts, RayOptions, RayTrajectory};
use crate::numerics::taylor::{taylor_integrate, ConformalCoefficients};
use crate::params::{cpow, energy_of_theta, omega_pow, theta_of_energy, ModelParams, C64, I};
use crate::qtriple::{relative_change, Gauge, QTriple};

/// (y, y', y'') at a point.
pub type YData = [C64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalParams {
    pub alpha: f64,
    pub g: f64,
}

impl ConformalParams {
    pub fn new(alpha: f64, g: f64) -> Result<Self> {
        if !(alpha > 0.5 && alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha = {alpha} must exceed 1/2")));
        }
        if !(g > -1.0 && g < 0.5) {
            return Err(Error::InvalidParams(format!("g = {g} must satisfy -1 < g < 1/2")));
        }
        Ok(ConformalParams { alpha, g })
    }

    pub fn from_model(p: &ModelParams) -> Result<Self> {
        ConformalParams::new(p.alpha, p.g)
    }

    pub fn big_g(&self) -> f64 {
        self.g * (self.g + 2.0)
    }

    pub fn exponents(&self) -> [f64; 3] {
        [-self.g, 1.0, self.g + 2.0]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConformalOptions {
    /// Local tolerance of the adaptive transport.
    pub tol: f64,
    pub x_max: Option<f64>,
    /// Matching point for the Frobenius projection; chosen adaptively when absent.
    pub x_min: Option<f64>,
    /// Target for the Frobenius tail estimate.
    pub series_tol: f64,
    /// Also project at x_min/2 and report the change as drift.
    pub check_drift: bool,
}

impl Default for ConformalOptions {
    fn default() -> Self {
        ConformalOptions { tol: 1e-13, x_max: None, x_min: None, series_tol: 1e-15, check_drift: true }
    }
}

/// Starting radius for inward integration to radius `r`.
pub fn default_x_max(params: &ConformalParams, e: C64, r: f64) -> f64 {
    let a = params.alpha;
    (r + 1.0)
        .max((60.0 * (a + 1.0)).powf(1.0 / (a + 1.0)))
        .max(1.01 * (1e3 * e.norm()).powf(1.0 / (3.0 * a)))
}

/// Large-x expansion of the subdominant solution: `ln y`, `y'/y` and `y''/y` at real x.
#[derive(Clone, Copy, Debug)]
pub struct AsymptoticData {
    pub log_y: C64,
    pub v: C64,
    pub w: C64,
    pub terms: usize,
}

pub fn asymptotic_data(params: &ConformalParams, e: C64, x: f64) -> AsymptoticData {
    let a = params.alpha;
    let big_g = params.big_g();
    let one = C64::new(1.0, 0.0);
    let tol = 1e-19;
    let v0 = PowerSum::monomial(a, -one);
    let aa = PowerSum::monomial(-2.0, -one * big_g);
    let b = PowerSum::from_terms(vec![(3.0 * a, one), (0.0, -e), (-3.0, one * big_g)]).truncate(x, 0.0);
    let r = x.powf(a);
    let mut u = PowerSum::zero();
    for _ in 0..80 {
        let v = v0.add(&u);
        let vd = v.deriv();
        let res = v
            .mul(&v)
            .mul(&v)
            .add(&v.mul(&vd).scale(one * 3.0, 0.0))
            .add(&vd.deriv())
            .add(&aa.mul(&v))
            .add(&b)
            .truncate(x, tol * 1e-3 * r * x.powf(2.0 * a));
        let du = res.scale(-one / 3.0, -2.0 * a).truncate(x, tol * r);
        if du.is_empty() {
            break;
        }
        u = u.add(&du).truncate(x, tol * r);
    }
    let v = v0.add(&u);
    let xc = C64::new(x, 0.0);
    let mut log_y = C64::new(-x.powf(a + 1.0) / (a + 1.0), 0.0);
    for &(ex, c) in u.terms() {
        if (ex + 1.0).abs() < 1e-9 {
            log_y += c * x.ln();
        } else {
            log_y += c * x.powf(ex + 1.0) / (ex + 1.0);
        }
    }
    let vv = v.eval(xc);
    let vp = v.deriv().eval(xc);
    AsymptoticData { log_y, v: vv, w: vv * vv + vp, terms: u.terms().len() }
}

/// Companion matrix M with `Y' = M Y`, `Y = (y, y', y'')`.
pub fn conformal_matrix(params: &ConformalParams, e: C64, x: C64) -> M3 {
    let big_g = params.big_g();
    let x2 = x * x;
    let mut m = zero3();
    m[0][1] = C64::new(1.0, 0.0);
    m[1][2] = C64::new(1.0, 0.0);
    m[2][0] = -(cpow(x, 3.0 * params.alpha) - e) - big_g / (x2 * x);
    m[2][1] = big_g / x2;
    m
}

fn neg(m: M3) -> M3 {
    let mut out = m;
    for row in out.iter_mut() {
        for c in row.iter_mut() {
            *c = -*c;
        }
    }
    out
}

fn start_vector(params: &ConformalParams, e: C64, x_max: f64) -> Result<(V3, f64)> {
    let a = params.alpha;
    if x_max.powf(3.0 * a) <= 1e3 * e.norm() {
        return Err(Error::InvalidParams(format!(
            "x_max = {x_max} too small: x_max^(3 alpha) must exceed 1e3 |E|"
        )));
    }
    let d = asymptotic_data(params, e, x_max);
    let ph = C64::from_polar(1.0, d.log_y.im);
    let v = [ph, d.v * ph, d.w * ph];
    if !v.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite { t: x_max });
    }
    Ok((v, d.log_y.re))
}

/// Transport of the subdominant solution along the real axis from `x_max` to `x_min`.
#[derive(Clone, Debug)]
pub struct YSolution {
    pub e: C64,
    pub params: ConformalParams,
    pub x_max: f64,
    pub traj: RayTrajectory,
}

impl YSolution {
    pub fn x(&self) -> &[f64] {
        &self.traj.t
    }

    pub fn value(&self, i: usize) -> YData {
        self.traj.state(i)
    }

    pub fn end(&self) -> YData {
        self.traj.end()
    }
}

pub fn solve_y(e: C64, params: &ConformalParams, x_max: Option<f64>, x_min: f64, tol: f64) -> Result<YSolution> {
    if !(x_min > 0.0) {
        return Err(Error::InvalidParams("x_min must be positive".into()));
    }
    let x_max = x_max.unwrap_or_else(|| default_x_max(params, e, x_min));
    if x_max <= x_min {
        return Err(Error::InvalidParams("x_max must exceed x_min".into()));
    }
    let (v0, ls0) = start_vector(params, e, x_max)?;
    let p = *params;
    let sys = move |x: f64| neg(conformal_matrix(&p, e, C64::new(x, 0.0)));
    let traj = integrate_ray_opts(&sys, x_max, x_min, v0, ls0, &RayOptions::new(tol))?;
    Ok(YSolution { e, params: *params, x_max, traj })
}

/// Subdominant solution continued to complex `x`: along the real axis to |x|, then along the arc.
pub fn y_at(e: C64, params: &ConformalParams, x: C64, opts: &ConformalOptions) -> Result<YData> {
    let (dir, ls) = y_at_scaled(e, params, x, opts)?;
    let f = ls.exp();
    let y = [dir[0] * f, dir[1] * f, dir[2] * f];
    if !y.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite { t: x.norm() });
    }
    Ok(y)
}

pub fn y_at_scaled(e: C64, params: &ConformalParams, x: C64, opts: &ConformalOptions) -> Result<(V3, f64)> {
    let r = x.norm();
    let beta = x.arg();
    if r == 0.0 {
        return Err(Error::InvalidParams("x = 0 is singular".into()));
    }
    if beta.abs() >= PI {
        return Err(Error::BranchCut(x));
    }
    let x_max = opts.x_max.unwrap_or_else(|| default_x_max(params, e, r)).max(r);
    let (v0, ls0) = start_vector(params, e, x_max)?;
    let p = *params;
    let ro = RayOptions::new(opts.tol);
    let sys = move |t: f64| neg(conformal_matrix(&p, e, C64::new(t, 0.0)));
    let tr = integrate_ray_opts(&sys, x_max, r, v0, ls0, &ro)?;
    let (mut v, mut ls) = tr.end_scaled();
    if beta != 0.0 {
        let arc = move |b: f64| {
            let xc = C64::from_polar(r, b);
            let m = conformal_matrix(&p, e, xc);
            let mut out = zero3();
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] = -(I * xc * m[i][j]);
                }
            }
            out
        };
        let tr = integrate_ray_opts(&arc, 0.0, beta, v, ls, &ro)?;
        let end = tr.end_scaled();
        v = end.0;
        ls = end.1;
    }
    Ok((v, ls))
}

/// Largest relative difference in (y, y', y'') between the adaptive transport and the fixed-step
/// Taylor recurrence, both started from the subdominant data at `x_hi` and run down to `x_lo`,
/// compared at `n_check` equally spaced points.
pub fn oracle_agreement(e: C64, params: &ConformalParams, x_lo: f64, x_hi: f64, n_check: usize, tol: f64) -> Result<f64> {
    if !(x_lo > 0.0 && x_hi > x_lo) || n_check == 0 {
        return Err(Error::InvalidParams("oracle comparison needs 0 < x_lo < x_hi and n_check > 0".into()));
    }
    let start = y_at(e, params, C64::new(x_hi, 0.0), &ConformalOptions { tol, ..Default::default() })?;
    let eq = ConformalCoefficients { alpha: params.alpha, big_g: params.big_g(), e };
    let steps_per = ((x_hi - x_lo) / (0.005 * x_lo * n_check as f64)).ceil().max(1.0) as usize;
    let p = *params;
    let sys = move |x: f64| neg(conformal_matrix(&p, e, C64::new(x, 0.0)));
    let ro = RayOptions::new(tol);
    let (mut adapt, mut ls) = (start, 0.0);
    let mut taylor = start;
    let mut worst = 0.0f64;
    for k in 0..n_check {
        let a = x_hi - (x_hi - x_lo) * k as f64 / n_check as f64;
        let b = x_hi - (x_hi - x_lo) * (k + 1) as f64 / n_check as f64;
        let tr = integrate_ray_opts(&sys, a, b, adapt, ls, &ro)?;
        (adapt, ls) = tr.end_scaled();
        taylor = taylor_integrate(&eq, a, b, taylor, steps_per, 30).last().unwrap().1;
        let f = ls.exp();
        let diff = (0..3).map(|i| (adapt[i] * f - taylor[i]).norm()).fold(0.0, f64::max);
        let scale = taylor.iter().map(|c| c.norm()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}

/// Stokes sector `|arg x - 2 pi k/(3a+3)| < pi/(3a+3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesSector {
    pub k: f64,
    pub lo: f64,
    pub hi: f64,
}

impl StokesSector {
    pub fn new(k: f64, alpha: f64) -> Self {
        let w = PI / (3.0 * alpha + 3.0);
        StokesSector { k, lo: 2.0 * k * w - w, hi: 2.0 * k * w + w }
    }

    pub fn contains(&self, arg: f64) -> bool {
        arg > self.lo && arg < self.hi
    }
}

/// Largest |arg| at which the base solution is evaluated.
pub fn validity_half_angle(alpha: f64) -> f64 {
    (4.0 * PI / (3.0 * alpha + 3.0)).min(PI)
}

/// `y_k(x, E) = w^k y(w^-k x, w^{-3ak} E)` and its first two x-derivatives.
pub fn rotated_y(k: f64, e: C64, params: &ConformalParams, x: C64, opts: &ConformalOptions) -> Result<YData> {
    let a = params.alpha;
    let wk = omega_pow(a, k);
    let xr = x * omega_pow(a, -k);
    if xr.arg().abs() >= validity_half_angle(a) {
        return Err(Error::Wedge(format!(
            "arg(w^-k x) = {:.4} outside |arg| < {:.4} for k = {k}",
            xr.arg(),
            validity_half_angle(a)
        )));
    }
    let er = e * omega_pow(a, -3.0 * a * k);
    let y = y_at(er, params, xr, opts)?;
    let wm = omega_pow(a, -k);
    Ok([wk * y[0], wk * wm * y[1], wk * wm * wm * y[2]])
}

/// 3x3 Wronskian det[(y_k, y_k', y_k'')] of three rotated solutions at x.
pub fn wronskian3(ks: [f64; 3], e: C64, params: &ConformalParams, x: C64, opts: &ConformalOptions) -> Result<C64> {
    let cols = [
        rotated_y(ks[0], e, params, x, opts)?,
        rotated_y(ks[1], e, params, x, opts)?,
        rotated_y(ks[2], e, params, x, opts)?,
    ];
    Ok(det3(&from_columns(&cols)))
}

/// `z_{k1,k2} = y_{k1} y_{k2}' - y_{k2} y_{k1}'`.
pub fn z_function(k1: f64, k2: f64, e: C64, params: &ConformalParams, x: C64, opts: &ConformalOptions) -> Result<C64> {
    if (k1 - k2).abs() >= 3.0 {
        return Err(Error::InvalidParams("z-function needs |k1 - k2| < 3".into()));
    }
    let a = rotated_y(k1, e, params, x, opts)?;
    let b = rotated_y(k2, e, params, x, opts)?;
    Ok(a[0] * b[1] - b[0] * a[1])
}

/// Local series solutions `chi = sum a_{n,m} x^{mu + 3n + (3a+3)m}` at the origin.
#[derive(Clone, Debug)]
pub struct FrobeniusBasis {
    pub params: ConformalParams,
    pub e: C64,
    pub exponents: [f64; 3],
    pub n_max: usize,
    pub m_max: usize,
    coeffs: [Vec<C64>; 3],
}

fn indicial(nu: f64, big_g: f64) -> f64 {
    nu * (nu - 1.0) * (nu - 2.0) - big_g * nu + big_g
}

impl FrobeniusBasis {
    pub fn new(params: &ConformalParams, e: C64, n_max: usize, m_max: usize) -> Result<Self> {
        let exps = params.exponents();
        let big_g = params.big_g();
        let step = 3.0 * params.alpha + 3.0;
        let mut coeffs: [Vec<C64>; 3] = Default::default();
        for (slot, &mu) in coeffs.iter_mut().zip(exps.iter()) {
            let mut a = vec![ZERO; n_max * m_max];
            for m in 0..m_max {
                for n in 0..n_max {
                    if n == 0 && m == 0 {
                        a[0] = C64::new(1.0, 0.0);
                        continue;
                    }
                    let nu = mu + 3.0 * n as f64 + step * m as f64;
                    let p = indicial(nu, big_g);
                    let scale = 1.0 + nu.abs().powi(3);
                    let mut rhs = ZERO;
                    if n > 0 {
                        rhs += e * a[(n - 1) * m_max + m];
                    }
                    if m > 0 {
                        rhs -= a[n * m_max + m - 1];
                    }
                    if p.abs() < 1e-6 * scale {
                        if rhs.norm() == 0.0 {
                            continue;
                        }
                        return Err(Error::Resonance(format!(
                            "exponent {mu} + {} hits another indicial root",
                            nu - mu
                        )));
                    }
                    a[n * m_max + m] = rhs / p;
                }
            }
            *slot = a;
        }
        Ok(FrobeniusBasis { params: *params, e, exponents: exps, n_max, m_max, coeffs })
    }

    /// Columns (chi, chi', chi'') for the three exponents, plus a tail estimate
    /// (largest boundary term relative to the largest term).
    pub fn eval(&self, x: f64) -> ([YData; 3], f64) {
        let step = 3.0 * self.params.alpha + 3.0;
        let mut out = [[ZERO; 3]; 3];
        let mut tail = 0.0f64;
        for (k, &mu) in self.exponents.iter().enumerate() {
            let a = &self.coeffs[k];
            let (mut y, mut yp, mut ypp) = (ZERO, ZERO, ZERO);
            let mut big = 0.0f64;
            let mut edge = 0.0f64;
            for n in 0..self.n_max {
                for m in 0..self.m_max {
                    let c = a[n * self.m_max + m];
                    if c == ZERO {
                        continue;
                    }
                    let nu = mu + 3.0 * n as f64 + step * m as f64;
                    let xn = x.powf(nu - 2.0);
                    let t = c * xn;
                    ypp += t * (nu * (nu - 1.0));
                    yp += t * (nu * x);
                    y += t * (x * x);
                    let mag = (t * x * x).norm();
                    big = big.max(mag);
                    if n == self.n_max - 1 || m == self.m_max - 1 {
                        edge = edge.max(mag);
                    }
                }
            }
            out[k] = [y, yp, ypp];
            if big > 0.0 {
                tail = tail.max(edge / big);
            }
        }
        (out, tail)
    }
}

/// Chooses a matching point so that `|E| x^3` stays moderate and the series tail is below `series_tol`.
pub fn matching_point(params: &ConformalParams, e: C64, basis: &FrobeniusBasis, series_tol: f64) -> Result<f64> {
    let _ = params;
    let mut x = 0.5f64.min((4.0 / e.norm().max(1e-300)).cbrt());
    for _ in 0..40 {
        let (_, tail) = basis.eval(x);
        if tail < 0.1 * series_tol {
            return Ok(x);
        }
        x *= 0.8;
    }
    Err(Error::NoConvergence { iterations: 40, last: basis.eval(x).1 })
}

fn project(e: C64, params: &ConformalParams, basis: &FrobeniusBasis, x: f64, opts: &ConformalOptions) -> Result<([C64; 3], f64)> {
    let y = y_at(e, params, C64::new(x, 0.0), opts)?;
    let (cols, _) = basis.eval(x);
    let f = from_columns(&cols);
    let q = solve3(&f, &y).ok_or_else(|| Error::IllConditioned("singular Frobenius frame".into()))?;
    Ok((q, cond1(&f)))
}

/// Q-functions at energy E in the "chi-unit" gauge: `y = Q+ chi+ + Q0 chi0 + Q- chi-`.
pub fn conformal_q_triple(e: C64, params: &ConformalParams, opts: &ConformalOptions) -> Result<QTriple> {
    let mut q = conformal_q_energy(e, params, opts)?;
    q.theta = theta_of_energy(e, params.alpha);
    Ok(q)
}

/// As [`conformal_q_triple`] with `E = exp(3 a theta/(a+1))`; theta is kept verbatim.
pub fn conformal_q_at_theta(theta: C64, params: &ConformalParams, opts: &ConformalOptions) -> Result<QTriple> {
    let mut q = conformal_q_energy(energy_of_theta(theta, params.alpha), params, opts)?;
    q.theta = theta;
    Ok(q)
}

fn conformal_q_energy(e: C64, params: &ConformalParams, opts: &ConformalOptions) -> Result<QTriple> {
    let basis = FrobeniusBasis::new(params, e, 60, 30)?;
    let x_min = match opts.x_min {
        Some(x) => x,
        None => matching_point(params, e, &basis, opts.series_tol)?,
    };
    let (q, cond) = project(e, params, &basis, x_min, opts)?;
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::IllConditioned(format!("Frobenius projection condition number {cond:e}")));
    }
    let drift = if opts.check_drift {
        let (q2, _) = project(e, params, &basis, 0.5 * x_min, opts)?;
        relative_change(&q, &q2)
    } else {
        0.0
    };
    Ok(QTriple { theta: C64::new(0.0, 0.0), q_plus: q[0], q_zero: q[1], q_minus: q[2], gauge: Gauge::ChiUnit, cond, drift })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ConformalParams {
        ConformalParams::new(1.0, 0.1).unwrap()
    }

    #[test]
    fn asymptotic_ratio() {
        let d = asymptotic_data(&p(), C64::new(0.0, 0.0), 40.0);
        assert!(((d.v + 40.0) / 40.0).norm() < 1e-3);
        assert!(d.terms > 0);
    }

    #[test]
    fn wronskian_constant() {
        let o = ConformalOptions::default();
        for e in [C64::new(0.7, 0.0), C64::new(0.0, 0.0), C64::new(-1.3, 0.5)] {
            let w = wronskian3([-1.0, 0.0, 1.0], e, &p(), C64::new(1.0, 0.0), &o).unwrap();
            assert!((w + I * 3f64.sqrt() * 3.0).norm() < 1e-8, "E = {e}: W = {w}");
        }
    }

    #[test]
    fn z_identity() {
        let o = ConformalOptions::default();
        let e = C64::new(0.7, 0.0);
        for x in [0.4, 1.0, 1.7] {
            let x = C64::new(x, 0.0);
            let z = z_function(-0.5, 0.5, e, &p(), x, &o).unwrap();
            let y = y_at(e, &p(), x, &o).unwrap()[0];
            assert!(((z - I * 3f64.sqrt() * y) / y).norm() < 1e-7);
        }
    }

    #[test]
    fn frobenius_exponents_and_resonance() {
        assert_eq!(p().exponents(), [-0.1, 1.0, 2.1]);
        let q = ConformalParams { alpha: 1.0, g: 0.5 };
        assert!(matches!(FrobeniusBasis::new(&q, C64::new(1.0, 0.0), 10, 5), Err(Error::Resonance(_))));
        assert!(FrobeniusBasis::new(&ConformalParams::new(1.0, 0.0).unwrap(), C64::new(1.0, 0.0), 10, 5).is_ok());
    }

    #[test]
    fn sectors() {
        let s = StokesSector::new(0.0, 1.0);
        assert!(s.contains(0.5) && !s.contains(0.6));
        let s = StokesSector::new(1.0, 1.0);
        assert!(s.contains(PI / 3.0));
    }
}
