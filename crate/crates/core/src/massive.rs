//! The sl(3) linear problem attached to a solved field: WKB data at infinity,
//! inward transport along rays, the origin frame, and the Q-functions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{eta_eval, FieldSolution};
use crate::numerics::linalg::{cond1, det3, from_columns, mat_vec, solve3, vmax, zero3, M3, V3, ZERO};
use crate::numerics::powersum::PowerSum;
use crate::numerics::rk::{integrate_ray_opts, RayOptions};
use crate::params::{resonance_gap, ModelParams, C64, I};
use crate::qtriple::{relative_change, Gauge, QTriple};

/// The two Lax matrices at one point of the real slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaxMatrices {
    pub a_z: M3,
    pub a_zbar: M3,
}

/// `z^{3a}` continued along the ray of angle `phi` (no reduction to the principal sheet).
fn z_pow(rho: f64, phi: f64, e: f64) -> C64 {
    C64::from_polar(rho.powf(e), phi * e)
}

pub fn lax_matrices(sol: &FieldSolution, theta: C64, rho: f64, phi: f64) -> Result<LaxMatrices> {
    let v = eta_eval(sol, rho, phi)?;
    let p = &sol.params;
    let lam = theta.exp();
    let lami = (-theta).exp();
    let a3 = 3.0 * p.alpha;
    let pz = z_pow(rho, phi, a3) - p.s.powf(a3);
    let pzb = pz.conj();
    let eta_z = C64::from_polar(0.5, -phi) * C64::new(v.d_rho, -v.d_phi / rho);
    let eta_zb = eta_z.conj();
    let em = (-0.5 * v.eta).exp();
    let ep = v.eta.exp();
    let mut a_z = zero3();
    a_z[0][0] = eta_z * 0.5;
    a_z[0][2] = lam * ep * pz;
    a_z[1][0] = lam * em;
    a_z[2][1] = lam * em;
    a_z[2][2] = -eta_z * 0.5;
    let mut a_zbar = zero3();
    a_zbar[0][0] = -eta_zb * 0.5;
    a_zbar[0][1] = lami * em;
    a_zbar[1][2] = lami * em;
    a_zbar[2][0] = lami * pzb * ep;
    a_zbar[2][2] = eta_zb * 0.5;
    Ok(LaxMatrices { a_z, a_zbar })
}

fn combine(l: &LaxMatrices, cz: C64, czb: C64) -> M3 {
    let mut out = zero3();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = cz * l.a_z[i][j] + czb * l.a_zbar[i][j];
        }
    }
    out
}

/// `A(rho) = e^{i phi} A_z + e^{-i phi} A_zbar`, so that `dPsi/drho = -A Psi` on the ray.
pub fn radial_matrix(sol: &FieldSolution, theta: C64, phi: f64, rho: f64) -> Result<M3> {
    let l = lax_matrices(sol, theta, rho, phi)?;
    Ok(combine(&l, C64::from_polar(1.0, phi), C64::from_polar(1.0, -phi)))
}

/// The radial system on a fixed ray as a matrix function of rho.
pub fn radial_system(sol: &FieldSolution, theta: C64, phi: f64) -> impl Fn(f64) -> Result<M3> + '_ {
    move |rho| radial_matrix(sol, theta, phi, rho)
}

/// `i z A_z - i zbar A_zbar`, so that `dPsi/dphi = -B Psi` at fixed rho.
pub fn angular_matrix(sol: &FieldSolution, theta: C64, rho: f64, phi: f64) -> Result<M3> {
    let l = lax_matrices(sol, theta, rho, phi)?;
    let z = C64::from_polar(rho, phi);
    Ok(combine(&l, I * z, -I * z.conj()))
}

fn nan_matrix() -> M3 {
    [[C64::new(f64::NAN, 0.0); 3]; 3]
}

/// Subdominant WKB vector as a unit direction times `exp(log_scale)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WkbVector {
    pub dir: V3,
    pub log_scale: f64,
}

impl WkbVector {
    pub fn value(&self) -> V3 {
        let f = self.log_scale.exp();
        [self.dir[0] * f, self.dir[1] * f, self.dir[2] * f]
    }
}

/// Binomial coefficient `C(1/3, n)`.
fn binom_third(n: usize) -> f64 {
    let mut c = 1.0;
    for k in 0..n {
        c *= (1.0 / 3.0 - k as f64) / (k as f64 + 1.0);
    }
    c
}

/// `w(z) = int p^{1/3} dz` from its large-|z| expansion along the ray.
fn wkb_action(params: &ModelParams, rho: f64, phi: f64) -> C64 {
    let a = params.alpha;
    let s3 = params.s.powf(3.0 * a);
    let mut w = z_pow(rho, phi, a + 1.0) / (a + 1.0);
    if s3 == 0.0 {
        return w;
    }
    let mut un = 1.0;
    for n in 1..400 {
        un *= -s3;
        let e = a + 1.0 - 3.0 * a * n as f64;
        let term = un * binom_third(n) * z_pow(rho, phi, e) / e;
        w += term;
        if term.norm() < 1e-18 * w.norm() {
            break;
        }
    }
    w
}

/// `e^{theta/2} (p^{1/6} pbar^{-1/6}, 1, p^{-1/6} pbar^{1/6}) exp(-lambda w(z) - lambda^{-1} wbar(zbar))`.
pub fn wkb_initial_vector(params: &ModelParams, theta: C64, rho_max: f64, phi: f64) -> Result<WkbVector> {
    params.require_wkb()?;
    let a = params.alpha;
    let arg = theta.im + (a + 1.0) * phi;
    if arg.abs() >= 0.5 * PI {
        return Err(Error::Wedge(format!(
            "|Im theta + (alpha+1) phi| = {:.4} is not below pi/2",
            arg.abs()
        )));
    }
    let s3 = params.s.powf(3.0 * a);
    if rho_max <= params.s * 1.5 {
        return Err(Error::InvalidParams("rho_max must exceed the zeros of p by a margin".into()));
    }
    let u = z_pow(rho_max, phi, -3.0 * a) * s3;
    let one = C64::new(1.0, 0.0);
    // p^{1/6} pbar^{-1/6} = e^{i a phi} (1-u)^{1/6} / (1-conj u)^{1/6}
    let f = C64::from_polar(1.0, a * phi) * (one - u).powf(1.0 / 6.0) / (one - u.conj()).powf(1.0 / 6.0);
    let half = (theta * 0.5).exp();
    let w = wkb_action(params, rho_max, phi);
    let expo = -(theta.exp() * w) - (-theta).exp() * w.conj();
    let v = [half * f, half, half / f];
    let ph = C64::from_polar(1.0, expo.im);
    let mut dir = [v[0] * ph, v[1] * ph, v[2] * ph];
    let n = vmax(&dir);
    for c in dir.iter_mut() {
        *c /= n;
    }
    Ok(WkbVector { dir, log_scale: expo.re + n.ln() })
}

/// Ray used for transport at spectral parameter theta.
pub fn adjusted_ray(params: &ModelParams, theta: C64) -> f64 {
    -theta.im / (params.alpha + 1.0)
}

/// Three local solutions at the origin, `F = P_n(rho) L`, with columns (Psi+, Psi0, Psi-).
#[derive(Clone, Debug, PartialEq)]
pub struct OriginFrame {
    pub rho: f64,
    pub phi: f64,
    pub theta: C64,
    pub order: usize,
    pub columns: [V3; 3],
    pub gauge: Gauge,
    pub eta0: f64,
    /// Size of the last Picard term relative to the frame.
    pub truncation: f64,
}

impl OriginFrame {
    pub fn matrix(&self) -> M3 {
        from_columns(&self.columns)
    }
}

fn leading_connection(params: &ModelParams, eta0: f64, theta: C64, phi: f64) -> [[PowerSum; 3]; 3] {
    let (a, g, s) = (params.alpha, params.g, params.s);
    let lam = theta.exp();
    let lami = (-theta).exp();
    let e_half = (-0.5 * eta0).exp();
    let e_full = eta0.exp();
    let ep = C64::from_polar(1.0, phi);
    let em = C64::from_polar(1.0, -phi);
    let s3 = s.powf(3.0 * a);
    let mut m: [[PowerSum; 3]; 3] = Default::default();
    m[0][1] = PowerSum::monomial(g, em * lami * e_half);
    m[1][2] = PowerSum::monomial(g, em * lami * e_half);
    m[1][0] = PowerSum::monomial(g, ep * lam * e_half);
    m[2][1] = PowerSum::monomial(g, ep * lam * e_half);
    let mut t13 = vec![(3.0 * a - 2.0 * g, ep * lam * e_full * C64::from_polar(1.0, 3.0 * a * phi))];
    let mut t31 = vec![(3.0 * a - 2.0 * g, em * lami * e_full * C64::from_polar(1.0, -3.0 * a * phi))];
    if s3 > 0.0 {
        t13.push((-2.0 * g, -ep * lam * e_full * s3));
        t31.push((-2.0 * g, -em * lami * e_full * s3));
    }
    m[0][2] = PowerSum::from_terms(t13);
    m[2][0] = PowerSum::from_terms(t31);
    m
}

fn integrate_from_zero(p: &PowerSum) -> PowerSum {
    PowerSum::from_terms(p.terms().iter().map(|&(e, c)| (e + 1.0, c / (e + 1.0))).collect())
}

pub fn origin_frame(sol: &FieldSolution, theta: C64, rho_min: f64, phi: f64, order: usize) -> Result<OriginFrame> {
    origin_frame_with(&sol.params, sol.eta0, theta, rho_min, phi, order)
}

/// As [`origin_frame`], from the model parameters and the constant eta0 alone.
pub fn origin_frame_with(
    params: &ModelParams,
    eta0: f64,
    theta: C64,
    rho_min: f64,
    phi: f64,
    order: usize,
) -> Result<OriginFrame> {
    let gap = resonance_gap(params.g);
    if gap < 1e-6 {
        return Err(Error::Resonance(format!(
            "origin exponents -g, 1, g+2 differ by integers at g = {} (gap {gap:e})",
            params.g
        )));
    }
    let a_lead = leading_connection(params, eta0, theta, phi);
    let mut term: [[PowerSum; 3]; 3] = Default::default();
    for (i, row) in term.iter_mut().enumerate() {
        row[i] = PowerSum::monomial(0.0, C64::new(1.0, 0.0));
    }
    let rc = C64::new(rho_min, 0.0);
    let eval = |m: &[[PowerSum; 3]; 3]| -> M3 {
        let mut out = zero3();
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = m[i][j].eval(rc);
            }
        }
        out
    };
    let mut total = eval(&term);
    let mut last = 0.0;
    for _ in 0..order {
        let mut next: [[PowerSum; 3]; 3] = Default::default();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = PowerSum::zero();
                for k in 0..3 {
                    if a_lead[i][k].is_empty() || term[k][j].is_empty() {
                        continue;
                    }
                    acc = acc.add(&a_lead[i][k].mul(&term[k][j]));
                }
                next[i][j] = integrate_from_zero(&acc).scale(C64::new(-1.0, 0.0), 0.0);
            }
        }
        term = next;
        let tv = eval(&term);
        last = tv.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
        for i in 0..3 {
            for j in 0..3 {
                total[i][j] += tv[i][j];
            }
        }
    }
    let scale = total.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    let truncation = if order == 0 { f64::NAN } else { last / scale };
    if order > 0 && truncation > 1e-6 {
        return Err(Error::NoConvergence { iterations: order, last: truncation });
    }
    let g = params.g;
    let lp = [ZERO, ZERO, (-(I * phi + theta) * g).exp()];
    let l0 = [ZERO, C64::new(1.0, 0.0), ZERO];
    let lm = [((I * phi + theta) * g).exp(), ZERO, ZERO];
    let columns = [mat_vec(&total, &lp), mat_vec(&total, &l0), mat_vec(&total, &lm)];
    Ok(OriginFrame { rho: rho_min, phi, theta, order, columns, gauge: Gauge::Psi0Unit, eta0, truncation })
}

#[derive(Clone, Copy, Debug)]
pub struct MassiveOptions {
    pub tol: f64,
    pub frame_order: usize,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub check_drift: bool,
    /// Largest accepted relative change of q between rho_min and 2 rho_min.
    pub drift_tol: f64,
}

impl Default for MassiveOptions {
    fn default() -> Self {
        MassiveOptions { tol: 1e-12, frame_order: 6, rho_min: None, rho_max: None, check_drift: true, drift_tol: 1e-5 }
    }
}

fn scaled(m: M3, f: f64) -> M3 {
    let mut out = m;
    for row in out.iter_mut() {
        for c in row.iter_mut() {
            *c *= f;
        }
    }
    out
}

/// Transport along a ray in `t = ln rho`.
fn transport_radial(
    sol: &FieldSolution,
    theta: C64,
    phi: f64,
    rho_from: f64,
    rho_to: f64,
    v: (V3, f64),
    tol: f64,
) -> Result<(V3, f64)> {
    let sys = |t: f64| {
        let rho = t.exp();
        radial_matrix(sol, theta, phi, rho).map(|m| scaled(m, rho)).unwrap_or_else(|_| nan_matrix())
    };
    let tr = integrate_ray_opts(&sys, rho_from.ln(), rho_to.ln(), v.0, v.1, &RayOptions::new(tol))?;
    Ok(tr.end_scaled())
}

fn transport_arc(sol: &FieldSolution, theta: C64, rho: f64, phi_from: f64, phi_to: f64, v: (V3, f64), tol: f64) -> Result<(V3, f64)> {
    let sys = |phi: f64| angular_matrix(sol, theta, rho, phi).unwrap_or_else(|_| nan_matrix());
    let tr = integrate_ray_opts(&sys, phi_from, phi_to, v.0, v.1, &RayOptions::new(tol))?;
    Ok(tr.end_scaled())
}

fn check_ray(params: &ModelParams, phi: f64) -> Result<()> {
    if phi.abs() >= PI {
        return Err(Error::Wedge(format!("transport ray angle {phi:.4} leaves |phi| < pi")));
    }
    let _ = params;
    Ok(())
}

fn project(frame: &OriginFrame, v: (V3, f64)) -> Result<([C64; 3], f64)> {
    let f = frame.matrix();
    let q = solve3(&f, &v.0).ok_or_else(|| Error::IllConditioned("singular origin frame".into()))?;
    let s = v.1.exp();
    Ok(([q[0] * s, q[1] * s, q[2] * s], cond1(&f)))
}

/// Q-functions at theta in the "Psi0-unit" gauge.
pub fn compute_q_triple(sol: &FieldSolution, theta: C64, opts: &MassiveOptions) -> Result<QTriple> {
    let p = &sol.params;
    let phi = adjusted_ray(p, theta);
    check_ray(p, phi)?;
    let rho_max = opts.rho_max.unwrap_or(sol.rho_max());
    let rho_min = opts.rho_min.unwrap_or(sol.rho_min());
    let w = wkb_initial_vector(p, theta, rho_max, phi)?;
    let mut v = (w.dir, w.log_scale);
    let mut q2 = None;
    if opts.check_drift {
        v = transport_radial(sol, theta, phi, rho_max, 2.0 * rho_min, v, opts.tol)?;
        let f2 = origin_frame(sol, theta, 2.0 * rho_min, phi, opts.frame_order)?;
        q2 = Some(project(&f2, v)?.0);
        v = transport_radial(sol, theta, phi, 2.0 * rho_min, rho_min, v, opts.tol)?;
    } else {
        v = transport_radial(sol, theta, phi, rho_max, rho_min, v, opts.tol)?;
    }
    let frame = origin_frame(sol, theta, rho_min, phi, opts.frame_order)?;
    let (q, cond) = project(&frame, v)?;
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::IllConditioned(format!("origin frame condition number {cond:e}")));
    }
    let drift = q2.map(|q2| relative_change(&q, &q2)).unwrap_or(0.0);
    if let (Some(q2), true) = (q2, drift > opts.drift_tol) {
        return Err(Error::Drift { drift, first: q.to_vec(), second: q2.to_vec() });
    }
    let out = QTriple { theta, q_plus: q[0], q_zero: q[1], q_minus: q[2], gauge: Gauge::Psi0Unit, cond, drift };
    if !out.is_finite() {
        return Err(Error::NonFinite { t: rho_min });
    }
    Ok(out)
}

/// Rescales a "Psi0-unit" triple to the "chi-unit" gauge of the scalar Frobenius basis in
/// `x = z e^{theta/(a+1)}`, the normalization in which the quantum Wronskian and the Bethe
/// equations hold with the constants printed for the conformal problem.
pub fn to_chi_gauge(q: &QTriple, params: &ModelParams, eta0: f64) -> QTriple {
    if q.gauge == Gauge::ChiUnit {
        return *q;
    }
    let g = params.g;
    let th = q.theta;
    let r = th / (params.alpha + 1.0);
    let fp = (eta0 * 0.5 - th * (g + 1.5) + r * (g + 1.0)).exp();
    let f0 = -(-th * 0.5).exp() / (g + 1.0);
    let fm = (th * (g + 0.5) - eta0 * 0.5 - r * (g + 1.0)).exp() / (2.0 * (g + 1.0) * (g + 1.0));
    QTriple { q_plus: q.q_plus * fp, q_zero: q.q_zero * f0, q_minus: q.q_minus * fm, gauge: Gauge::ChiUnit, ..*q }
}

/// Vector solutions subdominant for theta, evaluated at radii `targets` on the ray phi = 0.
pub fn transport_to_points(sol: &FieldSolution, theta: C64, targets: &[f64], opts: &MassiveOptions) -> Result<Vec<(V3, f64)>> {
    let p = &sol.params;
    let phi = adjusted_ray(p, theta);
    check_ray(p, phi)?;
    let rho_max = opts.rho_max.unwrap_or(sol.rho_max());
    let w = wkb_initial_vector(p, theta, rho_max, phi)?;
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut out = vec![([ZERO; 3], 0.0); targets.len()];
    let mut v = (w.dir, w.log_scale);
    if phi.abs() < 1e-14 {
        order.sort_by(|&a, &b| targets[b].partial_cmp(&targets[a]).unwrap());
        let mut r = rho_max;
        for &k in &order {
            v = transport_radial(sol, theta, 0.0, r, targets[k], v, opts.tol)?;
            r = targets[k];
            out[k] = v;
        }
    } else {
        order.sort_by(|&a, &b| targets[a].partial_cmp(&targets[b]).unwrap());
        let r0 = targets[order[0]];
        v = transport_radial(sol, theta, phi, rho_max, r0, v, opts.tol)?;
        v = transport_arc(sol, theta, r0, phi, 0.0, v, opts.tol)?;
        let mut r = r0;
        for &k in &order {
            v = transport_radial(sol, theta, 0.0, r, targets[k], v, opts.tol)?;
            r = targets[k];
            out[k] = v;
        }
    }
    Ok(out)
}

/// The vector solution subdominant for theta at an arbitrary point of the real slice:
/// inward along the adjusted ray to `rho`, then along the arc to `phi`.
pub fn transport_to_point(sol: &FieldSolution, theta: C64, rho: f64, phi: f64, opts: &MassiveOptions) -> Result<(V3, f64)> {
    let p = &sol.params;
    let ray = adjusted_ray(p, theta);
    check_ray(p, ray)?;
    let rho_max = opts.rho_max.unwrap_or(sol.rho_max());
    let w = wkb_initial_vector(p, theta, rho_max, ray)?;
    let v = transport_radial(sol, theta, ray, rho_max, rho, (w.dir, w.log_scale), opts.tol)?;
    if (phi - ray).abs() < 1e-15 {
        return Ok(v);
    }
    transport_arc(sol, theta, rho, ray, phi, v, opts.tol)
}

/// Largest relative mismatch between the transported vector and the vectors rebuilt from
/// the scalar `psi` (z-form) and from `psibar` (zbar-form), with derivatives taken by
/// central differences of step `h` in rho and `h / rho` in phi. Returns `(z_form, zbar_form)`.
pub fn vecsol_consistency(sol: &FieldSolution, theta: C64, rho: f64, phi: f64, h: f64, opts: &MassiveOptions) -> Result<(f64, f64)> {
    let hp = h / rho;
    let e0 = eta_eval(sol, rho, phi)?;
    let (v0, ls0) = transport_to_point(sol, theta, rho, phi, opts)?;
    let mut psi = [[ZERO; 3]; 3];
    let mut psib = [[ZERO; 3]; 3];
    for (i, di) in [-1.0, 0.0, 1.0].iter().enumerate() {
        for (j, dj) in [-1.0, 0.0, 1.0].iter().enumerate() {
            let (r, f) = (rho + di * h, phi + dj * hp);
            let (v, ls) = transport_to_point(sol, theta, r, f, opts)?;
            let eta = eta_eval(sol, r, f)?.eta;
            let sc = (ls - ls0).exp();
            psi[i][j] = (-theta * 1.5).exp() * (0.5 * eta).exp() * v[2] * sc;
            psib[i][j] = (theta * 1.5).exp() * (0.5 * eta).exp() * v[0] * sc;
        }
    }
    let derivs = |f: &[[C64; 3]; 3]| {
        let fr = (f[2][1] - f[0][1]) / (2.0 * h);
        let fp = (f[1][2] - f[1][0]) / (2.0 * hp);
        let frr = (f[2][1] - f[1][1] * 2.0 + f[0][1]) / (h * h);
        let fpp = (f[1][2] - f[1][1] * 2.0 + f[1][0]) / (hp * hp);
        let frp = (f[2][2] - f[2][0] - f[0][2] + f[0][0]) / (4.0 * h * hp);
        (f[1][1], fr, fp, frr, frp, fpp)
    };
    let eta_z = C64::from_polar(0.5, -phi) * C64::new(e0.d_rho, -e0.d_phi / rho);
    let eta_zb = eta_z.conj();
    let r2 = rho * rho;
    let eta_zz = C64::from_polar(0.25, -2.0 * phi)
        * C64::new(e0.d_rho_rho - e0.d_rho / rho - e0.d_phi_phi / r2, -2.0 * e0.d_rho_phi / rho + 2.0 * e0.d_phi / r2);
    let eta_zbzb = eta_zz.conj();
    let (f, fr, fp, frr, frp, fpp) = derivs(&psi);
    let f_z = C64::from_polar(0.5, -phi) * (fr - I * fp / rho);
    let f_zz = C64::from_polar(0.25, -2.0 * phi) * (frr - I * frp * 2.0 / rho + I * fp * 2.0 / r2 - fr / rho - fpp / r2);
    let lam_h = (theta * 0.5).exp();
    let em = (-0.5 * e0.eta).exp();
    let z_form = [
        (e0.eta * 0.5).exp() / lam_h * (f_zz - eta_z * f_z - eta_zz * f),
        -lam_h * (f_z - eta_z * f),
        lam_h * lam_h * lam_h * em * f,
    ];
    let (f, fr, fp, frr, frp, fpp) = derivs(&psib);
    let f_zb = C64::from_polar(0.5, phi) * (fr + I * fp / rho);
    let f_zbzb = C64::from_polar(0.25, 2.0 * phi) * (frr + I * frp * 2.0 / rho - I * fp * 2.0 / r2 - fr / rho - fpp / r2);
    let zb_form = [
        em * f / (lam_h * lam_h * lam_h),
        -(f_zb - eta_zb * f) / lam_h,
        lam_h * (e0.eta * 0.5).exp() * (f_zbzb - eta_zb * f_zb - eta_zbzb * f),
    ];
    let scale = vmax(&v0);
    let err = |w: &V3| (0..3).map(|i| (w[i] - v0[i]).norm()).fold(0.0, f64::max) / scale;
    Ok((err(&z_form), err(&zb_form)))
}

/// Scalar data `(psi, psi_z, psi_zz)` read off a vector solution at `z = rho e^{i phi}`.
pub fn scalar_from_vector(sol: &FieldSolution, theta: C64, rho: f64, phi: f64, v: &V3) -> Result<[C64; 3]> {
    let e = eta_eval(sol, rho, phi)?;
    let eta_z = C64::from_polar(0.5, -phi) * C64::new(e.d_rho, -e.d_phi / rho);
    let eta_zz = C64::from_polar(0.25, -2.0 * phi)
        * C64::new(
            e.d_rho_rho - e.d_rho / rho - e.d_phi_phi / (rho * rho),
            -2.0 * e.d_rho_phi / rho + 2.0 * e.d_phi / (rho * rho),
        );
    let psi = (-theta * 1.5).exp() * (0.5 * e.eta).exp() * v[2];
    let psi_z = eta_z * psi - (-theta * 0.5).exp() * v[1];
    let psi_zz = (theta * 0.5).exp() * (-0.5 * e.eta).exp() * v[0] + eta_z * psi_z + eta_zz * psi;
    Ok([psi, psi_z, psi_zz])
}

/// `psi_k = w^k psi(w^-k x, w^k xt, w^{-3ak} E, w^{3ak} Et)` and its first two x-derivatives
/// at the points `z = rho_j` of the real axis, with `x = z e^{theta/(a+1)}`.
pub fn massive_psi_k(sol: &FieldSolution, theta: C64, k: f64, rhos: &[f64], opts: &MassiveOptions) -> Result<Vec<[C64; 3]>> {
    let a = sol.params.alpha;
    let shifted = theta - I * (2.0 * PI * k / 3.0);
    let vs = transport_to_points(sol, shifted, rhos, opts)?;
    let pre = (theta / (a + 1.0)).exp();
    let dx = (-theta / (a + 1.0)).exp();
    let mut out = Vec::with_capacity(rhos.len());
    for (&rho, (dir, ls)) in rhos.iter().zip(vs) {
        let s = scalar_from_vector(sol, shifted, rho, 0.0, &dir)?;
        let f = pre * ls.exp();
        out.push([s[0] * f, s[1] * f * dx, s[2] * f * dx * dx]);
    }
    Ok(out)
}

/// `det(psi_k, psi_k', psi_k'')` for three shifts at the points `rhos`.
pub fn massive_wronskian(sol: &FieldSolution, theta: C64, ks: [f64; 3], rhos: &[f64], opts: &MassiveOptions) -> Result<Vec<C64>> {
    let cols: Vec<Vec<[C64; 3]>> = ks.iter().map(|&k| massive_psi_k(sol, theta, k, rhos, opts)).collect::<Result<_>>()?;
    Ok((0..rhos.len()).map(|j| det3(&from_columns(&[cols[0][j], cols[1][j], cols[2][j]]))).collect())
}

/// `u_{k1,k2} = psi_{k1} psi_{k2}' - psi_{k2} psi_{k1}'` at the points `rhos`.
pub fn massive_u(sol: &FieldSolution, theta: C64, k1: f64, k2: f64, rhos: &[f64], opts: &MassiveOptions) -> Result<Vec<C64>> {
    let a = massive_psi_k(sol, theta, k1, rhos, opts)?;
    let b = massive_psi_k(sol, theta, k2, rhos, opts)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x[0] * y[1] - y[0] * x[1]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wkb_trivial_point() {
        let p = ModelParams::new(1.0, 0.1, 0.0).unwrap();
        let w = wkb_initial_vector(&p, C64::new(0.0, 0.0), 3.0, 0.0).unwrap();
        let v = w.value();
        let expect = (-2.0 * 9.0 / 2.0f64).exp();
        for c in v {
            assert!((c - C64::new(expect, 0.0)).norm() < 1e-14 * expect);
        }
    }

    #[test]
    fn wkb_wedge() {
        let p = ModelParams::new(1.0, 0.1, 1.0).unwrap();
        assert!(wkb_initial_vector(&p, C64::new(0.0, 2.0), 10.0, 0.0).is_err());
        assert!(wkb_initial_vector(&p, C64::new(0.0, 2.0), 10.0, -1.0).is_ok());
    }

    #[test]
    fn frame_leading_and_resonance() {
        let p = ModelParams::new(1.0, 0.1, 1.0).unwrap();
        let f = origin_frame_with(&p, -0.3, C64::new(0.0, 0.0), 1e-12, 0.0, 4).unwrap();
        let expect = [[ZERO, ZERO, C64::new(1.0, 0.0)], [ZERO, C64::new(1.0, 0.0), ZERO], [C64::new(1.0, 0.0), ZERO, ZERO]];
        for j in 0..3 {
            for i in 0..3 {
                assert!((f.columns[j][i] - expect[j][i]).norm() < 1e-8);
            }
        }
        let p0 = ModelParams::new(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(origin_frame_with(&p0, 0.0, C64::new(0.0, 0.0), 1e-4, 0.0, 4), Err(Error::Resonance(_))));
    }

    #[test]
    fn frame_omega_covariance() {
        let p = ModelParams::new(1.0, 0.1, 1.0).unwrap();
        let th = C64::new(0.4, 0.1);
        let phi = 0.2;
        let sh = 2.0 * PI / 3.0;
        let a = origin_frame_with(&p, -0.3, th, 1e-3, phi, 5).unwrap();
        let b = origin_frame_with(&p, -0.3, th - I * sh, 1e-3, phi + sh, 5).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                assert!((a.columns[j][i] - b.columns[j][i]).norm() < 1e-12);
            }
        }
    }
}
