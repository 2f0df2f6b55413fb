//! Newton relaxation of the modified Bullough-Dodd equation
//! `d_z d_zbar eta + e^{-eta} - p(z) p(zbar) e^{2 eta} = 0` on the cone.
//!
//! The field is expanded in cosine harmonics `eta = sum_m eta_m(rho) cos(3 a m phi)`
//! and each profile is discretized in `t = ln rho` with fourth-order differences.
//! Nonlinear terms are evaluated pseudo-spectrally on angular collocation points.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::banded::BandMatrix;
use crate::params::ModelParams;

pub const FIELD_FORMAT: &str = "odeim-bd/field/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub n_rho: usize,
    pub n_modes: usize,
    pub newton_max_iter: usize,
    pub newton_damping: f64,
    pub residual_tol: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            rho_min: 1e-4,
            rho_max: 12.0,
            n_rho: 2000,
            n_modes: 12,
            newton_max_iter: 60,
            newton_damping: 1.0,
            residual_tol: 1e-8,
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_min > 0.0 && self.rho_min < self.rho_max && self.rho_max.is_finite()) {
            return Err(Error::InvalidParams("need 0 < rho_min < rho_max".into()));
        }
        if self.n_rho < 8 {
            return Err(Error::InvalidParams("n_rho must be at least 8".into()));
        }
        if self.n_modes < 1 {
            return Err(Error::InvalidParams("n_modes must be at least 1".into()));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParams("residual_tol must be positive".into()));
        }
        if !(self.newton_damping > 0.0 && self.newton_damping <= 1.0) {
            return Err(Error::InvalidParams("newton_damping must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Solved field: radial profiles of the cosine harmonics plus local data at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSolution {
    pub params: ModelParams,
    pub rho: Vec<f64>,
    t: Vec<f64>,
    /// `modes[m][i]` is the coefficient of `cos(3 a m phi)` at `rho[i]`.
    pub modes: Vec<Vec<f64>>,
    pub residual: f64,
    pub eta0: f64,
    pub gamma: Vec<f64>,
    pub iterations: usize,
    pub closure_error: f64,
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldDocument {
    format: String,
    params: ModelParams,
    grid: Vec<f64>,
    modes: Vec<Vec<f64>>,
    eta0: f64,
    gamma: Vec<f64>,
    residual: f64,
}

/// Field value and derivatives at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EtaValue {
    pub eta: f64,
    pub d_rho: f64,
    pub d_phi: f64,
    pub d_rho_rho: f64,
    pub d_rho_phi: f64,
    pub d_phi_phi: f64,
}

impl FieldSolution {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn rho_min(&self) -> f64 {
        self.rho[0]
    }

    pub fn rho_max(&self) -> f64 {
        *self.rho.last().unwrap()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = FieldDocument {
            format: FIELD_FORMAT.to_string(),
            params: self.params,
            grid: self.rho.clone(),
            modes: self.modes.clone(),
            eta0: self.eta0,
            gamma: self.gamma.clone(),
            residual: self.residual,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: FieldDocument = serde_json::from_str(s)?;
        if doc.format != FIELD_FORMAT {
            return Err(Error::Format(format!("unsupported field format {:?}", doc.format)));
        }
        doc.params.validate()?;
        let n = doc.grid.len();
        if n < 8 || doc.modes.is_empty() || doc.modes.iter().any(|m| m.len() != n) {
            return Err(Error::Format("field grid and mode profiles have inconsistent sizes".into()));
        }
        if doc.grid.windows(2).any(|w| !(w[1] > w[0])) || doc.grid[0] <= 0.0 {
            return Err(Error::Format("field grid must be positive and strictly increasing".into()));
        }
        let t = doc.grid.iter().map(|r| r.ln()).collect();
        Ok(FieldSolution {
            params: doc.params,
            rho: doc.grid,
            t,
            modes: doc.modes,
            residual: doc.residual,
            eta0: doc.eta0,
            gamma: doc.gamma,
            iterations: 0,
            closure_error: 0.0,
            warnings: Vec::new(),
        })
    }
}

/// Weights of the interpolating polynomial and its first two derivatives at `z`.
fn fornberg(nodes: &[f64], z: f64) -> [Vec<f64>; 3] {
    let n = nodes.len();
    let mut c = vec![[0.0f64; 3]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    for i in 1..n {
        let mn = i.min(2);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    [c.iter().map(|w| w[0]).collect(), c.iter().map(|w| w[1]).collect(), c.iter().map(|w| w[2]).collect()]
}

const INTERP_POINTS: usize = 8;

/// Field value and derivatives at `(rho, phi)` from degree-7 interpolation in `ln rho`.
pub fn eta_eval(sol: &FieldSolution, rho: f64, phi: f64) -> Result<EtaValue> {
    let n = sol.rho.len();
    let slack = 1e-12 * sol.rho_max();
    if !(rho >= sol.rho[0] * (1.0 - 1e-12) && rho <= sol.rho_max() + slack) {
        return Err(Error::OutOfRange(format!(
            "rho = {rho} outside field grid [{}, {}]",
            sol.rho[0],
            sol.rho_max()
        )));
    }
    let t = rho.ln();
    let pos = sol.t.partition_point(|&x| x < t);
    let start = pos.saturating_sub(INTERP_POINTS / 2).min(n - INTERP_POINTS);
    let nodes = &sol.t[start..start + INTERP_POINTS];
    let w = fornberg(nodes, t);
    let ka = 3.0 * sol.params.alpha;
    let mut out = EtaValue::default();
    for (m, prof) in sol.modes.iter().enumerate() {
        let (mut f, mut ft, mut ftt) = (0.0, 0.0, 0.0);
        for k in 0..INTERP_POINTS {
            let v = prof[start + k];
            f += w[0][k] * v;
            ft += w[1][k] * v;
            ftt += w[2][k] * v;
        }
        let kap = ka * m as f64;
        let (sn, cs) = (kap * phi).sin_cos();
        out.eta += f * cs;
        out.d_rho += ft * cs / rho;
        out.d_rho_rho += (ftt - ft) * cs / (rho * rho);
        out.d_phi += -kap * f * sn;
        out.d_rho_phi += -kap * ft * sn / rho;
        out.d_phi_phi += -kap * kap * f * cs;
    }
    Ok(out)
}

/// Angular collocation for cosine series in `psi = 3 a phi`.
struct Collocation {
    n: usize,
    cos: Vec<Vec<f64>>,
    cos_psi: Vec<f64>,
}

impl Collocation {
    fn new(n_modes: usize) -> Self {
        let n = (4 * n_modes).max(16);
        let psi: Vec<f64> = (0..n).map(|j| PI * (j as f64 + 0.5) / n as f64).collect();
        let cos = (0..n_modes).map(|m| psi.iter().map(|p| (m as f64 * p).cos()).collect()).collect();
        Collocation { n, cos, cos_psi: psi.iter().map(|p| p.cos()).collect() }
    }

    fn weight(&self, m: usize) -> f64 {
        if m == 0 {
            1.0 / self.n as f64
        } else {
            2.0 / self.n as f64
        }
    }

    fn synth(&self, coef: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = coef.iter().enumerate().map(|(m, c)| c * self.cos[m][j]).sum();
        }
    }

    fn analyse(&self, vals: &[f64], m: usize) -> f64 {
        self.weight(m) * vals.iter().zip(&self.cos[m]).map(|(v, c)| v * c).sum::<f64>()
    }
}

/// `p(z) p(zbar)` on the real slice at radius `rho` and `cos(3 a phi) = c`.
fn pp(params: &ModelParams, rho: f64, c: f64) -> f64 {
    let a3 = 3.0 * params.alpha;
    let r3 = rho.powf(a3);
    let s3 = params.s.powf(a3);
    r3 * r3 - 2.0 * s3 * r3 * c + s3 * s3
}

/// Small-rho exponents and coefficients of the mode-0 expansion
/// `eta = -2 g ln rho + eta0 + sum c_k rho^{e_k}`.
fn inner_terms(params: &ModelParams, eta0: f64) -> [(f64, f64, f64); 3] {
    let (a, g, s) = (params.alpha, params.g, params.s);
    let e1 = 2.0 * g + 2.0;
    let e2 = 2.0 - 4.0 * g;
    let e3 = 6.0 * a - 4.0 * g + 2.0;
    let c1 = -(-eta0).exp() / ((g + 1.0) * (g + 1.0));
    let c2 = s.powf(6.0 * a) * (2.0 * eta0).exp() / ((1.0 - 2.0 * g) * (1.0 - 2.0 * g));
    let c3 = (2.0 * eta0).exp() / ((3.0 * a - 2.0 * g + 1.0) * (3.0 * a - 2.0 * g + 1.0));
    // (exponent, coefficient, d coefficient / d eta0)
    [(e1, c1, -c1), (e2, c2, 2.0 * c2), (e3, c3, 2.0 * c3)]
}

struct Problem<'a> {
    params: &'a ModelParams,
    t: Vec<f64>,
    h: f64,
    m: usize,
    col: Collocation,
    kappa: Vec<f64>,
    eta_inf_tail: Vec<Vec<f64>>,
}

const D2_IN: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D2_EDGE: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
const D1_EDGE: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];

impl<'a> Problem<'a> {
    fn new(params: &'a ModelParams, cfg: &FieldConfig) -> Self {
        let n = cfg.n_rho;
        let t0 = cfg.rho_min.ln();
        let t1 = cfg.rho_max.ln();
        let h = (t1 - t0) / (n - 1) as f64;
        let t: Vec<f64> = (0..n).map(|i| if i == n - 1 { t1 } else { t0 + h * i as f64 }).collect();
        let col = Collocation::new(cfg.n_modes);
        let kappa = (0..cfg.n_modes).map(|m| 3.0 * params.alpha * m as f64).collect();
        let mut prob = Problem { params, t, h, m: cfg.n_modes, col, kappa, eta_inf_tail: Vec::new() };
        prob.eta_inf_tail = (n - 5..n).map(|i| prob.eta_inf_modes(prob.t[i])).collect();
        prob
    }

    fn n(&self) -> usize {
        self.t.len()
    }

    /// Mode coefficients of the large-rho profile `-ln(p pbar)/3`.
    fn eta_inf_modes(&self, t: f64) -> Vec<f64> {
        let rho = t.exp();
        let vals: Vec<f64> = self.col.cos_psi.iter().map(|&c| -pp(self.params, rho, c).ln() / 3.0).collect();
        (0..self.m).map(|m| self.col.analyse(&vals, m)).collect()
    }

    /// Nonlinear term `4 e^{2t} N_m` and (optionally) its Jacobian block; also its scale.
    fn nonlinear(&self, i: usize, eta: &[f64], jac: Option<&mut Vec<f64>>) -> (Vec<f64>, f64) {
        let m = self.m;
        let t = self.t[i];
        let rho = t.exp();
        let nc = self.col.n;
        let mut field = vec![0.0; nc];
        self.col.synth(&eta[i * m..(i + 1) * m], &mut field);
        let mut nl = vec![0.0; nc];
        let mut dn = vec![0.0; nc];
        let mut scale = 0.0f64;
        for j in 0..nc {
            let e1 = 4.0 * (2.0 * t - field[j]).exp();
            let e2 = 4.0 * pp(self.params, rho, self.col.cos_psi[j]) * (2.0 * t + 2.0 * field[j]).exp();
            nl[j] = e1 - e2;
            dn[j] = -e1 - 2.0 * e2;
            scale = scale.max(e1 + e2);
        }
        let f = (0..m).map(|k| self.col.analyse(&nl, k)).collect();
        if let Some(jb) = jac {
            jb.clear();
            jb.resize(m * m, 0.0);
            for a in 0..m {
                for b in a..m {
                    let s: f64 = (0..nc).map(|j| dn[j] * self.col.cos[a][j] * self.col.cos[b][j]).sum();
                    jb[a * m + b] = self.col.weight(a) * s;
                    jb[b * m + a] = self.col.weight(b) * s;
                }
            }
        }
        (f, scale)
    }

    fn inner_row(&self, eta: &[f64], k: usize) -> (f64, Vec<(usize, f64)>) {
        let m = self.m;
        let h = self.h;
        let t0 = self.t[0];
        let rho0 = t0.exp();
        let mut d1 = 0.0;
        let mut cols: Vec<(usize, f64)> = Vec::new();
        for (q, w) in D1_EDGE.iter().enumerate() {
            d1 += w * eta[q * m + k] / (12.0 * h);
            cols.push((q * m + k, w / (12.0 * h)));
        }
        let g = self.params.g;
        let eta0 = eta[0] + 2.0 * g * t0;
        if k == 0 {
            let mut target = -2.0 * g;
            let mut dtarget = 0.0;
            for (e, c, dc) in inner_terms(self.params, eta0) {
                target += e * c * rho0.powf(e);
                dtarget += e * dc * rho0.powf(e);
            }
            cols[0].1 -= dtarget;
            (d1 - target, cols)
        } else {
            let kap = self.kappa[k];
            let mut r = d1 - kap * eta[k];
            cols[0].1 -= kap;
            if k == 1 && self.params.s > 0.0 {
                let a3 = 3.0 * self.params.alpha;
                let ep = a3 + 2.0 - 4.0 * g;
                let d = -8.0 * self.params.s.powf(a3) * (2.0 * eta0).exp() / (ep * ep - kap * kap);
                let term = (ep - kap) * d * rho0.powf(ep);
                r -= term;
                cols.push((0, -2.0 * term));
            }
            (r, cols)
        }
    }

    fn outer_row(&self, eta: &[f64], k: usize) -> (f64, Vec<(usize, f64)>) {
        let m = self.m;
        let n = self.n();
        let h = self.h;
        let rho = self.t[n - 1].exp();
        let a = self.params.alpha;
        let s6 = self.params.s.powf(6.0 * a);
        let decay = (self.kappa[k].powi(2) + 12.0 * rho * rho * (rho.powf(6.0 * a) + s6).cbrt()).sqrt();
        let mut r = 0.0;
        let mut cols = Vec::new();
        for (q, w) in D1_EDGE.iter().enumerate() {
            let i = n - 1 - q;
            let delta = eta[i * m + k] - self.eta_inf_tail[4 - q][k];
            r -= w * delta / (12.0 * h);
            cols.push((i * m + k, -w / (12.0 * h)));
        }
        let delta = eta[(n - 1) * m + k] - self.eta_inf_tail[4][k];
        r += decay * delta;
        cols[0].1 += decay;
        (r, cols)
    }

    /// Residual vector, scaled residual maximum and (optionally) the Jacobian.
    fn assemble(&self, eta: &[f64], want_jac: bool) -> (Vec<f64>, f64, Option<BandMatrix>) {
        let n = self.n();
        let m = self.m;
        let h2 = 12.0 * self.h * self.h;
        let bw = 5 * m;
        let mut jac = if want_jac { Some(BandMatrix::new(n * m, bw, bw)) } else { None };
        let mut res = vec![0.0; n * m];
        let mut worst = 0.0f64;
        let mut block = Vec::new();
        for k in 0..m {
            for (row, (r, cols)) in [(k, self.inner_row(eta, k)), ((n - 1) * m + k, self.outer_row(eta, k))] {
                res[row] = r;
                worst = worst.max(r.abs() * self.h);
                if let Some(j) = jac.as_mut() {
                    for (c, v) in cols {
                        j.add(row, c, v);
                    }
                }
            }
        }
        for i in 1..n - 1 {
            let (f, scale) = self.nonlinear(i, eta, if want_jac { Some(&mut block) } else { None });
            let (offs, wts): (Vec<isize>, &[f64]) = if i == 1 {
                (vec![-1, 0, 1, 2, 3, 4], &D2_EDGE)
            } else if i == n - 2 {
                (vec![1, 0, -1, -2, -3, -4], &D2_EDGE)
            } else {
                (vec![-2, -1, 0, 1, 2], &D2_IN)
            };
            for k in 0..m {
                let row = i * m + k;
                let mut d2 = 0.0;
                let mut d2_size = 0.0;
                for (o, w) in offs.iter().zip(wts) {
                    let col = (i as isize + o) as usize * m + k;
                    d2 += w * eta[col] / h2;
                    d2_size += (w * eta[col]).abs() / h2;
                    if let Some(j) = jac.as_mut() {
                        j.add(row, col, w / h2);
                    }
                }
                let kap2 = self.kappa[k] * self.kappa[k];
                let r = d2 - kap2 * eta[row] + f[k];
                res[row] = r;
                worst = worst.max(r.abs() / (1.0 + scale + kap2 * eta[row].abs() + d2_size));
                if let Some(j) = jac.as_mut() {
                    j.add(row, row, -kap2);
                    for q in 0..m {
                        j.add(row, i * m + q, block[k * m + q]);
                    }
                }
            }
        }
        (res, worst, jac)
    }
}

fn initial_guess(params: &ModelParams, t: &[f64], m: usize) -> Vec<f64> {
    let (a, g) = (params.alpha, params.g);
    let centre = if params.s > 0.0 { params.s.ln() } else { 0.0 };
    let mut eta = vec![0.0; t.len() * m];
    for (i, &ti) in t.iter().enumerate() {
        let sigma = 1.0 / (1.0 + (-4.0 * (ti - centre)).exp());
        eta[i * m] = -2.0 * (g + (a - g) * sigma) * ti;
    }
    eta
}

/// Warnings for exponent collisions of g+1 or 1-2g with the lattice {3j + 3 a n}.
pub fn resonance_warnings(params: &ModelParams) -> Vec<String> {
    let mut out = Vec::new();
    for (name, v) in [("g+1", params.g + 1.0), ("1-2g", 1.0 - 2.0 * params.g)] {
        'outer: for j in 0..12 {
            for n in 0..12 {
                let l = 3.0 * j as f64 + 3.0 * params.alpha * n as f64;
                if (v - l).abs() < 1e-6 {
                    out.push(format!("{name} = {v} is resonant with 3*{j} + 3*alpha*{n}"));
                    break 'outer;
                }
            }
        }
    }
    out
}

/// Estimated size of the first terms neglected by the boundary closures.
fn closure_estimate(params: &ModelParams, cfg: &FieldConfig, eta0: f64) -> f64 {
    let terms = inner_terms(params, eta0);
    let r0 = cfg.rho_min;
    let lead = terms.iter().map(|(e, c, _)| c.abs() * r0.powf(*e)).fold(0.0, f64::max);
    let min_e = terms.iter().map(|t| t.0).fold(f64::INFINITY, f64::min);
    let inner = lead * r0.powf(min_e).max(r0.powf(2.0 - 4.0 * params.g));
    let a = params.alpha;
    let r1 = cfg.rho_max;
    let outer = (params.s / r1).powf(3.0 * a) * (-(12f64).sqrt() * r1.powf(a + 1.0) / (a + 1.0)).exp();
    inner.max(outer)
}

pub fn solve_field(params: &ModelParams, config: &FieldConfig) -> Result<FieldSolution> {
    params.validate()?;
    config.validate()?;
    let prob = Problem::new(params, config);
    let m = config.n_modes;
    let mut eta = initial_guess(params, &prob.t, m);
    let (mut res, mut worst, _) = prob.assemble(&eta, false);
    let mut iterations = 0;
    while worst > config.residual_tol {
        if iterations >= config.newton_max_iter {
            return Err(Error::NoConvergence { iterations, last: worst });
        }
        iterations += 1;
        let (_, _, jac) = prob.assemble(&eta, true);
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let step = jac.unwrap().solve(&rhs)?;
        let mut lam = config.newton_damping;
        let norm0: f64 = res.iter().map(|r| r * r).sum::<f64>();
        loop {
            let trial: Vec<f64> = eta.iter().zip(&step).map(|(e, d)| e + lam * d).collect();
            let (r2, w2, _) = prob.assemble(&trial, false);
            let norm1: f64 = r2.iter().map(|r| r * r).sum::<f64>();
            if (norm1 < norm0 || w2 < worst) && norm1.is_finite() {
                eta = trial;
                res = r2;
                worst = w2;
                break;
            }
            lam *= 0.5;
            if lam < 1e-6 {
                return Err(Error::NoConvergence { iterations, last: worst });
            }
        }
    }
    let n = prob.n();
    let modes: Vec<Vec<f64>> = (0..m).map(|k| (0..n).map(|i| eta[i * m + k]).collect()).collect();
    let rho: Vec<f64> = prob.t.iter().map(|t| t.exp()).collect();
    let mut warnings = resonance_warnings(params);
    let eta0_guess = modes[0][0] + 2.0 * params.g * prob.t[0];
    let closure_error = closure_estimate(params, config, eta0_guess);
    if closure_error > config.residual_tol {
        return Err(Error::Closure { error: closure_error });
    }
    let mut sol = FieldSolution {
        params: *params,
        rho,
        t: prob.t.clone(),
        modes,
        residual: worst,
        eta0: eta0_guess,
        gamma: Vec::new(),
        iterations,
        closure_error,
        warnings: Vec::new(),
    };
    match local_expansion_coeffs(&sol) {
        Ok(lc) => {
            sol.eta0 = lc.eta0;
            sol.gamma = lc.gamma;
        }
        Err(e) => warnings.push(format!("local expansion fit skipped: {e}")),
    }
    sol.warnings = warnings;
    Ok(sol)
}

/// Fitted small-rho data of the solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalCoeffs {
    pub eta0: f64,
    pub gamma: Vec<f64>,
    /// Fitted coefficient of `rho^{2(g+1)}` in mode 0.
    pub c1_fit: f64,
    /// `-e^{-eta0}/(g+1)^2`.
    pub c1_predicted: f64,
    /// Fitted coefficient of `rho^{2(1-2g)}` in mode 0.
    pub c2_fit: f64,
    /// `-s^{6a} e^{2 eta0}/(1-2g)^2`.
    pub c2_predicted: f64,
    pub condition: f64,
}

fn lstsq(x: &[f64], y: &[f64], exps: &[f64]) -> Result<(Vec<f64>, f64)> {
    let a = DMatrix::from_fn(x.len(), exps.len(), |i, j| x[i].powf(exps[j]));
    let norms: Vec<f64> = (0..exps.len()).map(|j| a.column(j).norm()).collect();
    let mut scaled = a.clone();
    for (j, nj) in norms.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / nj);
    }
    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::IllConditioned(format!("local fit condition number {cond:e}")));
    }
    let sol = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    Ok(((0..exps.len()).map(|j| sol[j] / norms[j]).collect(), cond))
}

fn dedup_exponents(list: &[f64]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for &e in list {
        if let Some(&f) = out.iter().find(|&&f| (f - e).abs() < 1e-6) {
            if (f - e).abs() > 1e-12 {
                return Err(Error::Resonance(format!("expansion exponents {f} and {e} nearly collide")));
            }
            continue;
        }
        out.push(e);
    }
    Ok(out)
}

/// Fits the small-rho behaviour of mode 0 to
/// `-2g ln rho + eta0 + c1 rho^{2g+2} + c2 rho^{2-4g} + ...` and mode k to `2 gamma_k rho^{3ak} + ...`.
pub fn local_expansion_coeffs(sol: &FieldSolution) -> Result<LocalCoeffs> {
    let p = &sol.params;
    let (a, g) = (p.alpha, p.g);
    let e1 = 2.0 * g + 2.0;
    let e2 = 2.0 - 4.0 * g;
    let e3 = 6.0 * a - 4.0 * g + 2.0;
    if (e1 - e2).abs() < 1e-6 {
        return Err(Error::Resonance(format!("exponents 2g+2 and 2-4g collide at g = {g}")));
    }
    let rho_fit = 0.3f64.min(0.3 * p.s.max(1.0));
    let idx: Vec<usize> = (0..sol.rho.len()).filter(|&i| sol.rho[i] <= rho_fit).collect();
    if idx.len() < 20 {
        return Err(Error::IllConditioned("too few grid points below the fit radius".into()));
    }
    let x: Vec<f64> = idx.iter().map(|&i| sol.rho[i]).collect();
    let y0: Vec<f64> = idx.iter().map(|&i| sol.modes[0][i] + 2.0 * g * sol.t[i]).collect();
    let mut raw = vec![0.0, e2, e1, e3, 2.0 * e2, e1 + e2, 2.0 * e1];
    if p.s == 0.0 {
        raw.retain(|&e| e != e2 && e != 2.0 * e2 && e != e1 + e2);
    }
    let exps = dedup_exponents(&raw)?;
    let (coef, cond) = lstsq(&x, &y0, &exps)?;
    let pick = |e: f64| exps.iter().position(|&f| (f - e).abs() < 1e-12).map(|k| coef[k]).unwrap_or(0.0);
    let eta0 = coef[0];
    let c3 = (2.0 * eta0).exp() / ((3.0 * a - 2.0 * g + 1.0) * (3.0 * a - 2.0 * g + 1.0));
    let c1_fit = pick(e1) - if (e3 - e1).abs() < 1e-12 { c3 } else { 0.0 };
    let c2_fit = pick(e2) - if (e3 - e2).abs() < 1e-12 { c3 } else { 0.0 };
    let mut gamma = Vec::new();
    let mut worst = cond;
    for k in 1..sol.n_modes().min(4) {
        let base = 3.0 * a * k as f64;
        let yk: Vec<f64> = idx.iter().map(|&i| sol.modes[k][i]).collect();
        let list = dedup_exponents(&[base, base + e2, base + e1, base + 2.0 * e2])?;
        match lstsq(&x, &yk, &list) {
            Ok((c, cn)) => {
                gamma.push(c[0] / 2.0);
                worst = worst.max(cn);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(LocalCoeffs {
        eta0,
        gamma,
        c1_fit,
        c1_predicted: -(-eta0).exp() / ((g + 1.0) * (g + 1.0)),
        c2_fit,
        c2_predicted: -p.s.powf(6.0 * a) * (2.0 * eta0).exp() / ((1.0 - 2.0 * g) * (1.0 - 2.0 * g)),
        condition: worst,
    })
}

/// Residual of the field equation at midpoints between grid nodes (and at `n_phi` angles),
/// using derivatives of the interpolant; scaled like the solver residual.
pub fn verify_residual(sol: &FieldSolution, n_phi: usize) -> Result<f64> {
    let p = &sol.params;
    let sector = 2.0 * PI / (3.0 * p.alpha);
    let mut worst = 0.0f64;
    for i in 4..sol.rho.len() - 5 {
        let rho = (0.5 * (sol.t[i] + sol.t[i + 1])).exp();
        for j in 0..n_phi {
            let phi = sector * j as f64 / n_phi as f64;
            let v = eta_eval(sol, rho, phi)?;
            let lap = v.d_rho_rho + v.d_rho / rho + v.d_phi_phi / (rho * rho);
            let c = (3.0 * p.alpha * phi).cos();
            let e1 = (-v.eta).exp();
            let e2 = pp(p, rho, c) * (2.0 * v.eta).exp();
            let r = 0.25 * lap + e1 - e2;
            worst = worst.max((4.0 * rho * rho * r).abs() / (1.0 + 4.0 * rho * rho * (e1 + e2)));
        }
    }
    Ok(worst)
}

/// Second-order finite-difference residual on a uniform (ln rho, phi) grid built from
/// the mode profiles at the solver nodes.
pub fn fd_residual_2d(sol: &FieldSolution, n_phi: usize) -> f64 {
    let p = &sol.params;
    let sector = 2.0 * PI / (3.0 * p.alpha);
    let dphi = sector / n_phi as f64;
    let ka = 3.0 * p.alpha;
    let value = |i: usize, phi: f64| -> f64 {
        sol.modes.iter().enumerate().map(|(m, prof)| prof[i] * (ka * m as f64 * phi).cos()).sum()
    };
    let mut worst = 0.0f64;
    for i in 1..sol.rho.len() - 1 {
        let rho = sol.rho[i];
        let (hm, hp) = (sol.t[i] - sol.t[i - 1], sol.t[i + 1] - sol.t[i]);
        for j in 0..n_phi {
            let phi = j as f64 * dphi;
            let e = value(i, phi);
            let ett = 2.0 * (value(i + 1, phi) * hm + value(i - 1, phi) * hp - e * (hm + hp)) / (hm * hp * (hm + hp));
            let epp = (value(i, phi + dphi) - 2.0 * e + value(i, phi - dphi)) / (dphi * dphi);
            let e1 = (-e).exp();
            let e2 = pp(p, rho, (ka * phi).cos()) * (2.0 * e).exp();
            let r = (ett + epp) + 4.0 * rho * rho * (e1 - e2);
            worst = worst.max(r.abs() / (1.0 + 4.0 * rho * rho * (e1 + e2)));
        }
    }
    worst
}
