//! Q-function scans, quantum Wronskian and Bethe Ansatz residuals, zero search,
//! and the conformal-limit convergence study.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{conformal_q_triple, ConformalOptions, ConformalParams};
use crate::error::{Error, Result};
use crate::field::{solve_field, FieldConfig, FieldSolution};
use crate::massive::{compute_q_triple, to_chi_gauge, MassiveOptions};
use crate::numerics::roots::{find_zero, Root, RootOptions};
use crate::params::{omega_pow, scaling_map, ModelParams, C64, I};
use crate::qtriple::{QTriple, Which};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Massive,
    Conformal,
}

impl SourceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::Massive => "massive",
            SourceKind::Conformal => "conformal",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "massive" => Ok(SourceKind::Massive),
            "conformal" => Ok(SourceKind::Conformal),
            _ => Err(Error::Format(format!("unknown source '{s}'"))),
        }
    }
}

/// Anything that produces Q-triples as a function of theta.
pub trait QSource: Sync {
    fn kind(&self) -> SourceKind;
    fn alpha(&self) -> f64;
    fn g(&self) -> f64;
    fn eval(&self, theta: C64) -> Result<QTriple>;
}

/// Massive Q-functions, reported in the "chi-unit" gauge.
pub struct MassiveSource<'a> {
    pub sol: &'a FieldSolution,
    pub opts: MassiveOptions,
}

impl<'a> MassiveSource<'a> {
    pub fn new(sol: &'a FieldSolution) -> Self {
        MassiveSource { sol, opts: MassiveOptions::default() }
    }
}

impl QSource for MassiveSource<'_> {
    fn kind(&self) -> SourceKind {
        SourceKind::Massive
    }
    fn alpha(&self) -> f64 {
        self.sol.params.alpha
    }
    fn g(&self) -> f64 {
        self.sol.params.g
    }
    fn eval(&self, theta: C64) -> Result<QTriple> {
        let q = compute_q_triple(self.sol, theta, &self.opts)?;
        Ok(to_chi_gauge(&q, &self.sol.params, self.sol.eta0))
    }
}

pub struct ConformalSource {
    pub params: ConformalParams,
    pub opts: ConformalOptions,
}

impl ConformalSource {
    pub fn new(params: ConformalParams) -> Self {
        ConformalSource { params, opts: ConformalOptions::default() }
    }
}

impl QSource for ConformalSource {
    fn kind(&self) -> SourceKind {
        SourceKind::Conformal
    }
    fn alpha(&self) -> f64 {
        self.params.alpha
    }
    fn g(&self) -> f64 {
        self.params.g
    }
    fn eval(&self, theta: C64) -> Result<QTriple> {
        crate::conformal::conformal_q_at_theta(theta, &self.params, &self.opts)
    }
}

/// A source built from a closure; handy for injecting test functions.
pub struct FnSource<F> {
    pub kind: SourceKind,
    pub alpha: f64,
    pub g: f64,
    pub f: F,
}

impl<F: Fn(C64) -> Result<QTriple> + Sync> QSource for FnSource<F> {
    fn kind(&self) -> SourceKind {
        self.kind
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn g(&self) -> f64 {
        self.g
    }
    fn eval(&self, theta: C64) -> Result<QTriple> {
        (self.f)(theta)
    }
}

/// Imaginary shifts used by the quantum Wronskian and the Bethe equations.
pub fn standard_shifts() -> Vec<f64> {
    vec![0.0, PI / 3.0, -PI / 3.0, 2.0 * PI / 3.0, -2.0 * PI / 3.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Grid point before the shift.
    pub base: C64,
    pub shift: f64,
    pub q: std::result::Result<QTriple, String>,
}

impl ScanPoint {
    pub fn theta(&self) -> C64 {
        self.base + I * self.shift
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QZero {
    pub theta: C64,
    pub which: Which,
    pub abs_q: f64,
    pub bae: Option<C64>,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralScan {
    pub source: SourceKind,
    pub alpha: f64,
    pub g: f64,
    pub grid: Vec<C64>,
    pub shifts: Vec<f64>,
    pub points: Vec<ScanPoint>,
    pub zeros: Vec<QZero>,
}

impl SpectralScan {
    /// The triple at `theta` if the scan holds it.
    pub fn lookup(&self, theta: C64) -> Option<&QTriple> {
        self.points
            .iter()
            .find(|p| (p.theta() - theta).norm() < 1e-9 * theta.norm().max(1.0))
            .and_then(|p| p.q.as_ref().ok())
    }

    /// Unshifted values in grid order.
    pub fn base_values(&self) -> Vec<(C64, Option<&QTriple>)> {
        self.grid.iter().map(|&t| (t, self.lookup(t))).collect()
    }

    pub fn failures(&self) -> Vec<(C64, &str)> {
        self.points.iter().filter_map(|p| p.q.as_ref().err().map(|e| (p.theta(), e.as_str()))).collect()
    }
}

/// `n` equally spaced real points from `start` to `stop`.
pub fn linear_grid(start: f64, stop: f64, n: usize) -> Vec<C64> {
    match n {
        0 => Vec::new(),
        1 => vec![C64::new(start, 0.0)],
        _ => (0..n).map(|i| C64::new(start + (stop - start) * i as f64 / (n - 1) as f64, 0.0)).collect(),
    }
}

pub fn scan_q(source: &dyn QSource, grid: &[C64], shifts: &[f64]) -> Result<SpectralScan> {
    if grid.windows(2).any(|w| w[1].re <= w[0].re) {
        return Err(Error::InvalidParams("theta grid must be strictly increasing in its real part".into()));
    }
    let jobs: Vec<(C64, f64)> = grid.iter().flat_map(|&t| shifts.iter().map(move |&s| (t, s))).collect();
    let points = jobs
        .par_iter()
        .map(|&(base, shift)| ScanPoint { base, shift, q: source.eval(base + I * shift).map_err(|e| e.to_string()) })
        .collect();
    Ok(SpectralScan {
        source: source.kind(),
        alpha: source.alpha(),
        g: source.g(),
        grid: grid.to_vec(),
        shifts: shifts.to_vec(),
        points,
        zeros: Vec::new(),
    })
}

/// Relative residual of the quantum Wronskian from the three required triples.
pub fn qq_combination(alpha: f64, g: f64, q: &QTriple, q_up: &QTriple, q_down: &QTriple) -> C64 {
    let s3 = 3f64.sqrt();
    let lhs = I * s3 * q.q_plus;
    let t1 = q_up.q_plus * q_down.q_zero * omega_pow(alpha, -(g + 1.0) / 2.0);
    let t2 = omega_pow(alpha, (g + 1.0) / 2.0) * q_down.q_plus * q_up.q_zero;
    let norm = lhs.norm().max((t1 * (g + 1.0)).norm()).max((t2 * (g + 1.0)).norm());
    (lhs - (t1 - t2) * (g + 1.0)) / norm
}

pub fn qq_residual(scan: &SpectralScan, theta: C64) -> Result<C64> {
    let get = |t: C64| scan.lookup(t).ok_or_else(|| Error::Missing(format!("no Q data at theta = {t}")));
    let q = get(theta)?;
    let up = get(theta + I * (PI / 3.0))?;
    let down = get(theta - I * (PI / 3.0))?;
    Ok(qq_combination(scan.alpha, scan.g, q, up, down))
}

/// `ratio * w^{-+(g+1)} + 1` for the Bethe equation of Q+ or Q-.
pub fn bae_residual(source: &dyn QSource, theta_n: C64, which: Which) -> Result<C64> {
    let sign = match which {
        Which::Plus => 1.0,
        Which::Minus => -1.0,
        Which::Zero => return Err(Error::InvalidParams("no Bethe equation is asserted for Q0".into())),
    };
    let q = |d: f64| source.eval(theta_n + I * d).map(|t| t.get(which));
    let ratio = q(2.0 * PI / 3.0)? * q(-PI / 3.0)? / (q(-2.0 * PI / 3.0)? * q(PI / 3.0)?);
    Ok(ratio * omega_pow(source.alpha(), -sign * (source.g() + 1.0)) + 1.0)
}

#[derive(Clone, Copy, Debug)]
pub struct ZeroWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_max: f64,
}

impl ZeroWindow {
    pub fn new(re_min: f64, re_max: f64) -> Self {
        ZeroWindow { re_min, re_max, im_max: 0.2 }
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im.abs() < self.im_max
    }
}

#[derive(Clone, Debug, Default)]
pub struct ZeroSearch {
    pub zeros: Vec<QZero>,
    pub skipped: Vec<(C64, String)>,
}

/// Seeds from sign changes of the real part and from local minima of |Q| on the
/// unshifted grid, refined by complex secant iteration on the source.
pub fn find_q_zeros(scan: &SpectralScan, source: &dyn QSource, which: Which, window: ZeroWindow, tol: f64) -> ZeroSearch {
    let vals: Vec<(C64, C64)> = scan
        .base_values()
        .into_iter()
        .filter_map(|(t, q)| q.map(|q| (t, q.get(which))))
        .collect();
    let mut seeds = Vec::new();
    for i in 0..vals.len() {
        let (t, v) = vals[i];
        if i + 1 < vals.len() {
            let (t1, v1) = vals[i + 1];
            if v.re * v1.re < 0.0 && v.im.abs() < 0.1 * v.norm().max(1e-300) {
                seeds.push(t + (t1 - t) * (v.re / (v.re - v1.re)));
                continue;
            }
        }
        if i > 0 && i + 1 < vals.len() && v.norm() < vals[i - 1].1.norm() && v.norm() < vals[i + 1].1.norm() {
            seeds.push(t);
        }
    }
    let centre = C64::new(0.5 * (window.re_min + window.re_max), 0.0);
    let mut opts = RootOptions::new(tol);
    opts.window = Some((centre, 0.5 * (window.re_max - window.re_min), window.im_max));
    opts.delta = 1e-4;
    let results: Vec<(C64, Result<Root>)> = seeds
        .into_par_iter()
        .filter(|&seed| window.contains(seed))
        .map(|seed| (seed, find_zero(|t| source.eval(t).map(|q| q.get(which)), seed, &opts)))
        .collect();
    let mut out = ZeroSearch::default();
    for (seed, res) in results {
        match res {
            Ok(root) => {
                if !window.contains(root.z) {
                    continue;
                }
                if out.zeros.iter().any(|z| (z.theta - root.z).norm() < 1e-6) {
                    continue;
                }
                let warning = (root.z.im.abs() > 1e-8).then(|| format!("complex zero, Im theta = {:e}", root.z.im));
                out.zeros.push(QZero { theta: root.z, which, abs_q: root.f_abs, bae: None, warning });
            }
            Err(e) => out.skipped.push((seed, e.to_string())),
        }
    }
    out.zeros.sort_by(|a, b| a.theta.re.partial_cmp(&b.theta.re).unwrap());
    out
}

/// Finds zeros of the requested Q-functions in the window, attaches Bethe residuals to zeros of Q+ and Q-,
/// and stores them on the scan.
pub fn annotate_zeros(
    scan: &mut SpectralScan,
    source: &dyn QSource,
    which: &[Which],
    window: ZeroWindow,
    tol: f64,
) -> Vec<(C64, String)> {
    let mut skipped = Vec::new();
    let mut zeros = Vec::new();
    for &w in which {
        let found = find_q_zeros(scan, source, w, window, tol);
        skipped.extend(found.skipped);
        zeros.extend(found.zeros);
    }
    let residuals: Vec<Option<Result<C64>>> = zeros
        .par_iter()
        .map(|z| (z.which != Which::Zero).then(|| bae_residual(source, z.theta, z.which)))
        .collect();
    for (z, r) in zeros.iter_mut().zip(residuals) {
        match r {
            Some(Ok(r)) => z.bae = Some(r),
            Some(Err(e)) => skipped.push((z.theta, e.to_string())),
            None => {}
        }
    }
    zeros.sort_by(|a, b| a.theta.re.partial_cmp(&b.theta.re).unwrap());
    scan.zeros = zeros;
    skipped
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub s: f64,
    pub energy: C64,
    pub q_massive: C64,
    pub q_conformal: C64,
    pub ratio: C64,
    /// Ratio divided by the ratio at the first (largest) s.
    pub normalized: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalLimitTable {
    pub alpha: f64,
    pub g: f64,
    pub theta: C64,
    pub which: Which,
    pub rows: Vec<LimitRow>,
    /// `|normalized_i - normalized_{i-1}|` for consecutive members of the sequence.
    pub drift: Vec<f64>,
}

impl ConformalLimitTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.drift.windows(2).all(|w| w[1] < w[0])
    }
}

/// Massive versus conformal Q at fixed theta along a decreasing sequence of s.
pub fn conformal_limit_study(
    alpha: f64,
    g: f64,
    theta: C64,
    s_sequence: &[f64],
    which: Which,
    field: &FieldConfig,
    massive: &MassiveOptions,
    conformal: &ConformalOptions,
) -> Result<ConformalLimitTable> {
    if s_sequence.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParams("s sequence must be strictly decreasing".into()));
    }
    let cp = ConformalParams::new(alpha, g)?;
    let rows: Vec<Result<(f64, C64, C64, C64)>> = s_sequence
        .par_iter()
        .map(|&s| {
            let p = ModelParams::new(alpha, g, s)?;
            let sol = solve_field(&p, field)?;
            let src = MassiveSource { sol: &sol, opts: *massive };
            let qm = src.eval(theta)?.get(which);
            let (e, _) = scaling_map(theta, &p)?;
            let qc = conformal_q_triple(e, &cp, conformal)?.get(which);
            Ok((s, e, qm, qc))
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        let (s, energy, q_massive, q_conformal) = r?;
        let ratio = q_massive / q_conformal;
        out.push(LimitRow { s, energy, q_massive, q_conformal, ratio, normalized: ratio });
    }
    if let Some(r0) = out.first().map(|r| r.ratio) {
        for r in out.iter_mut() {
            r.normalized = r.ratio / r0;
        }
    }
    let drift = out.windows(2).map(|w| (w[1].normalized - w[0].normalized).norm()).collect();
    Ok(ConformalLimitTable { alpha, g, theta, which, rows: out, drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtriple::Gauge;

    fn quad_source() -> FnSource<impl Fn(C64) -> Result<QTriple> + Sync> {
        FnSource {
            kind: SourceKind::Conformal,
            alpha: 1.0,
            g: 0.1,
            f: |t: C64| {
                let v = (t - 0.7) * (t - 2.1);
                Ok(QTriple { theta: t, q_plus: v, q_zero: v, q_minus: v, gauge: Gauge::ChiUnit, cond: 1.0, drift: 0.0 })
            },
        }
    }

    #[test]
    fn quadratic_roots_recovered() {
        let src = quad_source();
        let scan = scan_q(&src, &linear_grid(0.0, 3.0, 13), &[0.0]).unwrap();
        let found = find_q_zeros(&scan, &src, Which::Plus, ZeroWindow::new(0.0, 3.0), 1e-13);
        assert_eq!(found.zeros.len(), 2);
        assert!((found.zeros[0].theta - 0.7).norm() < 1e-10);
        assert!((found.zeros[1].theta - 2.1).norm() < 1e-10);
    }

    #[test]
    fn single_point_scan() {
        let src = quad_source();
        let scan = scan_q(&src, &[C64::new(0.3, 0.0)], &[0.0]).unwrap();
        assert_eq!(scan.points.len(), 1);
        assert!(scan.lookup(C64::new(0.3, 0.0)).is_some());
        assert!(matches!(qq_residual(&scan, C64::new(0.3, 0.0)), Err(Error::Missing(_))));
    }

    #[test]
    fn grid_must_increase() {
        let src = quad_source();
        assert!(scan_q(&src, &[C64::new(1.0, 0.0), C64::new(0.5, 0.0)], &[0.0]).is_err());
    }

    #[test]
    fn no_bae_for_q0() {
        assert!(bae_residual(&quad_source(), C64::new(0.7, 0.0), Which::Zero).is_err());
    }
}
