//! Adaptive Runge-Kutta-Fehlberg 7(8) transport of linear systems `dv/dt = -A(t) v`.
//!
//! The state is renormalized after every accepted step and carried as a unit
//! direction plus an accumulated log-scale, so exponentially growing or
//! decaying solutions never overflow.

use super::linalg::{is_finite_m, mat_vec, vnorm, M3, V3, ZERO};
use crate::error::{Error, Result};
use crate::params::C64;

const C: [f64; 13] = [
    0.0,
    2.0 / 27.0,
    1.0 / 9.0,
    1.0 / 6.0,
    5.0 / 12.0,
    0.5,
    5.0 / 6.0,
    1.0 / 6.0,
    2.0 / 3.0,
    1.0 / 3.0,
    1.0,
    0.0,
    1.0,
];

const A: [[f64; 12]; 13] = [
    [0.0; 12],
    [2.0 / 27.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 36.0, 1.0 / 12.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 24.0, 0.0, 1.0 / 8.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 20.0, 0.0, 0.0, 1.0 / 4.0, 1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-25.0 / 108.0, 0.0, 0.0, 125.0 / 108.0, -65.0 / 27.0, 125.0 / 54.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [31.0 / 300.0, 0.0, 0.0, 0.0, 61.0 / 225.0, -2.0 / 9.0, 13.0 / 900.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.0, 0.0, 0.0, -53.0 / 6.0, 704.0 / 45.0, -107.0 / 9.0, 67.0 / 90.0, 3.0, 0.0, 0.0, 0.0, 0.0],
    [-91.0 / 108.0, 0.0, 0.0, 23.0 / 108.0, -976.0 / 135.0, 311.0 / 54.0, -19.0 / 60.0, 17.0 / 6.0, -1.0 / 12.0, 0.0, 0.0, 0.0],
    [2383.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -301.0 / 82.0, 2133.0 / 4100.0, 45.0 / 82.0, 45.0 / 164.0, 18.0 / 41.0, 0.0, 0.0],
    [3.0 / 205.0, 0.0, 0.0, 0.0, 0.0, -6.0 / 41.0, -3.0 / 205.0, -3.0 / 41.0, 3.0 / 41.0, 6.0 / 41.0, 0.0, 0.0],
    [-1777.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -289.0 / 82.0, 2193.0 / 4100.0, 51.0 / 82.0, 33.0 / 164.0, 12.0 / 41.0, 0.0, 1.0],
];

const B: [f64; 11] = [
    41.0 / 840.0,
    0.0,
    0.0,
    0.0,
    0.0,
    34.0 / 105.0,
    9.0 / 35.0,
    9.0 / 35.0,
    9.0 / 280.0,
    9.0 / 280.0,
    41.0 / 840.0,
];

#[derive(Clone, Debug)]
pub struct RayOptions {
    pub tol: f64,
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl RayOptions {
    pub fn new(tol: f64) -> Self {
        RayOptions { tol, h_init: None, h_max: None, max_steps: 200_000 }
    }
}

/// Accepted steps of a transport: unit directions, their t-derivatives in the
/// same scale, and the log of the dropped scale factor.
#[derive(Clone, Debug)]
pub struct RayTrajectory {
    pub t: Vec<f64>,
    pub dir: Vec<V3>,
    pub deriv: Vec<V3>,
    pub log_scale: Vec<f64>,
    pub tol: f64,
    pub max_error_estimate: f64,
    pub rejected: usize,
}

impl RayTrajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Unscaled state at grid point `i` (may overflow for large log-scales).
    pub fn state(&self, i: usize) -> V3 {
        let f = self.log_scale[i].exp();
        [self.dir[i][0] * f, self.dir[i][1] * f, self.dir[i][2] * f]
    }

    pub fn end_scaled(&self) -> (V3, f64) {
        let n = self.len() - 1;
        (self.dir[n], self.log_scale[n])
    }

    pub fn end(&self) -> V3 {
        self.state(self.len() - 1)
    }

    /// Cubic Hermite dense output; returns (direction, log-scale).
    pub fn sample(&self, t: f64) -> Result<(V3, f64)> {
        let n = self.len();
        let forward = self.t[n - 1] >= self.t[0];
        let (lo, hi) = if forward { (self.t[0], self.t[n - 1]) } else { (self.t[n - 1], self.t[0]) };
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if t < lo - slack || t > hi + slack {
            return Err(Error::OutOfRange(format!("t = {t} outside trajectory [{lo}, {hi}]")));
        }
        if n == 1 {
            return Ok((self.dir[0], self.log_scale[0]));
        }
        let pos = if forward {
            self.t.partition_point(|&x| x < t)
        } else {
            self.t.partition_point(|&x| x > t)
        };
        let i = pos.clamp(1, n - 1) - 1;
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let r = ((self.log_scale[i + 1] - self.log_scale[i]) as f64).exp();
        let u = (t - t0) / h;
        let h00 = 2.0 * u * u * u - 3.0 * u * u + 1.0;
        let h10 = u * u * u - 2.0 * u * u + u;
        let h01 = -2.0 * u * u * u + 3.0 * u * u;
        let h11 = u * u * u - u * u;
        let mut v = [ZERO; 3];
        for c in 0..3 {
            v[c] = self.dir[i][c] * h00
                + self.deriv[i][c] * (h10 * h)
                + self.dir[i + 1][c] * (h01 * r)
                + self.deriv[i + 1][c] * (h11 * h * r);
        }
        Ok((v, self.log_scale[i]))
    }
}

fn rhs<F: Fn(f64) -> M3>(system: &F, t: f64, v: &V3) -> Result<V3> {
    let a = system(t);
    if !is_finite_m(&a) {
        return Err(Error::NonFinite { t });
    }
    let av = mat_vec(&a, v);
    Ok([-av[0], -av[1], -av[2]])
}

/// Transports `v0` with `dv/dt = -A(t) v` from `t_start` to `t_end`.
/// The error per step is kept below `tol * h / |t_end - t_start|` relative to the state.
pub fn integrate_ray<F: Fn(f64) -> M3>(system: F, t_start: f64, t_end: f64, v0: V3, tol: f64) -> Result<RayTrajectory> {
    integrate_ray_opts(&system, t_start, t_end, v0, 0.0, &RayOptions::new(tol))
}

/// As [`integrate_ray`], with an initial log-scale (the state is `v0 * exp(log0)`).
pub fn integrate_ray_opts<F: Fn(f64) -> M3>(
    system: &F,
    t_start: f64,
    t_end: f64,
    v0: V3,
    log0: f64,
    opts: &RayOptions,
) -> Result<RayTrajectory> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let n0 = vnorm(&v0);
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(Error::InvalidParams("initial vector must be finite and nonzero".into()));
    }
    let mut v = [v0[0] / n0, v0[1] / n0, v0[2] / n0];
    let mut ls = log0 + n0.ln();
    let mut t = t_start;
    let span = t_end - t_start;
    let dirn = span.signum();
    let mut f = rhs(system, t, &v)?;
    let mut traj = RayTrajectory {
        t: vec![t],
        dir: vec![v],
        deriv: vec![f],
        log_scale: vec![ls],
        tol: opts.tol,
        max_error_estimate: 0.0,
        rejected: 0,
    };
    if span == 0.0 {
        return Ok(traj);
    }
    let h_max = opts.h_max.unwrap_or(span.abs()).min(span.abs());
    let mut h = match opts.h_init {
        Some(h) => h.abs(),
        None => {
            let fn_ = vnorm(&f).max(1e-300);
            (0.25 * opts.tol.powf(0.125) / fn_).min(span.abs() / 8.0)
        }
    }
    .min(h_max);
    let mut k = [[ZERO; 3]; 13];
    let mut steps = 0usize;
    while (t_end - t) * dirn > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepUnderflow { t });
        }
        let remaining = (t_end - t).abs();
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::StepUnderflow { t });
        }
        let hs = h * dirn;
        k[0] = f;
        for s in 1..13 {
            let mut y = v;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for c in 0..3 {
                        y[c] += kj[c] * (a * hs);
                    }
                }
            }
            k[s] = rhs(system, t + C[s] * hs, &y)?;
        }
        let mut vn = v;
        let mut err = 0.0f64;
        for c in 0..3 {
            let mut acc = C64::new(0.0, 0.0);
            for (s, b) in B.iter().enumerate() {
                if *b != 0.0 {
                    acc += k[s][c] * *b;
                }
            }
            vn[c] += acc * hs;
            let e = (k[0][c] + k[10][c] - k[11][c] - k[12][c]) * (41.0 / 840.0 * hs);
            err = err.max(e.norm());
        }
        let nrm = vnorm(&vn);
        if !nrm.is_finite() {
            return Err(Error::NonFinite { t });
        }
        let ratio = err / (opts.tol * nrm.max(1.0) * (h / span.abs()).min(1.0));
        if ratio <= 1.0 {
            t = if last { t_end } else { t + hs };
            v = [vn[0] / nrm, vn[1] / nrm, vn[2] / nrm];
            ls += nrm.ln();
            f = rhs(system, t, &v)?;
            traj.t.push(t);
            traj.dir.push(v);
            traj.deriv.push(f);
            traj.log_scale.push(ls);
            traj.max_error_estimate = traj.max_error_estimate.max(err / nrm);
            let fac = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.125)).clamp(0.2, 5.0) };
            h = (h * fac).min(h_max);
        } else {
            traj.rejected += 1;
            h *= (0.9 * ratio.powf(-0.125)).clamp(0.1, 0.9);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::{zero3, ONE};

    #[test]
    fn scalar_growth() {
        let a = |_t: f64| {
            let mut m = zero3();
            for i in 0..3 {
                m[i][i] = -ONE;
            }
            m
        };
        let tr = integrate_ray(a, 0.0, 1.0, [ONE; 3], 1e-12).unwrap();
        let v = tr.end();
        for c in v {
            assert!((c - C64::new(std::f64::consts::E, 0.0)).norm() < 1e-10);
        }
        let (d, l) = tr.sample(0.5).unwrap();
        let val = d[0] * l.exp();
        assert!((val.re - 0.5f64.exp()).abs() < 1e-4);
    }

    #[test]
    fn backward_and_renormalized() {
        let i = C64::new(0.0, 1.0);
        let a = move |t: f64| {
            let mut m = zero3();
            m[0][0] = i * t;
            m[0][1] = i;
            m[1][0] = i;
            m[1][2] = i * 0.5;
            m[2][1] = i * 0.5;
            m[2][2] = -i * t;
            m
        };
        let v0 = [ONE, C64::new(0.3, 0.1), C64::new(-0.2, 0.0)];
        let tol = 1e-11;
        let fwd = integrate_ray(a, 0.0, 6.0, v0, tol).unwrap();
        let back = integrate_ray(a, 6.0, 0.0, fwd.end(), tol).unwrap();
        let w = back.end();
        for c in 0..3 {
            assert!((w[c] - v0[c]).norm() < 10.0 * tol * vnorm(&v0), "{:?} vs {:?}", w, v0);
        }
    }

    #[test]
    fn rejects_nonfinite() {
        let a = |t: f64| {
            let mut m = zero3();
            m[0][0] = C64::new(1.0 / (t - 0.5), 0.0);
            if (t - 0.5).abs() < 0.2 {
                m[1][1] = C64::new(f64::NAN, 0.0);
            }
            m
        };
        assert!(integrate_ray(a, 0.0, 1.0, [ONE; 3], 1e-10).is_err());
    }
}
