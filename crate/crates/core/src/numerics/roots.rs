//! Complex secant root finding.

use crate::error::{Error, Result};
use crate::params::C64;

#[derive(Clone, Copy, Debug)]
pub struct RootOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial secant offset.
    pub delta: f64,
    /// Search window as (centre, half-width in re, half-width in im).
    pub window: Option<(C64, f64, f64)>,
}

impl RootOptions {
    pub fn new(tol: f64) -> Self {
        RootOptions { tol, max_iter: 60, delta: 1e-3, window: None }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Root {
    pub z: C64,
    pub f_abs: f64,
    pub seed_abs: f64,
    pub iterations: usize,
}

fn inside(w: &Option<(C64, f64, f64)>, z: C64) -> bool {
    match w {
        None => true,
        Some((c, hr, hi)) => (z.re - c.re).abs() <= *hr && (z.im - c.im).abs() <= *hi,
    }
}

/// Secant iteration from `seed`. Converges when the step is below `tol` relative
/// to `max(1, |z|)` and `|f|` has dropped by 1e6 from the seed, or `|f| <= tol * |f(seed)|`.
pub fn find_zero<F: FnMut(C64) -> Result<C64>>(mut f: F, seed: C64, opts: &RootOptions) -> Result<Root> {
    let mut x0 = seed;
    let mut f0 = f(x0)?;
    let seed_abs = f0.norm();
    if seed_abs == 0.0 {
        return Ok(Root { z: seed, f_abs: 0.0, seed_abs, iterations: 0 });
    }
    let mut x1 = seed + C64::new(opts.delta * seed.norm().max(1.0), 0.0);
    let mut f1 = f(x1)?;
    let mut last = f1.norm();
    for it in 1..=opts.max_iter {
        let df = f1 - f0;
        if df.norm() == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / df;
        if !x2.is_finite() {
            break;
        }
        if !inside(&opts.window, x2) {
            return Err(Error::OutOfWindow(x2));
        }
        let f2 = f(x2)?;
        last = f2.norm();
        let step = (x2 - x1).norm();
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        let small_f = last <= opts.tol * seed_abs;
        let small_step = step <= opts.tol * x1.norm().max(1.0) && last <= 1e-6 * seed_abs;
        if small_f || small_step || last == 0.0 {
            return Ok(Root { z: x1, f_abs: last, seed_abs, iterations: it });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, last })
}

/// Bisection on a real bracket of a real function.
pub fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::InvalidParams("bisection bracket has no sign change".into()));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol * m.abs().max(1.0) {
            return Ok(m);
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_and_sine() {
        let r = find_zero(|z| Ok(z * z - 1.0), C64::new(0.9, 0.0), &RootOptions::new(1e-13)).unwrap();
        assert!((r.z - 1.0).norm() < 1e-12);
        let r = find_zero(|z| Ok(z.sin()), C64::new(3.0, 0.0), &RootOptions::new(1e-14)).unwrap();
        assert!((r.z - std::f64::consts::PI).norm() < 1e-12);
        assert!(r.f_abs <= 1e-6 * r.seed_abs);
    }

    #[test]
    fn complex_root_and_window() {
        let f = |z: C64| Ok(z * z + 4.0);
        let r = find_zero(f, C64::new(0.3, 1.7), &RootOptions::new(1e-13)).unwrap();
        assert!((r.z - C64::new(0.0, 2.0)).norm() < 1e-12);
        let mut o = RootOptions::new(1e-13);
        o.window = Some((C64::new(0.0, 0.0), 0.5, 0.5));
        assert!(find_zero(|z: C64| Ok(z - 3.0), C64::new(0.1, 0.0), &o).is_err());
    }

    #[test]
    fn no_root() {
        let r = find_zero(|_z: C64| Ok(C64::new(1.0, 0.0)), C64::new(0.0, 0.0), &RootOptions::new(1e-12));
        assert!(r.is_err());
    }

    #[test]
    fn bisection() {
        let r = bisect(|x| Ok(x.cos()), 1.0, 2.0, 1e-15).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }
}
