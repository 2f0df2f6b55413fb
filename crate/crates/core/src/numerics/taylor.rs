//! Fixed-step Taylor-recurrence integrator for linear third-order equations
//! `a3 y''' + a2 y'' + a1 y' + a0 y = 0` along the real axis.

use crate::params::C64;

/// Taylor coefficients (in powers of `h = x - x0`) of the equation's coefficient functions.
pub trait TaylorCoefficients {
    fn coefficients(&self, x0: f64, order: usize) -> [Vec<C64>; 4];
}

/// `y''' = x y`.
pub struct AiryLike;

impl TaylorCoefficients for AiryLike {
    fn coefficients(&self, x0: f64, order: usize) -> [Vec<C64>; 4] {
        let mut a0 = vec![C64::new(0.0, 0.0); order + 1];
        a0[0] = C64::new(-x0, 0.0);
        if order >= 1 {
            a0[1] = C64::new(-1.0, 0.0);
        }
        [a0, vec![], vec![], vec![C64::new(1.0, 0.0)]]
    }
}

/// `x^3 y''' - G x y' + (G + x^{3a+3} - E x^3) y = 0`, the conformal equation times x^3.
pub struct ConformalCoefficients {
    pub alpha: f64,
    pub big_g: f64,
    pub e: C64,
}

impl TaylorCoefficients for ConformalCoefficients {
    fn coefficients(&self, x0: f64, order: usize) -> [Vec<C64>; 4] {
        let n = order + 1;
        let mut a3 = vec![C64::new(0.0, 0.0); n.min(4)];
        let cubic = [x0 * x0 * x0, 3.0 * x0 * x0, 3.0 * x0, 1.0];
        for (i, c) in cubic.iter().enumerate().take(a3.len()) {
            a3[i] = C64::new(*c, 0.0);
        }
        let a1 = vec![C64::new(-self.big_g * x0, 0.0), C64::new(-self.big_g, 0.0)];
        let mut a0 = vec![C64::new(0.0, 0.0); n];
        let p = 3.0 * self.alpha + 3.0;
        let mut binom = 1.0;
        for (k, slot) in a0.iter_mut().enumerate() {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            *slot += binom * x0.powf(p - k as f64);
            if k < 4 {
                *slot -= self.e * cubic[k];
            }
        }
        a0[0] += self.big_g;
        [a0, a1, vec![], a3]
    }
}

fn at(v: &[C64], i: usize) -> C64 {
    v.get(i).copied().unwrap_or(C64::new(0.0, 0.0))
}

/// Taylor coefficients c_0..c_order of the local solution with data (y, y', y'') at x0.
pub fn local_series<T: TaylorCoefficients>(eq: &T, x0: f64, y: [C64; 3], order: usize) -> Vec<C64> {
    let [a0, a1, a2, a3] = eq.coefficients(x0, order);
    let mut c = vec![C64::new(0.0, 0.0); order + 4];
    c[0] = y[0];
    c[1] = y[1];
    c[2] = y[2] * 0.5;
    for n in 0..=order.saturating_sub(3) {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..=n {
            let m = (n - j) as f64;
            if j > 0 {
                acc += at(&a3, j) * c[n - j + 3] * ((m + 1.0) * (m + 2.0) * (m + 3.0));
            }
            acc += at(&a2, j) * c[n - j + 2] * ((m + 1.0) * (m + 2.0));
            acc += at(&a1, j) * c[n - j + 1] * (m + 1.0);
            acc += at(&a0, j) * c[n - j];
        }
        let nn = n as f64;
        c[n + 3] = -acc / (at(&a3, 0) * ((nn + 1.0) * (nn + 2.0) * (nn + 3.0)));
    }
    c.truncate(order + 1);
    c
}

/// Integrates from `x_start` to `x_end` in `steps` equal steps of a truncated Taylor series.
/// Returns (y, y', y'') at every step endpoint, including the start.
pub fn taylor_integrate<T: TaylorCoefficients>(
    eq: &T,
    x_start: f64,
    x_end: f64,
    y0: [C64; 3],
    steps: usize,
    order: usize,
) -> Vec<(f64, [C64; 3])> {
    let h = (x_end - x_start) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0;
    out.push((x_start, y));
    for i in 0..steps {
        let x0 = x_start + h * i as f64;
        let c = local_series(eq, x0, y, order);
        let mut next = [C64::new(0.0, 0.0); 3];
        for (d, slot) in next.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for n in (d..c.len()).rev() {
                let mut fall = 1.0;
                for q in 0..d {
                    fall *= (n - q) as f64;
                }
                acc = acc * h + c[n] * fall;
            }
            *slot = acc;
        }
        y = next;
        out.push((x_start + h * (i + 1) as f64, y));
    }
    out
}
