//! Small fixed-size complex linear algebra.

use crate::params::C64;

pub type V3 = [C64; 3];
pub type M3 = [[C64; 3]; 3];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn zero3() -> M3 {
    [[ZERO; 3]; 3]
}

pub fn mat_vec(a: &M3, v: &V3) -> V3 {
    let mut out = [ZERO; 3];
    for i in 0..3 {
        out[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    }
    out
}

pub fn mat_mul(a: &M3, b: &M3) -> M3 {
    let mut out = zero3();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn trace(a: &M3) -> C64 {
    a[0][0] + a[1][1] + a[2][2]
}

pub fn det3(a: &M3) -> C64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Matrix whose columns are the given vectors.
pub fn from_columns(c: &[V3; 3]) -> M3 {
    let mut out = zero3();
    for j in 0..3 {
        for i in 0..3 {
            out[i][j] = c[j][i];
        }
    }
    out
}

pub fn inverse3(a: &M3) -> Option<M3> {
    let d = det3(a);
    if d.norm() == 0.0 || !d.is_finite() {
        return None;
    }
    let mut inv = zero3();
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / d;
        }
    }
    Some(inv)
}

fn norm1(a: &M3) -> f64 {
    (0..3)
        .map(|j| (0..3).map(|i| a[i][j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number.
pub fn cond1(a: &M3) -> f64 {
    match inverse3(a) {
        Some(inv) => norm1(a) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve3(a: &M3, b: &V3) -> Option<V3> {
    let mut m = *a;
    let mut r = *b;
    for k in 0..3 {
        let p = (k..3).max_by(|&i, &j| m[i][k].norm().partial_cmp(&m[j][k].norm()).unwrap())?;
        if m[p][k].norm() == 0.0 {
            return None;
        }
        m.swap(k, p);
        r.swap(k, p);
        for i in k + 1..3 {
            let f = m[i][k] / m[k][k];
            for j in k..3 {
                let t = m[k][j];
                m[i][j] -= f * t;
            }
            let t = r[k];
            r[i] -= f * t;
        }
    }
    let mut x = [ZERO; 3];
    for i in (0..3).rev() {
        let mut s = r[i];
        for j in i + 1..3 {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    Some(x)
}

pub fn vnorm(v: &V3) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt()
}

pub fn vmax(v: &V3) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub fn is_finite_m(a: &M3) -> bool {
    a.iter().all(|row| row.iter().all(|c| c.is_finite()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_inverse() {
        let a: M3 = [
            [C64::new(2.0, 1.0), C64::new(0.5, 0.0), C64::new(0.0, -1.0)],
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(3.0, 0.2)],
            [C64::new(1.0, 0.0), C64::new(-1.0, 1.0), C64::new(0.1, 0.0)],
        ];
        let b = [C64::new(1.0, 0.0), C64::new(0.0, 2.0), C64::new(-1.0, 0.5)];
        let x = solve3(&a, &b).unwrap();
        let ax = mat_vec(&a, &x);
        for i in 0..3 {
            assert!((ax[i] - b[i]).norm() < 1e-14);
        }
        let inv = inverse3(&a).unwrap();
        let id = mat_mul(&a, &inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { ONE } else { ZERO };
                assert!((id[i][j] - e).norm() < 1e-14);
            }
        }
        assert!(cond1(&a) >= 1.0);
    }
}
