use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Parameters `(alpha, g, s)` of the classical model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub g: f64,
    pub s: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, g: f64, s: f64) -> Result<Self> {
        let p = ModelParams { alpha, g, s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.g.is_finite() && self.s.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidParams(format!("alpha = {} must be positive", self.alpha)));
        }
        if !(self.g > -1.0 && self.g < 0.5) {
            return Err(Error::InvalidParams(format!("g = {} must satisfy -1 < g < 1/2", self.g)));
        }
        if self.s < 0.0 {
            return Err(Error::InvalidParams(format!("s = {} must be non-negative", self.s)));
        }
        Ok(())
    }

    /// Asymptotic (WKB) initial data is only controlled for alpha > 1/2.
    pub fn require_wkb(&self) -> Result<()> {
        self.validate()?;
        if self.alpha <= 0.5 {
            return Err(Error::InvalidParams(format!(
                "alpha = {} must exceed 1/2 for asymptotic initial data",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn big_g(&self) -> f64 {
        self.g * (self.g + 2.0)
    }

    /// Indicial exponents at the origin, ordered as (plus, zero, minus).
    pub fn exponents(&self) -> [f64; 3] {
        [-self.g, 1.0, self.g + 2.0]
    }

    /// True when two origin exponents differ by an integer (within 1e-6).
    pub fn is_resonant(&self) -> bool {
        resonance_gap(self.g) < 1e-6
    }
}

/// Distance of the exponent differences g+1 and 2g+2 from the integers.
pub fn resonance_gap(g: f64) -> f64 {
    let d1 = g + 1.0;
    let d2 = 2.0 * g + 2.0;
    (d1 - d1.round()).abs().min((d2 - d2.round()).abs())
}

/// Principal-branch power with `0^a = 0` for `a > 0`.
pub fn cpow(z: C64, a: f64) -> C64 {
    if z == C64::new(0.0, 0.0) {
        if a == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    } else {
        C64::from_polar(z.norm().powf(a), z.arg() * a)
    }
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12
}

/// p(z) = z^{3 alpha} - s^{3 alpha}.
pub fn potential(z: C64, params: &ModelParams) -> Result<C64> {
    let a3 = 3.0 * params.alpha;
    if !is_integer(a3) && z.im == 0.0 && z.re < 0.0 {
        return Err(Error::BranchCut(z));
    }
    Ok(cpow(z, a3) - params.s.powf(a3))
}

pub fn omega(alpha: f64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI / (3.0 * alpha + 3.0))
}

/// `omega(alpha)^k` for real (possibly half-integer) k.
pub fn omega_pow(alpha: f64, k: f64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * k / (3.0 * alpha + 3.0))
}

/// (E, E~) = s^{3a} exp(+-3 theta a/(a+1)).
pub fn scaling_map(theta: C64, params: &ModelParams) -> Result<(C64, C64)> {
    if params.s <= 0.0 {
        return Err(Error::InvalidParams("scaling map needs s > 0".into()));
    }
    let a = params.alpha;
    let s3 = params.s.powf(3.0 * a);
    let k = 3.0 * a / (a + 1.0);
    Ok((s3 * (theta * k).exp(), s3 * (-theta * k).exp()))
}

/// theta = (alpha+1)/(3 alpha) ln E, principal branch.
pub fn theta_of_energy(e: C64, alpha: f64) -> C64 {
    e.ln() * ((alpha + 1.0) / (3.0 * alpha))
}

pub fn energy_of_theta(theta: C64, alpha: f64) -> C64 {
    (theta * (3.0 * alpha / (alpha + 1.0))).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub theta: C64,
    pub e: C64,
    pub e_tilde: C64,
}

impl SpectralPoint {
    pub fn new(theta: C64, params: &ModelParams) -> Result<Self> {
        let (e, e_tilde) = scaling_map(theta, params)?;
        Ok(SpectralPoint { theta, e, e_tilde })
    }

    pub fn lambda(&self) -> C64 {
        self.theta.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn potential_basics() {
        let p = ModelParams::new(1.0, 0.1, 0.0).unwrap();
        assert!(close(potential(C64::new(2.0, 0.0), &p).unwrap(), C64::new(8.0, 0.0), 1e-15));
        let p = ModelParams::new(0.7, 0.1, 1.3).unwrap();
        assert!(potential(C64::new(1.3, 0.0), &p).unwrap().norm() < 1e-14);
        let z0 = potential(C64::new(0.0, 0.0), &p).unwrap();
        assert!(close(z0, C64::new(-(1.3f64).powf(2.1), 0.0), 1e-15));
    }

    #[test]
    fn potential_rejects_cut() {
        let p = ModelParams::new(0.7, 0.1, 1.0).unwrap();
        assert!(matches!(potential(C64::new(-1.0, 0.0), &p), Err(Error::BranchCut(_))));
        let p = ModelParams::new(1.0, 0.1, 1.0).unwrap();
        assert!(potential(C64::new(-1.0, 0.0), &p).is_ok());
    }

    #[test]
    fn omega_basics() {
        assert!(close(omega(1.0), C64::from_polar(1.0, PI / 3.0), 1e-15));
        for &a in &[0.3, 1.0, 1.7] {
            let w = omega(a);
            assert!((w.norm() - 1.0).abs() < 1e-15);
            assert!(close(w.powf(3.0 * a + 3.0), C64::new(1.0, 0.0), 1e-12));
        }
    }

    #[test]
    fn scaling_map_basics() {
        let p = ModelParams::new(1.0, 0.1, 0.5).unwrap();
        let (e, et) = scaling_map(C64::new(0.0, 0.0), &p).unwrap();
        assert!(close(e, C64::new(0.125, 0.0), 1e-15) && close(et, e, 1e-15));
        assert!(scaling_map(C64::new(0.0, 0.0), &ModelParams::new(1.0, 0.1, 0.0).unwrap()).is_err());
    }

    #[test]
    fn validation() {
        assert!(ModelParams::new(0.0, 0.1, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.5, 1.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.1, -0.1).is_err());
        assert!(ModelParams::new(0.4, 0.1, 1.0).unwrap().require_wkb().is_err());
        assert!(ModelParams::new(1.0, 0.0, 1.0).unwrap().is_resonant());
        assert!(!ModelParams::new(1.0, 0.1, 1.0).unwrap().is_resonant());
    }
}
