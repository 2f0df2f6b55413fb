use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::params::C64;

/// Normalization convention of a [`QTriple`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gauge {
    /// Origin frame carries exactly the leading factors of the Psi0 vectors.
    #[serde(rename = "Psi0-unit")]
    Psi0Unit,
    /// Scalar Frobenius basis with unit leading coefficients.
    #[serde(rename = "chi-unit")]
    ChiUnit,
}

impl Gauge {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gauge::Psi0Unit => "Psi0-unit",
            Gauge::ChiUnit => "chi-unit",
        }
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gauge {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "Psi0-unit" => Ok(Gauge::Psi0Unit),
            "chi-unit" => Ok(Gauge::ChiUnit),
            _ => Err(Error::Format(format!("unknown gauge tag {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Plus,
    Zero,
    Minus,
}

impl Which {
    pub fn as_str(&self) -> &'static str {
        match self {
            Which::Plus => "plus",
            Which::Zero => "zero",
            Which::Minus => "minus",
        }
    }
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Which {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "plus" | "+" => Ok(Which::Plus),
            "zero" | "0" => Ok(Which::Zero),
            "minus" | "-" => Ok(Which::Minus),
            _ => Err(Error::Format(format!("expected plus, zero or minus, got {s:?}"))),
        }
    }
}

/// Connection coefficients (Q+, Q0, Q-) at one spectral point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTriple {
    pub theta: C64,
    pub q_plus: C64,
    pub q_zero: C64,
    pub q_minus: C64,
    pub gauge: Gauge,
    /// Condition number of the projection onto the origin frame.
    pub cond: f64,
    /// Relative change of the triple when the matching point is halved.
    pub drift: f64,
}

impl QTriple {
    pub fn get(&self, which: Which) -> C64 {
        match which {
            Which::Plus => self.q_plus,
            Which::Zero => self.q_zero,
            Which::Minus => self.q_minus,
        }
    }

    pub fn as_array(&self) -> [C64; 3] {
        [self.q_plus, self.q_zero, self.q_minus]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|q| q.is_finite())
    }
}

/// Largest componentwise difference between two triples, relative to the largest entry of either.
pub fn relative_change(a: &[C64; 3], b: &[C64; 3]) -> f64 {
    let scale = a.iter().chain(b.iter()).map(|x| x.norm()).fold(f64::MIN_POSITIVE, f64::max);
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}
