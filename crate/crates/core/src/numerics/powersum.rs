//! Finite sums `sum_k c_k x^{e_k}` with real exponents and complex coefficients.

use crate::params::{cpow, C64};

const MERGE: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PowerSum {
    terms: Vec<(f64, C64)>,
}

impl PowerSum {
    pub fn zero() -> Self {
        PowerSum { terms: Vec::new() }
    }

    pub fn monomial(e: f64, c: C64) -> Self {
        PowerSum::from_terms(vec![(e, c)])
    }

    pub fn from_terms(mut t: Vec<(f64, C64)>) -> Self {
        t.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut out: Vec<(f64, C64)> = Vec::with_capacity(t.len());
        for (e, c) in t {
            match out.last_mut() {
                Some(last) if (last.0 - e).abs() < MERGE => last.1 += c,
                _ => out.push((e, c)),
            }
        }
        PowerSum { terms: out }
    }

    pub fn terms(&self) -> &[(f64, C64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, o: &PowerSum) -> PowerSum {
        let mut t = self.terms.clone();
        t.extend_from_slice(&o.terms);
        PowerSum::from_terms(t)
    }

    /// `f * x^{de} * self`.
    pub fn scale(&self, f: C64, de: f64) -> PowerSum {
        PowerSum { terms: self.terms.iter().map(|&(e, c)| (e + de, c * f)).collect() }
    }

    pub fn mul(&self, o: &PowerSum) -> PowerSum {
        let mut t = Vec::with_capacity(self.terms.len() * o.terms.len());
        for &(e1, c1) in &self.terms {
            for &(e2, c2) in &o.terms {
                t.push((e1 + e2, c1 * c2));
            }
        }
        PowerSum::from_terms(t)
    }

    pub fn deriv(&self) -> PowerSum {
        PowerSum {
            terms: self.terms.iter().filter(|(e, _)| *e != 0.0).map(|&(e, c)| (e - 1.0, c * e)).collect(),
        }
    }

    /// Drops terms with `|c| r^e <= thresh`, and exact zeros.
    pub fn truncate(&self, r: f64, thresh: f64) -> PowerSum {
        PowerSum {
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|(e, c)| c.norm() != 0.0 && c.norm() * r.powf(*e) > thresh)
                .collect(),
        }
    }

    pub fn eval(&self, x: C64) -> C64 {
        self.terms.iter().map(|&(e, c)| c * cpow(x, e)).sum()
    }
}
