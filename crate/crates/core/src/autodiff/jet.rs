//! Truncated univariate Taylor series.
//!
//! A [`Jet`] of length `k + 1` holds the scaled coefficients
//! `c_j = f^(j)(s₀) / j!` of a quantity along one seeded input direction.
//! The network evaluator uses the same recurrences in batched, unrolled form.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Highest supported derivative order.
pub const MAX_ORDER: usize = 3;

#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    coeffs: [f64; MAX_ORDER + 1],
    len: usize,
}

impl Jet {
    /// Builds a jet from raw Taylor coefficients (`coeffs[0]` is the primal value).
    pub fn new(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > MAX_ORDER + 1 {
            return Err(Error::InvalidOrder(format!(
                "jet length must be in 1..={}, got {}",
                MAX_ORDER + 1,
                coeffs.len()
            )));
        }
        let mut c = [0.0; MAX_ORDER + 1];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Ok(Self {
            coeffs: c,
            len: coeffs.len(),
        })
    }

    /// A constant carried to `order`.
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut coeffs = [0.0; MAX_ORDER + 1];
        coeffs[0] = value;
        Self {
            coeffs,
            len: order + 1,
        }
    }

    /// The seeded input itself: `s ↦ value + (s − s₀)`.
    pub fn variable(value: f64, order: usize) -> Self {
        let mut jet = Self::constant(value, order);
        if order >= 1 {
            jet.coeffs[1] = 1.0;
        }
        jet
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn order(&self) -> usize {
        self.len - 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..self.len]
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs()[k]
    }

    /// `k`-th derivative, `k! · c_k`.
    pub fn derivative(&self, k: usize) -> f64 {
        let factorial: f64 = (2..=k).map(|i| i as f64).product();
        self.coeff(k) * factorial
    }

    pub fn scale(mut self, factor: f64) -> Self {
        for c in &mut self.coeffs[..self.len] {
            *c *= factor;
        }
        self
    }

    /// Hyperbolic tangent via `u' = (1 − u²) z'`.
    ///
    /// In coefficient form `k u_k = Σ_{j=1..k} j z_j w_{k−j}` with `w = 1 − u²`,
    /// so no derivative of `tanh` is ever formed by subtraction of large terms.
    pub fn tanh(&self) -> Self {
        let z = self.coeffs();
        let mut u = [0.0; MAX_ORDER + 1];
        let mut w = [0.0; MAX_ORDER + 1];
        u[0] = z[0].tanh();
        w[0] = 1.0 - u[0] * u[0];
        for k in 1..self.len {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * z[j] * w[k - j];
            }
            u[k] = acc / k as f64;
            let mut sq = 0.0;
            for i in 0..=k {
                sq += u[i] * u[k - i];
            }
            w[k] = -sq;
        }
        Self {
            coeffs: u,
            len: self.len,
        }
    }

    fn check_len(&self, other: &Self) {
        assert_eq!(
            self.len, other.len,
            "jet arithmetic requires equal lengths ({} vs {})",
            self.len, other.len
        );
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Jet").field(&self.coeffs()).finish()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.check_len(&rhs);
        for k in 0..self.len {
            self.coeffs[k] += rhs.coeffs[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.check_len(&rhs);
        for k in 0..self.len {
            self.coeffs[k] -= rhs.coeffs[k];
        }
        self
    }
}

/// Cauchy product: `(ab)_k = Σ_i a_i b_{k−i}`.
impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.check_len(&rhs);
        let mut out = [0.0; MAX_ORDER + 1];
        for (k, slot) in out.iter_mut().enumerate().take(self.len) {
            *slot = (0..=k).map(|i| self.coeffs[i] * rhs.coeffs[k - i]).sum();
        }
        Jet {
            coeffs: out,
            len: self.len,
        }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
