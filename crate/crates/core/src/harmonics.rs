//! Real spherical harmonics on S² and Fourier modes on S¹.
//!
//! Normalization: every basis function is orthonormal in L² of the round
//! sphere (or circle). On S² this is
//!
//! ```text
//! Y_l^0  = N_l0 P_l(cos θ)
//! Y_l^m  = √2 N_lm P_l^m(cos θ) cos(mφ)     m > 0
//! Y_l^-m = √2 N_lm P_l^m(cos θ) sin(mφ)     m > 0
//! N_lm   = √((2l+1)/(4π) · (l−m)!/(l+m)!)
//! ```
//!
//! without the Condon–Shortley phase, so `Y_2^0 = √(5/(16π)) (3z² − 1)`.
//! On S¹ the modes are `1/√(2π)`, `cos(kθ)/√π` (order ≥ 0) and `sin(kθ)/√π`
//! (order < 0).
//!
//! Harmonics are evaluated as homogeneous polynomials in Cartesian
//! coordinates (solid harmonics), which keeps them smooth through the poles
//! and lets the same code run on [`Jet`](crate::jet::Jet)s.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::jet::Real;
use crate::Dimension;

/// Largest supported harmonic degree.
pub const MAX_DEGREE: u32 = 32;

/// One term `amplitude · Y_degree^order` of a harmonic expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicTerm {
    pub degree: u32,
    pub order: i32,
    pub amplitude: f64,
}

impl HarmonicTerm {
    pub fn new(degree: u32, order: i32, amplitude: f64) -> Self {
        HarmonicTerm { degree, order, amplitude }
    }

    pub fn validate(&self, dim: Dimension) -> Result<()> {
        if self.degree > MAX_DEGREE {
            return Err(Error::Config(format!(
                "harmonic degree {} exceeds the supported maximum {MAX_DEGREE}",
                self.degree
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::Config("harmonic amplitude must be finite".into()));
        }
        let ok = match dim {
            Dimension::Curve => self.order.unsigned_abs() <= 1,
            Dimension::Surface => self.order.unsigned_abs() <= self.degree,
        };
        if !ok {
            let hint = match dim {
                Dimension::Curve => "on the circle the order selects cos (>= 0) or sin (< 0)",
                Dimension::Surface => "the order must satisfy |m| <= l",
            };
            return Err(Error::Config(format!(
                "invalid harmonic ({}, {}): {hint}",
                self.degree, self.order
            )));
        }
        if dim == Dimension::Curve && self.degree == 0 && self.order < 0 {
            return Err(Error::Config("sin(0θ) vanishes identically".into()));
        }
        Ok(())
    }

    /// Laplace–Beltrami eigenvalue of this basis function.
    pub fn laplacian_eigenvalue(&self, dim: Dimension) -> f64 {
        let l = self.degree as f64;
        match dim {
            Dimension::Curve => -l * l,
            Dimension::Surface => -l * (l + 1.0),
        }
    }

    /// Homogeneous polynomial of degree `degree` agreeing with the basis
    /// function on the unit sphere (circle), times the amplitude.
    pub fn solid<T: Real>(&self, dim: Dimension, x: &[T; 3]) -> T {
        let basis = match dim {
            Dimension::Curve => circle_solid(self.degree, self.order, x),
            Dimension::Surface => sphere_solid(self.degree, self.order, x),
        };
        basis * self.amplitude
    }
}

/// A finite sum of [`HarmonicTerm`]s plus a constant offset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HarmonicSeries {
    pub constant: f64,
    pub terms: Vec<HarmonicTerm>,
}

impl HarmonicSeries {
    pub fn new(constant: f64, terms: Vec<HarmonicTerm>) -> Self {
        HarmonicSeries { constant, terms }
    }

    pub fn validate(&self, dim: Dimension) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.validate(dim))
    }

    /// Value at a unit direction.
    pub fn eval(&self, dim: Dimension, x: &Vector3<f64>) -> f64 {
        let c = [x[0], x[1], x[2]];
        self.terms.iter().fold(self.constant, |acc, t| acc + t.solid(dim, &c))
    }
}

fn factorial_ratio(l: u32, m: u32) -> f64 {
    // (l-m)!/(l+m)!
    ((l - m + 1)..=(l + m)).fold(1.0, |acc, k| acc / k as f64)
}

/// Real and imaginary parts of `(x + iy)^m`.
fn planar_power<T: Real>(m: u32, x: T, y: T) -> (T, T) {
    let mut c = T::cst(1.0);
    let mut s = T::cst(0.0);
    for _ in 0..m {
        let c_next = x * c - y * s;
        s = x * s + y * c;
        c = c_next;
    }
    (c, s)
}

fn sphere_solid<T: Real>(l: u32, m: i32, p: &[T; 3]) -> T {
    let [x, y, z] = *p;
    let am = m.unsigned_abs();
    let r2 = x * x + y * y + z * z;

    // r^(l-m) P_l^m(z/r) / sin^m θ via the three-term Legendre recurrence.
    let double_factorial = (1..=am).fold(1.0, |acc, k| acc * (2 * k - 1) as f64);
    let mut prev = T::cst(0.0);
    let mut cur = T::cst(double_factorial);
    for ll in (am + 1)..=l {
        let next = (z * cur * (2 * ll - 1) as f64 - r2 * prev * (ll + am - 1) as f64)
            * (1.0 / (ll - am) as f64);
        prev = cur;
        cur = next;
    }

    let mut norm = ((2 * l + 1) as f64 / (4.0 * PI) * factorial_ratio(l, am)).sqrt();
    if am != 0 {
        norm *= std::f64::consts::SQRT_2;
    }
    let (c, s) = planar_power(am, x, y);
    let azimuthal = match m {
        0 => T::cst(1.0),
        m if m > 0 => c,
        _ => s,
    };
    cur * azimuthal * norm
}

fn circle_solid<T: Real>(k: u32, order: i32, p: &[T; 3]) -> T {
    if k == 0 {
        return T::cst(1.0 / (2.0 * PI).sqrt());
    }
    let (c, s) = planar_power(k, p[0], p[1]);
    let v = if order >= 0 { c } else { s };
    v * (1.0 / PI.sqrt())
}
