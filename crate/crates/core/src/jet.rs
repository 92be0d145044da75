//! Second-order forward-mode automatic differentiation in three variables.
//!
//! A [`Jet`] carries a value together with its gradient and (symmetric)
//! Hessian with respect to a point of R³. Arithmetic propagates all three
//! exactly, which is how the norm families obtain analytic derivatives
//! without hand-written formulas for every family.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};

/// Value, gradient and Hessian of a scalar function of three variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 3],
    /// Upper triangle in the order xx, xy, xz, yy, yz, zz.
    pub h: [f64; 6],
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet { v, g: [0.0; 3], h: [0.0; 6] }
    }

    /// The coordinate function `x_i` seeded at `value`.
    pub fn variable(i: usize, value: f64) -> Self {
        let mut g = [0.0; 3];
        g[i] = 1.0;
        Jet { v: value, g, h: [0.0; 6] }
    }

    pub fn coordinates(x: &Vector3<f64>) -> [Jet; 3] {
        [Jet::variable(0, x[0]), Jet::variable(1, x[1]), Jet::variable(2, x[2])]
    }

    pub fn gradient(&self) -> Vector3<f64> {
        Vector3::new(self.g[0], self.g[1], self.g[2])
    }

    pub fn hessian(&self) -> Matrix3<f64> {
        let h = &self.h;
        Matrix3::new(h[0], h[1], h[2], h[1], h[3], h[4], h[2], h[4], h[5])
    }

    /// Applies a scalar function given its first two derivatives at `self.v`.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Jet { v: f, g: [0.0; 3], h: [0.0; 6] };
        for i in 0..3 {
            out.g[i] = df * self.g[i];
        }
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            out.h[k] = df * self.h[k] + d2f * self.g[i] * self.g[j];
        }
        out
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(self, n: i32) -> Self {
        match n {
            0 => Jet::constant(1.0),
            1 => self,
            _ => {
                let v = self.v;
                let nf = n as f64;
                self.chain(v.powi(n), nf * v.powi(n - 1), nf * (nf - 1.0) * v.powi(n - 2))
            }
        }
    }

    /// `self^p` for a positive base.
    pub fn powf(self, p: f64) -> Self {
        let v = self.v;
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    /// `|self|^p` for `p > 1`. At a zero base the first derivative vanishes and
    /// the second is `0` for `p > 2`, `2` for `p == 2` and `+∞` below.
    pub fn abs_pow(self, p: f64) -> Self {
        let a = self.v.abs();
        let sign = if self.v < 0.0 { -1.0 } else { 1.0 };
        if a == 0.0 {
            let d2 = if p > 2.0 {
                0.0
            } else if p == 2.0 {
                2.0
            } else {
                f64::INFINITY
            };
            return self.chain(0.0, 0.0, d2);
        }
        self.chain(a.powf(p), sign * p * a.powf(p - 1.0), p * (p - 1.0) * a.powf(p - 2.0))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.v += rhs.v;
        for i in 0..3 {
            self.g[i] += rhs.g[i];
        }
        for k in 0..6 {
            self.h[k] += rhs.h[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet { v: self.v * rhs.v, g: [0.0; 3], h: [0.0; 6] };
        for i in 0..3 {
            out.g[i] = self.g[i] * rhs.v + self.v * rhs.g[i];
        }
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            out.h[k] = self.h[k] * rhs.v
                + self.v * rhs.h[k]
                + self.g[i] * rhs.g[j]
                + self.g[j] * rhs.g[i];
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.v += rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.v *= rhs;
        for g in &mut self.g {
            *g *= rhs;
        }
        for h in &mut self.h {
            *h *= rhs;
        }
        self
    }
}

/// Scalar arithmetic shared by plain `f64` and [`Jet`], so closed-form
/// expressions can be written once and evaluated either way.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn abs_pow(self, p: f64) -> Self;
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn abs_pow(self, p: f64) -> Self {
        self.abs().powf(p)
    }
}

impl Real for Jet {
    fn cst(v: f64) -> Self {
        Jet::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        Jet::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        Jet::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        Jet::powf(self, p)
    }
    fn abs_pow(self, p: f64) -> Self {
        Jet::abs_pow(self, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn([Jet; 3]) -> Jet, x: Vector3<f64>) {
        let j = f(Jet::coordinates(&x));
        let val = |y: Vector3<f64>| f(Jet::coordinates(&y)).v;
        let h = 1e-5;
        for i in 0..3 {
            let e = Vector3::ith(i, h);
            let d = (val(x + e) - val(x - e)) / (2.0 * h);
            assert!((d - j.g[i]).abs() < 1e-7, "grad {i}: {d} vs {}", j.g[i]);
        }
        let hh = 1e-4;
        let hess = j.hessian();
        for i in 0..3 {
            for k in 0..3 {
                let ei = Vector3::ith(i, hh);
                let ek = Vector3::ith(k, hh);
                let d = (val(x + ei + ek) - val(x + ei - ek) - val(x - ei + ek) + val(x - ei - ek))
                    / (4.0 * hh * hh);
                assert!((d - hess[(i, k)]).abs() < 1e-5, "hess {i}{k}: {d} vs {}", hess[(i, k)]);
            }
        }
    }

    #[test]
    fn arithmetic_matches_central_differences() {
        let x = Vector3::new(0.3, -0.7, 1.1);
        fd_check(|[a, b, c]| (a * a + b * b + c * c).sqrt(), x);
        fd_check(|[a, b, c]| a * b / (c + 2.0), x);
        fd_check(|[a, b, c]| (a.abs_pow(3.5) + b.abs_pow(3.5) + c.abs_pow(3.5)).powf(2.0 / 3.5), x);
        fd_check(|[a, b, _]| (a - b).powi(3) * 0.5, x);
    }
}
