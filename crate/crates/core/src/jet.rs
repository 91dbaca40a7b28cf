//! Forward-mode differentiation types used to obtain exact derivative jets of
//! closed-form curve and surface parametrizations.
//!
//! [`Taylor`] is a truncated univariate power series (coefficients `f^(k)/k!`),
//! [`Jet2`] carries value, gradient and Hessian of a function of two variables.
//! Parametrizations are written once, generically over [`Scalar`], and
//! evaluated with `f64` for points or with a jet type for derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number of Taylor coefficients carried by [`Taylor`]; derivatives through
/// order `TAYLOR_LEN - 1` are exact.
pub const TAYLOR_LEN: usize = 14;

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(c: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;

    fn scale(self, s: f64) -> Self {
        self * Self::cst(s)
    }

    fn powi(self, n: u32) -> Self {
        let mut acc = Self::cst(1.0);
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl Scalar for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// Truncated Taylor series `sum_k c[k] (t - t0)^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taylor {
    pub c: [f64; TAYLOR_LEN],
}

impl Taylor {
    /// The independent variable expanded about `t0`.
    pub fn variable(t0: f64) -> Self {
        let mut c = [0.0; TAYLOR_LEN];
        c[0] = t0;
        c[1] = 1.0;
        Taylor { c }
    }

    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; TAYLOR_LEN];
        c[0] = v;
        Taylor { c }
    }

    /// Builds a series from derivative values `d[k] = f^(k)(t0)`.
    pub fn from_derivatives(d: &[f64]) -> Self {
        let mut c = [0.0; TAYLOR_LEN];
        let mut fact = 1.0;
        for (k, v) in d.iter().take(TAYLOR_LEN).enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            c[k] = v / fact;
        }
        Taylor { c }
    }

    /// `f^(k)(t0)` for `k < TAYLOR_LEN`.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut fact = 1.0;
        for j in 2..=k {
            fact *= j as f64;
        }
        self.c[k] * fact
    }

    pub fn derivatives(&self, upto: usize) -> Vec<f64> {
        (0..=upto).map(|k| self.derivative(k)).collect()
    }

    /// Series of the derivative (the last coefficient is lost).
    pub fn diff(&self) -> Self {
        let mut c = [0.0; TAYLOR_LEN];
        for k in 0..TAYLOR_LEN - 1 {
            c[k] = (k + 1) as f64 * self.c[k + 1];
        }
        Taylor { c }
    }

    fn sin_cos(self) -> (Self, Self) {
        let u = &self.c;
        let mut s = [0.0; TAYLOR_LEN];
        let mut co = [0.0; TAYLOR_LEN];
        s[0] = u[0].sin();
        co[0] = u[0].cos();
        for k in 1..TAYLOR_LEN {
            let mut as_ = 0.0;
            let mut ac = 0.0;
            for j in 1..=k {
                let w = j as f64 * u[j];
                as_ += w * co[k - j];
                ac += w * s[k - j];
            }
            s[k] = as_ / k as f64;
            co[k] = -ac / k as f64;
        }
        (Taylor { c: s }, Taylor { c: co })
    }
}

impl Add for Taylor {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for k in 0..TAYLOR_LEN {
            self.c[k] += o.c[k];
        }
        self
    }
}

impl Sub for Taylor {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for k in 0..TAYLOR_LEN {
            self.c[k] -= o.c[k];
        }
        self
    }
}

impl Neg for Taylor {
    type Output = Self;
    fn neg(mut self) -> Self {
        for v in self.c.iter_mut() {
            *v = -*v;
        }
        self
    }
}

impl Mul for Taylor {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut c = [0.0; TAYLOR_LEN];
        for k in 0..TAYLOR_LEN {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.c[j] * o.c[k - j];
            }
            c[k] = acc;
        }
        Taylor { c }
    }
}

impl Div for Taylor {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let mut c = [0.0; TAYLOR_LEN];
        for k in 0..TAYLOR_LEN {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= o.c[j] * c[k - j];
            }
            c[k] = acc / o.c[0];
        }
        Taylor { c }
    }
}

impl Scalar for Taylor {
    fn cst(c: f64) -> Self {
        Taylor::constant(c)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn sin(self) -> Self {
        self.sin_cos().0
    }
    fn cos(self) -> Self {
        self.sin_cos().1
    }
    fn sqrt(self) -> Self {
        let a = &self.c;
        let mut r = [0.0; TAYLOR_LEN];
        r[0] = a[0].sqrt();
        for k in 1..TAYLOR_LEN {
            let mut acc = a[k];
            for j in 1..k {
                acc -= r[j] * r[k - j];
            }
            r[k] = acc / (2.0 * r[0]);
        }
        Taylor { c: r }
    }
    fn scale(mut self, s: f64) -> Self {
        for v in self.c.iter_mut() {
            *v *= s;
        }
        self
    }
}

/// Second-order jet in two variables: value, gradient `[d1, d2]` and Hessian
/// `[d11, d12, d22]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [f64; 3],
}

impl Jet2 {
    /// Independent variable number `axis` (0 or 1) with value `v`.
    pub fn variable(v: f64, axis: usize) -> Self {
        let mut g = [0.0; 2];
        g[axis] = 1.0;
        Jet2 { v, g, h: [0.0; 3] }
    }

    pub fn constant(v: f64) -> Self {
        Jet2 {
            v,
            g: [0.0; 2],
            h: [0.0; 3],
        }
    }

    /// Applies a scalar function given its value and first two derivatives.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let [a, b] = self.g;
        Jet2 {
            v: f0,
            g: [f1 * a, f1 * b],
            h: [
                f1 * self.h[0] + f2 * a * a,
                f1 * self.h[1] + f2 * a * b,
                f1 * self.h[2] + f2 * b * b,
            ],
        }
    }
}

impl Add for Jet2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Jet2 {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1]],
            h: [self.h[0] + o.h[0], self.h[1] + o.h[1], self.h[2] + o.h[2]],
        }
    }
}

impl Sub for Jet2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Self;
    fn neg(self) -> Self {
        Jet2 {
            v: -self.v,
            g: [-self.g[0], -self.g[1]],
            h: [-self.h[0], -self.h[1], -self.h[2]],
        }
    }
}

impl Mul for Jet2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self, o);
        Jet2 {
            v: a.v * b.v,
            g: [a.g[0] * b.v + a.v * b.g[0], a.g[1] * b.v + a.v * b.g[1]],
            h: [
                a.h[0] * b.v + 2.0 * a.g[0] * b.g[0] + a.v * b.h[0],
                a.h[1] * b.v + a.g[0] * b.g[1] + a.g[1] * b.g[0] + a.v * b.h[1],
                a.h[2] * b.v + 2.0 * a.g[1] * b.g[1] + a.v * b.h[2],
            ],
        }
    }
}

impl Div for Jet2 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = o.chain(1.0 / o.v, -1.0 / (o.v * o.v), 2.0 / (o.v * o.v * o.v));
        self * inv
    }
}

impl Scalar for Jet2 {
    fn cst(c: f64) -> Self {
        Jet2::constant(c)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }
    fn scale(self, s: f64) -> Self {
        Jet2 {
            v: self.v * s,
            g: [self.g[0] * s, self.g[1] * s],
            h: [self.h[0] * s, self.h[1] * s, self.h[2] * s],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_sin_matches_known_derivatives() {
        let t0 = 0.7;
        let s = Taylor::variable(t0).sin();
        let expect = [t0.sin(), t0.cos(), -t0.sin(), -t0.cos(), t0.sin()];
        for (k, e) in expect.iter().enumerate() {
            assert!((s.derivative(k) - e).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn taylor_division_and_sqrt() {
        let t = Taylor::variable(0.3);
        // 1/(1+t) has derivatives (-1)^k k! / (1.3)^(k+1)
        let q = Taylor::constant(1.0) / (Taylor::constant(1.0) + t);
        let mut fact = 1.0;
        for k in 0..8 {
            if k > 0 {
                fact *= k as f64;
            }
            let e = if k % 2 == 0 { 1.0 } else { -1.0 } * fact / 1.3f64.powi(k as i32 + 1);
            assert!((q.derivative(k) - e).abs() < 1e-10 * e.abs().max(1.0));
        }
        let r = (t * t).sqrt();
        assert!((r.derivative(1) - 1.0).abs() < 1e-14);
        assert!(r.derivative(2).abs() < 1e-12);
    }

    #[test]
    fn jet2_product_rule() {
        let x = Jet2::variable(0.5, 0);
        let y = Jet2::variable(-0.25, 1);
        let f = x * x * y; // f = x^2 y
        assert!((f.v - 0.25 * -0.25).abs() < 1e-15);
        assert!((f.g[0] - 2.0 * 0.5 * -0.25).abs() < 1e-15);
        assert!((f.g[1] - 0.25).abs() < 1e-15);
        assert!((f.h[0] - 2.0 * -0.25).abs() < 1e-15);
        assert!((f.h[1] - 1.0).abs() < 1e-15);
        assert!(f.h[2].abs() < 1e-15);
        let g = (x * x + y * y + Jet2::constant(1.0)).sqrt();
        let r = (1.0f64 + 0.25 + 0.0625).sqrt();
        assert!((g.g[0] - 0.5 / r).abs() < 1e-14);
        assert!((g.h[0] - (1.0 / r - 0.25 / r.powi(3))).abs() < 1e-13);
    }
}
