//! Scalar abstraction shared by plain `f64` evaluation and forward-mode
//! automatic differentiation.
//!
//! Model equations are written once, generic over [`Real`]. Evaluating them
//! with [`Dual`] yields exact gradients, with [`Dual2`] exact gradients and
//! Hessians with respect to up to `K` seeded local variables.

use core::ops::{Add, Div, Mul, Neg, Sub};

/// Field operations and the handful of elementary functions the models use.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::cst(1.0),
            1 => self,
            2 => self * self,
            3 => self * self * self,
            _ if n < 0 => Self::cst(1.0) / self.powi(-n),
            _ => {
                let half = self.powi(n / 2);
                if n % 2 == 0 {
                    half * half
                } else {
                    half * half * self
                }
            }
        }
    }

    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn sin(self) -> Self {
        libm::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        libm::cos(self)
    }
}

/// First-order dual number carrying a gradient over `K` local variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const K: usize> {
    pub v: f64,
    pub g: [f64; K],
}

impl<const K: usize> Dual<K> {
    pub fn var(v: f64, slot: usize) -> Self {
        let mut g = [0.0; K];
        g[slot] = 1.0;
        Self { v, g }
    }

    #[inline]
    fn chain(self, f: f64, d1: f64) -> Self {
        let mut g = self.g;
        for gi in g.iter_mut() {
            *gi *= d1;
        }
        Self { v: f, g }
    }
}

impl<const K: usize> Add for Dual<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for (a, b) in self.g.iter_mut().zip(rhs.g.iter()) {
            *a += b;
        }
        self
    }
}

impl<const K: usize> Sub for Dual<K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.v -= rhs.v;
        for (a, b) in self.g.iter_mut().zip(rhs.g.iter()) {
            *a -= b;
        }
        self
    }
}

impl<const K: usize> Mul for Dual<K> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut g = [0.0; K];
        for i in 0..K {
            g[i] = self.v * rhs.g[i] + rhs.v * self.g[i];
        }
        Self { v: self.v * rhs.v, g }
    }
}

impl<const K: usize> Div for Dual<K> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let v = self.v * inv;
        let mut g = [0.0; K];
        for i in 0..K {
            g[i] = (self.g[i] - v * rhs.g[i]) * inv;
        }
        Self { v, g }
    }
}

impl<const K: usize> Neg for Dual<K> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const K: usize> Add<f64> for Dual<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl<const K: usize> Sub<f64> for Dual<K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.v -= rhs;
        self
    }
}

impl<const K: usize> Mul<f64> for Dual<K> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self.v *= rhs;
        for a in self.g.iter_mut() {
            *a *= rhs;
        }
        self
    }
}

impl<const K: usize> Div<f64> for Dual<K> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl<const K: usize> Real for Dual<K> {
    fn cst(v: f64) -> Self {
        Self { v, g: [0.0; K] }
    }
    fn value(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let r = libm::sqrt(self.v);
        self.chain(r, 0.5 / r)
    }
    fn ln(self) -> Self {
        self.chain(libm::log(self.v), 1.0 / self.v)
    }
    fn sin(self) -> Self {
        self.chain(libm::sin(self.v), libm::cos(self.v))
    }
    fn cos(self) -> Self {
        self.chain(libm::cos(self.v), -libm::sin(self.v))
    }
}

/// Second-order dual number: value, gradient and (symmetric) Hessian over
/// `K` local variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2<const K: usize> {
    pub v: f64,
    pub g: [f64; K],
    pub h: [[f64; K]; K],
}

impl<const K: usize> Dual2<K> {
    pub fn var(v: f64, slot: usize) -> Self {
        let mut g = [0.0; K];
        g[slot] = 1.0;
        Self { v, g, h: [[0.0; K]; K] }
    }

    /// Applies a scalar function with value `f`, first derivative `d1` and
    /// second derivative `d2` at `self.v`.
    #[inline]
    fn chain(self, f: f64, d1: f64, d2: f64) -> Self {
        let mut out = Self {
            v: f,
            g: [0.0; K],
            h: [[0.0; K]; K],
        };
        for i in 0..K {
            out.g[i] = d1 * self.g[i];
            for j in 0..K {
                out.h[i][j] = d1 * self.h[i][j] + d2 * self.g[i] * self.g[j];
            }
        }
        out
    }
}

impl<const K: usize> Add for Dual2<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for i in 0..K {
            self.g[i] += rhs.g[i];
            for j in 0..K {
                self.h[i][j] += rhs.h[i][j];
            }
        }
        self
    }
}

impl<const K: usize> Sub for Dual2<K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.v -= rhs.v;
        for i in 0..K {
            self.g[i] -= rhs.g[i];
            for j in 0..K {
                self.h[i][j] -= rhs.h[i][j];
            }
        }
        self
    }
}

impl<const K: usize> Mul for Dual2<K> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self {
            v: self.v * rhs.v,
            g: [0.0; K],
            h: [[0.0; K]; K],
        };
        for i in 0..K {
            out.g[i] = self.v * rhs.g[i] + rhs.v * self.g[i];
            for j in 0..K {
                out.h[i][j] = self.v * rhs.h[i][j] + rhs.v * self.h[i][j] + self.g[i] * rhs.g[j] + rhs.g[i] * self.g[j];
            }
        }
        out
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl<const K: usize> Div for Dual2<K> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<const K: usize> Neg for Dual2<K> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const K: usize> Add<f64> for Dual2<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl<const K: usize> Sub<f64> for Dual2<K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.v -= rhs;
        self
    }
}

impl<const K: usize> Mul<f64> for Dual2<K> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self.v *= rhs;
        for i in 0..K {
            self.g[i] *= rhs;
            for j in 0..K {
                self.h[i][j] *= rhs;
            }
        }
        self
    }
}

impl<const K: usize> Div<f64> for Dual2<K> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl<const K: usize> Real for Dual2<K> {
    fn cst(v: f64) -> Self {
        Self {
            v,
            g: [0.0; K],
            h: [[0.0; K]; K],
        }
    }
    fn value(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let r = libm::sqrt(self.v);
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }
    fn ln(self) -> Self {
        let inv = 1.0 / self.v;
        self.chain(libm::log(self.v), inv, -inv * inv)
    }
    fn sin(self) -> Self {
        let (s, c) = (libm::sin(self.v), libm::cos(self.v));
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = (libm::sin(self.v), libm::cos(self.v));
        self.chain(c, -s, -c)
    }
    fn recip(self) -> Self {
        let inv = 1.0 / self.v;
        self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<T: Real>(x: T, y: T) -> T {
        (x * y).ln() + x.powi(3) / y - (x * 2.0).sin() * y.sqrt() + y.cos()
    }

    #[test]
    fn dual2_matches_finite_differences() {
        let (x0, y0) = (1.3, 0.7);
        let d = f(Dual2::<2>::var(x0, 0), Dual2::<2>::var(y0, 1));
        let h = 1e-5;
        let fx = |x: f64, y: f64| f(x, y);
        let gx = (fx(x0 + h, y0) - fx(x0 - h, y0)) / (2.0 * h);
        let gy = (fx(x0, y0 + h) - fx(x0, y0 - h)) / (2.0 * h);
        assert!((d.g[0] - gx).abs() < 1e-8);
        assert!((d.g[1] - gy).abs() < 1e-8);
        let hxy = (fx(x0 + h, y0 + h) - fx(x0 + h, y0 - h) - fx(x0 - h, y0 + h) + fx(x0 - h, y0 - h)) / (4.0 * h * h);
        assert!((d.h[0][1] - hxy).abs() < 1e-4);
        assert_eq!(d.h[0][1], d.h[1][0]);
        let d1 = f(Dual::<2>::var(x0, 0), Dual::<2>::var(y0, 1));
        assert!((d1.g[0] - d.g[0]).abs() < 1e-14);
        assert!((d1.v - fx(x0, y0)).abs() < 1e-14);
    }

    #[test]
    fn powi_handles_negative_and_large_exponents() {
        assert!((2.0f64.powi(-2) - 0.25).abs() < 1e-15);
        let d = Dual2::<1>::var(2.0, 0).powi(5);
        assert_eq!(d.v, 32.0);
        assert!((d.g[0] - 80.0).abs() < 1e-12);
        assert!((d.h[0][0] - 160.0).abs() < 1e-12);
    }
}
