//! Scalar abstraction shared by the plain `f64` evaluation path and the
//! forward-mode dual-number path used for gradients.
//!
//! Every density in this crate is written once against [`Scalar`]. Calling it
//! with `f64` gives the log posterior; calling it with [`Dual<N>`] seeded on
//! the local inputs gives the exact directional derivatives of the same code.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{digamma, ln_gamma};

/// Real-valued number type that the model densities are generic over.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// Whether the type carries derivative directions.
    const HAS_TANGENTS: bool = true;

    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    /// Largest magnitude over the value and all tangent components.
    fn max_abs(&self) -> f64;

    /// Applies a scalar function with known value and first derivative.
    fn chain(&self, value: f64, deriv: f64) -> Self;

    fn exp(self) -> Self {
        let e = self.value().exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        let v = self.value();
        self.chain(v.ln(), 1.0 / v)
    }
    fn ln_1p(self) -> Self {
        let v = self.value();
        self.chain(v.ln_1p(), 1.0 / (1.0 + v))
    }
    fn exp_m1(self) -> Self {
        let v = self.value();
        self.chain(v.exp_m1(), v.exp())
    }
    fn sqrt(self) -> Self {
        let s = self.value().sqrt();
        self.chain(s, 0.5 / s)
    }
    fn tanh(self) -> Self {
        let t = self.value().tanh();
        self.chain(t, 1.0 - t * t)
    }
    fn recip(self) -> Self {
        let v = self.value();
        self.chain(1.0 / v, -1.0 / (v * v))
    }
    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powi(self, n: i32) -> Self {
        let v = self.value();
        self.chain(v.powi(n), n as f64 * v.powi(n - 1))
    }
    fn ln_gamma(self) -> Self {
        let v = self.value();
        let d = if Self::HAS_TANGENTS { digamma(v) } else { 0.0 };
        self.chain(ln_gamma(v), d)
    }
    /// Standard normal quantile.
    fn normal_quantile(self) -> Self {
        let v = self.value();
        let z = normal_quantile(v);
        self.chain(z, 1.0 / normal_pdf(z))
    }
    /// `ln(1 + e^x)` without overflow.
    fn softplus(self) -> Self {
        let v = self.value();
        let sp = if v > 0.0 {
            v + (-v).exp().ln_1p()
        } else {
            v.exp().ln_1p()
        };
        self.chain(sp, inv_logit(v))
    }
    fn inv_logit(self) -> Self {
        let p = inv_logit(self.value());
        self.chain(p, p * (1.0 - p))
    }
    /// `ln(cosh x)` without overflow.
    fn ln_cosh(self) -> Self {
        let v = self.value();
        let a = v.abs();
        let lc = a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2;
        self.chain(lc, v.tanh())
    }
    /// Replaces the value by `lo`/`hi` (with zero derivative) outside `[lo, hi]`.
    fn clamp_to(self, lo: f64, hi: f64) -> Self {
        let v = self.value();
        if v < lo {
            Self::cst(lo)
        } else if v > hi {
            Self::cst(hi)
        } else {
            self
        }
    }
}

pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Φ⁻¹ through the complementary inverse error function, accurate in both tails.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

impl Scalar for f64 {
    const HAS_TANGENTS: bool = false;

    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn max_abs(&self) -> f64 {
        self.abs()
    }
    #[inline]
    fn chain(&self, value: f64, _deriv: f64) -> Self {
        value
    }
}

/// Forward-mode dual number carrying `N` tangent directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// The `i`-th independent variable with value `v`.
    pub fn variable(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { v, d }
    }

    /// Seeds every entry of `values` as its own independent direction.
    pub fn seed(values: [f64; N]) -> [Self; N] {
        let mut out = [Self::constant(0.0); N];
        for (i, v) in values.into_iter().enumerate() {
            out[i] = Self::variable(v, i);
        }
        out
    }
}

impl<const N: usize> Scalar for Dual<N> {
    #[inline]
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    #[inline]
    fn value(&self) -> f64 {
        self.v
    }
    fn max_abs(&self) -> f64 {
        self.d.iter().fold(self.v.abs(), |m, x| m.max(x.abs()))
    }
    #[inline]
    fn chain(&self, value: f64, deriv: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= deriv;
        }
        Self { v: value, d }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for i in 0..N {
            self.d[i] += rhs.d[i];
        }
        self
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.v -= rhs.v;
        for i in 0..N {
            self.d[i] -= rhs.d[i];
        }
        self
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut d = [0.0; N];
        for (i, x) in d.iter_mut().enumerate() {
            *x = self.d[i] * rhs.v + self.v * rhs.d[i];
        }
        Self { v: self.v * rhs.v, d }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let q = self.v * inv;
        let mut d = [0.0; N];
        for (i, x) in d.iter_mut().enumerate() {
            *x = (self.d[i] - q * rhs.d[i]) * inv;
        }
        Self { v: q, d }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for x in self.d.iter_mut() {
            *x = -*x;
        }
        self
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.v -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self.v *= rhs;
        for x in self.d.iter_mut() {
            *x *= rhs;
        }
        self
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl<const N: usize> AddAssign for Dual<N> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const N: usize> SubAssign for Dual<N> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const N: usize> MulAssign for Dual<N> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}
