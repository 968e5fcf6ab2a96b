//! Double-double arithmetic: an unevaluated sum of two `f64`s giving
//! roughly 106 bits of significand (~31 decimal digits).
//!
//! Used by the quadrature engine and the accessory-parameter solver when
//! extended precision is requested. Only the operations the integrands
//! need are implemented: field ops, `sqrt`, `abs`, comparisons.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    // requires |a| >= |b|
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    (s, (a - (s - v)) + (b - v))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, f64::mul_add(a, b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.2246467991473532e-16,
    };

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ZERO;
        }
        debug_assert!(self.hi > 0.0, "sqrt of negative double-double");
        // One Karp-Markstein correction on the f64 seed.
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let ax_dd = Dd::from_f64(ax);
        let err = self - ax_dd * ax_dd;
        ax_dd + Dd::from_f64(err.hi * (x * 0.5))
    }

    pub fn powi(self, n: i32) -> Dd {
        match n {
            0 => Dd::ONE,
            _ if n < 0 => Dd::ONE / self.powi(-n),
            _ => {
                let mut acc = Dd::ONE;
                let mut base = self;
                let mut k = n;
                while k > 0 {
                    if k & 1 == 1 {
                        acc = acc * base;
                    }
                    base = base * base;
                    k >>= 1;
                }
                acc
            }
        }
    }

    /// Relative rounding unit, ~2^-105.
    pub fn epsilon() -> Dd {
        Dd::from_f64(2.465190328815662e-32)
    }

    /// Verifies that the underlying `mul_add` is fused. On hardware where
    /// `mul_add` double-rounds, the two-product error term is wrong and
    /// extended precision silently degrades to plain f64.
    pub fn self_check() -> bool {
        let a = 1.0 + 2f64.powi(-30);
        let (p, e) = two_prod(a, a);
        // exact square: 1 + 2^-29 + 2^-60; p captures all but the 2^-60 tail
        e == 2f64.powi(-60) && p == 1.0 + 2f64.powi(-29)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e2) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e2 + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = f64::mul_add(self.hi, rhs.lo, f64::mul_add(self.lo, rhs.hi, e));
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, rhs: Dd) -> Dd {
        let q0 = self.hi / rhs.hi;
        let r = self - rhs * Dd::from_f64(q0);
        let q1 = r.hi / rhs.hi;
        let r2 = r - rhs * Dd::from_f64(q1);
        let q2 = r2.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q0, q1);
        Dd { hi, lo } + Dd::from_f64(q2)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e}, {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.16e}{:+.16e}", self.hi, self.lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fma_is_fused() {
        assert!(Dd::self_check());
    }

    #[test]
    fn add_tracks_tiny_tail() {
        let one = Dd::ONE;
        let tiny = Dd::from_f64(1e-25);
        let s = one + tiny - one;
        assert!((s.to_f64() - 1e-25).abs() < 1e-40);
    }

    #[test]
    fn sqrt_squares_back() {
        for &x in &[2.0, 3.0, 0.5, 1e-8, 123.456] {
            let r = Dd::from_f64(x).sqrt();
            let back = r * r - Dd::from_f64(x);
            assert!(
                back.to_f64().abs() < 1e-30 * x,
                "sqrt({x}) residual {:?}",
                back
            );
        }
    }

    #[test]
    fn div_mul_roundtrip() {
        let a = Dd::from_f64(std::f64::consts::E);
        let b = Dd::from_f64(1.0) / a;
        let r = a * b - Dd::ONE;
        assert!(r.to_f64().abs() < 1e-31);
    }

    #[test]
    fn pi_constant_is_consistent() {
        // pi^2 / pi == pi at full precision
        let p = Dd::PI;
        let r = p * p / p - p;
        assert!(r.to_f64().abs() < 1e-31);
    }
}
