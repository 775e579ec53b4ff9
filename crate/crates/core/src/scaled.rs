//! Complex numbers carrying a separate binary exponent.
//!
//! Infinite q-products evaluated at deep lattice points overflow or
//! underflow `f64` long before their *ratios* do (the weight `p(zq^{-60})`
//! is a quotient of two products of magnitude ~1e+450). All such products
//! are accumulated as a normalized mantissa times `2^e` and only collapsed
//! to `f64` at the end.

use crate::Complex;
#[allow(unused_imports)]
use num_traits::Float;

/// A complex number `m * 2^e` with `|m|` kept within `[1, 2)` (or zero).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled {
    pub m: Complex,
    pub e: i64,
}

fn ldexp(x: f64, e: i64) -> f64 {
    // Split the shift so 2^e itself never overflows.
    if e > 2000 {
        return x * f64::INFINITY;
    }
    if e < -2200 {
        return x * 0.0;
    }
    let mut v = x;
    let mut rem = e;
    while rem > 1000 {
        v *= (2.0f64).powi(1000);
        rem -= 1000;
    }
    while rem < -1000 {
        v *= (2.0f64).powi(-1000);
        rem += 1000;
    }
    v * (2.0f64).powi(rem as i32)
}

impl Scaled {
    pub const ONE: Scaled = Scaled {
        m: Complex::new(1.0, 0.0),
        e: 0,
    };

    pub const ZERO: Scaled = Scaled {
        m: Complex::new(0.0, 0.0),
        e: 0,
    };

    pub fn from_complex(v: Complex) -> Self {
        Scaled { m: v, e: 0 }.normalized()
    }

    pub fn from_f64(v: f64) -> Self {
        Self::from_complex(Complex::new(v, 0.0))
    }

    fn normalized(self) -> Self {
        let a = self.m.re.abs().max(self.m.im.abs());
        if a == 0.0 || !a.is_finite() {
            return Scaled { m: self.m, e: 0 };
        }
        let s = a.log2().floor() as i64;
        Scaled {
            m: Complex::new(ldexp(self.m.re, -s), ldexp(self.m.im, -s)),
            e: self.e + s,
        }
    }

    pub fn mul(self, o: Scaled) -> Self {
        Scaled {
            m: self.m * o.m,
            e: self.e + o.e,
        }
        .normalized()
    }

    pub fn mul_complex(self, v: Complex) -> Self {
        self.mul(Scaled::from_complex(v))
    }

    pub fn div(self, o: Scaled) -> Self {
        Scaled {
            m: self.m / o.m,
            e: self.e - o.e,
        }
        .normalized()
    }

    pub fn recip(self) -> Self {
        Scaled {
            m: Complex::new(1.0, 0.0) / self.m,
            e: -self.e,
        }
        .normalized()
    }

    pub fn add(self, o: Scaled) -> Self {
        if self.m == Complex::new(0.0, 0.0) {
            return o;
        }
        if o.m == Complex::new(0.0, 0.0) {
            return self;
        }
        let (hi, lo) = if self.e >= o.e { (self, o) } else { (o, self) };
        let shift = lo.e - hi.e;
        if shift < -120 {
            return hi;
        }
        let lom = Complex::new(ldexp(lo.m.re, shift), ldexp(lo.m.im, shift));
        Scaled {
            m: hi.m + lom,
            e: hi.e,
        }
        .normalized()
    }

    /// Integer power of a complex base, kept scaled.
    pub fn powi(base: Complex, k: i64) -> Self {
        if k == 0 {
            return Scaled::ONE;
        }
        let mut acc = Scaled::ONE;
        let mut b = Scaled::from_complex(base);
        let neg = k < 0;
        let mut n = k.unsigned_abs();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(b);
            }
            b = b.mul(b);
            n >>= 1;
        }
        if neg {
            acc.recip()
        } else {
            acc
        }
    }

    /// Collapse to `f64` components; may overflow to infinity or flush to zero.
    pub fn to_complex(self) -> Complex {
        Complex::new(ldexp(self.m.re, self.e), ldexp(self.m.im, self.e))
    }

    pub fn abs_ln(self) -> f64 {
        if self.m == Complex::new(0.0, 0.0) {
            return f64::NEG_INFINITY;
        }
        self.m.norm().ln() + (self.e as f64) * core::f64::consts::LN_2
    }

    pub fn is_zero(self) -> bool {
        self.m == Complex::new(0.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_round_trip() {
        let a = Scaled::from_complex(Complex::new(3.0, -4.0));
        let b = Scaled::from_complex(Complex::new(-0.25, 1.5));
        let p = a.mul(b).to_complex();
        let direct = Complex::new(3.0, -4.0) * Complex::new(-0.25, 1.5);
        assert!((p - direct).norm() < 1e-14 * direct.norm());
    }

    #[test]
    fn huge_ratio_stays_finite() {
        // (1e200)^4 / (1e200)^4 = 1 even though the numerator overflows f64
        let big = Scaled::powi(Complex::new(1e200, 0.0), 4);
        let r = big.div(big).to_complex();
        assert!((r - Complex::new(1.0, 0.0)).norm() < 1e-15);
        assert!(big.to_complex().re.is_infinite());
    }

    #[test]
    fn powi_negative() {
        let v = Scaled::powi(Complex::new(0.5, 0.5), -3).to_complex();
        let direct = Complex::new(0.5, 0.5).powi(-3);
        assert!((v - direct).norm() < 1e-14 * direct.norm());
    }

    #[test]
    fn add_aligns_exponents() {
        let a = Scaled::from_f64(1.0);
        let b = Scaled::from_f64(3.0);
        assert!((a.add(b).to_complex().re - 4.0).abs() < 1e-15);
        let tiny = Scaled::powi(Complex::new(2.0, 0.0), -200);
        let s = a.add(tiny).to_complex();
        assert!((s.re - 1.0).abs() < 1e-15);
    }
}
