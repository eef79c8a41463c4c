// Double-double reference arithmetic for checking the closed forms.
// Roughly 106 bits of mantissa; only what the formula checks need.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn from_u64(v: u64) -> Dd {
        let hi = (v >> 32) as f64 * 4294967296.0;
        let lo = (v & 0xffff_ffff) as f64;
        Dd::from(hi) + Dd::from(lo)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = Dd::from(self.hi.sqrt());
        // one Newton step doubles the precision
        x + (self - x * x) / (x * Dd::from(2.0))
    }

    /// `e^x - 1` by Taylor series after halving the argument.
    pub fn expm1(self) -> Dd {
        let mut halvings = 0;
        let mut r = self;
        while r.hi.abs() > 1e-3 {
            r = r / Dd::from(2.0);
            halvings += 1;
        }
        let mut term = r;
        let mut sum = r;
        let mut j = 2.0;
        while term.hi.abs() > 1e-36 * sum.hi.abs().max(1e-300) {
            term = term * r / Dd::from(j);
            sum = sum + term;
            j += 1.0;
        }
        // e^{2r} - 1 = (e^r - 1)(e^r + 1)
        for _ in 0..halvings {
            sum = sum * (sum + Dd::from(2.0));
        }
        sum
    }

    pub fn exp(self) -> Dd {
        self.expm1() + Dd::ONE
    }

    /// `ln(1 + x)` by Newton iteration on `expm1`.
    pub fn log1p(self) -> Dd {
        let mut y = Dd::from(self.to_f64().ln_1p());
        for _ in 0..3 {
            let e = y.expm1();
            y = y + (self - e) / (e + Dd::ONE);
        }
        y
    }

    pub fn ln(self) -> Dd {
        (self - Dd::ONE).log1p()
    }

    /// `x^k` for integer `k >= 0`, by squaring.
    pub fn powi(self, mut k: u64) -> Dd {
        let mut base = self;
        let mut acc = Dd::ONE;
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

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

pub fn amplified_without(eps: f64, ell: u64, n: u64) -> f64 {
    let rate = Dd::from_u64(ell) / Dd::from_u64(n);
    (rate * Dd::from(eps).expm1()).log1p().to_f64()
}

pub fn amplified_with(eps: f64, ell: u64, n: u64) -> f64 {
    let keep = Dd::ONE - Dd::ONE / Dd::from_u64(n);
    let hit = Dd::ONE - keep.powi(ell);
    (hit * Dd::from(eps).expm1()).log1p().to_f64()
}

pub fn per_query_epsilon(eps: f64, delta: f64, k: u64) -> f64 {
    let inner = Dd::from(2.0) * Dd::from_u64(k) * -Dd::from(delta).ln();
    (Dd::from(eps) / (Dd::from(2.0) * inner.sqrt())).to_f64()
}

pub fn subsampled_epsilon(eps: f64, delta: f64, k: u64, ell: u64, n: u64) -> f64 {
    let inner = Dd::from(2.0) * Dd::from_u64(k) * -Dd::from(delta).ln();
    let denom = Dd::from(4.0) * Dd::from_u64(ell) * inner.sqrt();
    (Dd::from(eps) * Dd::from_u64(n) / denom).to_f64()
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
