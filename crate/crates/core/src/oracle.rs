//! High accuracy finite difference oracles for validating the jet engine.
//!
//! Central difference stencils at step `1e-2` need function values far more
//! accurate than `f64` roundoff to resolve fifth order derivatives: the
//! stencil divides by `h^5 = 1e-10`, so one ulp of noise per evaluation
//! already costs about `3e-5` of the answer. The oracle therefore evaluates
//! the test function in double-double arithmetic (roughly 31 significant
//! digits), leaving pure truncation error around `1e-9` after one Richardson
//! step. The jets under test still run in ordinary `f64`.

/// Unevaluated sum of two doubles, `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// ln 2 to double-double precision.
    const LN2: Dd = Dd { hi: 0.693_147_180_559_945_3, lo: 2.319_046_813_846_299_6e-17 };

    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    fn sub(self, other: Dd) -> Dd {
        self.add(Dd { hi: -other.hi, lo: -other.lo })
    }

    fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    fn mul_f64(self, x: f64) -> Dd {
        let (p, e) = two_prod(self.hi, x);
        let e = e + self.lo * x;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul_f64(q1));
        let q2 = r.hi / other.hi;
        let r2 = r.sub(other.mul_f64(q2));
        let q3 = r2.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    /// Exact scaling by a power of two.
    fn ldexp(self, k: i32) -> Dd {
        let f = (2.0f64).powi(k);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }
}

/// exp in double-double by range reduction and Taylor series.
fn exp_dd(x: Dd) -> Dd {
    let k = (x.hi / std::f64::consts::LN_2).round();
    let r = x.sub(Dd::LN2.mul_f64(k));
    let mut term = Dd::ONE;
    let mut sum = Dd::ONE;
    for n in 1..60 {
        term = term.mul(r).mul_f64(1.0 / n as f64);
        sum = sum.add(term);
        if term.hi.abs() < 1e-35 {
            break;
        }
    }
    sum.ldexp(k as i32)
}

/// sin and cos in double-double by Taylor series; accurate for |x| up to a
/// few units, which covers the validation domain.
fn sincos_dd(x: Dd) -> (Dd, Dd) {
    let x2 = x.mul(x);
    let mut sin_term = x;
    let mut sin_sum = x;
    let mut cos_term = Dd::ONE;
    let mut cos_sum = Dd::ONE;
    for n in 1..60 {
        let d = (2 * n) as f64;
        cos_term = cos_term.mul(x2).mul_f64(-1.0 / (d * (d - 1.0)));
        cos_sum = cos_sum.add(cos_term);
        sin_term = sin_term.mul(x2).mul_f64(-1.0 / (d * (d + 1.0)));
        sin_sum = sin_sum.add(sin_term);
        if sin_term.hi.abs() < 1e-35 && cos_term.hi.abs() < 1e-35 {
            break;
        }
    }
    (sin_sum, cos_sum)
}

fn exp_sin(u: Dd, v: Dd) -> Dd {
    exp_dd(u).mul(sincos_dd(v).0)
}

fn stencil(point: [f64; 2], orders: [usize; 2], h: f64) -> Dd {
    fn binom(n: usize, k: usize) -> f64 {
        let mut c = 1.0;
        for i in 0..k {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        c
    }
    fn rec(point: [Dd; 2], orders: [usize; 2], axis: usize, h: f64) -> Dd {
        if axis == 2 {
            return exp_sin(point[0], point[1]);
        }
        let n = orders[axis];
        if n == 0 {
            return rec(point, orders, axis + 1, h);
        }
        let mut total = Dd::ZERO;
        for k in 0..=n {
            // Offset (n/2 - k) h, exact in double-double.
            let m = (n as f64 - 2.0 * k as f64) / 2.0;
            let off = Dd::from(h).mul_f64(m);
            let mut shifted = point;
            shifted[axis] = shifted[axis].add(off);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            total = total.add(rec(shifted, orders, axis + 1, h).mul_f64(sign * binom(n, k)));
        }
        let mut hn = Dd::ONE;
        for _ in 0..n {
            hn = hn.mul_f64(h);
        }
        total.div(hn)
    }
    rec([Dd::from(point[0]), Dd::from(point[1])], orders, 0, h)
}

/// Mixed partial of `f(u, v) = exp(u) sin(v)` by central differences with one
/// Richardson step at spacings `h` and `2h`, with all function values and
/// stencil arithmetic carried in double-double precision.
pub fn exp_sin_mixed_partial_fd(point: [f64; 2], orders: [usize; 2], h: f64) -> f64 {
    let fine = stencil(point, orders, h);
    let coarse = stencil(point, orders, 2.0 * h);
    fine.mul_f64(4.0).sub(coarse).div(Dd::from(3.0)).hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_arithmetic_hits_31_digits() {
        // (1 + 1e-20) - 1 survives in the low word.
        let a = Dd::ONE.add(Dd::from(1e-20));
        let b = a.sub(Dd::ONE);
        assert!((b.hi - 1e-20).abs() < 1e-33);
        // Division round trips.
        let x = Dd::from(0.3).div(Dd::from(0.7));
        let back = x.mul(Dd::from(0.7));
        assert!((back.hi - 0.3).abs() < 1e-30);
        assert!((back.hi - 0.3 + back.lo).abs() < 1e-30);
    }

    #[test]
    fn exp_and_sin_match_f64_to_their_accuracy() {
        for &x in &[-0.9, -0.3, 0.0, 0.4, 1.0] {
            assert!((exp_dd(Dd::from(x)).hi - x.exp()).abs() <= x.exp() * 3e-16);
            let (s, c) = sincos_dd(Dd::from(x));
            assert!((s.hi - x.sin()).abs() < 3e-16);
            assert!((c.hi - x.cos()).abs() < 3e-16);
        }
    }

    #[test]
    fn fifth_derivative_of_exp_is_resolved() {
        // d^5/du^5 exp(u) sin(v) = exp(u) sin(v); pure f64 stencils cannot
        // reach this accuracy at step 1e-2.
        let (u, v) = (0.3f64, 0.8f64);
        let exact = u.exp() * v.sin();
        let fd = exp_sin_mixed_partial_fd([u, v], [5, 0], 1e-2);
        assert!(
            ((fd - exact) / exact).abs() < 1e-7,
            "fd {fd} vs exact {exact}"
        );
    }
}
