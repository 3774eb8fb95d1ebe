//! Exact Wigner 3j/6j symbols and Clebsch–Gordan coefficients.
//!
//! Angular momenta are passed doubled (`2j`, `2m`) so that half-integers are
//! plain integers. Every symbol has the form `±√q` with rational `q`, which is
//! kept exactly in [`SignedSqrt`] until the final conversion to `f64`.

use std::ops::Mul;

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

type Q = Ratio<i128>;

/// A number `sign · √square` with exact rational `square ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedSqrt {
    pub sign: i8,
    pub square: Ratio<i128>,
}

impl SignedSqrt {
    pub fn zero() -> Self {
        Self { sign: 0, square: Q::zero() }
    }

    pub fn one() -> Self {
        Self { sign: 1, square: Q::one() }
    }

    /// `√q` for rational `q ≥ 0`.
    pub fn sqrt_of(q: Q) -> Self {
        assert!(!q.is_negative(), "square root of a negative rational");
        if q.is_zero() {
            Self::zero()
        } else {
            Self { sign: 1, square: q }
        }
    }

    /// Exact rational `r` (sign preserved).
    pub fn rational(r: Q) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        Self { sign: if r.is_negative() { -1 } else { 1 }, square: r * r }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn negate_if(self, flip: bool) -> Self {
        if flip {
            Self { sign: -self.sign, ..self }
        } else {
            self
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        let v = (*self.square.numer() as f64 / *self.square.denom() as f64).sqrt();
        if self.sign < 0 {
            -v
        } else {
            v
        }
    }
}

impl Mul for SignedSqrt {
    type Output = SignedSqrt;
    fn mul(self, rhs: SignedSqrt) -> SignedSqrt {
        if self.is_zero() || rhs.is_zero() {
            return SignedSqrt::zero();
        }
        SignedSqrt { sign: self.sign * rhs.sign, square: self.square * rhs.square }
    }
}

fn factorial(n: i32) -> i128 {
    assert!(n >= 0, "factorial of a negative number");
    assert!(n <= 33, "factorial overflows i128");
    (1..=n as i128).product()
}

fn triangle(tj1: i32, tj2: i32, tj3: i32) -> bool {
    tj3 >= (tj1 - tj2).abs() && tj3 <= tj1 + tj2 && (tj1 + tj2 + tj3) % 2 == 0
}

/// Squared triangle coefficient `(a+b−c)!(a−b+c)!(−a+b+c)!/(a+b+c+1)!`.
fn delta_sq(ta: i32, tb: i32, tc: i32) -> Q {
    Q::new(
        factorial((ta + tb - tc) / 2) * factorial((ta - tb + tc) / 2) * factorial((-ta + tb + tc) / 2),
        factorial((ta + tb + tc) / 2 + 1),
    )
}

fn valid_projection(tj: i32, tm: i32) -> bool {
    tm.abs() <= tj && (tj + tm) % 2 == 0
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)` with doubled arguments.
pub fn wigner_3j(tj1: i32, tj2: i32, tj3: i32, tm1: i32, tm2: i32, tm3: i32) -> SignedSqrt {
    if tm1 + tm2 + tm3 != 0
        || !triangle(tj1, tj2, tj3)
        || !valid_projection(tj1, tm1)
        || !valid_projection(tj2, tm2)
        || !valid_projection(tj3, tm3)
    {
        return SignedSqrt::zero();
    }
    let pre = delta_sq(tj1, tj2, tj3)
        * Q::from_integer(
            factorial((tj1 + tm1) / 2)
                * factorial((tj1 - tm1) / 2)
                * factorial((tj2 + tm2) / 2)
                * factorial((tj2 - tm2) / 2)
                * factorial((tj3 + tm3) / 2)
                * factorial((tj3 - tm3) / 2),
        );
    // Racah sum over k with all factorial arguments non-negative.
    let lo = 0.max((tj2 - tj3 - tm1) / 2).max((tj1 - tj3 + tm2) / 2);
    let hi = ((tj1 + tj2 - tj3) / 2).min((tj1 - tm1) / 2).min((tj2 + tm2) / 2);
    let mut sum = Q::zero();
    for k in lo..=hi {
        let den = factorial(k)
            * factorial((tj3 - tj2 + tm1) / 2 + k)
            * factorial((tj3 - tj1 - tm2) / 2 + k)
            * factorial((tj1 + tj2 - tj3) / 2 - k)
            * factorial((tj1 - tm1) / 2 - k)
            * factorial((tj2 + tm2) / 2 - k);
        let term = Q::new(1, den);
        sum += if k % 2 == 0 { term } else { -term };
    }
    let phase_odd = ((tj1 - tj2 - tm3) / 2).rem_euclid(2) == 1;
    (SignedSqrt::sqrt_of(pre) * SignedSqrt::rational(sum)).negate_if(phase_odd)
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}` with doubled arguments.
pub fn wigner_6j(tj1: i32, tj2: i32, tj3: i32, tj4: i32, tj5: i32, tj6: i32) -> SignedSqrt {
    let triads = [(tj1, tj2, tj3), (tj1, tj5, tj6), (tj4, tj2, tj6), (tj4, tj5, tj3)];
    if triads.iter().any(|&(a, b, c)| !triangle(a, b, c)) {
        return SignedSqrt::zero();
    }
    let pre = triads.iter().fold(Q::one(), |acc, &(a, b, c)| acc * delta_sq(a, b, c));
    let sums = triads.map(|(a, b, c)| (a + b + c) / 2);
    let tops = [(tj1 + tj2 + tj4 + tj5) / 2, (tj2 + tj3 + tj5 + tj6) / 2, (tj3 + tj1 + tj6 + tj4) / 2];
    let lo = *sums.iter().max().unwrap();
    let hi = *tops.iter().min().unwrap();
    let mut sum = Q::zero();
    for t in lo..=hi {
        let den = sums.iter().map(|s| factorial(t - s)).product::<i128>()
            * tops.iter().map(|s| factorial(s - t)).product::<i128>();
        let term = Q::new(factorial(t + 1), den);
        sum += if t % 2 == 0 { term } else { -term };
    }
    SignedSqrt::sqrt_of(pre) * SignedSqrt::rational(sum)
}

/// `⟨j1 m1; j2 m2 | J M⟩` with doubled arguments.
pub fn clebsch_gordan(tj1: i32, tm1: i32, tj2: i32, tm2: i32, tj: i32, tm: i32) -> SignedSqrt {
    let three = wigner_3j(tj1, tj2, tj, tm1, tm2, -tm);
    let phase_odd = ((tj1 - tj2 + tm) / 2).rem_euclid(2) == 1;
    (SignedSqrt::sqrt_of(Q::from_integer((tj + 1) as i128)) * three).negate_if(phase_odd)
}

/// Unnormalised hyperfine dipole amplitude
/// `(−1)^{F′+J+1+I} √((2F+1)(2J′+1)) {J J′ 1; F′ F I} ⟨F m; 1 q | F′ m′⟩`
/// for `|J, F, m⟩ → |J′, F′, m′ = m + q⟩` (all arguments doubled).
pub fn hyperfine_amplitude(ti: i32, tj: i32, tjp: i32, tf: i32, tm: i32, tfp: i32, tq: i32) -> SignedSqrt {
    let tmp = tm + tq;
    if tmp.abs() > tfp || tq.abs() > 2 {
        return SignedSqrt::zero();
    }
    let six = wigner_6j(tj, tjp, 2, tfp, tf, ti);
    let cg = clebsch_gordan(tf, tm, 2, tq, tfp, tmp);
    let weight = SignedSqrt::sqrt_of(Q::from_integer(((tf + 1) * (tjp + 1)) as i128));
    let phase = (tfp + tj + 2 + ti) / 2;
    (weight * six * cg).negate_if(phase.rem_euclid(2) == 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        // (1 1 0; 0 0 0) = −1/√3
        let v = wigner_3j(2, 2, 0, 0, 0, 0);
        assert_eq!(v.sign, -1);
        assert_eq!(v.square, Q::new(1, 3));
        // ⟨½ ½; ½ −½ | 1 0⟩ = 1/√2
        let c = clebsch_gordan(1, 1, 1, -1, 2, 0);
        assert_eq!((c.sign, c.square), (1, Q::new(1, 2)));
        // {1 1 1; 1 1 1} = 1/6
        let s = wigner_6j(2, 2, 2, 2, 2, 2);
        assert_eq!((s.sign, s.square), (1, Q::new(1, 36)));
    }
}
