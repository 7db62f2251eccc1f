//! Exact arithmetic in `Q` and `Q(sqrt 5)`.
//!
//! The golden ratio, its reciprocal and every point `1 - tau^-k` are
//! [`GoldenNumber`]s, so they carry no error until they are converted to a
//! [`BigReal`] at the very end.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::bigreal::{self, BigReal, PrecisionCtx};

/// Exact fraction in lowest terms with a positive denominator.
pub type Rational = BigRational;

/// Largest `|k|` accepted by [`tau_power`].
pub const TAU_POWER_LIMIT: i64 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("tau power {0} exceeds the supported range +/-{TAU_POWER_LIMIT}")]
    PowerOutOfRange(i64),
    #[error("malformed rational {0:?}: expected p/q with integer p and non-zero q")]
    MalformedRational(String),
}

/// Parse `p/q` or a bare integer `p`. Decimal notation is rejected.
pub fn parse_rational(s: &str) -> Result<Rational, ExactError> {
    let bad = || ExactError::MalformedRational(s.to_string());
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let is_int = |t: &str| {
        let digits = t.strip_prefix(['-', '+']).unwrap_or(t);
        !digits.is_empty() && digits.bytes().all(|c| c.is_ascii_digit())
    };
    if !is_int(num) || !is_int(den) {
        return Err(bad());
    }
    let n = BigInt::from_str(num).map_err(|_| bad())?;
    let d = BigInt::from_str(den).map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

/// `a + b*sqrt(5)` with rational `a`, `b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GoldenNumber {
    a: Rational,
    b: Rational,
}

/// Field operation selector for [`golden_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoldenOp {
    Add,
    Sub,
    Mul,
}

impl GoldenNumber {
    pub fn new(a: Rational, b: Rational) -> Self {
        Self { a, b }
    }

    pub fn from_rational(a: Rational) -> Self {
        Self::new(a, Rational::zero())
    }

    pub fn from_i64(a: i64, b: i64) -> Self {
        Self::new(Rational::from_integer(a.into()), Rational::from_integer(b.into()))
    }

    pub fn zero() -> Self {
        Self::from_i64(0, 0)
    }

    pub fn one() -> Self {
        Self::from_i64(1, 0)
    }

    /// Rational part.
    pub fn a(&self) -> &Rational {
        &self.a
    }

    /// Coefficient of `sqrt 5`.
    pub fn b(&self) -> &Rational {
        &self.b
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Galois conjugate `a - b*sqrt(5)`.
    pub fn conjugate(&self) -> Self {
        Self::new(self.a.clone(), -&self.b)
    }

    /// Field norm `a^2 - 5 b^2`; zero only for zero.
    pub fn norm(&self) -> Rational {
        &self.a * &self.a - Rational::from_integer(5.into()) * &self.b * &self.b
    }

    pub fn inverse(&self) -> Result<Self, ExactError> {
        if self.is_zero() {
            return Err(ExactError::DivisionByZero);
        }
        let n = self.norm();
        // sqrt 5 is irrational, so a^2 = 5 b^2 forces a = b = 0
        assert!(!n.is_zero(), "zero norm for non-zero element of Q(sqrt 5)");
        let c = self.conjugate();
        Ok(Self::new(c.a / &n, c.b / &n))
    }

    /// Exact integer power; negative exponents go through [`Self::inverse`].
    pub fn pow(&self, k: i64) -> Result<Self, ExactError> {
        let base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Self::one();
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Ok(acc)
    }

    /// Sign of the real number `a + b sqrt 5`, decided exactly.
    pub fn signum(&self) -> i32 {
        let sa = sign_of(&self.a);
        let sb = sign_of(&self.b);
        if sa == 0 || sb == 0 || sa == sb {
            return if sa != 0 { sa } else { sb };
        }
        // opposite signs: compare a^2 with 5 b^2
        let n = self.norm();
        if n.is_positive() {
            sa
        } else {
            sb
        }
    }

    /// Real value within 1 ulp at working precision.
    pub fn to_real(&self, ctx: &PrecisionCtx) -> BigReal {
        let prec = ctx.working_bits();
        let w = prec + 16;
        if self.b.is_zero() {
            return BigReal::from_rational(&self.a, ctx);
        }
        let sqrt5 = bigreal::sqrt_bits(&BigReal::from_i64(5), w).expect("positive");
        let same_sign = sign_of(&self.a) * sign_of(&self.b) >= 0;
        let value = if same_sign {
            let a = BigReal::from_rational_bits(&self.a, w);
            let b = BigReal::from_rational_bits(&self.b, w);
            bigreal::add_bits(&a, &bigreal::mul_bits(&b, &sqrt5, w), w)
        } else {
            // a + b sqrt5 = norm / (a - b sqrt5); the denominator has no
            // cancellation when a and b have opposite signs
            let a = BigReal::from_rational_bits(&self.a, w);
            let b = BigReal::from_rational_bits(&self.b, w);
            let den = bigreal::add_bits(&a, &-bigreal::mul_bits(&b, &sqrt5, w), w);
            let n = BigReal::from_rational_bits(&self.norm(), w);
            bigreal::div_bits(&n, &den, w).expect("non-zero conjugate")
        };
        value.round(ctx)
    }
}

fn sign_of(q: &Rational) -> i32 {
    if q.is_positive() {
        1
    } else if q.is_negative() {
        -1
    } else {
        0
    }
}

impl fmt::Display for GoldenNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}*sqrt(5)", self.a, self.b)
    }
}

impl Add for &GoldenNumber {
    type Output = GoldenNumber;
    fn add(self, rhs: &GoldenNumber) -> GoldenNumber {
        GoldenNumber::new(&self.a + &rhs.a, &self.b + &rhs.b)
    }
}

impl Sub for &GoldenNumber {
    type Output = GoldenNumber;
    fn sub(self, rhs: &GoldenNumber) -> GoldenNumber {
        GoldenNumber::new(&self.a - &rhs.a, &self.b - &rhs.b)
    }
}

impl Mul for &GoldenNumber {
    type Output = GoldenNumber;
    fn mul(self, rhs: &GoldenNumber) -> GoldenNumber {
        let five = Rational::from_integer(5.into());
        GoldenNumber::new(
            &self.a * &rhs.a + five * &self.b * &rhs.b,
            &self.a * &rhs.b + &self.b * &rhs.a,
        )
    }
}

impl Neg for &GoldenNumber {
    type Output = GoldenNumber;
    fn neg(self) -> GoldenNumber {
        GoldenNumber::new(-&self.a, -&self.b)
    }
}

/// The golden ratio `(1 + sqrt 5) / 2`.
pub fn golden_tau() -> GoldenNumber {
    let half = Rational::new(1.into(), 2.into());
    GoldenNumber::new(half.clone(), half)
}

pub fn golden_arith(op: GoldenOp, lhs: &GoldenNumber, rhs: &GoldenNumber) -> GoldenNumber {
    match op {
        GoldenOp::Add => lhs + rhs,
        GoldenOp::Sub => lhs - rhs,
        GoldenOp::Mul => lhs * rhs,
    }
}

pub fn golden_inverse(g: &GoldenNumber) -> Result<GoldenNumber, ExactError> {
    g.inverse()
}

pub fn golden_to_real(g: &GoldenNumber, ctx: &PrecisionCtx) -> BigReal {
    g.to_real(ctx)
}

/// `(F(n), F(n+1))` by fast doubling, `n >= 0`.
fn fib_pair(n: u64) -> (BigInt, BigInt) {
    if n == 0 {
        return (BigInt::zero(), BigInt::one());
    }
    let (f, g) = fib_pair(n / 2);
    // F(2m) = F(m) (2F(m+1) - F(m)), F(2m+1) = F(m)^2 + F(m+1)^2
    let even = &f * ((&g << 1u32) - &f);
    let odd = &f * &f + &g * &g;
    if n % 2 == 0 {
        (even, odd)
    } else {
        let next = &even + &odd;
        (odd, next)
    }
}

/// Fibonacci number for any integer index, `F(-n) = (-1)^(n+1) F(n)`.
pub fn fibonacci(n: i64) -> BigInt {
    let (f, _) = fib_pair(n.unsigned_abs());
    if n < 0 && n % 2 == 0 {
        -f
    } else {
        f
    }
}

/// `tau^k = F(k) tau + F(k-1)`, valid for every integer `k`.
pub fn tau_power(k: i64) -> Result<GoldenNumber, ExactError> {
    if k.abs() > TAU_POWER_LIMIT {
        return Err(ExactError::PowerOutOfRange(k));
    }
    let fk = Rational::from_integer(fibonacci(k));
    let fk1 = Rational::from_integer(fibonacci(k - 1));
    let half = Rational::new(1.into(), 2.into());
    let b = &fk * &half;
    Ok(GoldenNumber::new(&b + fk1, b))
}

/// Same value as [`tau_power`] by binary powering of `tau` or `1/tau`.
pub fn tau_power_by_squaring(k: i64) -> Result<GoldenNumber, ExactError> {
    if k.abs() > TAU_POWER_LIMIT {
        return Err(ExactError::PowerOutOfRange(k));
    }
    golden_tau().pow(k)
}

/// `1 - tau^-k`, the base of the k-th factor of the golden product.
pub fn one_minus_inverse_tau_power(k: i64) -> Result<GoldenNumber, ExactError> {
    Ok(&GoldenNumber::one() - &tau_power(-k)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn g(a: (i64, i64), b: (i64, i64)) -> GoldenNumber {
        GoldenNumber::new(q(a.0, a.1), q(b.0, b.1))
    }

    #[test]
    fn tau_identities() {
        let tau = golden_tau();
        assert_eq!(tau, g((1, 2), (1, 2)));
        assert_eq!(&tau * &tau, &tau + &GoldenNumber::one());
        assert_eq!(&tau - &tau.inverse().unwrap(), GoldenNumber::one());
    }

    #[test]
    fn field_ops() {
        let r5 = g((0, 1), (1, 1));
        assert_eq!(golden_arith(GoldenOp::Mul, &r5, &r5), g((5, 1), (0, 1)));
        assert_eq!(
            golden_arith(GoldenOp::Add, &golden_tau(), &g((-1, 1), (0, 1))),
            g((-1, 2), (1, 2))
        );
        assert_eq!(
            golden_arith(GoldenOp::Mul, &golden_tau(), &g((-1, 2), (1, 2))),
            GoldenNumber::one()
        );
        assert_eq!(
            golden_arith(GoldenOp::Sub, &golden_tau(), &golden_tau()),
            GoldenNumber::zero()
        );
    }

    #[test]
    fn inverses() {
        assert_eq!(golden_inverse(&golden_tau()).unwrap(), g((-1, 2), (1, 2)));
        assert_eq!(golden_inverse(&GoldenNumber::one()).unwrap(), GoldenNumber::one());
        assert_eq!(golden_inverse(&g((0, 1), (1, 1))).unwrap(), g((0, 1), (1, 5)));
        assert_eq!(
            golden_inverse(&GoldenNumber::zero()),
            Err(ExactError::DivisionByZero)
        );
    }

    #[test]
    fn fibonacci_small_and_negative() {
        let expected = [0, 1, 1, 2, 3, 5, 8, 13, 21, 34, 55];
        for (n, f) in expected.iter().enumerate() {
            assert_eq!(fibonacci(n as i64), BigInt::from(*f));
        }
        assert_eq!(fibonacci(-1), BigInt::from(1));
        assert_eq!(fibonacci(-2), BigInt::from(-1));
        assert_eq!(fibonacci(-5), BigInt::from(5));
        assert_eq!(fibonacci(-6), BigInt::from(-8));
    }

    #[test]
    fn tau_power_examples() {
        assert_eq!(tau_power(0).unwrap(), GoldenNumber::one());
        assert_eq!(tau_power(1).unwrap(), golden_tau());
        assert_eq!(tau_power(2).unwrap(), g((3, 2), (1, 2)));
        assert_eq!(tau_power(-2).unwrap(), g((3, 2), (-1, 2)));
        assert_eq!(tau_power(-1).unwrap(), g((-1, 2), (1, 2)));
        assert_eq!(tau_power(TAU_POWER_LIMIT + 1), Err(ExactError::PowerOutOfRange(TAU_POWER_LIMIT + 1)));
        assert!(tau_power(-TAU_POWER_LIMIT).is_ok());
    }

    #[test]
    fn both_power_routes_agree() {
        for k in -60..=60 {
            assert_eq!(tau_power(k).unwrap(), tau_power_by_squaring(k).unwrap(), "k={k}");
        }
        assert_eq!(tau_power(5000).unwrap(), tau_power_by_squaring(5000).unwrap());
    }

    #[test]
    fn product_points() {
        assert_eq!(one_minus_inverse_tau_power(1).unwrap(), g((3, 2), (-1, 2)));
        assert_eq!(
            one_minus_inverse_tau_power(1).unwrap(),
            tau_power(-2).unwrap()
        );
        assert_eq!(
            one_minus_inverse_tau_power(2).unwrap(),
            tau_power(-1).unwrap()
        );
    }

    #[test]
    fn exact_sign() {
        assert_eq!(golden_tau().signum(), 1);
        assert_eq!(tau_power(-41).unwrap().signum(), 1);
        assert_eq!((-&tau_power(-40).unwrap()).signum(), -1);
        assert_eq!(g((-2, 1), (1, 1)).signum(), 1);
        assert_eq!(g((-9, 4), (1, 1)).signum(), -1);
        assert_eq!(GoldenNumber::zero().signum(), 0);
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("1/2").unwrap(), q(1, 2));
        assert_eq!(parse_rational("-6/4").unwrap(), q(-3, 2));
        assert_eq!(parse_rational("7").unwrap(), q(7, 1));
        for bad in ["0.5", "1/0", "a/b", "", "1/", "/2", "1e3", "1/2/3"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn exact_values_convert_exactly() {
        let ctx = PrecisionCtx::new(64).unwrap();
        assert_eq!(GoldenNumber::one().to_real(&ctx), BigReal::one());
        assert_eq!(g((-3, 4), (0, 1)).to_real(&ctx), BigReal::from_i64(-3).mul_pow2(-2));
    }
}
