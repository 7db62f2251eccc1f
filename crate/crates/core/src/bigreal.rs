//! Arbitrary-precision binary floating point.
//!
//! A [`BigReal`] is `mantissa * 2^exponent` with an arbitrary-size integer
//! mantissa. Every rounded operation takes its precision from a
//! [`PrecisionCtx`] value; there is no global rounding state, so evaluations at
//! different precisions can run side by side.
//!
//! Rounding contracts, all at the context's working precision
//! (`target_bits + guard_bits`):
//!
//! | operation                       | error                   |
//! |---------------------------------|-------------------------|
//! | add, sub, mul, div, sqrt        | <= 1/2 ulp (correctly rounded, ties to even) |
//! | [`real_ln`], [`real_exp`]       | <= 2 ulp                |
//! | [`real_pow_rational`]           | <= 4 ulp                |
//!
//! `ln` and `exp` are evaluated internally with at least 32 extra bits and
//! rounded once at the end, which keeps them well inside their budgets.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Smallest target precision accepted by [`PrecisionCtx`].
pub const MIN_TARGET_BITS: u32 = 16;
/// Largest target precision accepted by [`PrecisionCtx`].
pub const MAX_TARGET_BITS: u32 = 1 << 20;
/// Guard bits added on top of the target precision by [`PrecisionCtx::new`].
pub const BASE_GUARD_BITS: u32 = 64;
/// Guard bits may never drop below this.
pub const MIN_GUARD_BITS: u32 = 32;
/// `real_exp` rejects arguments with `|x|` above this bound (`2^30`).
pub const EXP_ARG_LIMIT: f64 = 1_073_741_824.0;

/// Extra bits carried by ln/exp internals beyond the requested precision.
const TRANSCENDENTAL_EXTRA_BITS: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RealError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative number")]
    NegativeSqrt,
    #[error("logarithm of a non-positive number")]
    LogDomain,
    #[error("exp argument {0} exceeds the supported bound 2^30")]
    ExpOverflow(String),
    #[error("non-positive base {0} raised to a non-zero power")]
    PowDomain(String),
    #[error("series argument must lie strictly between 0 and 1")]
    SeriesDomain,
    #[error("series needs at least one term")]
    NoTerms,
    #[error("{op} expects {expected} operand(s), got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("precision of {target} target bits / {guard} guard bits is out of range")]
    InvalidPrecision { target: u32, guard: u32 },
}

pub type Result<T> = std::result::Result<T, RealError>;

/// Target precision plus a guard-bit budget.
///
/// Public results are documented as accurate to `target_bits`; all arithmetic
/// happens at `working_bits() = target_bits + guard_bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecisionCtx {
    target_bits: u32,
    guard_bits: u32,
}

impl PrecisionCtx {
    /// Context with the base guard budget of 64 bits.
    pub fn new(target_bits: u32) -> Result<Self> {
        Self::with_guard_bits(target_bits, BASE_GUARD_BITS)
    }

    /// Guard budget sized for `ops` accumulated roundings:
    /// `64 + ceil(log2(ops))`.
    pub fn for_operations(target_bits: u32, ops: u64) -> Result<Self> {
        let extra = if ops <= 1 {
            0
        } else {
            64 - (ops - 1).leading_zeros()
        };
        Self::with_guard_bits(target_bits, BASE_GUARD_BITS + extra)
    }

    pub fn with_guard_bits(target_bits: u32, guard_bits: u32) -> Result<Self> {
        if !(MIN_TARGET_BITS..=MAX_TARGET_BITS).contains(&target_bits)
            || guard_bits < MIN_GUARD_BITS
            || guard_bits > MAX_TARGET_BITS
        {
            return Err(RealError::InvalidPrecision {
                target: target_bits,
                guard: guard_bits,
            });
        }
        Ok(Self {
            target_bits,
            guard_bits,
        })
    }

    pub fn target_bits(&self) -> u32 {
        self.target_bits
    }

    pub fn guard_bits(&self) -> u32 {
        self.guard_bits
    }

    pub fn working_bits(&self) -> u32 {
        self.target_bits + self.guard_bits
    }

    /// Same target with `extra` more guard bits.
    pub fn widened(&self, extra: u32) -> Self {
        Self {
            target_bits: self.target_bits,
            guard_bits: self.guard_bits + extra,
        }
    }

    /// `2^-target_bits`: the absolute accuracy promised for results of
    /// magnitude at most one.
    pub fn target_epsilon(&self) -> BigReal {
        BigReal::pow2(-(self.target_bits as i64))
    }
}

/// Finite arbitrary-precision real, `mantissa * 2^exponent`.
///
/// The mantissa is kept odd (or zero, with exponent zero), so two values are
/// equal exactly when their fields are. `precision` records the bit precision
/// the value was produced at and does not take part in comparisons.
#[derive(Clone)]
pub struct BigReal {
    mantissa: BigInt,
    exponent: i64,
    precision: u32,
}

/// Arithmetic operation selector for [`real_eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealOp {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
}

impl RealOp {
    fn name(self) -> &'static str {
        match self {
            RealOp::Add => "add",
            RealOp::Sub => "sub",
            RealOp::Mul => "mul",
            RealOp::Div => "div",
            RealOp::Sqrt => "sqrt",
        }
    }

    fn arity(self) -> usize {
        match self {
            RealOp::Sqrt => 1,
            _ => 2,
        }
    }
}

fn normalize(mantissa: BigInt, exponent: i64, precision: u32) -> BigReal {
    if mantissa.is_zero() {
        return BigReal {
            mantissa,
            exponent: 0,
            precision,
        };
    }
    let tz = mantissa.trailing_zeros().unwrap_or(0);
    BigReal {
        mantissa: mantissa >> tz,
        exponent: exponent + tz as i64,
        precision,
    }
}

/// Round `mantissa * 2^exponent` to `prec` significant bits, ties to even.
fn round_to(mantissa: BigInt, exponent: i64, prec: u32) -> BigReal {
    let bits = mantissa.bits();
    if bits <= prec as u64 {
        return normalize(mantissa, exponent, prec);
    }
    let shift = bits - prec as u64;
    let (sign, magnitude) = mantissa.into_parts();
    let kept = &magnitude >> shift;
    let dropped = magnitude - (&kept << shift);
    let half = BigUint::one() << (shift - 1);
    let kept = match dropped.cmp(&half) {
        Ordering::Greater => kept + 1u32,
        Ordering::Equal if kept.is_odd() => kept + 1u32,
        _ => kept,
    };
    normalize(
        BigInt::from_biguint(sign, kept),
        exponent + shift as i64,
        prec,
    )
}

impl BigReal {
    pub fn zero() -> Self {
        normalize(BigInt::zero(), 0, 1)
    }

    pub fn one() -> Self {
        Self::from_i64(1)
    }

    pub fn from_i64(v: i64) -> Self {
        Self::from_bigint(&BigInt::from(v))
    }

    /// Exact conversion.
    pub fn from_bigint(v: &BigInt) -> Self {
        let prec = v.bits().max(1) as u32;
        normalize(v.clone(), 0, prec)
    }

    /// `2^k`, exact.
    pub fn pow2(k: i64) -> Self {
        normalize(BigInt::one(), k, 1)
    }

    /// Exact binary value `mantissa * 2^exponent`.
    pub fn from_parts(mantissa: BigInt, exponent: i64) -> Self {
        let prec = mantissa.bits().max(1) as u32;
        normalize(mantissa, exponent, prec)
    }

    /// Correctly rounded `p/q`.
    pub fn from_rational(q: &BigRational, ctx: &PrecisionCtx) -> Self {
        Self::from_rational_bits(q, ctx.working_bits())
    }

    pub(crate) fn from_rational_bits(q: &BigRational, prec: u32) -> Self {
        if q.denom().is_one() {
            return round_to(q.numer().clone(), 0, prec);
        }
        div_bigints(q.numer(), q.denom(), 0, prec)
    }

    /// Nearest `f64`; only meant for estimates and display in tests.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mantissa.bits() as i64;
        let shift = (bits - 60).max(0);
        let top = (&self.mantissa >> shift as u64).to_f64().unwrap_or(f64::NAN);
        let e = self.exponent + shift;
        let e = e.clamp(-2000, 2000) as i32;
        // split the scaling so intermediate powers stay finite
        top * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn signum(&self) -> i32 {
        match self.mantissa.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    /// Smallest `m` with `|self| < 2^m`. Zero maps to `i64::MIN`.
    pub fn magnitude_bits(&self) -> i64 {
        if self.is_zero() {
            i64::MIN
        } else {
            self.mantissa.bits() as i64 + self.exponent
        }
    }

    /// Spacing of `prec`-bit floats at `|self|`, i.e. `2^(magnitude_bits - prec)`.
    /// For zero this is the smallest representable step, returned as zero.
    pub fn ulp(&self, prec: u32) -> BigReal {
        if self.is_zero() {
            return BigReal::zero();
        }
        BigReal::pow2(self.magnitude_bits() - prec as i64)
    }

    pub fn abs(&self) -> BigReal {
        BigReal {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
            precision: self.precision,
        }
    }

    /// Multiply by `2^k`, exact.
    pub fn mul_pow2(&self, k: i64) -> BigReal {
        if self.is_zero() {
            return self.clone();
        }
        BigReal {
            mantissa: self.mantissa.clone(),
            exponent: self.exponent + k,
            precision: self.precision,
        }
    }

    /// Exact value as a rational number.
    pub fn to_rational(&self) -> BigRational {
        if self.exponent >= 0 {
            BigRational::from_integer(&self.mantissa << self.exponent as u64)
        } else {
            BigRational::new(
                self.mantissa.clone(),
                BigInt::one() << (-self.exponent) as u64,
            )
        }
    }

    pub fn add(&self, rhs: &BigReal, ctx: &PrecisionCtx) -> BigReal {
        add_bits(self, rhs, ctx.working_bits())
    }

    pub fn sub(&self, rhs: &BigReal, ctx: &PrecisionCtx) -> BigReal {
        add_bits(self, &-rhs, ctx.working_bits())
    }

    pub fn mul(&self, rhs: &BigReal, ctx: &PrecisionCtx) -> BigReal {
        mul_bits(self, rhs, ctx.working_bits())
    }

    pub fn div(&self, rhs: &BigReal, ctx: &PrecisionCtx) -> Result<BigReal> {
        div_bits(self, rhs, ctx.working_bits())
    }

    pub fn sqrt(&self, ctx: &PrecisionCtx) -> Result<BigReal> {
        sqrt_bits(self, ctx.working_bits())
    }

    /// Round to the context's working precision.
    pub fn round(&self, ctx: &PrecisionCtx) -> BigReal {
        round_to(self.mantissa.clone(), self.exponent, ctx.working_bits())
    }

    /// `|self|` increased by `ulps` units in the last place at `prec` bits.
    ///
    /// Turns a value known to within `ulps` ulp of an upper bound into a
    /// proven upper bound.
    pub fn inflate(&self, ulps: u32, prec: u32) -> BigReal {
        if self.is_zero() {
            return self.clone();
        }
        let bump = BigReal::from_i64(ulps as i64).mul_pow2(self.magnitude_bits() - prec as i64);
        add_exact(&self.abs(), &bump)
    }

    /// Decimal string with `digits` significant digits, rounded to nearest.
    ///
    /// Magnitudes in `[1e-3, 1e9)` are printed positionally
    /// (`-12.3456`); everything else in scientific notation (`1.2345e-42`).
    pub fn to_decimal_string(&self, digits: usize) -> String {
        format_decimal(self, digits.max(1))
    }
}

impl PartialEq for BigReal {
    fn eq(&self, other: &Self) -> bool {
        self.mantissa == other.mantissa && self.exponent == other.exponent
    }
}

impl Eq for BigReal {}

impl PartialOrd for BigReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BigReal {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        let by_magnitude = self
            .magnitude_bits()
            .cmp(&other.magnitude_bits())
            .then_with(|| {
                let e = self.exponent.min(other.exponent);
                let a = self.mantissa.abs() << (self.exponent - e) as u64;
                let b = other.mantissa.abs() << (other.exponent - e) as u64;
                a.cmp(&b)
            });
        if sa > 0 {
            by_magnitude
        } else {
            by_magnitude.reverse()
        }
    }
}

impl std::ops::Neg for &BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal {
            mantissa: -&self.mantissa,
            exponent: self.exponent,
            precision: self.precision,
        }
    }
}

impl std::ops::Neg for BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        -&self
    }
}

impl fmt::Debug for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BigReal({} @{}b)",
            self.to_decimal_string(40),
            self.precision
        )
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(30);
        f.write_str(&self.to_decimal_string(digits))
    }
}

fn add_exact(a: &BigReal, b: &BigReal) -> BigReal {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    let e = a.exponent.min(b.exponent);
    let m = (&a.mantissa << (a.exponent - e) as u64) + (&b.mantissa << (b.exponent - e) as u64);
    let prec = m.bits().max(1) as u32;
    normalize(m, e, prec)
}

pub(crate) fn add_bits(a: &BigReal, b: &BigReal, prec: u32) -> BigReal {
    if a.is_zero() {
        return round_to(b.mantissa.clone(), b.exponent, prec);
    }
    if b.is_zero() {
        return round_to(a.mantissa.clone(), a.exponent, prec);
    }
    let (big, small) = if a.magnitude_bits() >= b.magnitude_bits() {
        (a, b)
    } else {
        (b, a)
    };
    // A summand far below both the rounding position and the last bit of the
    // larger one only decides the direction of rounding; replace it by a
    // same-signed sticky bit instead of aligning across a huge exponent gap.
    let cutoff = big
        .exponent
        .min(big.magnitude_bits() - prec as i64 - 2)
        - 1;
    if small.magnitude_bits() <= cutoff {
        let sticky = BigReal {
            mantissa: BigInt::from(small.signum()),
            exponent: cutoff - 1,
            precision: 1,
        };
        let s = add_exact(big, &sticky);
        return round_to(s.mantissa, s.exponent, prec);
    }
    let s = add_exact(big, small);
    round_to(s.mantissa, s.exponent, prec)
}

pub(crate) fn mul_bits(a: &BigReal, b: &BigReal, prec: u32) -> BigReal {
    round_to(&a.mantissa * &b.mantissa, a.exponent + b.exponent, prec)
}

/// Correctly rounded `(n / d) * 2^exponent` with `d > 0`.
fn div_bigints(n: &BigInt, d: &BigInt, exponent: i64, prec: u32) -> BigReal {
    if n.is_zero() {
        return BigReal::zero();
    }
    // quotient gets at least prec + 2 bits, then a sticky bit
    let want = prec as i64 + 3;
    let shift = (want - n.bits() as i64 + d.bits() as i64).max(0) as u64;
    let (q, r) = (n.abs() << shift).div_rem(&d.abs());
    let mut q = q;
    let mut e = exponent - shift as i64;
    if !r.is_zero() {
        q = (q << 1u32) + 1u32;
        e -= 1;
    }
    let negative = n.is_negative() != d.is_negative();
    round_to(if negative { -q } else { q }, e, prec)
}

pub(crate) fn div_bits(a: &BigReal, b: &BigReal, prec: u32) -> Result<BigReal> {
    if b.is_zero() {
        return Err(RealError::DivisionByZero);
    }
    Ok(div_bigints(
        &a.mantissa,
        &b.mantissa,
        a.exponent - b.exponent,
        prec,
    ))
}

pub(crate) fn sqrt_bits(a: &BigReal, prec: u32) -> Result<BigReal> {
    if a.is_negative() {
        return Err(RealError::NegativeSqrt);
    }
    if a.is_zero() {
        return Ok(BigReal::zero());
    }
    let want = 2 * (prec as i64 + 3) + 1;
    let mut shift = (want - a.mantissa.bits() as i64).max(0);
    if (a.exponent - shift).rem_euclid(2) != 0 {
        shift += 1;
    }
    let m = a.mantissa.magnitude() << shift as u64;
    let mut s = m.sqrt();
    let mut e = (a.exponent - shift) / 2;
    if &s * &s != m {
        s = (s << 1u32) + 1u32;
        e -= 1;
    }
    Ok(round_to(BigInt::from(s), e, prec))
}

/// One of the basic correctly rounded operations, selected at runtime.
pub fn real_eval(op: RealOp, operands: &[BigReal], ctx: &PrecisionCtx) -> Result<BigReal> {
    if operands.len() != op.arity() {
        return Err(RealError::Arity {
            op: op.name(),
            expected: op.arity(),
            got: operands.len(),
        });
    }
    match op {
        RealOp::Add => Ok(operands[0].add(&operands[1], ctx)),
        RealOp::Sub => Ok(operands[0].sub(&operands[1], ctx)),
        RealOp::Mul => Ok(operands[0].mul(&operands[1], ctx)),
        RealOp::Div => operands[0].div(&operands[1], ctx),
        RealOp::Sqrt => operands[0].sqrt(ctx),
    }
}

/// `atanh(z) = z + z^3/3 + z^5/5 + ...` at `prec` bits, for `|z| <= 1/3`.
///
/// All terms share the sign of `z`, so there is no cancellation and the
/// relative error stays within a few ulp per term.
fn atanh_series(z: &BigReal, prec: u32) -> BigReal {
    if z.is_zero() {
        return BigReal::zero();
    }
    let z2 = mul_bits(z, z, prec);
    let mut power = z.clone();
    let mut sum = z.clone();
    let mut k: i64 = 1;
    loop {
        power = mul_bits(&power, &z2, prec);
        k += 2;
        let term = div_bits(&power, &BigReal::from_i64(k), prec).expect("odd divisor");
        if term.magnitude_bits() < sum.magnitude_bits() - prec as i64 - 4 {
            break;
        }
        sum = add_bits(&sum, &term, prec);
    }
    sum
}

/// `ln 2 = 2 atanh(1/3)` at `prec` bits.
fn ln2_bits(prec: u32) -> BigReal {
    let w = prec + 16;
    let third = div_bigints(&BigInt::one(), &BigInt::from(3), 0, w);
    let half_ln2 = atanh_series(&third, w);
    round_to(half_ln2.mantissa, half_ln2.exponent + 1, prec)
}

fn ln_bits(x: &BigReal, prec: u32) -> Result<BigReal> {
    if !x.is_positive() {
        return Err(RealError::LogDomain);
    }
    if *x == BigReal::one() {
        return Ok(BigReal::zero());
    }
    let w = prec + TRANSCENDENTAL_EXTRA_BITS;
    // x = y * 2^k with y in [1/sqrt2, sqrt2): |ln y| <= 0.35 and, for k != 0,
    // |ln x| >= 0.34, so the final sum cannot cancel badly.
    let mut k = x.magnitude_bits();
    let mut y = x.mul_pow2(-k);
    if mul_bits(&y, &y, w + 8) < BigReal::pow2(-1) {
        y = y.mul_pow2(1);
        k -= 1;
    }
    let one = BigReal::one();
    let num = add_exact(&y, &-&one);
    let den = add_exact(&y, &one);
    let z = div_bits(&num, &den, w)?;
    let ln_y = atanh_series(&z, w).mul_pow2(1);
    if k == 0 {
        return Ok(round_to(ln_y.mantissa, ln_y.exponent, prec));
    }
    let kbits = 64 - k.unsigned_abs().leading_zeros();
    let ln2 = ln2_bits(w + kbits);
    let k_ln2 = mul_bits(&BigReal::from_i64(k), &ln2, w + kbits);
    let sum = add_bits(&k_ln2, &ln_y, w);
    Ok(round_to(sum.mantissa, sum.exponent, prec))
}

fn exp_bits(x: &BigReal, prec: u32) -> Result<BigReal> {
    if x.is_zero() {
        return Ok(BigReal::one());
    }
    let approx = x.to_f64();
    if !(approx.abs() <= EXP_ARG_LIMIT) {
        return Err(RealError::ExpOverflow(x.to_decimal_string(12)));
    }
    let k = (approx / std::f64::consts::LN_2).round() as i64;
    let kbits = 64 - k.unsigned_abs().leading_zeros();
    let halvings = ((prec as f64).sqrt() / 2.0).ceil() as i64;
    let w = prec + TRANSCENDENTAL_EXTRA_BITS + kbits + halvings as u32;

    // r = x - k ln2, |r| <= ~0.35
    let r = if k == 0 {
        round_to(x.mantissa.clone(), x.exponent, w)
    } else {
        let ln2 = ln2_bits(w + kbits + 4);
        let k_ln2 = mul_bits(&BigReal::from_i64(k), &ln2, w + kbits + 4);
        add_bits(x, &-k_ln2, w)
    };
    let r = r.mul_pow2(-halvings);

    // Taylor series for exp(r) with |r| < 2^-halvings
    let mut sum = add_bits(&BigReal::one(), &r, w);
    let mut term = r.clone();
    let mut n: i64 = 1;
    loop {
        n += 1;
        term = mul_bits(&term, &r, w);
        term = div_bits(&term, &BigReal::from_i64(n), w)?;
        if term.is_zero() || term.magnitude_bits() < -(w as i64) - 4 {
            break;
        }
        sum = add_bits(&sum, &term, w);
    }
    for _ in 0..halvings {
        sum = mul_bits(&sum, &sum, w);
    }
    let sum = sum.mul_pow2(k);
    Ok(round_to(sum.mantissa, sum.exponent, prec))
}

/// Natural logarithm, within 2 ulp at working precision.
pub fn real_ln(x: &BigReal, ctx: &PrecisionCtx) -> Result<BigReal> {
    ln_bits(x, ctx.working_bits())
}

/// `e^x`, within 2 ulp at working precision. `|x|` must not exceed `2^30`.
pub fn real_exp(x: &BigReal, ctx: &PrecisionCtx) -> Result<BigReal> {
    exp_bits(x, ctx.working_bits())
}

/// `base^exponent` as `exp(exponent * ln(base))`, within 4 ulp.
///
/// Exponent 0 gives exactly 1 (for any non-zero base) and exponent 1 returns
/// `base` unchanged.
pub fn real_pow_rational(
    base: &BigReal,
    exponent: &BigRational,
    ctx: &PrecisionCtx,
) -> Result<BigReal> {
    if exponent.is_zero() {
        if base.is_zero() {
            return Err(RealError::PowDomain(base.to_decimal_string(12)));
        }
        return Ok(BigReal::one());
    }
    if exponent.is_one() {
        return Ok(base.clone());
    }
    if !base.is_positive() {
        return Err(RealError::PowDomain(base.to_decimal_string(12)));
    }
    // The absolute error of q*ln(b) becomes the relative error of the result,
    // so carry enough extra bits to cover |q ln b|.
    let q_bits = (exponent.numer().bits() as i64 - exponent.denom().bits() as i64 + 1).max(0);
    let ln_bits_estimate = 64 - (base.magnitude_bits().unsigned_abs() + 1).leading_zeros() as i64;
    let extra = (q_bits + ln_bits_estimate + 8) as u32;
    let w = ctx.working_bits() + extra;
    let ln_base = ln_bits(base, w)?;
    let q = BigReal::from_rational_bits(exponent, w);
    let scaled = mul_bits(&ln_base, &q, w);
    exp_bits(&scaled, ctx.working_bits())
}

/// Partial sum of the Maclaurin series `-ln(1 - y) = sum_j y^j / j`.
#[derive(Debug, Clone)]
pub struct SeriesValue {
    pub sum: BigReal,
    /// Proven bound on the omitted terms: `y^(n+1) / ((n+1)(1-y))`.
    pub tail_bound: BigReal,
    pub terms: u64,
}

/// `sum_{j=1..terms} y^j / j` for `0 < y < 1`, with its tail bound.
///
/// The omitted terms satisfy `sum_{j>n} y^j/j <= y^(n+1)/(n+1) * sum_i y^i`,
/// which is the reported bound. Independent of [`real_ln`].
pub fn neg_log1m_series(y: &BigReal, terms: u64, ctx: &PrecisionCtx) -> Result<SeriesValue> {
    let one = BigReal::one();
    if !y.is_positive() || *y >= one {
        return Err(RealError::SeriesDomain);
    }
    if terms == 0 {
        return Err(RealError::NoTerms);
    }
    let w = ctx.working_bits();
    let mut power = y.round(ctx);
    let mut sum = power.clone();
    for j in 2..=terms {
        power = mul_bits(&power, y, w);
        let t = div_bits(&power, &BigReal::from_i64(j as i64), w)?;
        sum = add_bits(&sum, &t, w);
    }
    let next = mul_bits(&power, y, w);
    let denom = mul_bits(
        &BigReal::from_i64(terms as i64 + 1),
        &add_bits(&one, &-y, w),
        w,
    );
    let tail = div_bits(&next, &denom, w)?.inflate(4, w);
    Ok(SeriesValue {
        sum,
        tail_bound: tail,
        terms,
    })
}

fn pow10(k: u32) -> BigInt {
    num_traits::pow(BigInt::from(10), k as usize)
}

/// `round(|x| * 10^shift)` to the nearest integer, ties to even.
fn scaled_round(x: &BigReal, shift: i64) -> BigInt {
    let mut num = x.mantissa.abs();
    let mut den = BigInt::one();
    if x.exponent >= 0 {
        num <<= x.exponent as u64;
    } else {
        den <<= (-x.exponent) as u64;
    }
    if shift >= 0 {
        num *= pow10(shift as u32);
    } else {
        den *= pow10((-shift) as u32);
    }
    let (q, r) = num.div_rem(&den);
    let twice = r << 1u32;
    match twice.cmp(&den) {
        Ordering::Greater => q + 1,
        Ordering::Equal if q.is_odd() => q + 1,
        _ => q,
    }
}

fn format_decimal(x: &BigReal, digits: usize) -> String {
    if x.is_zero() {
        return format!("0.{}", "0".repeat(digits.saturating_sub(1).max(1)));
    }
    let d = digits as i64;
    // floor(log10|x|) estimate from the binary magnitude, fixed up below
    let mut e10 = ((x.magnitude_bits() - 1) as f64 * std::f64::consts::LOG10_2).floor() as i64;
    let limit = pow10(digits as u32);
    let lower = pow10(digits as u32 - 1);
    let scaled = loop {
        let s = scaled_round(x, d - 1 - e10);
        if s >= limit {
            e10 += 1;
        } else if s < lower {
            e10 -= 1;
        } else {
            break s;
        }
    };
    let body = scaled.to_string();
    let sign = if x.is_negative() { "-" } else { "" };
    let positional = (-3..9).contains(&e10);
    if positional {
        if e10 >= 0 {
            let int_len = (e10 + 1) as usize;
            if int_len >= body.len() {
                let zeros = "0".repeat(int_len - body.len());
                format!("{sign}{body}{zeros}.0")
            } else {
                format!("{sign}{}.{}", &body[..int_len], &body[int_len..])
            }
        } else {
            let zeros = "0".repeat((-e10 - 1) as usize);
            format!("{sign}0.{zeros}{body}")
        }
    } else {
        let rest = if body.len() > 1 { &body[1..] } else { "0" };
        format!("{sign}{}.{}e{}", &body[..1], rest, e10)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(bits: u32) -> PrecisionCtx {
        PrecisionCtx::new(bits).unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn guard_budget() {
        assert_eq!(ctx(128).working_bits(), 192);
        assert_eq!(PrecisionCtx::for_operations(128, 1).unwrap().guard_bits(), 64);
        assert_eq!(PrecisionCtx::for_operations(128, 1000).unwrap().guard_bits(), 74);
        assert_eq!(PrecisionCtx::for_operations(128, 1024).unwrap().guard_bits(), 74);
        assert!(PrecisionCtx::new(8).is_err());
        assert!(PrecisionCtx::with_guard_bits(64, 16).is_err());
    }

    #[test]
    fn exact_small_cases() {
        let c = ctx(64);
        let one = BigReal::one();
        assert_eq!(one.add(&one, &c), BigReal::from_i64(2));
        assert_eq!(real_ln(&one, &c).unwrap(), BigReal::zero());
        assert_eq!(real_exp(&BigReal::zero(), &c).unwrap(), one);
        let x = BigReal::from_rational(&rat(7, 3), &c);
        assert_eq!(x.add(&BigReal::zero(), &c), x);
        assert_eq!(x.mul(&one, &c), x);
        assert_eq!(real_pow_rational(&x, &rat(0, 1), &c).unwrap(), one);
        assert_eq!(real_pow_rational(&x, &rat(1, 1), &c).unwrap(), x);
    }

    #[test]
    fn division_is_correctly_rounded() {
        let c = ctx(64);
        let third = BigReal::one().div(&BigReal::from_i64(3), &c).unwrap();
        let err = (third.to_rational() - rat(1, 3)).abs();
        let half_ulp = third.ulp(c.working_bits()).to_rational() / BigInt::from(2);
        assert!(err <= half_ulp);
        assert_eq!(
            BigReal::one().div(&BigReal::zero(), &c),
            Err(RealError::DivisionByZero)
        );
    }

    #[test]
    fn ties_round_to_even() {
        // 0b1011 at 3 bits is a tie between 0b101 and 0b110 -> 0b110
        let r = round_to(BigInt::from(0b1011), 0, 3);
        assert_eq!(r, BigReal::from_i64(12));
        let r = round_to(BigInt::from(0b1001), 0, 3);
        assert_eq!(r, BigReal::from_i64(8));
    }

    #[test]
    fn sticky_addition_across_huge_gap() {
        let c = ctx(16);
        let one = BigReal::one();
        let tiny = BigReal::pow2(-100_000);
        assert_eq!(one.add(&tiny, &c), one);
        assert_eq!(one.sub(&tiny, &c), one);
        // exact midpoint pushed off by a tiny amount
        let w = c.working_bits() as i64;
        let mid = add_exact(&one, &BigReal::pow2(-w));
        assert_eq!(mid.add(&tiny, &c), add_exact(&one, &BigReal::pow2(1 - w)));
        assert_eq!(mid.sub(&tiny, &c), one);
    }

    #[test]
    fn sqrt_errors_and_squares() {
        let c = ctx(32);
        assert_eq!(
            BigReal::from_i64(-1).sqrt(&c),
            Err(RealError::NegativeSqrt)
        );
        assert_eq!(
            BigReal::from_rational(&rat(9, 16), &c).sqrt(&c).unwrap(),
            BigReal::from_rational(&rat(3, 4), &c)
        );
    }

    #[test]
    fn ln_and_exp_domains() {
        let c = ctx(32);
        assert_eq!(real_ln(&BigReal::zero(), &c), Err(RealError::LogDomain));
        assert_eq!(real_ln(&BigReal::from_i64(-3), &c), Err(RealError::LogDomain));
        assert!(matches!(
            real_exp(&BigReal::pow2(31), &c),
            Err(RealError::ExpOverflow(_))
        ));
        assert!(matches!(
            real_pow_rational(&BigReal::from_i64(-2), &rat(1, 2), &c),
            Err(RealError::PowDomain(_))
        ));
        assert!(real_pow_rational(&BigReal::zero(), &rat(0, 1), &c).is_err());
    }

    #[test]
    fn series_matches_bound_formula_for_one_term() {
        let c = ctx(64);
        let half = BigReal::pow2(-1);
        let s = neg_log1m_series(&half, 1, &c).unwrap();
        assert_eq!(s.sum, half);
        let quarter = BigReal::pow2(-2);
        assert!(s.tail_bound >= quarter);
        assert!(s.tail_bound.sub(&quarter, &c).abs() <= BigReal::pow2(-(c.working_bits() as i64) + 2));
        assert!(neg_log1m_series(&BigReal::one(), 4, &c).is_err());
        assert!(neg_log1m_series(&BigReal::zero(), 4, &c).is_err());
        assert!(neg_log1m_series(&half, 0, &c).is_err());
    }

    #[test]
    fn decimal_formatting() {
        let c = ctx(64);
        assert_eq!(BigReal::one().to_decimal_string(5), "1.0000");
        assert_eq!(BigReal::from_i64(-12).to_decimal_string(4), "-12.00");
        assert_eq!(BigReal::from_rational(&rat(1, 3), &c).to_decimal_string(6), "0.333333");
        assert_eq!(BigReal::from_rational(&rat(2, 3), &c).to_decimal_string(3), "0.667");
        assert_eq!(BigReal::from_rational(&rat(1, 1000), &c).to_decimal_string(3), "0.00100");
        assert_eq!(BigReal::from_rational(&rat(1, 10000), &c).to_decimal_string(3), "1.00e-4");
        assert_eq!(BigReal::from_i64(1_000_000_000).to_decimal_string(3), "1.00e9");
        assert_eq!(BigReal::from_i64(999_999_999).to_decimal_string(3), "1.00e9");
        assert_eq!(BigReal::from_i64(123_456_789).to_decimal_string(3), "123000000.0");
        assert_eq!(BigReal::zero().to_decimal_string(4), "0.000");
        assert_eq!(BigReal::from_i64(9).to_decimal_string(1), "9.0");
    }

    #[test]
    fn ordering() {
        let c = ctx(64);
        let a = BigReal::from_rational(&rat(-5, 2), &c);
        let b = BigReal::from_rational(&rat(1, 7), &c);
        assert!(a < b);
        assert!(-&b < BigReal::zero());
        assert!(BigReal::pow2(-3) < BigReal::pow2(-2));
        assert!(BigReal::from_i64(3) > BigReal::from_i64(2));
    }
}
