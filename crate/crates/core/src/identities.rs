//! Certified evaluation of the golden product identity for `e` and the chain
//! of series identities behind it.
//!
//! Every evaluation truncates an infinite series or product after `K` terms
//! and returns the partial value together with a proven bound on everything
//! that was left out. Points `x` are exact (a rational in `(0, 1)` or `1/tau`),
//! so every `x^k` and `1 - x^k` is exact until its logarithm is taken.
//!
//! Summation runs over ascending `k` in a fixed order, so results are
//! bit-reproducible for a given precision.
//!
//! # Tail bounds
//!
//! All bounds rest on two elementary facts for `0 < y < 1`:
//!
//! * `0 < -ln(1 - y) <= y / (1 - y)`, since `-ln(1-y) = Σ y^j/j <= Σ y^j`;
//! * `Σ_{k>K} x^k = x^(K+1) / (1 - x)` and
//!   `Σ_{n>K} n x^n = x^(K+1) ((K+1) - K x) / (1 - x)^2`.
//!
//! See [`lemma1_tail_bound`], [`convolution_tail_bound`] and
//! [`theorem_tail_bound`] for how they combine.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::arithfn::{self, ArithError, ArithFnTable, FnKind};
use crate::bigreal::{real_exp, real_ln, real_pow_rational, BigReal, PrecisionCtx, RealError};
use crate::exactnum::{self, golden_tau, ExactError, GoldenNumber, Rational};

/// Precision used to evaluate the closed-form tail bounds before rounding
/// them up.
const BOUND_TARGET_BITS: u32 = 64;
/// Upward slack, in working-precision ulps, applied to computed bounds.
const BOUND_SLACK_ULPS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Real(#[from] RealError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("evaluation point {0} must lie strictly between 0 and 1")]
    PointOutOfRange(String),
    #[error("{terms} terms requested but the table only reaches {limit}")]
    TermsExceedTable { terms: usize, limit: usize },
    #[error("at least one term is required")]
    NoTerms,
    #[error("a custom function needs a growth constant C with |f(n)| <= C n")]
    MissingGrowthConstant,
    #[error("growth constant must be positive")]
    NonPositiveGrowthConstant,
    #[error("|f({n})| exceeds the declared bound C n")]
    GrowthViolation { n: usize },
    #[error("formal coefficient of x^{n} disagrees with (1*f)({n})/{n}")]
    CoefficientMismatch { n: usize },
}

pub type Result<T> = std::result::Result<T, IdentityError>;

/// Exact evaluation point in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalPoint {
    Rational(Rational),
    InverseTau,
}

impl EvalPoint {
    pub fn rational(x: Rational) -> Result<Self> {
        if !x.is_positive() || x >= Rational::one() {
            return Err(IdentityError::PointOutOfRange(x.to_string()));
        }
        Ok(EvalPoint::Rational(x))
    }

    pub fn inverse_tau() -> Self {
        EvalPoint::InverseTau
    }

    /// `x` as an element of `Q(sqrt 5)`.
    pub fn golden(&self) -> GoldenNumber {
        match self {
            EvalPoint::Rational(q) => GoldenNumber::from_rational(q.clone()),
            EvalPoint::InverseTau => exactnum::tau_power(-1).expect("in range"),
        }
    }

    /// `x^k`, exact.
    pub fn power(&self, k: usize) -> Result<GoldenNumber> {
        Ok(match self {
            EvalPoint::Rational(q) => GoldenNumber::from_rational(num_traits::pow(q.clone(), k)),
            EvalPoint::InverseTau => exactnum::tau_power(-(k as i64))?,
        })
    }
}

impl fmt::Display for EvalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalPoint::Rational(q) => write!(f, "{q}"),
            EvalPoint::InverseTau => f.write_str("1/tau"),
        }
    }
}

/// Which identity a report certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityTag {
    /// `-Σ φ(k)/k ln(1 - x^k) = x/(1-x)`
    Lemma1Phi,
    /// `-Σ μ(k)/k ln(1 - x^k) = x`
    Lemma1Mu,
    /// `-Σ f(k)/k ln(1 - x^k) = Σ (1*f)(n)/n x^n`
    Lemma1Custom,
    /// product of the two sums at `x = 1/tau` against 1
    Lemma2Product,
    /// `Σ (μ(k) - φ(k))/k ln(1 - tau^-k) = 1`
    TheoremLogSum,
    /// `Π (1 - tau^-n)^((μ(n) - φ(n))/n) = e`
    TheoremProduct,
}

impl fmt::Display for IdentityTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdentityTag::Lemma1Phi => "lemma1_phi",
            IdentityTag::Lemma1Mu => "lemma1_mu",
            IdentityTag::Lemma1Custom => "lemma1_custom",
            IdentityTag::Lemma2Product => "lemma2_product",
            IdentityTag::TheoremLogSum => "theorem_log_sum",
            IdentityTag::TheoremProduct => "theorem_product",
        })
    }
}

/// One truncated evaluation and its certificate.
#[derive(Debug, Clone)]
pub struct TruncationReport {
    pub identity: IdentityTag,
    pub terms_used: usize,
    pub precision: PrecisionCtx,
    pub partial: BigReal,
    pub target: BigReal,
    pub abs_diff: BigReal,
    /// Proven upper bound on the omitted tail.
    pub tail_bound: BigReal,
    /// Allowance for accumulated rounding at the working precision.
    pub rounding_budget: BigReal,
    pub pass: bool,
}

impl TruncationReport {
    fn new(
        identity: IdentityTag,
        terms_used: usize,
        precision: PrecisionCtx,
        partial: BigReal,
        target: BigReal,
        tail_bound: BigReal,
        rounding_budget: BigReal,
    ) -> Self {
        let abs_diff = partial.sub(&target, &precision).abs();
        let allowed = tail_bound.add(&rounding_budget, &precision);
        let pass = abs_diff <= allowed;
        Self {
            identity,
            terms_used,
            precision,
            partial,
            target,
            abs_diff,
            tail_bound,
            rounding_budget,
            pass,
        }
    }
}

/// Two sides of an identity compared within a certified bound.
#[derive(Debug, Clone)]
pub struct IdentityCheck {
    pub lhs: BigReal,
    pub rhs: BigReal,
    pub abs_diff: BigReal,
    pub bound: BigReal,
    pub pass: bool,
}

impl IdentityCheck {
    fn new(lhs: BigReal, rhs: BigReal, bound: BigReal, ctx: &PrecisionCtx) -> Self {
        let abs_diff = lhs.sub(&rhs, ctx).abs();
        let pass = abs_diff <= bound;
        Self {
            lhs,
            rhs,
            abs_diff,
            bound,
            pass,
        }
    }
}

/// `ctx` with its guard budget raised to cover `ops` roundings.
fn covering(ctx: &PrecisionCtx, ops: usize) -> PrecisionCtx {
    let needed = PrecisionCtx::for_operations(ctx.target_bits(), ops.max(1) as u64)
        .expect("target already validated")
        .guard_bits();
    if needed > ctx.guard_bits() {
        ctx.widened(needed - ctx.guard_bits())
    } else {
        *ctx
    }
}

/// `2^-target_bits` scaled to the magnitude of `scale` (at least 1).
///
/// The guard budget of [`covering`] keeps the accumulated error of every
/// evaluation here below `2^-(target_bits + 60)` relative to the largest
/// quantity involved, so this is a wide allowance.
fn rounding_budget(ctx: &PrecisionCtx, scale: &BigReal) -> BigReal {
    let mag = scale.magnitude_bits().max(1);
    BigReal::pow2(mag - ctx.target_bits() as i64)
}

fn bound_ctx() -> PrecisionCtx {
    PrecisionCtx::new(BOUND_TARGET_BITS).expect("valid")
}

/// Exact non-negative quantity as a proven upper bound.
fn upper_bound(g: &GoldenNumber) -> BigReal {
    let ctx = bound_ctx();
    g.to_real(&ctx).inflate(BOUND_SLACK_ULPS, ctx.working_bits())
}

fn rat_golden(q: &Rational) -> GoldenNumber {
    GoldenNumber::from_rational(q.clone())
}

/// `C x^(K+1) / (1 - x)^2`, rounded up.
///
/// For `k > K`, `|f(k)|/k <= C` and `-ln(1 - x^k) <= x^k/(1 - x^k) <= x^k/(1 - x)`,
/// so the omitted part of `-Σ f(k)/k ln(1 - x^k)` is at most
/// `C/(1-x) Σ_{k>K} x^k = C x^(K+1)/(1-x)^2`.
pub fn lemma1_tail_bound(x: &EvalPoint, terms: usize, c: &Rational) -> Result<BigReal> {
    Ok(upper_bound(&lemma1_tail_exact(x, terms, c)?))
}

fn lemma1_tail_exact(x: &EvalPoint, terms: usize, c: &Rational) -> Result<GoldenNumber> {
    if !c.is_positive() {
        return Err(IdentityError::NonPositiveGrowthConstant);
    }
    let one_minus = &GoldenNumber::one() - &x.golden();
    let inv = one_minus.inverse()?;
    Ok(&(&rat_golden(c) * &x.power(terms + 1)?) * &(&inv * &inv))
}

/// `C x^(K+1) ((K+1) - K x) / (1 - x)^2`, rounded up.
///
/// With `|f(d)| <= C d`, `|(1*f)(n)|/n <= C σ(n)/n = C Σ_{d|n} 1/d <= C n`,
/// so the omitted part of `Σ (1*f)(n)/n x^n` is at most `C Σ_{n>K} n x^n`.
pub fn convolution_tail_bound(x: &EvalPoint, terms: usize, c: &Rational) -> Result<BigReal> {
    if !c.is_positive() {
        return Err(IdentityError::NonPositiveGrowthConstant);
    }
    let xg = x.golden();
    let one_minus = &GoldenNumber::one() - &xg;
    let inv = one_minus.inverse()?;
    let k = GoldenNumber::from_i64(terms as i64, 0);
    let k1 = GoldenNumber::from_i64(terms as i64 + 1, 0);
    let poly = &k1 - &(&k * &xg);
    let exact = &(&(&rat_golden(c) * &x.power(terms + 1)?) * &poly) * &(&inv * &inv);
    Ok(upper_bound(&exact))
}

/// `2 tau^3 tau^-N`, rounded up.
///
/// `|μ(k) - φ(k)|/k <= 2` and, for `k >= 1`,
/// `-ln(1 - tau^-k) <= tau^-k / (1 - 1/tau) = tau^2 tau^-k`; summing the
/// geometric series over `k > N` gives `2 tau^2 tau^-(N+1) / (1 - 1/tau)`.
pub fn theorem_tail_bound(terms: usize) -> Result<BigReal> {
    let exact = &GoldenNumber::from_i64(2, 0) * &exactnum::tau_power(3 - terms as i64)?;
    Ok(upper_bound(&exact))
}

/// `-ln(1 - x^k)` for `k = 1..=terms`.
fn neg_log_terms(x: &EvalPoint, terms: usize, ctx: &PrecisionCtx) -> Result<Vec<BigReal>> {
    let one = GoldenNumber::one();
    (1..=terms)
        .map(|k| {
            let base = (&one - &x.power(k)?).to_real(ctx);
            Ok(-real_ln(&base, ctx)?)
        })
        .collect()
}

/// Running sums of `coeff(k) * logs[k-1]` in ascending `k`, one entry per `k`.
fn running_sums<F>(logs: &[BigReal], coeff: F, ctx: &PrecisionCtx) -> Vec<BigReal>
where
    F: Fn(usize) -> Rational,
{
    let mut acc = BigReal::zero();
    logs.iter()
        .enumerate()
        .map(|(i, l)| {
            let c = coeff(i + 1);
            if !c.is_zero() {
                let term = BigReal::from_rational(&c, ctx).mul(l, ctx);
                acc = acc.add(&term, ctx);
            }
            acc.clone()
        })
        .collect()
}

fn ratio(v: BigInt, k: usize) -> Rational {
    Rational::new(v, BigInt::from(k))
}

fn growth_constant(f: &ArithFnTable, declared: Option<&Rational>) -> Result<Rational> {
    let c = match (f.kind(), declared) {
        (_, Some(c)) => c.clone(),
        (FnKind::Mu | FnKind::Phi | FnKind::One, None) => Rational::one(),
        (FnKind::Custom, None) => return Err(IdentityError::MissingGrowthConstant),
    };
    if !c.is_positive() {
        return Err(IdentityError::NonPositiveGrowthConstant);
    }
    if let Some(n) = f.growth_violation(&c) {
        return Err(IdentityError::GrowthViolation { n });
    }
    Ok(c)
}

fn check_terms(terms: usize, f: &ArithFnTable) -> Result<()> {
    if terms == 0 {
        return Err(IdentityError::NoTerms);
    }
    if terms > f.limit() {
        return Err(IdentityError::TermsExceedTable {
            terms,
            limit: f.limit(),
        });
    }
    Ok(())
}

/// Exact `Σ_{n<=N} (1*f)(n)/n x^n` as an element of `Q(sqrt 5)`.
fn convolution_series(f: &ArithFnTable, x: &EvalPoint, terms: usize) -> Result<GoldenNumber> {
    let conv = arithfn::dirichlet_one_convolve(f);
    let mut sum = GoldenNumber::zero();
    for n in 1..=terms {
        let c = ratio(conv.value(n), n);
        if !c.is_zero() {
            sum = &sum + &(&rat_golden(&c) * &x.power(n)?);
        }
    }
    Ok(sum)
}

/// `-Σ_{k<=K} f(k)/k ln(1 - x^k)` against its closed form.
///
/// Targets: `x/(1-x)` for φ, `x` for μ, and the truncated convolution series
/// `Σ_{n<=K} (1*f)(n)/n x^n` otherwise (whose own tail then joins the bound).
/// `growth` is the constant `C` with `|f(n)| <= C n`; it defaults to 1 for the
/// built-in kinds and is required for custom tables.
pub fn lemma1_sum(
    f: &ArithFnTable,
    x: &EvalPoint,
    terms: usize,
    growth: Option<&Rational>,
    ctx: &PrecisionCtx,
) -> Result<TruncationReport> {
    check_terms(terms, f)?;
    let c = growth_constant(f, growth)?;
    let wctx = covering(ctx, 4 * terms);
    let logs = neg_log_terms(x, terms, &wctx)?;
    let partial = running_sums(&logs, |k| ratio(f.value(k), k), &wctx)
        .pop()
        .expect("terms >= 1");
    let xg = x.golden();
    let (tag, target, tail) = match f.kind() {
        FnKind::Phi => {
            let t = &xg * &(&GoldenNumber::one() - &xg).inverse()?;
            (IdentityTag::Lemma1Phi, t.to_real(&wctx), lemma1_tail_bound(x, terms, &c)?)
        }
        FnKind::Mu => (
            IdentityTag::Lemma1Mu,
            xg.to_real(&wctx),
            lemma1_tail_bound(x, terms, &c)?,
        ),
        FnKind::One | FnKind::Custom => {
            let t = convolution_series(f, x, terms)?.to_real(&wctx);
            let tail = lemma1_tail_bound(x, terms, &c)?
                .add(&convolution_tail_bound(x, terms, &c)?, &wctx);
            (IdentityTag::Lemma1Custom, t, tail)
        }
    };
    let scale = BigReal::from_rational(&c, &wctx).mul(&partial.abs(), &wctx);
    let budget = rounding_budget(&wctx, &scale.add(&BigReal::one(), &wctx));
    Ok(TruncationReport::new(
        tag, terms, wctx, partial, target, tail, budget,
    ))
}

/// Both sums at `x = 1/tau` and their product.
#[derive(Debug, Clone)]
pub struct Lemma2Report {
    /// `-Σ φ(k)/k ln(1 - tau^-k)` against `tau`.
    pub phi: TruncationReport,
    /// `-Σ μ(k)/k ln(1 - tau^-k)` against `1/tau`.
    pub mu: TruncationReport,
    /// Product of the two partials against 1.
    pub product: TruncationReport,
}

impl Lemma2Report {
    pub fn pass(&self) -> bool {
        self.phi.pass && self.mu.pass && self.product.pass
    }
}

/// Bound on `|P_φ P_μ - 1|` given `|P_φ - tau| <= t_φ` and
/// `|P_μ - 1/tau| <= t_μ`: `tau t_μ + t_φ / tau + t_φ t_μ`.
fn product_tail(t_phi: &BigReal, t_mu: &BigReal) -> BigReal {
    let ctx = bound_ctx();
    let tau = golden_tau().to_real(&ctx);
    let inv_tau = exactnum::tau_power(-1).expect("in range").to_real(&ctx);
    let s = tau
        .mul(t_mu, &ctx)
        .add(&inv_tau.mul(t_phi, &ctx), &ctx)
        .add(&t_phi.mul(t_mu, &ctx), &ctx);
    s.inflate(BOUND_SLACK_ULPS, ctx.working_bits())
}

fn lemma2_from_logs(
    logs: &[BigReal],
    phi: &ArithFnTable,
    mu: &ArithFnTable,
    terms: usize,
    ctx: &PrecisionCtx,
) -> Result<Lemma2Report> {
    let x = EvalPoint::InverseTau;
    let one = Rational::one();
    let p_phi = running_sums(&logs[..terms], |k| ratio(phi.value(k), k), ctx)
        .pop()
        .expect("terms >= 1");
    let p_mu = running_sums(&logs[..terms], |k| ratio(mu.value(k), k), ctx)
        .pop()
        .expect("terms >= 1");
    let t = lemma1_tail_bound(&x, terms, &one)?;
    let budget = rounding_budget(ctx, &BigReal::from_i64(2));
    let phi_report = TruncationReport::new(
        IdentityTag::Lemma1Phi,
        terms,
        *ctx,
        p_phi.clone(),
        golden_tau().to_real(ctx),
        t.clone(),
        budget.clone(),
    );
    let mu_report = TruncationReport::new(
        IdentityTag::Lemma1Mu,
        terms,
        *ctx,
        p_mu.clone(),
        x.golden().to_real(ctx),
        t.clone(),
        budget.clone(),
    );
    let product_scale = p_phi.abs().add(&BigReal::from_i64(4), ctx);
    let product = TruncationReport::new(
        IdentityTag::Lemma2Product,
        terms,
        *ctx,
        p_phi.mul(&p_mu, ctx),
        BigReal::one(),
        product_tail(&t, &t),
        rounding_budget(ctx, &product_scale),
    );
    Ok(Lemma2Report {
        phi: phi_report,
        mu: mu_report,
        product,
    })
}

/// The reciprocal pair at `x = 1/tau`: the φ-sum tends to `tau`, the μ-sum to
/// `1/tau`, and their product to 1.
pub fn lemma2_pair(terms: usize, ctx: &PrecisionCtx) -> Result<Lemma2Report> {
    if terms == 0 {
        return Err(IdentityError::NoTerms);
    }
    let phi = arithfn::sieve_totient(terms)?;
    let mu = arithfn::sieve_mobius(terms)?;
    let wctx = covering(ctx, 4 * terms);
    let logs = neg_log_terms(&EvalPoint::InverseTau, terms, &wctx)?;
    lemma2_from_logs(&logs, &phi, &mu, terms, &wctx)
}

/// Reports for `K = stride, 2 stride, ..., <= max_terms`, sharing one pass.
pub fn lemma2_trace(max_terms: usize, stride: usize, ctx: &PrecisionCtx) -> Result<Vec<Lemma2Report>> {
    if max_terms == 0 || stride == 0 {
        return Err(IdentityError::NoTerms);
    }
    let phi = arithfn::sieve_totient(max_terms)?;
    let mu = arithfn::sieve_mobius(max_terms)?;
    let wctx = covering(ctx, 4 * max_terms);
    let logs = neg_log_terms(&EvalPoint::InverseTau, max_terms, &wctx)?;
    (stride..=max_terms)
        .step_by(stride)
        .map(|k| lemma2_from_logs(&logs, &phi, &mu, k, &wctx))
        .collect()
}

/// Coefficients `(φ(k) - μ(k))/k`, so that the log-sum is
/// `Σ coeff(k) (-ln(1 - tau^-k))`.
fn theorem_coeffs(max_terms: usize) -> Result<Vec<Rational>> {
    let phi = arithfn::sieve_totient(max_terms)?;
    let mu = arithfn::sieve_mobius(max_terms)?;
    Ok((1..=max_terms)
        .map(|k| ratio(phi.value(k) - mu.value(k), k))
        .collect())
}

/// Running log-sums `S_N` for `N = 1..=max_terms`.
fn theorem_log_partials(max_terms: usize, ctx: &PrecisionCtx) -> Result<Vec<BigReal>> {
    let coeffs = theorem_coeffs(max_terms)?;
    let logs = neg_log_terms(&EvalPoint::InverseTau, max_terms, ctx)?;
    Ok(running_sums(&logs, |k| coeffs[k - 1].clone(), ctx))
}

fn log_sum_report(n: usize, partial: BigReal, ctx: &PrecisionCtx) -> Result<TruncationReport> {
    Ok(TruncationReport::new(
        IdentityTag::TheoremLogSum,
        n,
        *ctx,
        partial,
        BigReal::one(),
        theorem_tail_bound(n)?,
        rounding_budget(ctx, &BigReal::from_i64(2)),
    ))
}

/// `e` and the tail bound `e (exp(B) - 1)` for the product truncated at `n`.
fn product_report(
    n: usize,
    log_partial: &BigReal,
    e: &BigReal,
    ctx: &PrecisionCtx,
) -> Result<TruncationReport> {
    let partial = real_exp(log_partial, ctx)?;
    // |S_N - 1| <= B  =>  |exp(S_N) - e| = e |exp(S_N - 1) - 1| <= e (exp(B) - 1)
    let bctx = bound_ctx();
    let b = theorem_tail_bound(n)?;
    let expm1 = expm1_upper(&b)?;
    let e_up = e.inflate(BOUND_SLACK_ULPS, ctx.working_bits());
    let tail = e_up
        .mul(&expm1, &bctx)
        .inflate(BOUND_SLACK_ULPS, bctx.working_bits());
    Ok(TruncationReport::new(
        IdentityTag::TheoremProduct,
        n,
        *ctx,
        partial,
        e.clone(),
        tail,
        rounding_budget(ctx, &BigReal::from_i64(4)),
    ))
}

/// `Σ_{k<=N} (μ(k) - φ(k))/k ln(1 - tau^-k)` against 1.
pub fn theorem_log_sum(terms: usize, ctx: &PrecisionCtx) -> Result<TruncationReport> {
    if terms == 0 {
        return Err(IdentityError::NoTerms);
    }
    let wctx = covering(ctx, 4 * terms);
    let partial = theorem_log_partials(terms, &wctx)?
        .pop()
        .expect("terms >= 1");
    log_sum_report(terms, partial, &wctx)
}

/// `P_N = Π_{n<=N} (1 - tau^-n)^((μ(n) - φ(n))/n)` against `e`.
///
/// Evaluated in log space: the exponent-weighted logarithms are summed and
/// exponentiated once, so `P_N` is exactly `exp` of the log-sum of
/// [`theorem_log_sum`] at the same precision. [`theorem_product_direct`]
/// multiplies the factors one by one instead.
pub fn theorem_product(terms: usize, ctx: &PrecisionCtx) -> Result<TruncationReport> {
    if terms == 0 {
        return Err(IdentityError::NoTerms);
    }
    let wctx = covering(ctx, 4 * terms);
    let s = theorem_log_partials(terms, &wctx)?
        .pop()
        .expect("terms >= 1");
    let e = real_exp(&BigReal::one(), &wctx)?;
    product_report(terms, &s, &e, &wctx)
}

/// Product and log-sum reports for `N = stride, 2 stride, ..., <= max_terms`.
pub fn theorem_trace(
    max_terms: usize,
    stride: usize,
    ctx: &PrecisionCtx,
) -> Result<Vec<(TruncationReport, TruncationReport)>> {
    if max_terms == 0 || stride == 0 {
        return Err(IdentityError::NoTerms);
    }
    let wctx = covering(ctx, 4 * max_terms);
    let partials = theorem_log_partials(max_terms, &wctx)?;
    let e = real_exp(&BigReal::one(), &wctx)?;
    (stride..=max_terms)
        .step_by(stride)
        .map(|n| {
            let s = &partials[n - 1];
            Ok((
                product_report(n, s, &e, &wctx)?,
                log_sum_report(n, s.clone(), &wctx)?,
            ))
        })
        .collect()
}

/// `P_N` as a plain product of [`real_pow_rational`] factors, each base
/// `1 - tau^-n` built exactly in `Q(sqrt 5)` first.
pub fn theorem_product_direct(terms: usize, ctx: &PrecisionCtx) -> Result<BigReal> {
    if terms == 0 {
        return Err(IdentityError::NoTerms);
    }
    let wctx = covering(ctx, 8 * terms);
    let phi = arithfn::sieve_totient(terms)?;
    let mu = arithfn::sieve_mobius(terms)?;
    let mut acc = BigReal::one();
    for n in 1..=terms {
        let exponent = ratio(mu.value(n) - phi.value(n), n);
        let base = exactnum::one_minus_inverse_tau_power(n as i64)?.to_real(&wctx);
        let factor = real_pow_rational(&base, &exponent, &wctx)?;
        acc = acc.mul(&factor, &wctx);
    }
    Ok(acc)
}

/// `Π_{n<=N} (1 - x^n)^(-f(n)/n)` against `exp(Σ_{n<=N} (1*f)(n)/n x^n)`.
///
/// Both logarithms approximate the same infinite sum: the product side within
/// [`lemma1_tail_bound`], the series side within [`convolution_tail_bound`].
/// With `B` their sum, `|e^a - e^b| <= max(e^a, e^b) (e^B - 1)`, which plus a
/// rounding allowance is the reported bound.
pub fn general_identity_check(
    f: &ArithFnTable,
    x: &Rational,
    terms: usize,
    growth: &Rational,
    ctx: &PrecisionCtx,
) -> Result<IdentityCheck> {
    Ok(general_parts(f, x, terms, growth, ctx)?.check)
}

struct GeneralParts {
    check: IdentityCheck,
    lhs_tail: BigReal,
    ctx: PrecisionCtx,
}

fn general_parts(
    f: &ArithFnTable,
    x: &Rational,
    terms: usize,
    growth: &Rational,
    ctx: &PrecisionCtx,
) -> Result<GeneralParts> {
    let point = EvalPoint::rational(x.clone())?;
    check_terms(terms, f)?;
    let c = growth_constant(f, Some(growth))?;
    let wctx = covering(ctx, 4 * terms);

    let logs = neg_log_terms(&point, terms, &wctx)?;
    let lhs_log = running_sums(&logs, |k| ratio(f.value(k), k), &wctx)
        .pop()
        .expect("terms >= 1");
    let rhs_log = convolution_series(f, &point, terms)?.to_real(&wctx);
    let lhs = real_exp(&lhs_log, &wctx)?;
    let rhs = real_exp(&rhs_log, &wctx)?;

    let lhs_tail = lemma1_tail_bound(&point, terms, &c)?;
    let rhs_tail = convolution_tail_bound(&point, terms, &c)?;
    let spread = exp_spread(&lhs, &rhs, &lhs_tail.add(&rhs_tail, &wctx))?;
    let scale = lhs.clone().max(rhs.clone());
    let budget = rounding_budget(&wctx, &scale.mul(&log_scale(&lhs_log, &c), &wctx));
    let bound = spread.add(&budget, &wctx);
    Ok(GeneralParts {
        check: IdentityCheck::new(lhs, rhs, bound, &wctx),
        lhs_tail,
        ctx: wctx,
    })
}

/// Rounding in the log scales the exponential by `1 + O(|log| 2^-w)`; keep
/// the allowance proportional to `max(1, |log|, C)`.
fn log_scale(log: &BigReal, c: &Rational) -> BigReal {
    let ctx = bound_ctx();
    let c = BigReal::from_rational(c, &ctx);
    log.abs().max(c).max(BigReal::one())
}

/// Upper bound for `exp(b) - 1`, `b >= 0`, with small relative error even
/// when `b` is far below the bound precision: `b/(1-b)` for `b <= 1/2`.
fn expm1_upper(b: &BigReal) -> Result<BigReal> {
    let bctx = bound_ctx();
    let half = BigReal::pow2(-1);
    let v = if *b <= half {
        b.div(&BigReal::one().sub(b, &bctx), &bctx)?
    } else {
        real_exp(b, &bctx)?.sub(&BigReal::one(), &bctx)
    };
    Ok(v.inflate(BOUND_SLACK_ULPS, bctx.working_bits()))
}

/// `max(a, b) (exp(B) - 1)`, rounded up.
fn exp_spread(a: &BigReal, b: &BigReal, log_bound: &BigReal) -> Result<BigReal> {
    let bctx = bound_ctx();
    let expm1 = expm1_upper(log_bound)?;
    let m = a.clone().max(b.clone());
    Ok(m
        .mul(&expm1, &bctx)
        .inflate(BOUND_SLACK_ULPS, bctx.working_bits()))
}

/// The three named special cases of the general product identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialVariant {
    /// `f = μ`, product equals `exp(x)`.
    ExpX,
    /// `f = φ`, product equals `exp(x/(1-x))`.
    ExpXOver1mx,
    /// `f = φ - μ`, product equals `exp(x^2/(1-x))`.
    ExpX2Over1mx,
}

impl SpecialVariant {
    pub const ALL: [SpecialVariant; 3] = [
        SpecialVariant::ExpX,
        SpecialVariant::ExpXOver1mx,
        SpecialVariant::ExpX2Over1mx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpecialVariant::ExpX => "exp_x",
            SpecialVariant::ExpXOver1mx => "exp_x_over_1mx",
            SpecialVariant::ExpX2Over1mx => "exp_x2_over_1mx",
        }
    }

    /// Exponent of the closed form at `x`.
    pub fn exponent(self, x: &Rational) -> Rational {
        let one_minus = Rational::one() - x;
        match self {
            SpecialVariant::ExpX => x.clone(),
            SpecialVariant::ExpXOver1mx => x / one_minus,
            SpecialVariant::ExpX2Over1mx => x * x / one_minus,
        }
    }

    /// The arithmetic function whose product gives this closed form.
    pub fn table(self, limit: usize) -> Result<ArithFnTable> {
        Ok(match self {
            SpecialVariant::ExpX => arithfn::sieve_mobius(limit)?,
            SpecialVariant::ExpXOver1mx => arithfn::sieve_totient(limit)?,
            SpecialVariant::ExpX2Over1mx => {
                arithfn::sieve_totient(limit)?.difference(&arithfn::sieve_mobius(limit)?)
            }
        })
    }
}

impl fmt::Display for SpecialVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct SpecialProductReport {
    pub variant: SpecialVariant,
    /// Product against the exponentiated convolution series.
    pub general: IdentityCheck,
    /// Product against the closed-form target.
    pub closed_form: IdentityCheck,
}

impl SpecialProductReport {
    pub fn pass(&self) -> bool {
        self.general.pass && self.closed_form.pass
    }
}

/// One of `exp(x)`, `exp(x/(1-x))`, `exp(x^2/(1-x))` as a product over
/// `1 - x^n`, checked against both the general identity and the closed form.
pub fn special_exp_products(
    variant: SpecialVariant,
    x: &Rational,
    terms: usize,
    ctx: &PrecisionCtx,
) -> Result<SpecialProductReport> {
    EvalPoint::rational(x.clone())?;
    if terms == 0 {
        return Err(IdentityError::NoTerms);
    }
    let f = variant.table(terms)?;
    let c = Rational::one();
    let parts = general_parts(&f, x, terms, &c, ctx)?;
    let wctx = parts.ctx;
    let exponent = variant.exponent(x);
    let target = real_exp(&BigReal::from_rational(&exponent, &wctx), &wctx)?;
    let lhs = parts.check.lhs.clone();
    let spread = exp_spread(&lhs, &target, &parts.lhs_tail)?;
    let budget = rounding_budget(&wctx, &lhs.clone().max(target.clone()).mul_pow2(2));
    let closed_form = IdentityCheck::new(lhs, target, spread.add(&budget, &wctx), &wctx);
    Ok(SpecialProductReport {
        variant,
        general: parts.check,
        closed_form,
    })
}

/// Coefficients of `x^1..x^degree` in `Σ_k f(k)/k Σ_j x^(kj)/j`, exactly.
///
/// Each is checked against `(1*f)(n)/n` before returning.
pub fn formal_coefficients(f: &ArithFnTable, degree: usize) -> Result<Vec<Rational>> {
    check_terms(degree, f)?;
    let mut coeffs = vec![Rational::zero(); degree];
    for k in 1..=degree {
        let fk = f.value(k);
        if fk.is_zero() {
            continue;
        }
        for j in 1..=degree / k {
            coeffs[k * j - 1] += Rational::new(fk.clone(), BigInt::from(k * j));
        }
    }
    let conv = arithfn::dirichlet_one_convolve(f);
    for (i, c) in coeffs.iter().enumerate() {
        let n = i + 1;
        if *c != ratio(conv.value(n), n) {
            return Err(IdentityError::CoefficientMismatch { n });
        }
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn ctx(bits: u32) -> PrecisionCtx {
        PrecisionCtx::new(bits).unwrap()
    }

    #[test]
    fn eval_point_range() {
        assert!(EvalPoint::rational(q(1, 2)).is_ok());
        for bad in [q(0, 1), q(1, 1), q(2, 1), q(-1, 2)] {
            assert!(matches!(
                EvalPoint::rational(bad),
                Err(IdentityError::PointOutOfRange(_))
            ));
        }
        assert_eq!(EvalPoint::InverseTau.to_string(), "1/tau");
        assert_eq!(
            EvalPoint::InverseTau.power(2).unwrap(),
            exactnum::tau_power(-2).unwrap()
        );
    }

    #[test]
    fn lemma1_tail_examples() {
        let half = EvalPoint::rational(q(1, 2)).unwrap();
        let b = lemma1_tail_bound(&half, 10, &q(1, 1)).unwrap();
        let exact = BigReal::pow2(-9);
        assert!(b >= exact);
        assert!(b.to_f64() / exact.to_f64() - 1.0 < 1e-30);
        assert!(lemma1_tail_bound(&half, 0, &q(1, 1)).unwrap() >= BigReal::from_i64(2));
        assert!(lemma1_tail_bound(&half, 1, &q(0, 1)).is_err());
    }

    #[test]
    fn custom_needs_growth_constant() {
        let f = ArithFnTable::from_i64s(FnKind::Custom, vec![1, -2, 3]).unwrap();
        let x = EvalPoint::rational(q(1, 2)).unwrap();
        let c = ctx(64);
        assert_eq!(
            lemma1_sum(&f, &x, 3, None, &c).unwrap_err(),
            IdentityError::MissingGrowthConstant
        );
        assert_eq!(
            lemma1_sum(&f, &x, 3, Some(&q(1, 2)), &c).unwrap_err(),
            IdentityError::GrowthViolation { n: 1 }
        );
        assert!(lemma1_sum(&f, &x, 3, Some(&q(1, 1)), &c).unwrap().pass);
        assert!(matches!(
            lemma1_sum(&f, &x, 4, Some(&q(1, 1)), &c),
            Err(IdentityError::TermsExceedTable { terms: 4, limit: 3 })
        ));
    }

    #[test]
    fn theorem_first_terms_are_exact() {
        let c = ctx(128);
        let s1 = theorem_log_sum(1, &c).unwrap();
        assert_eq!(s1.partial, BigReal::zero());
        assert!(s1.pass);
        let p1 = theorem_product(1, &c).unwrap();
        assert_eq!(p1.partial, BigReal::one());
        assert_eq!(theorem_product_direct(1, &c).unwrap(), BigReal::one());
    }

    #[test]
    fn zero_terms_rejected() {
        let c = ctx(64);
        assert_eq!(theorem_log_sum(0, &c).unwrap_err(), IdentityError::NoTerms);
        assert_eq!(theorem_product(0, &c).unwrap_err(), IdentityError::NoTerms);
        assert!(lemma2_pair(0, &c).is_err());
        assert!(theorem_trace(10, 0, &c).is_err());
        let phi = arithfn::sieve_totient(4).unwrap();
        assert!(formal_coefficients(&phi, 5).is_err());
    }

    #[test]
    fn formal_coefficient_examples() {
        let phi = arithfn::sieve_totient(8).unwrap();
        assert_eq!(formal_coefficients(&phi, 8).unwrap(), vec![q(1, 1); 8]);
        let mu = arithfn::sieve_mobius(8).unwrap();
        let mut expected = vec![q(0, 1); 8];
        expected[0] = q(1, 1);
        assert_eq!(formal_coefficients(&mu, 8).unwrap(), expected);
        let one = ArithFnTable::ones(4).unwrap();
        assert_eq!(
            formal_coefficients(&one, 4).unwrap(),
            vec![q(1, 1), q(1, 1), q(2, 3), q(3, 4)]
        );
    }

    #[test]
    fn special_variant_exponents() {
        let half = q(1, 2);
        assert_eq!(SpecialVariant::ExpX.exponent(&half), q(1, 2));
        assert_eq!(SpecialVariant::ExpXOver1mx.exponent(&half), q(1, 1));
        assert_eq!(SpecialVariant::ExpX2Over1mx.exponent(&half), q(1, 2));
        let t = SpecialVariant::ExpX2Over1mx.table(6).unwrap();
        assert_eq!(t.to_vec(), vec![0, 2, 3, 2, 5, 1].into_iter().map(BigInt::from).collect::<Vec<_>>());
    }

    #[test]
    fn covering_guard_budget() {
        let c = ctx(128);
        assert_eq!(covering(&c, 1).guard_bits(), 64);
        assert_eq!(covering(&c, 800).guard_bits(), 74);
        let wide = c.widened(100);
        assert_eq!(covering(&wide, 800), wide);
    }
}
