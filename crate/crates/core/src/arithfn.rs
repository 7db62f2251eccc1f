//! Arithmetic function tables: Möbius and Euler totient sieves, convolution
//! with the constant-one function, and the classical divisor-sum checks.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

/// Largest table the sieves will build. At this size a sieved table holds
/// 160 MB of values.
pub const MAX_SIEVE_LIMIT: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("table limit {0} outside the supported range 1..={MAX_SIEVE_LIMIT}")]
    Size(usize),
    #[error("index {index} outside table of limit {limit}")]
    OutOfRange { index: usize, limit: usize },
    #[error("{kind} table violates its invariant at n = {n}")]
    Invariant { kind: FnKind, n: usize },
    #[error("internal inconsistency: n * sum mu(d)/d = {value} is not an integer for n = {n}")]
    NonIntegral { n: usize, value: String },
    #[error("expected a {expected} table, got {got}")]
    WrongKind { expected: FnKind, got: FnKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FnKind {
    Mu,
    Phi,
    One,
    Custom,
}

impl fmt::Display for FnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FnKind::Mu => "mu",
            FnKind::Phi => "phi",
            FnKind::One => "one",
            FnKind::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Values {
    Small(Vec<i64>),
    Big(Vec<BigInt>),
}

/// Values `f(1..=limit)` of an arithmetic function.
///
/// Values are arbitrary-size integers. Tables whose values all fit in an
/// `i64` are stored compactly; that is invisible through the public API.
/// Tables are immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArithFnTable {
    kind: FnKind,
    values: Values,
}

fn check_limit(limit: usize) -> Result<(), ArithError> {
    if limit == 0 || limit > MAX_SIEVE_LIMIT {
        return Err(ArithError::Size(limit));
    }
    Ok(())
}

impl ArithFnTable {
    /// Build a table from `f(1), f(2), ...`, checking the invariants of `kind`.
    pub fn from_values(kind: FnKind, values: Vec<BigInt>) -> Result<Self, ArithError> {
        check_limit(values.len())?;
        let table = match values.iter().map(|v| v.to_i64()).collect::<Option<Vec<_>>>() {
            Some(small) => Self {
                kind,
                values: Values::Small(small),
            },
            None => Self {
                kind,
                values: Values::Big(values),
            },
        };
        table.validate()?;
        Ok(table)
    }

    pub fn from_i64s(kind: FnKind, values: Vec<i64>) -> Result<Self, ArithError> {
        check_limit(values.len())?;
        let table = Self {
            kind,
            values: Values::Small(values),
        };
        table.validate()?;
        Ok(table)
    }

    /// The constant function `1`.
    pub fn ones(limit: usize) -> Result<Self, ArithError> {
        check_limit(limit)?;
        Ok(Self {
            kind: FnKind::One,
            values: Values::Small(vec![1; limit]),
        })
    }

    pub fn kind(&self) -> FnKind {
        self.kind
    }

    pub fn limit(&self) -> usize {
        match &self.values {
            Values::Small(v) => v.len(),
            Values::Big(v) => v.len(),
        }
    }

    /// `f(n)` for `1 <= n <= limit`.
    pub fn get(&self, n: usize) -> Result<BigInt, ArithError> {
        if n == 0 || n > self.limit() {
            return Err(ArithError::OutOfRange {
                index: n,
                limit: self.limit(),
            });
        }
        Ok(match &self.values {
            Values::Small(v) => BigInt::from(v[n - 1]),
            Values::Big(v) => v[n - 1].clone(),
        })
    }

    /// `f(n)`, panicking outside `1..=limit`.
    pub fn value(&self, n: usize) -> BigInt {
        self.get(n).unwrap_or_else(|e| panic!("{e}"))
    }

    /// `f(n)` as `i64` when it fits.
    pub fn value_i64(&self, n: usize) -> Option<i64> {
        match &self.values {
            Values::Small(v) => v.get(n.checked_sub(1)?).copied(),
            Values::Big(v) => v.get(n.checked_sub(1)?)?.to_i64(),
        }
    }

    /// All values in order, `f(1)` first.
    pub fn to_vec(&self) -> Vec<BigInt> {
        match &self.values {
            Values::Small(v) => v.iter().map(|&x| BigInt::from(x)).collect(),
            Values::Big(v) => v.clone(),
        }
    }

    /// Same values under a different kind tag, re-validated.
    pub fn with_kind(&self, kind: FnKind) -> Result<Self, ArithError> {
        let table = Self {
            kind,
            values: self.values.clone(),
        };
        table.validate()?;
        Ok(table)
    }

    /// Pointwise `self - other` as a custom table over the shorter range.
    pub fn difference(&self, other: &ArithFnTable) -> ArithFnTable {
        let n = self.limit().min(other.limit());
        let values = (1..=n).map(|k| self.value(k) - other.value(k)).collect();
        Self::from_values(FnKind::Custom, values).expect("non-empty custom table")
    }

    /// First `n` with `|f(n)| > c * n`, if any.
    pub fn growth_violation(&self, c: &BigRational) -> Option<usize> {
        (1..=self.limit()).find(|&n| {
            let bound = c * BigRational::from_integer(BigInt::from(n));
            BigRational::from_integer(self.value(n).abs()) > bound
        })
    }

    fn validate(&self) -> Result<(), ArithError> {
        let kind = self.kind;
        let fail = |n| Err(ArithError::Invariant { kind, n });
        match kind {
            FnKind::Custom => {}
            FnKind::One => {
                for n in 1..=self.limit() {
                    if self.value_i64(n) != Some(1) {
                        return fail(n);
                    }
                }
            }
            FnKind::Mu => {
                if self.value_i64(1) != Some(1) {
                    return fail(1);
                }
                for n in 2..=self.limit() {
                    if !matches!(self.value_i64(n), Some(-1..=1)) {
                        return fail(n);
                    }
                }
            }
            FnKind::Phi => {
                if self.value_i64(1) != Some(1) {
                    return fail(1);
                }
                let limit = self.limit();
                for n in 2..=limit {
                    match self.value_i64(n) {
                        Some(v) if v >= 1 && v <= n as i64 => {}
                        _ => return fail(n),
                    }
                }
                let mut composite = vec![false; limit + 1];
                for p in 2..=limit {
                    if composite[p] {
                        continue;
                    }
                    if self.value_i64(p) != Some(p as i64 - 1) {
                        return fail(p);
                    }
                    for m in (p * p..=limit).step_by(p) {
                        composite[m] = true;
                    }
                }
            }
        }
        Ok(())
    }
}

/// μ and φ together from one linear sieve pass.
///
/// Every composite `i * p` is visited exactly once, from the prime `p` that is
/// its smallest prime factor, which gives the recurrences
/// `φ(ip) = φ(i) p` and `μ(ip) = 0` when `p | i`, and
/// `φ(ip) = φ(i)(p - 1)` and `μ(ip) = -μ(i)` otherwise.
fn linear_sieve(limit: usize) -> (Vec<i64>, Vec<i64>) {
    let mut phi = vec![0i64; limit + 1];
    let mut mu = vec![0i64; limit + 1];
    let mut primes: Vec<usize> = Vec::new();
    phi[1] = 1;
    mu[1] = 1;
    for i in 2..=limit {
        if phi[i] == 0 {
            primes.push(i);
            phi[i] = i as i64 - 1;
            mu[i] = -1;
        }
        for &p in &primes {
            let m = i * p;
            if m > limit {
                break;
            }
            if i % p == 0 {
                phi[m] = phi[i] * p as i64;
                mu[m] = 0;
                break;
            }
            phi[m] = phi[i] * (p as i64 - 1);
            mu[m] = -mu[i];
        }
    }
    mu.remove(0);
    phi.remove(0);
    (mu, phi)
}

/// Möbius function table `μ(1..=limit)`.
pub fn sieve_mobius(limit: usize) -> Result<ArithFnTable, ArithError> {
    check_limit(limit)?;
    let (mu, _) = linear_sieve(limit);
    Ok(ArithFnTable {
        kind: FnKind::Mu,
        values: Values::Small(mu),
    })
}

/// Euler totient table `φ(1..=limit)`, with `φ(1) = 1`.
pub fn sieve_totient(limit: usize) -> Result<ArithFnTable, ArithError> {
    check_limit(limit)?;
    let (_, phi) = linear_sieve(limit);
    Ok(ArithFnTable {
        kind: FnKind::Phi,
        values: Values::Small(phi),
    })
}

/// `(1 * f)(n) = Σ_{d|n} f(d)` for every `n <= limit`, by the harmonic loop
/// over `d` and its multiples.
pub fn dirichlet_one_convolve(f: &ArithFnTable) -> ArithFnTable {
    let n = f.limit();
    if let Values::Small(v) = &f.values {
        if let Some(out) = convolve_small(v) {
            return ArithFnTable {
                kind: FnKind::Custom,
                values: Values::Small(out),
            };
        }
    }
    let src = f.to_vec();
    let mut out = vec![BigInt::zero(); n];
    for d in 1..=n {
        if src[d - 1].is_zero() {
            continue;
        }
        for m in (d..=n).step_by(d) {
            out[m - 1] += &src[d - 1];
        }
    }
    ArithFnTable::from_values(FnKind::Custom, out).expect("same limit as input")
}

/// `None` on i64 overflow; the caller then redoes the sum in big integers.
fn convolve_small(src: &[i64]) -> Option<Vec<i64>> {
    let n = src.len();
    let mut out = vec![0i64; n];
    for d in 1..=n {
        let v = src[d - 1];
        if v == 0 {
            continue;
        }
        for m in (d..=n).step_by(d) {
            out[m - 1] = out[m - 1].checked_add(v)?;
        }
    }
    Some(out)
}

/// `φ(n) = n Σ_{d|n} μ(d)/d`, evaluated in exact rationals.
///
/// A non-integral result can only come from a broken μ table and is reported
/// as [`ArithError::NonIntegral`].
pub fn totient_from_mobius(n: usize, mu: &ArithFnTable) -> Result<BigInt, ArithError> {
    if mu.kind() != FnKind::Mu {
        return Err(ArithError::WrongKind {
            expected: FnKind::Mu,
            got: mu.kind(),
        });
    }
    if n == 0 || n > mu.limit() {
        return Err(ArithError::OutOfRange {
            index: n,
            limit: mu.limit(),
        });
    }
    let mut sum = BigRational::zero();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            sum += BigRational::new(mu.value(d), BigInt::from(d));
            let e = n / d;
            if e != d {
                sum += BigRational::new(mu.value(e), BigInt::from(e));
            }
        }
        d += 1;
    }
    let value = sum * BigRational::from_integer(BigInt::from(n));
    if !value.denom().is_one() {
        return Err(ArithError::NonIntegral {
            n,
            value: value.to_string(),
        });
    }
    Ok(value.to_integer())
}

/// Outcome of one exactly checked identity over `1..=limit`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityOutcome {
    pub name: String,
    pub pass: bool,
    pub first_counterexample: Option<usize>,
    pub counterexamples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub limit: usize,
    pub outcomes: Vec<IdentityOutcome>,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }
}

fn outcome(name: &str, failures: impl Iterator<Item = usize>) -> IdentityOutcome {
    let mut first = None;
    let mut count = 0;
    for n in failures {
        first.get_or_insert(n);
        count += 1;
    }
    IdentityOutcome {
        name: name.to_string(),
        pass: count == 0,
        first_counterexample: first,
        counterexamples: count,
    }
}

/// Check `Σ_{d|n} φ(d) = n` and `Σ_{d|n} μ(d) = [n = 1]` on the given tables.
pub fn check_divisor_sums(phi: &ArithFnTable, mu: &ArithFnTable) -> CheckReport {
    let limit = phi.limit().min(mu.limit());
    let sum_phi = dirichlet_one_convolve(phi);
    let sum_mu = dirichlet_one_convolve(mu);
    let phi_outcome = outcome(
        "sum_{d|n} phi(d) = n",
        (1..=limit).filter(|&n| sum_phi.value_i64(n) != Some(n as i64)),
    );
    let mu_outcome = outcome(
        "sum_{d|n} mu(d) = [n = 1]",
        (1..=limit).filter(|&n| sum_mu.value_i64(n) != Some((n == 1) as i64)),
    );
    CheckReport {
        limit,
        outcomes: vec![phi_outcome, mu_outcome],
    }
}

/// Sieve both tables up to `limit` and check both divisor-sum identities.
pub fn verify_divisor_sums(limit: usize) -> Result<CheckReport, ArithError> {
    let phi = sieve_totient(limit)?;
    let mu = sieve_mobius(limit)?;
    Ok(check_divisor_sums(&phi, &mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(t: &ArithFnTable) -> Vec<i64> {
        (1..=t.limit()).map(|n| t.value_i64(n).unwrap()).collect()
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(
            ints(&sieve_mobius(10).unwrap()),
            vec![1, -1, -1, 0, -1, 1, -1, 0, 0, 1]
        );
        assert_eq!(ints(&sieve_mobius(1).unwrap()), vec![1]);
        assert_eq!(sieve_mobius(12).unwrap().value(12), BigInt::zero());
    }

    #[test]
    fn totient_examples() {
        assert_eq!(
            ints(&sieve_totient(10).unwrap()),
            vec![1, 1, 2, 2, 4, 2, 6, 4, 6, 4]
        );
        assert_eq!(ints(&sieve_totient(1).unwrap()), vec![1]);
        assert_eq!(sieve_totient(12).unwrap().value(12), BigInt::from(4));
    }

    #[test]
    fn size_errors() {
        assert_eq!(sieve_mobius(0), Err(ArithError::Size(0)));
        assert_eq!(
            sieve_totient(MAX_SIEVE_LIMIT + 1),
            Err(ArithError::Size(MAX_SIEVE_LIMIT + 1))
        );
        assert!(ArithFnTable::ones(0).is_err());
        assert!(ArithFnTable::from_values(FnKind::Custom, vec![]).is_err());
    }

    #[test]
    fn convolution_examples() {
        let phi = sieve_totient(6).unwrap();
        assert_eq!(ints(&dirichlet_one_convolve(&phi)), vec![1, 2, 3, 4, 5, 6]);
        let mu = sieve_mobius(6).unwrap();
        assert_eq!(ints(&dirichlet_one_convolve(&mu)), vec![1, 0, 0, 0, 0, 0]);
        let one = ArithFnTable::ones(4).unwrap();
        let d = dirichlet_one_convolve(&one);
        assert_eq!(d.kind(), FnKind::Custom);
        assert_eq!(ints(&d), vec![1, 2, 2, 3]);
    }

    #[test]
    fn convolution_promotes_on_overflow() {
        let f = ArithFnTable::from_i64s(FnKind::Custom, vec![i64::MAX, i64::MAX]).unwrap();
        let g = dirichlet_one_convolve(&f);
        assert_eq!(g.value(2), BigInt::from(i64::MAX) * 2);
        assert_eq!(g.value_i64(2), None);
    }

    #[test]
    fn totient_from_mobius_examples() {
        let mu = sieve_mobius(12).unwrap();
        assert_eq!(totient_from_mobius(1, &mu).unwrap(), BigInt::from(1));
        assert_eq!(totient_from_mobius(12, &mu).unwrap(), BigInt::from(4));
        assert_eq!(totient_from_mobius(10, &mu).unwrap(), BigInt::from(4));
        assert!(matches!(
            totient_from_mobius(13, &mu),
            Err(ArithError::OutOfRange { .. })
        ));
        let phi = sieve_totient(12).unwrap();
        assert!(matches!(
            totient_from_mobius(5, &phi),
            Err(ArithError::WrongKind { .. })
        ));
    }

    #[test]
    fn corrupted_mobius_gives_wrong_totient() {
        // n/d is an integer for every divisor, so a corrupted table still
        // yields an integer; it is caught by comparison with the sieve
        let mut v = ints(&sieve_mobius(8).unwrap());
        v[3] = 1;
        let mu = ArithFnTable::from_i64s(FnKind::Mu, v).unwrap();
        assert_eq!(totient_from_mobius(8, &mu).unwrap(), BigInt::from(6));
        assert_ne!(totient_from_mobius(8, &mu).unwrap(), sieve_totient(8).unwrap().value(8));
    }

    #[test]
    fn divisor_sums() {
        assert!(verify_divisor_sums(1).unwrap().pass());
        let report = verify_divisor_sums(2000).unwrap();
        assert!(report.pass());
        assert_eq!(report.outcomes.len(), 2);
        assert!(report.outcomes.iter().all(|o| o.first_counterexample.is_none()));
    }

    #[test]
    fn injected_fault_is_reported() {
        let mut v = ints(&sieve_totient(30).unwrap());
        v[5] = 3;
        let phi = ArithFnTable::from_i64s(FnKind::Phi, v).unwrap();
        let mu = sieve_mobius(30).unwrap();
        let report = check_divisor_sums(&phi, &mu);
        assert!(!report.pass());
        assert!(!report.outcomes[0].pass);
        assert_eq!(report.outcomes[0].first_counterexample, Some(6));
        assert!(report.outcomes[1].pass);
    }

    #[test]
    fn kind_invariants() {
        assert!(ArithFnTable::from_i64s(FnKind::Mu, vec![1, -1, 2]).is_err());
        assert!(ArithFnTable::from_i64s(FnKind::Mu, vec![0]).is_err());
        assert!(ArithFnTable::from_i64s(FnKind::Phi, vec![1, 1, 1]).is_err());
        assert!(ArithFnTable::from_i64s(FnKind::Phi, vec![1, 1, 2, 5]).is_err());
        assert!(ArithFnTable::from_i64s(FnKind::One, vec![1, 2]).is_err());
        assert!(sieve_totient(100).unwrap().with_kind(FnKind::Phi).is_ok());
        assert!(sieve_totient(100).unwrap().with_kind(FnKind::Mu).is_err());
    }

    #[test]
    fn growth_and_difference() {
        let phi = sieve_totient(20).unwrap();
        let mu = sieve_mobius(20).unwrap();
        let d = phi.difference(&mu);
        assert_eq!(d.kind(), FnKind::Custom);
        assert_eq!(d.value(1), BigInt::zero());
        assert_eq!(d.value(2), BigInt::from(2));
        let one = BigRational::one();
        assert_eq!(d.growth_violation(&one), None);
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(phi.growth_violation(&half), Some(1));
    }

    #[test]
    fn big_values_survive() {
        let big = BigInt::from(i64::MAX) * BigInt::from(1000);
        let t = ArithFnTable::from_values(FnKind::Custom, vec![BigInt::one(), big.clone()]).unwrap();
        assert_eq!(t.value(2), big);
        assert_eq!(t.get(3), Err(ArithError::OutOfRange { index: 3, limit: 2 }));
    }
}
