use goldprod::arithfn::{
    dirichlet_one_convolve, sieve_mobius, sieve_totient, totient_from_mobius, ArithFnTable,
    FnKind,
};
use num_bigint::BigInt;
use num_integer::Integer;
use proptest::prelude::*;

const ORACLE_LIMIT: usize = 10_000;

/// μ by trial factorization.
fn naive_mu(mut n: usize) -> i64 {
    let mut sign = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if n > 1 {
        sign = -sign;
    }
    sign
}

/// φ by counting residues coprime to n.
fn naive_phi(n: usize) -> i64 {
    (1..=n).filter(|k| k.gcd(&n) == 1).count() as i64
}

#[test]
fn sieves_match_naive_oracles() {
    let mu = sieve_mobius(ORACLE_LIMIT).unwrap();
    let phi = sieve_totient(ORACLE_LIMIT).unwrap();
    for n in 1..=ORACLE_LIMIT {
        assert_eq!(mu.value_i64(n), Some(naive_mu(n)), "mu({n})");
        assert_eq!(phi.value_i64(n), Some(naive_phi(n)), "phi({n})");
    }
}

#[test]
fn totient_from_mobius_matches_sieve() {
    let mu = sieve_mobius(ORACLE_LIMIT).unwrap();
    let phi = sieve_totient(ORACLE_LIMIT).unwrap();
    for n in 1..=ORACLE_LIMIT {
        assert_eq!(totient_from_mobius(n, &mu).unwrap(), phi.value(n), "n={n}");
    }
}

#[test]
fn multiplicativity_on_coprime_pairs() {
    let mu = sieve_mobius(ORACLE_LIMIT).unwrap();
    let phi = sieve_totient(ORACLE_LIMIT).unwrap();
    for a in 1..=ORACLE_LIMIT {
        for b in 1..=ORACLE_LIMIT / a {
            if a.gcd(&b) != 1 {
                continue;
            }
            assert_eq!(phi.value(a * b), phi.value(a) * phi.value(b));
            assert_eq!(mu.value(a * b), mu.value(a) * mu.value(b));
        }
    }
}

#[test]
fn convolution_identities_exact() {
    for limit in [1, 2, 97, 1000, 50_000] {
        let sp = dirichlet_one_convolve(&sieve_totient(limit).unwrap());
        let sm = dirichlet_one_convolve(&sieve_mobius(limit).unwrap());
        for n in 1..=limit {
            assert_eq!(sp.value_i64(n), Some(n as i64));
            assert_eq!(sm.value_i64(n), Some((n == 1) as i64));
        }
    }
}

#[test]
fn ten_million_sieve() {
    let limit = 10_000_000;
    let mu = sieve_mobius(limit).unwrap();
    assert_eq!(mu.limit(), limit);
    assert_eq!(mu.value_i64(limit), Some(0));
    assert_eq!(mu.value_i64(9_999_991), Some(-1)); // prime
    let phi = sieve_totient(limit).unwrap();
    assert_eq!(phi.value_i64(9_999_991), Some(9_999_990));
    assert_eq!(phi.value_i64(limit), Some(4_000_000));
}

proptest! {
    #[test]
    fn convolution_matches_divisor_enumeration(values in prop::collection::vec(-1000i64..1000, 1..200)) {
        let f = ArithFnTable::from_i64s(FnKind::Custom, values.clone()).unwrap();
        let g = dirichlet_one_convolve(&f);
        for n in 1..=values.len() {
            let expected: i64 = (1..=n).filter(|d| n % d == 0).map(|d| values[d - 1]).sum();
            prop_assert_eq!(g.value(n), BigInt::from(expected));
        }
    }
}
