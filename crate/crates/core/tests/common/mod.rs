#![allow(dead_code)]

use std::str::FromStr;

use goldprod::bigreal::{BigReal, PrecisionCtx};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

// 120 significant digits, computed independently with mpmath at 130 digits.
pub const SQRT5: &str = "2.23606797749978969640917366873127623544061835961152572427089724541052092563780489941441440837878227496950817615077378";
pub const TAU: &str = "1.61803398874989484820458683436563811772030917980576286213544862270526046281890244970720720418939113748475408807538689";
pub const INV_TAU: &str = "0.61803398874989484820458683436563811772030917980576286213544862270526046281890244970720720418939113748475408807538689";
pub const INV_TAU2: &str = "0.381966011250105151795413165634361882279690820194237137864551377294739537181097550292792795810608862515245911924613108";
pub const LN2: &str = "0.693147180559945309417232121458176568075500134360255254120680009493393621969694715605863326996418687542001481020570686";
pub const LN3: &str = "1.09861228866810969139524523692252570464749055782274945173469433363749429321860896687361575481373208878797002906595787";
pub const LN_INV_TAU2: &str = "-0.962423650119206894995517826848736846270368668771321039322036337680327735216443548824018858245446949994463679916587313";
pub const E: &str = "2.71828182845904523536028747135266249775724709369995957496696762772407663035354759457138217852516642742746639193200306";
pub const EXP_HALF: &str = "1.64872127070012814684865078781416357165377610071014801157507931164066102119421560863277652005636664300286663775630780";
pub const EXP_THIRD: &str = "1.39561242508608952862812531960258683759790651519940698261751670603173901564595184696978881729583022413521118441041886";
pub const EXP_3_4: &str = "2.11700001661267466854536981983709561013449158470240342177913303081098453336401282000279156026661579821888590471901551";
pub const EXP_M5: &str = "0.00673794699908546709663604842314842424884958502735508543030553157268352251560406228144913884420836154805502042198395431";
pub const LN_1E30: &str = "69.0775527898213705205397436405309262280330446588631892809998370290271782903205744070799161526879489502590335212685875";
/// ln(1 - 2^-100)
pub const LN_1M2POW100: &str = "-7.88860905221011805411728565283097380437099492194380207972968100512540855865987828215720222136742381986785142640828800e-31";

/// Exact rational value of a decimal literal, with optional `e` exponent.
pub fn parse_decimal(s: &str) -> BigRational {
    let (body, exp) = match s.split_once(['e', 'E']) {
        Some((b, e)) => (b, i64::from_str(e).unwrap()),
        None => (s, 0),
    };
    let negative = body.starts_with('-');
    let body = body.trim_start_matches(['-', '+']);
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = BigInt::from_str(&format!("{int}{frac}")).unwrap();
    let scale = exp - frac.len() as i64;
    let ten = BigInt::from(10);
    let mut v = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        v = -v;
    }
    v
}

/// `|x - oracle|` as an exact rational.
pub fn err_vs(x: &BigReal, oracle: &str) -> BigRational {
    (x.to_rational() - parse_decimal(oracle)).abs()
}

/// `2^k` as a rational.
pub fn pow2(k: i64) -> BigRational {
    BigReal::pow2(k).to_rational()
}

/// One ulp of `x` at the context's working precision, as a rational.
pub fn ulp(x: &BigReal, ctx: &PrecisionCtx) -> BigRational {
    x.ulp(ctx.working_bits()).to_rational()
}

/// `10^-k` as a rational.
pub fn ten_pow_neg(k: usize) -> BigRational {
    BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), k))
}

/// Assert `|x - oracle| <= ulps * ulp(x)`. Oracles carry 120 digits, so
/// working precisions up to ~380 bits are checkable.
pub fn assert_within_ulps(x: &BigReal, oracle: &str, ulps: i64, ctx: &PrecisionCtx, what: &str) {
    let err = err_vs(x, oracle);
    let allowed = ulp(x, ctx) * BigInt::from(ulps);
    assert!(
        err <= allowed,
        "{what}: got {x:?}, error {} exceeds {ulps} ulp",
        num_traits::ToPrimitive::to_f64(&err).unwrap_or(f64::NAN)
    );
}
