//! Numerical building blocks shared by the planners and the oracles.
//!
//! Nothing here is specific to the stopping rule; these are the small pieces
//! of arithmetic that need more care than a one-line `f64` expression:
//!
//! * [`xlog1p_minus`] evaluates `(1+x)·ln(1+x) − x` without cancellation.
//! * [`decimal_rational`] reads an `f64` back as the decimal the user wrote.
//! * [`ln_rational_fixed`] computes natural logs of rationals in big fixed
//!   point, used where an integer count must be exact.
//! * [`normal_quantile`] is Wichura's AS241 (PPND16) inverse normal CDF.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Below this magnitude `(1+x)ln(1+x) − x` is summed from its power series.
const SERIES_CUTOFF: f64 = 0.25;

/// `(1+x)·ln(1+x) − x` for `x > −1`.
///
/// The function is nonnegative with a double zero at the origin, so the
/// naive form loses all significant digits as `x → 0`. Near zero the series
/// `Σ_{k≥2} (−x)^k / (k(k−1))` is used instead.
pub fn xlog1p_minus(x: f64) -> f64 {
    debug_assert!(x > -1.0);
    if x.abs() < SERIES_CUTOFF {
        let mut sum = 0.0;
        let mut power = x * x;
        let mut k = 2.0_f64;
        loop {
            let term = power / (k * (k - 1.0));
            sum += term;
            if term.abs() <= f64::EPSILON * 1e-3 * sum.abs() {
                break;
            }
            power *= -x;
            k += 1.0;
        }
        sum
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

/// Exact rational value of the shortest decimal that round-trips to `x`.
///
/// `0.1_f64` becomes exactly `1/10`, not the binary fraction stored in the
/// register. Margins and probabilities are supplied as decimals, so this is
/// the value every exact comparison is made against.
///
/// Panics on non-finite input.
pub fn decimal_rational(x: f64) -> BigRational {
    assert!(x.is_finite(), "decimal_rational: non-finite input {x}");
    let text = format!("{x:e}");
    let (mantissa, exponent) = text.split_once('e').expect("`{:e}` always has an exponent");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let mantissa = mantissa.trim_start_matches('-');
    let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{whole}{frac}").parse().expect("decimal digits");
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    value
}

/// `2·atanh(num/den) · 2^bits`, truncated, for `|num/den| < 1`.
fn two_atanh_fixed(num: &BigInt, den: &BigInt, bits: u64) -> BigInt {
    // shifts floor toward −∞, so the series runs on |z|
    if num.sign() != den.sign() && !num.is_zero() {
        return -two_atanh_fixed(&num.abs(), &den.abs(), bits);
    }
    let z = (num.abs() << bits) / den.abs();
    let z2 = (&z * &z) >> bits;
    let mut power = z;
    let mut sum = BigInt::zero();
    let mut k = 1u64;
    while !power.is_zero() {
        sum += &power / BigInt::from(k);
        power = (&power * &z2) >> bits;
        k += 2;
    }
    sum << 1
}

/// `ln(r) · 2^bits` for a positive rational `r`, accurate to a few units in
/// the last place.
///
/// The argument is reduced by a power of two into `(1/2, 2)` and the
/// remainder goes through the `atanh` series, which converges at better than
/// three bits per term there.
pub fn ln_rational_fixed(r: &BigRational, bits: u64) -> BigInt {
    assert!(r.is_positive(), "ln of a non-positive rational");
    let guard = 64;
    let work = bits + guard;
    let num = r.numer().clone();
    let den = r.denom().clone();
    let shift = num.bits() as i64 - den.bits() as i64;
    let (a, b) = if shift >= 0 {
        (num, den << (shift as u64))
    } else {
        (num << ((-shift) as u64), den)
    };
    let mut result = two_atanh_fixed(&(&a - &b), &(&a + &b), work);
    if shift != 0 {
        let ln2 = two_atanh_fixed(&BigInt::one(), &BigInt::from(3u32), work);
        result += ln2 * BigInt::from(shift);
    }
    result >> guard
}

/// Floor of a nonnegative rational held in fixed point, as `u128` if it fits.
pub fn fixed_floor_u128(value: &BigInt, bits: u64) -> Option<u128> {
    if value.sign() == Sign::Minus {
        return None;
    }
    let whole: BigInt = value >> bits;
    u128::try_from(whole).ok()
}

/// Inverse of the standard normal CDF (Wichura 1988, algorithm AS241 PPND16).
///
/// Relative accuracy is about 1e-16 over the whole open interval. Returns
/// `NaN` outside `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return f64::NAN;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_854_5e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_049e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}
