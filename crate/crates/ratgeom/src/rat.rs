//! Exact rationals and the string forms used on disk.
//!
//! Rationals are written as `"p/q"` with `q > 0` and `gcd(|p|, q) = 1`. On
//! input we also accept plain integers (`"-3"`) and decimal literals
//! (`"0.1"`, `"2.5e-3"`), which are converted exactly.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::ParseRatError;

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rat = BigRational;

/// Largest decimal exponent accepted by [`parse_rat`]. Keeps hostile input from
/// requesting a multi-megabyte power of ten.
pub const MAX_DECIMAL_EXPONENT: i64 = 4096;

pub fn rat(numer: i64, denom: i64) -> Rat {
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Exact conversion of a finite float. `None` for NaN and infinities.
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

/// Simplest rational (smallest denominator) in `[lo, hi]`.
pub fn simplest_between(lo: &Rat, hi: &Rat) -> Rat {
    debug_assert!(lo <= hi);
    if hi.is_negative() {
        return -simplest_between(&-hi, &-lo);
    }
    if !lo.is_positive() {
        return Rat::zero();
    }
    let fl = lo.floor();
    if &fl == lo {
        return fl;
    }
    let next = &fl + Rat::one();
    if &next <= hi {
        return next;
    }
    let tail = simplest_between(&(hi - &fl).recip(), &(lo - &fl).recip());
    fl + tail.recip()
}

/// Reads a float as the simplest rational within two ulps, so `0.05`
/// becomes `1/20`. `None` for NaN and infinities.
pub fn rat_from_f64_simplest(x: f64) -> Option<Rat> {
    let exact = Rat::from_float(x)?;
    if x == 0.0 {
        return Some(exact);
    }
    let tol = Rat::from_float(2.0 * f64::EPSILON * x.abs())?;
    Some(simplest_between(&(&exact - &tol), &(&exact + &tol)))
}

pub fn rat_to_f64(x: &Rat) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn rats_to_f64(xs: &[Rat]) -> Vec<f64> {
    xs.iter().map(rat_to_f64).collect()
}

/// Canonical `"p/q"` form. Integers are written with an explicit `/1`.
pub fn format_rat(x: &Rat) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn format_rats(xs: &[Rat]) -> Vec<String> {
    xs.iter().map(format_rat).collect()
}

fn parse_digits(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse::<BigInt>().ok()
}

/// Parses `"p/q"`, an integer, or a decimal literal into an exact rational.
pub fn parse_rat(input: &str) -> Result<Rat, ParseRatError> {
    let err = || ParseRatError::Malformed(input.chars().take(64).collect());
    let (negative, body) = match input.as_bytes().first() {
        Some(b'-') => (true, &input[1..]),
        Some(b'+') => (false, &input[1..]),
        Some(_) => (false, input),
        None => return Err(ParseRatError::Empty),
    };
    let magnitude = if let Some((p, q)) = body.split_once('/') {
        let p = parse_digits(p).ok_or_else(err)?;
        let q = parse_digits(q).ok_or_else(err)?;
        if q.is_zero() {
            return Err(ParseRatError::ZeroDenominator);
        }
        Rat::new(p, q)
    } else {
        let (mantissa, exponent) = match body.find(['e', 'E']) {
            Some(pos) => {
                let exp_str = &body[pos + 1..];
                let (exp_neg, exp_digits) = match exp_str.as_bytes().first() {
                    Some(b'-') => (true, &exp_str[1..]),
                    Some(b'+') => (false, &exp_str[1..]),
                    _ => (false, exp_str),
                };
                if exp_digits.is_empty()
                    || exp_digits.len() > 6
                    || !exp_digits.bytes().all(|b| b.is_ascii_digit())
                {
                    return Err(err());
                }
                let e: i64 = exp_digits.parse().map_err(|_| err())?;
                (&body[..pos], if exp_neg { -e } else { e })
            }
            None => (body, 0),
        };
        let (int_part, frac_part) = match mantissa.split_once('.') {
            Some((i, f)) => (i, f),
            None => (mantissa, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) {
            return Err(err());
        }
        let digits = format!("{int_part}{frac_part}");
        let numer = parse_digits(&digits).ok_or_else(err)?;
        let scale = exponent - frac_part.len() as i64;
        if scale.abs() > MAX_DECIMAL_EXPONENT {
            return Err(ParseRatError::ExponentTooLarge);
        }
        let ten = BigInt::from(10);
        let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
        if scale >= 0 {
            Rat::from_integer(numer * pow)
        } else {
            Rat::new(numer, pow)
        }
    };
    Ok(if negative { -magnitude } else { magnitude })
}

pub fn parse_rats(items: &[String]) -> Result<Vec<Rat>, ParseRatError> {
    items.iter().map(|s| parse_rat(s)).collect()
}

pub fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).fold(Rat::zero(), |acc, (x, y)| acc + x * y)
}

/// Least common multiple of the denominators, i.e. the smallest positive
/// integer turning `xs` into an integer vector.
pub fn common_denominator(xs: &[Rat]) -> BigInt {
    xs.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

/// Scales a rational vector by a positive factor so that all entries become
/// integers.
pub fn to_integer_vector(xs: &[Rat]) -> Vec<BigInt> {
    let l = common_denominator(xs);
    xs.iter()
        .map(|x| (x * Rat::from_integer(l.clone())).to_integer())
        .collect()
}

/// Rescales so that the first nonzero entry has absolute value one. Zero
/// vectors are returned unchanged.
pub fn scale_first_nonzero(xs: &[Rat]) -> Vec<Rat> {
    match xs.iter().find(|x| !x.is_zero()) {
        Some(lead) => {
            let s = lead.abs();
            xs.iter().map(|x| x / &s).collect()
        }
        None => xs.to_vec(),
    }
}

pub fn is_zero_vector(xs: &[Rat]) -> bool {
    xs.iter().all(Zero::is_zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplest_rationals() {
        assert_eq!(rat_from_f64_simplest(0.05), Some(rat(1, 20)));
        assert_eq!(rat_from_f64_simplest(-1.0 / 3.0), Some(rat(-1, 3)));
        assert_eq!(rat_from_f64_simplest(2.0), Some(rat_int(2)));
        assert_eq!(simplest_between(&rat(-1, 2), &rat(1, 3)), rat_int(0));
        assert_eq!(simplest_between(&rat(3, 10), &rat(4, 10)), rat(1, 3));
        assert_eq!(rat_from_f64_simplest(f64::NAN), None);
        let x = 0.123456789;
        let r = rat_from_f64_simplest(x).unwrap();
        assert!((rat_to_f64(&r) - x).abs() <= 4.0 * f64::EPSILON * x);
    }

    #[test]
    fn parses_fraction_integer_and_decimal() {
        assert_eq!(parse_rat("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse_rat("-7").unwrap(), rat_int(-7));
        assert_eq!(parse_rat("0.1").unwrap(), rat(1, 10));
        assert_eq!(parse_rat("-.25").unwrap(), rat(-1, 4));
        assert_eq!(parse_rat("2.5e-3").unwrap(), rat(1, 400));
        assert_eq!(parse_rat("1E2").unwrap(), rat_int(100));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "-", "1/0", "1/", "/2", "a", "1.2.3", "1e", "1/-2", "0x10", " 1"] {
            assert!(parse_rat(bad).is_err(), "{bad:?} should not parse");
        }
        assert!(matches!(parse_rat("1e99999"), Err(ParseRatError::ExponentTooLarge)));
    }

    #[test]
    fn format_is_p_over_q() {
        assert_eq!(format_rat(&rat(-22, 20)), "-11/10");
        assert_eq!(format_rat(&rat_int(0)), "0/1");
        assert_eq!(parse_rat(&format_rat(&rat(9, 7))).unwrap(), rat(9, 7));
    }

    #[test]
    fn float_conversion_is_exact() {
        assert_eq!(rat_from_f64(0.5).unwrap(), rat(1, 2));
        let x = rat_from_f64(0.1).unwrap();
        assert_ne!(x, rat(1, 10));
        assert_eq!(rat_to_f64(&x), 0.1);
        assert!(rat_from_f64(f64::NAN).is_none());
    }

    #[test]
    fn integer_scaling() {
        let v = vec![rat(1, 2), rat(-2, 3), rat_int(0)];
        let iv = to_integer_vector(&v);
        assert_eq!(iv, vec![BigInt::from(3), BigInt::from(-4), BigInt::from(0)]);
        assert_eq!(scale_first_nonzero(&[rat_int(0), rat(-3, 2), rat(3, 4)]), vec![rat_int(0), rat_int(-1), rat(1, 2)]);
    }
}
