//! Big-rational helpers shared by every module.

use std::cmp::Ordering;

use num::bigint::BigInt;
use num::{BigRational, Integer, One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `p/q` or an integer string.
pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    let r: Rational = s.parse().ok()?;
    Some(r)
}

/// `2^-n` as an exact rational.
pub fn dyadic(n: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << n)
}

/// Exact sum, reduced once at the end.
pub fn sum<I>(terms: I) -> Rational
where
    I: IntoIterator<Item = Rational>,
{
    let terms: Vec<Rational> = terms.into_iter().collect();
    weighted_sum(terms.iter().map(|t| (BigInt::one(), t)))
}

/// `Σ w_k x_k` with integer weights. The terms are brought to the lcm of
/// their denominators and added as integers; only the final quotient is
/// reduced. Much cheaper than folding `+`, which pays a big gcd per step.
pub fn weighted_sum<'a, I>(terms: I) -> Rational
where
    I: IntoIterator<Item = (BigInt, &'a Rational)>,
{
    let terms: Vec<(BigInt, &Rational)> = terms.into_iter().filter(|(w, x)| !w.is_zero() && !x.is_zero()).collect();
    let mut lcm = BigInt::one();
    for (_, x) in &terms {
        let q = x.denom();
        if !q.is_one() {
            // gcd(lcm, q) = gcd(q, lcm mod q) keeps the gcd small
            let g = q.gcd(&(&lcm % q));
            lcm *= q / g;
        }
    }
    let mut numer = BigInt::zero();
    for (w, x) in &terms {
        numer += w * x.numer() * (&lcm / x.denom());
    }
    Rational::new(numer, lcm)
}

/// Exact `base^tau` for a non-negative rational exponent, when rational.
pub fn rational_power(base: u64, tau: &Rational) -> Option<Rational> {
    if tau.is_negative() {
        return None;
    }
    let p = tau.numer().to_u32()?;
    let q = tau.denom().to_u32()?;
    let b = BigInt::from(base);
    let root = if q == 1 {
        b
    } else {
        let r = b.nth_root(q);
        if num::pow(r.clone(), q as usize) != b {
            return None;
        }
        r
    };
    Some(Rational::from_integer(num::pow(root, p as usize)))
}

/// Smallest `k >= 1` with `2^k >= x`.
pub fn ceil_log2_at_least_one(x: &Rational) -> u32 {
    let mut k = 1u32;
    let mut pow = int(2);
    while &pow < x {
        pow *= int(2);
        k += 1;
    }
    k
}

/// `floor(x * 2^n)` as an integer.
pub fn floor_scaled(x: &Rational, n: u32) -> BigInt {
    (x.numer() << n).div_floor(x.denom())
}

/// Exact string form, `p/q` or `p`.
pub fn exact(x: &Rational) -> String {
    x.to_string()
}

/// Decimal rendering with 12 significant digits, rounded half away from
/// zero. Computed with integer arithmetic so output does not depend on
/// float formatting.
pub fn decimal(x: &Rational) -> String {
    const DIGITS: i64 = 12;
    if x.is_zero() {
        return "0".to_string();
    }
    let neg = x.is_negative();
    let ax = x.abs();
    let mut e = decimal_exponent(&ax);
    // m = round(ax * 10^(DIGITS-1-e)), in [10^(DIGITS-1), 10^DIGITS]
    let mut m = scaled_round(&ax, DIGITS - 1 - e);
    if m >= num::pow(BigInt::from(10), DIGITS as usize) {
        e += 1;
        m = scaled_round(&ax, DIGITS - 1 - e);
    }
    let digits = m.to_string();
    let body = if (-5..DIGITS).contains(&e) {
        if e >= 0 {
            let split = (e + 1) as usize;
            let (int_part, frac_part) = digits.split_at(split);
            if frac_part.is_empty() {
                int_part.to_string()
            } else {
                format!("{int_part}.{frac_part}")
            }
        } else {
            format!("0.{}{}", "0".repeat((-e - 1) as usize), digits)
        }
    } else {
        format!("{}.{}e{}", &digits[..1], &digits[1..], e)
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

fn pow10(k: i64) -> Rational {
    let p = num::pow(BigInt::from(10), k.unsigned_abs() as usize);
    if k >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new(BigInt::one(), p)
    }
}

/// `floor(log10(x))` for `x > 0`.
fn decimal_exponent(x: &Rational) -> i64 {
    let bits = x.numer().bits() as i64 - x.denom().bits() as i64;
    let mut e = ((bits as f64) * std::f64::consts::LOG10_2).floor() as i64 - 1;
    while pow10(e + 1) <= *x {
        e += 1;
    }
    while pow10(e) > *x {
        e -= 1;
    }
    e
}

fn scaled_round(x: &Rational, k: i64) -> BigInt {
    let y = x * pow10(k);
    let two = BigInt::from(2);
    let (q, r) = y.numer().div_rem(y.denom());
    if (r * &two).cmp(y.denom()) != Ordering::Less {
        q + BigInt::one()
    } else {
        q
    }
}

/// Lossy conversion for diagnostics and thresholds on already-exact data.
pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
