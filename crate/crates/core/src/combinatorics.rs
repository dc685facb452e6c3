//! Factorials, double factorials and the even-number product used by the
//! coefficient formulas. Everything here is exact.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Rational;

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

pub fn factorial_rat(n: u64) -> Rational {
    Rational::from_integer(factorial(n))
}

/// `n!!` for `n >= -1`, with `0!! = (-1)!! = 1`.
pub fn double_factorial(n: i64) -> Result<Rational> {
    if n < -1 {
        return Err(Error::DoubleFactorialDomain(n));
    }
    let mut acc = BigInt::one();
    let mut k = n;
    while k > 1 {
        acc *= BigInt::from(k);
        k -= 2;
    }
    Ok(Rational::from_integer(acc))
}

/// `a!!/b!!` for `a ≡ b (mod 2)`, via the telescoping product
/// `a!! = (a+2)!!/(a+2)`. Either argument may be a negative integer.
pub fn double_factorial_ratio(a: i64, b: i64) -> Result<Rational> {
    if (a - b).rem_euclid(2) != 0 {
        return Err(Error::InvalidArgument(format!(
            "double factorial ratio needs equal parity, got {a} and {b}"
        )));
    }
    let (hi, lo, invert) = if a >= b { (a, b, false) } else { (b, a, true) };
    let mut prod = BigInt::one();
    let mut e = lo + 2;
    while e <= hi {
        if e == 0 {
            return Err(Error::SingularRatio { a, b });
        }
        prod *= BigInt::from(e);
        e += 2;
    }
    let prod = Rational::from_integer(prod);
    Ok(if invert { prod.recip() } else { prod })
}

/// Product of all even integers `e` with `a <= e <= b`; 1 when the range is empty.
pub fn eta(a: i64, b: i64) -> BigInt {
    if a > b {
        return BigInt::one();
    }
    let start = if a.rem_euclid(2) == 0 { a } else { a + 1 };
    let mut acc = BigInt::one();
    let mut e = start;
    while e <= b {
        if e == 0 {
            return BigInt::zero();
        }
        acc *= BigInt::from(e);
        e += 2;
    }
    acc
}

/// Multinomial `n! / prod(c_i!)` for the index counts of a symmetric slot group.
pub fn multinomial(counts: &[usize]) -> BigInt {
    let n: usize = counts.iter().sum();
    let mut acc = factorial(n as u64);
    for &c in counts {
        acc /= factorial(c as u64);
    }
    acc
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, ratio};
    use proptest::prelude::*;

    #[test]
    fn double_factorial_values() {
        assert_eq!(double_factorial(7).unwrap(), rat(105));
        assert_eq!(double_factorial(0).unwrap(), rat(1));
        assert_eq!(double_factorial(-1).unwrap(), rat(1));
        assert_eq!(double_factorial(8).unwrap(), rat(384));
        assert!(matches!(
            double_factorial(-2),
            Err(Error::DoubleFactorialDomain(-2))
        ));
    }

    #[test]
    fn ratio_values() {
        assert_eq!(double_factorial_ratio(6, 2).unwrap(), rat(24));
        assert_eq!(double_factorial_ratio(-6, -4).unwrap(), ratio(-1, 4));
        assert_eq!(double_factorial_ratio(0, 0).unwrap(), rat(1));
        assert_eq!(double_factorial_ratio(2, 6).unwrap(), ratio(1, 24));
        assert!(matches!(
            double_factorial_ratio(-2, 2),
            Err(Error::SingularRatio { .. })
        ));
        assert!(double_factorial_ratio(3, 2).is_err());
    }

    #[test]
    fn eta_values() {
        assert_eq!(eta(2, 6), BigInt::from(48));
        assert_eq!(eta(8, 6), BigInt::one());
        assert_eq!(eta(0, 4), BigInt::zero());
        assert_eq!(eta(-4, -2), BigInt::from(8));
    }

    #[test]
    fn multinomial_counts() {
        assert_eq!(multinomial(&[2, 1, 0, 1]), BigInt::from(12));
        assert_eq!(binomial(7, 3), BigInt::from(35));
    }

    proptest! {
        #[test]
        fn ratio_agrees_with_direct_quotient(a in -1i64..14, d in 0i64..6) {
            let b = a + 2 * d - 6;
            prop_assume!(b >= -1);
            let direct = double_factorial(a).unwrap() / double_factorial(b).unwrap();
            prop_assert_eq!(double_factorial_ratio(a, b).unwrap(), direct);
        }

        #[test]
        fn ratio_chains(a in -12i64..12, i in -6i64..6, j in -6i64..6) {
            let b = a + 2 * i;
            let c = a + 2 * j;
            if let (Ok(ab), Ok(bc), Ok(ac)) = (
                double_factorial_ratio(a, b),
                double_factorial_ratio(b, c),
                double_factorial_ratio(a, c),
            ) {
                prop_assert_eq!(ab * bc, ac);
            }
        }

        #[test]
        fn eta_zero_iff_range_covers_zero(a in -10i64..10, len in 0i64..8) {
            let a = 2 * (a / 2);
            let b = a + 2 * len - 2;
            let covers = a <= 0 && 0 <= b;
            prop_assert_eq!(eta(a, b).is_zero(), covers);
            if a <= b - 2 {
                prop_assert_eq!(eta(a, b), eta(a, b - 2) * BigInt::from(b));
            }
        }
    }
}
