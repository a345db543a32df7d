//! Exact integer factorials and binomials.
//!
//! Every combinatorial constant in the product formula and in the
//! determinant expansions is assembled here in `u128` and converted to `f64`
//! only at the very end. Factorial arguments are capped at
//! [`FACTORIAL_CAP`]; products that still overflow `u128` are reported as
//! [`Error::Overflow`] instead of wrapping.

use crate::error::{Error, Result};

/// Largest factorial argument accepted by the exact routines.
pub const FACTORIAL_CAP: usize = 20;

pub fn factorial(n: usize) -> Result<u128> {
    if n > FACTORIAL_CAP {
        return Err(Error::CoefficientCap {
            arg: n,
            cap: FACTORIAL_CAP,
        });
    }
    Ok((2..=n as u128).product())
}

/// `n! / (n - k)!`
pub fn falling_factorial(n: usize, k: usize) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    if n > FACTORIAL_CAP {
        return Err(Error::CoefficientCap {
            arg: n,
            cap: FACTORIAL_CAP,
        });
    }
    Ok(((n - k + 1) as u128..=n as u128).product())
}

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    if n > FACTORIAL_CAP {
        return Err(Error::CoefficientCap {
            arg: n,
            cap: FACTORIAL_CAP,
        });
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) as u128 / (i as u128 + 1);
    }
    Ok(acc)
}

pub(crate) fn mul(a: u128, b: u128, what: &'static str) -> Result<u128> {
    a.checked_mul(b).ok_or(Error::Overflow(what))
}

/// Product of a list of exact factors.
pub(crate) fn product(factors: &[u128], what: &'static str) -> Result<u128> {
    factors.iter().try_fold(1u128, |acc, &x| mul(acc, x, what))
}

/// Exact quotient; the caller guarantees divisibility.
pub(crate) fn div_exact(num: u128, den: u128, what: &'static str) -> Result<u128> {
    if den == 0 || num % den != 0 {
        return Err(Error::Overflow(what));
    }
    Ok(num / den)
}

/// Converts an exact count to the nearest double.
pub fn to_f64(x: u128) -> f64 {
    x as f64
}

/// `r! C(m, r) C(n, r)`: the weight of the order-`n+m-2r` term in the product
/// of an order-`n` and an order-`m` multiple integral.
pub fn product_formula_weight(n: usize, m: usize, r: usize) -> Result<u128> {
    product(
        &[factorial(r)?, binomial(m, r)?, binomial(n, r)?],
        "product formula weight",
    )
}
