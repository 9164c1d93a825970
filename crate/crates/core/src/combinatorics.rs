//! Exact binomial coefficients and lattice-path counts on big integers.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// `C(n, k)`, zero whenever `k < 0` or `k > n`.
pub fn binomial(n: u64, k: i64) -> BigUint {
    if k < 0 || k as u64 > n {
        return BigUint::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Row `C(n, 0..=n)` built by the multiplicative recurrence.
pub fn binomial_row(n: u64) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut acc = BigUint::one();
    row.push(acc.clone());
    for k in 0..n {
        acc = acc * (n - k) / (k + 1);
        row.push(acc.clone());
    }
    row
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

pub fn catalan(n: u64) -> BigUint {
    binomial(2 * n, n as i64) / (n + 1)
}

/// Natural log of a big integer, accurate to f64 precision even past the f64 range.
pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Ratio `a / b` as f64 without overflowing intermediate conversions.
pub fn ratio_f64(a: &BigUint, b: &BigUint) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    (ln_big(a) - ln_big(b)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(6, 4), BigUint::from(15u32));
        assert_eq!(binomial(6, 1), BigUint::from(6u32));
        assert_eq!(binomial(6, -1), BigUint::zero());
        assert_eq!(binomial(6, 7), BigUint::zero());
        assert_eq!(binomial(0, 0), BigUint::one());
    }

    #[test]
    fn row_matches_pointwise() {
        let row = binomial_row(37);
        for (k, c) in row.iter().enumerate() {
            assert_eq!(*c, binomial(37, k as i64));
        }
    }

    #[test]
    fn catalan_values() {
        let expect = [1u32, 1, 2, 5, 14, 42, 132, 429, 1430];
        for (n, &c) in expect.iter().enumerate() {
            assert_eq!(catalan(n as u64), BigUint::from(c));
        }
    }

    #[test]
    fn ln_big_past_f64_range() {
        let x = binomial(4000, 2000);
        let direct: f64 = (1..=2000u32)
            .map(|i| ((2000 + i) as f64).ln() - (i as f64).ln())
            .sum();
        assert!((ln_big(&x) - direct).abs() < 1e-9 * direct);
    }
}
