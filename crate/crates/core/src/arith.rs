// SPDX-License-Identifier: Apache-2.0 OR MIT

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

/// Product of `factors` via a balanced product tree.
pub fn product(factors: &[BigUint]) -> BigUint {
    match factors.len() {
        0 => BigUint::one(),
        1 => factors[0].clone(),
        n if n <= 16 => factors.iter().product(),
        n => {
            let (lo, hi) = factors.split_at(n / 2);
            product(lo) * product(hi)
        }
    }
}

/// `value mod divisor`, taking the single-limb path when the divisor fits.
pub fn rem(value: &BigUint, divisor: &BigUint) -> BigUint {
    match divisor.to_u64() {
        Some(d) => BigUint::from(value % d),
        None => value % divisor,
    }
}

/// Sum of log2 values turned into a bit count: `floor(sum) + 1`, which is
/// the bit length of the product when the sum is exact.
pub fn bits_from_log2(sum: f64) -> u64 {
    if sum <= 0.0 {
        1
    } else {
        sum.floor() as u64 + 1
    }
}
