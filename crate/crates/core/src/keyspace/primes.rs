// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Prime generation and primality testing.
//!
//! Values that fit in a `u64` go through a deterministic Miller–Rabin test
//! (the first twelve prime bases are sufficient below 2^64). Larger values
//! use the same base set, which is probabilistic but has no known
//! counterexample at the sizes a forwarding table reaches.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

const MR_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Upper bound (exclusive) of the cached small-prime table.
const SMALL_LIMIT: usize = 1 << 16;

/// Below this bound a candidate is classified by trial division alone.
const TRIAL_DIVISION_LIMIT: u64 = 1_000_000;

/// Odd candidates examined per sieve window when searching above 2^64.
const BIG_WINDOW: usize = 4096;

fn small_primes() -> &'static [u64] {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| sieve(SMALL_LIMIT))
}

/// All primes strictly below `limit`, by the sieve of Eratosthenes.
pub fn sieve(limit: usize) -> Vec<u64> {
    if limit < 3 {
        return Vec::new();
    }
    let mut composite = vec![false; limit];
    let mut primes = Vec::new();
    for i in 2..limit {
        if composite[i] {
            continue;
        }
        primes.push(i as u64);
        let mut j = i * i;
        while j < limit {
            composite[j] = true;
            j += i;
        }
    }
    primes
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

fn trial_division(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in small_primes() {
        if p * p > n {
            return true;
        }
        if n % p == 0 {
            return n == p;
        }
    }
    true
}

/// Deterministic primality test for 64-bit values.
pub fn is_prime_u64(n: u64) -> bool {
    if n < TRIAL_DIVISION_LIMIT {
        return trial_division(n);
    }
    for &p in &small_primes()[..64] {
        if n % p == 0 {
            return false;
        }
    }
    let d_full = n - 1;
    let s = d_full.trailing_zeros();
    let d = d_full >> s;
    'bases: for &a in &MR_BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

fn miller_rabin_big(n: &BigUint) -> bool {
    let one = BigUint::one();
    let n_minus_one = n - &one;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    'bases: for &a in &MR_BASES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// Primality test for arbitrary-precision values.
pub fn is_prime(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    for &p in small_primes() {
        if (n % p).is_zero() {
            return false;
        }
    }
    miller_rabin_big(n)
}

/// Smallest prime `>= lower_bound`. Bounds below 2 return 2.
pub fn next_prime(lower_bound: &BigUint) -> BigUint {
    if let Some(lb) = lower_bound.to_u64() {
        if let Some(p) = next_prime_u64(lb) {
            return BigUint::from(p);
        }
    }
    next_prime_big(lower_bound)
}

/// Smallest prime `>= lower_bound` if it fits in a `u64`.
pub fn next_prime_u64(lower_bound: u64) -> Option<u64> {
    if lower_bound <= 2 {
        return Some(2);
    }
    let mut candidate = lower_bound | 1;
    loop {
        if is_prime_u64(candidate) {
            return Some(candidate);
        }
        candidate = candidate.checked_add(2)?;
    }
}

fn next_prime_big(lower_bound: &BigUint) -> BigUint {
    let mut base = lower_bound.clone();
    if base.is_even() {
        base += 1u32;
    }
    let primes = &small_primes()[1..];
    let mut composite = vec![false; BIG_WINDOW];
    loop {
        // Window covers base, base+2, ..., base+2*(BIG_WINDOW-1).
        composite.iter_mut().for_each(|c| *c = false);
        for &p in primes {
            let r = (&base % p).to_u64().unwrap_or(0);
            // First offset i with base + 2i == 0 (mod p).
            let need = (p - r) % p;
            let inv2 = p.div_ceil(2);
            let mut i = mul_mod(need, inv2, p) as usize;
            while i < BIG_WINDOW {
                composite[i] = true;
                i += p as usize;
            }
        }
        for (i, _) in composite.iter().enumerate().filter(|(_, &c)| !c) {
            let candidate = &base + BigUint::from(2 * i as u64);
            if miller_rabin_big(&candidate) {
                return candidate;
            }
        }
        base += BigUint::from(2 * BIG_WINDOW as u64);
    }
}

/// Ascending primes `>= start`, produced by a segmented sieve.
///
/// Used where long runs of consecutive primes are needed (workload key
/// sequences) and a per-candidate primality test would dominate.
#[derive(Debug, Clone)]
pub struct PrimeRun {
    next_low: u64,
    segment: Vec<u64>,
    cursor: usize,
    base: Vec<u64>,
}

const SEGMENT_SPAN: u64 = 1 << 18;

impl PrimeRun {
    pub fn starting_at(start: u64) -> Self {
        PrimeRun {
            next_low: start.max(2),
            segment: Vec::new(),
            cursor: 0,
            base: Vec::new(),
        }
    }

    fn refill(&mut self) -> bool {
        let low = self.next_low;
        if low == u64::MAX {
            return false;
        }
        let high = low.saturating_add(SEGMENT_SPAN);
        let root = (high as f64).sqrt() as u64 + 1;
        if self.base.last().map_or(true, |&b| b < root) {
            self.base = sieve((root as usize + 1).max(3));
        }
        let span = (high - low) as usize;
        let mut composite = vec![false; span];
        for &p in &self.base {
            if p * p >= high {
                break;
            }
            let first = (low.div_ceil(p) * p).max(p * p);
            let mut m = first;
            while m < high {
                composite[(m - low) as usize] = true;
                m += p;
            }
        }
        self.segment.clear();
        self.segment.extend(
            composite
                .iter()
                .enumerate()
                .filter(|(_, &c)| !c)
                .map(|(i, _)| low + i as u64)
                .filter(|&v| v >= 2),
        );
        self.cursor = 0;
        self.next_low = high;
        true
    }
}

impl Iterator for PrimeRun {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        while self.cursor >= self.segment.len() {
            if !self.refill() {
                return None;
            }
        }
        let p = self.segment[self.cursor];
        self.cursor += 1;
        Some(p)
    }
}

/// Bit length of `v`, with the unit floor used for memory accounting:
/// `bitlen(0) = bitlen(1) = 1`.
pub fn bitlen(v: &BigUint) -> u64 {
    v.bits().max(1)
}
