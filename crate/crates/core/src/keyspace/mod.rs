// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Flow identifiers, prime keys, and the control-plane key directory.
//!
//! The data plane needs every flow to map to a distinct prime. No stateless
//! hash can guarantee that, so the mapping is an exact-match directory kept
//! by the control plane: [`KeyDirectory`] binds each [`FlowId`] to a
//! [`PrimeKey`] and hands released keys back out.

mod directory;
pub mod primes;

use std::fmt;

use num_bigint::BigUint;
use thiserror::Error;

pub use directory::{AllocationPolicy, DumpError, KeyDirectory};
pub use primes::{bitlen, is_prime, next_prime, PrimeRun};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("flow {0} already has a key")]
    DuplicateFlow(FlowId),
    #[error("flow {0} has no key")]
    UnknownFlow(FlowId),
    #[error("flow identifier must be non-empty")]
    EmptyFlowId,
    #[error("{0} is not prime")]
    NotPrime(BigUint),
    #[error("minimum key value must be at least 2, got {0}")]
    MinValueTooSmall(BigUint),
}

/// Opaque byte-exact flow identifier, e.g. a destination address.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowId(Vec<u8>);

impl FlowId {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, KeyError> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(KeyError::EmptyFlowId);
        }
        Ok(FlowId(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// Synthetic workload identifier, `flow-000001` style (1-based).
    pub fn synthetic(index: usize) -> Self {
        FlowId(format!("flow-{index:06}").into_bytes())
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.0))
    }
}

impl std::str::FromStr for FlowId {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FlowId::new(s.as_bytes())
    }
}

/// A prime bound to exactly one flow.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeKey(BigUint);

impl PrimeKey {
    /// Checks primality; 0, 1 and composites are refused.
    pub fn new(value: BigUint) -> Result<Self, KeyError> {
        if is_prime(&value) {
            Ok(PrimeKey(value))
        } else {
            Err(KeyError::NotPrime(value))
        }
    }

    /// For values that come straight out of a prime generator.
    pub(crate) fn new_unchecked(value: BigUint) -> Self {
        PrimeKey(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_inner(self) -> BigUint {
        self.0
    }

    pub fn bits(&self) -> u64 {
        self.0.bits()
    }
}

impl From<PrimeKey> for BigUint {
    fn from(k: PrimeKey) -> BigUint {
        k.0
    }
}

impl TryFrom<u64> for PrimeKey {
    type Error = KeyError;

    fn try_from(v: u64) -> Result<Self, KeyError> {
        PrimeKey::new(BigUint::from(v))
    }
}

impl fmt::Display for PrimeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Log2 of the keys a smallest-first directory issues to `count` fresh flows
/// with the same `min_value`, in issue order, together with the bit length
/// of the largest of them.
///
/// Keys below 2^48 are enumerated exactly with a segmented sieve. Above that
/// the run is modelled from the prime density: the i-th key sits near
/// `min + i * ln(min)`, which at those magnitudes changes log2 by far less
/// than a bit.
pub fn smallest_first_log2(min_value: &BigUint, count: usize) -> (Vec<f64>, u64) {
    use num_traits::ToPrimitive;
    const EXACT_LIMIT: u64 = 1 << 48;
    match min_value.to_u64().filter(|&m| m < EXACT_LIMIT) {
        Some(min) => {
            let mut max = 0u64;
            let logs = PrimeRun::starting_at(min.max(2))
                .take(count)
                .map(|p| {
                    max = p;
                    (p as f64).log2()
                })
                .collect();
            (logs, if count == 0 { 0 } else { 64 - max.leading_zeros() as u64 })
        }
        None => {
            let min_log2 = big_log2(min_value);
            let ln_min = min_log2 * std::f64::consts::LN_2;
            // Relative offset of the i-th key: i * ln(min) / min.
            let scale = ln_min * (-min_log2 * std::f64::consts::LN_2).exp();
            let logs: Vec<f64> = (0..count)
                .map(|i| min_log2 + (i as f64 * scale).ln_1p() / std::f64::consts::LN_2)
                .collect();
            let top = logs.last().copied().unwrap_or(min_log2);
            (logs, top.floor() as u64 + 1)
        }
    }
}

/// log2 of an arbitrary-precision value, accurate to f64 precision.
pub fn big_log2(v: &BigUint) -> f64 {
    use num_traits::ToPrimitive;
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_f64().unwrap_or(0.0);
    top.log2() + shift as f64
}
