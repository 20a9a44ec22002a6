// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Scalar-pair baselines.
//!
//! An [`SvrfFilter`] keeps two scalars for the whole table: `m_cp`, the
//! product of all member keys, and `m_crt`, the CRT residue that reduces to
//! each member's encoded egress value modulo that member's key. A query is
//! a hit test (`m_cp mod key == 0`) followed by an extraction
//! (`m_crt mod key`). [`FractionalSvrf`] splits the table into `N`
//! independent scalar pairs so that small primes can be reused across
//! groups.

mod fractional;

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::arith;
use crate::keyspace::{bitlen, KeyDirectory, KeyError, PrimeKey};
use crate::mft::{MfEntry, Mft};

pub use fractional::{group_of, FractionalKeys, FractionalSvrf};

#[derive(Debug, Error)]
pub enum SvrfError {
    #[error("key {0} is already a member")]
    DuplicateKey(BigUint),
    #[error("key {0} is not a member")]
    UnknownKey(BigUint),
    #[error("value {value} does not fit under key {key}")]
    ValueTooLargeForKey { key: BigUint, value: BigUint },
    #[error("value {value} outside the {mode} encoding range for rho={rho}")]
    ValueOutOfRange { value: BigUint, mode: Mode, rho: usize },
    #[error("flow {0} has {1} egress ports; unicast entries need exactly one")]
    NonUnicastEntry(String, usize),
    #[error("m_cp is not invertible modulo {0}")]
    NonInvertible(BigUint),
    #[error("query key {0} is not prime")]
    NonPrimeKey(BigUint),
    #[error("bitmap width {got} does not match rho={rho}")]
    WidthMismatch { got: usize, rho: usize },
    #[error("filter dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Key(#[from] KeyError),
}

/// What the CRT residues encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Output port index in `1..=rho`. Zero is reserved.
    Unicast,
    /// Output port bitmap read as a `rho`-bit integer.
    Multicast,
}

impl Mode {
    /// Smallest admissible key: every key must exceed every value it might
    /// carry.
    pub fn min_key(self, rho: usize) -> BigUint {
        match self {
            Mode::Unicast => BigUint::from(rho + 1),
            Mode::Multicast => BigUint::one() << rho,
        }
    }

    fn tag(self) -> char {
        match self {
            Mode::Unicast => 'u',
            Mode::Multicast => 'm',
        }
    }

    /// Encoded value of a table entry.
    pub fn encode(self, entry: &MfEntry) -> Result<BigUint, SvrfError> {
        match self {
            Mode::Multicast => Ok(entry.opb.to_value()),
            Mode::Unicast => {
                let ports: Vec<usize> = entry.opb.ports().collect();
                match ports.as_slice() {
                    [port] => Ok(BigUint::from(*port)),
                    _ => Err(SvrfError::NonUnicastEntry(entry.flow.to_string(), ports.len())),
                }
            }
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Unicast => "unicast",
            Mode::Multicast => "multicast",
        })
    }
}

/// Single scalar pair over the whole table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvrfFilter {
    rho: usize,
    mode: Mode,
    m_cp: BigUint,
    m_crt: BigUint,
    members: BTreeMap<BigUint, BigUint>,
}

impl SvrfFilter {
    pub fn new(rho: usize, mode: Mode) -> Self {
        SvrfFilter {
            rho,
            mode,
            m_cp: BigUint::one(),
            m_crt: BigUint::zero(),
            members: BTreeMap::new(),
        }
    }

    /// Folds every entry in with incremental CRT. Keys missing from the
    /// directory are allocated at the mode's minimum.
    pub fn construct(mft: &Mft, dir: &mut KeyDirectory, mode: Mode) -> Result<Self, SvrfError> {
        let mut filter = SvrfFilter::new(mft.rho(), mode);
        let min = mode.min_key(mft.rho());
        for entry in mft.entries() {
            let value = mode.encode(entry)?;
            let key = dir.key_or_allocate(&entry.flow, &min)?;
            filter.insert(&key, &value)?;
        }
        Ok(filter)
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn m_cp(&self) -> &BigUint {
        &self.m_cp
    }

    pub fn m_crt(&self) -> &BigUint {
        &self.m_crt
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member keys and their encoded values.
    pub fn members(&self) -> &BTreeMap<BigUint, BigUint> {
        &self.members
    }

    fn check_value(&self, value: &BigUint) -> Result<(), SvrfError> {
        let ok = match self.mode {
            Mode::Unicast => !value.is_zero() && *value <= BigUint::from(self.rho),
            Mode::Multicast => value.bits() <= self.rho as u64,
        };
        if ok {
            Ok(())
        } else {
            Err(SvrfError::ValueOutOfRange {
                value: value.clone(),
                mode: self.mode,
                rho: self.rho,
            })
        }
    }

    pub fn insert(&mut self, key: &PrimeKey, value: &BigUint) -> Result<(), SvrfError> {
        let k = key.value();
        if self.members.contains_key(k) {
            return Err(SvrfError::DuplicateKey(k.clone()));
        }
        self.check_value(value)?;
        if value >= k {
            return Err(SvrfError::ValueTooLargeForKey {
                key: k.clone(),
                value: value.clone(),
            });
        }
        // Find t with m_crt + m_cp * t == value (mod k).
        let cp_mod = arith::rem(&self.m_cp, k);
        let inv = cp_mod.modinv(k).ok_or_else(|| SvrfError::NonInvertible(k.clone()))?;
        let crt_mod = arith::rem(&self.m_crt, k);
        let diff = (value + k - crt_mod) % k;
        let t = (diff * inv) % k;
        self.m_crt += &self.m_cp * t;
        self.m_cp *= k;
        self.members.insert(k.clone(), value.clone());
        Ok(())
    }

    pub fn remove(&mut self, key: &PrimeKey) -> Result<BigUint, SvrfError> {
        let k = key.value();
        let value = self.members.remove(k).ok_or_else(|| SvrfError::UnknownKey(k.clone()))?;
        self.m_cp /= k;
        self.m_crt %= &self.m_cp;
        Ok(value)
    }

    /// Encoded value for a member key; `None` on a miss.
    pub fn query(&self, key: &PrimeKey) -> Option<BigUint> {
        let k = key.value();
        if arith::rem(&self.m_cp, k).is_zero() {
            Some(arith::rem(&self.m_crt, k))
        } else {
            None
        }
    }

    pub fn query_value(&self, key: &BigUint) -> Result<Option<BigUint>, SvrfError> {
        let key = PrimeKey::new(key.clone()).map_err(|_| SvrfError::NonPrimeKey(key.clone()))?;
        Ok(self.query(&key))
    }

    /// `bitlen(m_cp) + bitlen(m_crt)`, each floored at one bit.
    pub fn memory_bits(&self) -> u64 {
        bitlen(&self.m_cp) + bitlen(&self.m_crt)
    }

    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "svrf rho={} mode={}", self.rho, self.mode.tag());
        let _ = writeln!(out, "mcp={}", self.m_cp);
        let _ = writeln!(out, "mcrt={}", self.m_crt);
        out
    }

    /// Parses one dump block and recovers membership from the directory.
    pub fn from_dump(text: &str, dir: &KeyDirectory) -> Result<Self, SvrfError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        match lines.as_slice() {
            [header, cp, crt] => Self::from_dump_lines(header, cp, crt, dir),
            _ => Err(SvrfError::Dump(format!("expected 3 lines, found {}", lines.len()))),
        }
    }

    pub(crate) fn from_dump_lines(header: &str, cp: &str, crt: &str, dir: &KeyDirectory) -> Result<Self, SvrfError> {
        let bad = |msg: String| SvrfError::Dump(msg);
        let rest = header
            .strip_prefix("svrf rho=")
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let (rho, mode) = rest
            .split_once(" mode=")
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let rho: usize = rho.parse().map_err(|_| bad(format!("bad rho in {header:?}")))?;
        let mode = match mode {
            "u" => Mode::Unicast,
            "m" => Mode::Multicast,
            other => return Err(bad(format!("unknown mode {other:?}"))),
        };
        let parse = |line: &str, prefix: &str| -> Result<BigUint, SvrfError> {
            line.strip_prefix(prefix)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("expected {prefix}<decimal>, got {line:?}")))
        };
        let m_cp = parse(cp, "mcp=")?;
        let m_crt = parse(crt, "mcrt=")?;
        if m_cp.is_zero() || m_crt >= m_cp {
            return Err(bad("m_crt must lie in [0, m_cp)".into()));
        }
        let mut members = BTreeMap::new();
        let mut rest = m_cp.clone();
        for (_, key) in dir.iter() {
            if arith::rem(&rest, key).is_zero() {
                rest /= key;
                members.insert(key.clone(), arith::rem(&m_crt, key));
            }
        }
        if !rest.is_one() {
            return Err(bad("m_cp has factors outside the directory".into()));
        }
        Ok(SvrfFilter {
            rho,
            mode,
            m_cp,
            m_crt,
            members,
        })
    }
}

/// Memory estimate for a scalar pair whose keys have the given log2 sum.
/// `m_crt` is taken to be as long as `m_cp`.
pub fn memory_bits_from_log2(log2_sum: f64) -> u64 {
    2 * arith::bits_from_log2(log2_sum)
}
