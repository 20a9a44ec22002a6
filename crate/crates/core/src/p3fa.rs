// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Per-port prime filter array.
//!
//! Each egress port `s` owns one scalar, the product of the keys of every
//! flow forwarded out of `s`. A packet's output bitmap is recovered by
//! dividing its flow key into each port's scalar: a zero remainder means the
//! key is a factor, so the port is set. Scalars are squarefree products of
//! distinct primes, so a prime that was never multiplied into a port can
//! not divide it and there are no false positives.
//!
//! ```text
//!   key 23, ingress 1     port 1   port 2   port 3   port 4
//!   scalar                  213     3003    30107    55913
//!   scalar mod 23        (skip)       13        0        0
//!   bitmap                    0        0        1        1
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::arith::{self, bits_from_log2};
use crate::keyspace::{big_log2, bitlen, FlowId, KeyDirectory, KeyError, PrimeKey};
use crate::mft::{Mft, Opb, PortDraw};

/// P³FA keys only need to be prime; the smallest is 2.
pub const MIN_KEY: u32 = 2;

#[derive(Debug, Error)]
pub enum P3faError {
    #[error("key {key} is already multiplied into port {port}")]
    DuplicateKeyOnPort { key: BigUint, port: usize },
    #[error("key {key} is not a factor of port {port}")]
    KeyNotOnPort { key: BigUint, port: usize },
    #[error("query key {0} is not prime")]
    NonPrimeKey(BigUint),
    #[error("bitmap width {got} does not match rho={rho}")]
    WidthMismatch { got: usize, rho: usize },
    #[error("ingress port {port} outside 1..={rho}")]
    IngressOutOfRange { port: usize, rho: usize },
    #[error("filter dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Key(#[from] KeyError),
}

/// Result of one lookup: the recovered bitmap plus the raw remainder from
/// every enabled divider (`None` at the ingress port, whose divider is
/// skipped).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    pub opb: Opb,
    pub remainders: Vec<Option<BigUint>>,
}

impl QueryResult {
    pub fn ports(&self) -> Vec<usize> {
        self.opb.ports().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct P3faFilter {
    rho: usize,
    scalars: Vec<BigUint>,
    // Invariant: scalars[s] == product(port_keys[s]).
    port_keys: Vec<HashSet<BigUint>>,
}

impl P3faFilter {
    /// Filter over `rho` ports with every scalar at 1.
    pub fn new(rho: usize) -> Self {
        P3faFilter {
            rho,
            scalars: vec![BigUint::one(); rho],
            port_keys: vec![HashSet::new(); rho],
        }
    }

    /// Builds all port scalars from a table, allocating keys for flows the
    /// directory does not know yet.
    pub fn construct(mft: &Mft, dir: &mut KeyDirectory) -> Result<Self, P3faError> {
        let rho = mft.rho();
        let min = BigUint::from(MIN_KEY);
        let mut per_port: Vec<Vec<BigUint>> = vec![Vec::new(); rho];
        let mut port_keys: Vec<HashSet<BigUint>> = vec![HashSet::new(); rho];
        for entry in mft.entries() {
            let key = dir.key_or_allocate(&entry.flow, &min)?;
            for s in entry.opb.ports() {
                if !port_keys[s - 1].insert(key.value().clone()) {
                    return Err(P3faError::DuplicateKeyOnPort {
                        key: key.into_inner(),
                        port: s,
                    });
                }
                per_port[s - 1].push(key.value().clone());
            }
        }
        let scalars = per_port.iter().map(|keys| arith::product(keys)).collect();
        Ok(P3faFilter {
            rho,
            scalars,
            port_keys,
        })
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn scalars(&self) -> &[BigUint] {
        &self.scalars
    }

    /// Scalar of port `s` (1-based).
    pub fn scalar(&self, port: usize) -> &BigUint {
        &self.scalars[port - 1]
    }

    /// Keys currently multiplied into port `s` (1-based).
    pub fn port_keys(&self, port: usize) -> &HashSet<BigUint> {
        &self.port_keys[port - 1]
    }

    fn check_width(&self, opb: &Opb) -> Result<(), P3faError> {
        if opb.rho() != self.rho {
            return Err(P3faError::WidthMismatch {
                got: opb.rho(),
                rho: self.rho,
            });
        }
        Ok(())
    }

    /// Multiplies `key` into every port set in `opb`.
    pub fn insert(&mut self, key: &PrimeKey, opb: &Opb) -> Result<(), P3faError> {
        self.check_width(opb)?;
        if let Some(port) = opb.ports().find(|&s| self.port_keys[s - 1].contains(key.value())) {
            return Err(P3faError::DuplicateKeyOnPort {
                key: key.value().clone(),
                port,
            });
        }
        for s in opb.ports() {
            self.scalars[s - 1] *= key.value();
            self.port_keys[s - 1].insert(key.value().clone());
        }
        Ok(())
    }

    /// Divides `key` out of every port set in `opb`.
    pub fn remove(&mut self, key: &PrimeKey, opb: &Opb) -> Result<(), P3faError> {
        self.check_width(opb)?;
        if let Some(port) = opb.ports().find(|&s| !self.port_keys[s - 1].contains(key.value())) {
            return Err(P3faError::KeyNotOnPort {
                key: key.value().clone(),
                port,
            });
        }
        for s in opb.ports() {
            let scalar = &mut self.scalars[s - 1];
            debug_assert!((&*scalar % key.value()).is_zero());
            *scalar /= key.value();
            self.port_keys[s - 1].remove(key.value());
        }
        Ok(())
    }

    /// Recovers the bitmap for `key`. The ingress divider, if given, is not
    /// run and its bit stays 0.
    pub fn query(&self, key: &PrimeKey, ingress: Option<usize>) -> Result<QueryResult, P3faError> {
        if let Some(port) = ingress.filter(|p| !(1..=self.rho).contains(p)) {
            return Err(P3faError::IngressOutOfRange { port, rho: self.rho });
        }
        let mut opb = Opb::empty(self.rho);
        let mut remainders = Vec::with_capacity(self.rho);
        for (i, scalar) in self.scalars.iter().enumerate() {
            let port = i + 1;
            if Some(port) == ingress {
                remainders.push(None);
                continue;
            }
            let r = arith::rem(scalar, key.value());
            if r.is_zero() {
                opb.set(port);
            }
            remainders.push(Some(r));
        }
        Ok(QueryResult { opb, remainders })
    }

    /// [`query`](Self::query) for an unvalidated key; 0, 1 and composites
    /// are refused because they divide scalars they were never multiplied
    /// into.
    pub fn query_value(&self, key: &BigUint, ingress: Option<usize>) -> Result<QueryResult, P3faError> {
        let key = PrimeKey::new(key.clone()).map_err(|_| P3faError::NonPrimeKey(key.clone()))?;
        self.query(&key, ingress)
    }

    /// Total stored bits: the sum of per-port scalar bit lengths, where a
    /// unit scalar still costs one bit.
    pub fn memory_bits(&self) -> u64 {
        self.scalars.iter().map(bitlen).sum()
    }

    /// Per-port scalar bit lengths.
    pub fn port_bits(&self) -> Vec<u64> {
        self.scalars.iter().map(bitlen).collect()
    }

    pub fn to_dump(&self) -> String {
        let mut out = format!("p3fa rho={}\n", self.rho);
        for (i, scalar) in self.scalars.iter().enumerate() {
            let _ = writeln!(out, "port={} scalar={}", i + 1, scalar);
        }
        out
    }

    /// Parses a dump and rebuilds per-port key sets from the directory. Every
    /// scalar must factor completely over the directory's keys.
    pub fn from_dump(text: &str, dir: &KeyDirectory) -> Result<Self, P3faError> {
        let bad = |msg: String| P3faError::Dump(msg);
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| bad("empty dump".into()))?;
        let rho: usize = header
            .strip_prefix("p3fa rho=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let mut scalars = Vec::with_capacity(rho);
        for (i, line) in lines.enumerate() {
            let (port, scalar) = line
                .strip_prefix("port=")
                .and_then(|rest| rest.split_once(" scalar="))
                .ok_or_else(|| bad(format!("bad line {line:?}")))?;
            if port.parse::<usize>().ok() != Some(i + 1) {
                return Err(bad(format!("expected port={} in {line:?}", i + 1)));
            }
            let scalar: BigUint = scalar.parse().map_err(|_| bad(format!("bad scalar in {line:?}")))?;
            if scalar.is_zero() {
                return Err(bad(format!("zero scalar on port {}", i + 1)));
            }
            scalars.push(scalar);
        }
        if scalars.len() != rho {
            return Err(bad(format!("header says rho={rho}, found {} ports", scalars.len())));
        }
        let mut port_keys = vec![HashSet::new(); rho];
        for (s, scalar) in scalars.iter().enumerate() {
            let mut rest = scalar.clone();
            for (_, key) in dir.iter() {
                if arith::rem(&rest, key).is_zero() {
                    rest /= key;
                    port_keys[s].insert(key.clone());
                }
            }
            if !rest.is_one() {
                return Err(bad(format!("port {} scalar has factors outside the directory", s + 1)));
            }
        }
        Ok(P3faFilter {
            rho,
            scalars,
            port_keys,
        })
    }
}

/// Per-port log2 sums, for memory and latency accounting without building
/// the products.
#[derive(Debug, Clone)]
pub struct PortLogSums {
    per_port: Vec<f64>,
    everywhere: f64,
}

impl PortLogSums {
    pub fn new(rho: usize) -> Self {
        PortLogSums {
            per_port: vec![0.0; rho],
            everywhere: 0.0,
        }
    }

    pub fn add_opb(&mut self, log2_key: f64, opb: &Opb) {
        for s in opb.ports() {
            self.per_port[s - 1] += log2_key;
        }
    }

    pub fn add_draw(&mut self, log2_key: f64, draw: PortDraw<'_>) {
        match draw {
            PortDraw::Only(ports) => {
                for &p in ports {
                    self.per_port[p as usize - 1] += log2_key;
                }
            }
            PortDraw::AllBut(excluded) => {
                self.everywhere += log2_key;
                for &p in excluded {
                    self.per_port[p as usize - 1] -= log2_key;
                }
            }
        }
    }

    /// Estimated bit length of each port scalar.
    pub fn port_bits(&self) -> Vec<u64> {
        self.per_port
            .iter()
            .map(|&v| bits_from_log2(v + self.everywhere))
            .collect()
    }

    pub fn total_bits(&self) -> u64 {
        self.port_bits().iter().sum()
    }
}

/// Memory estimate from key magnitudes alone. Agrees with
/// `construct(..).memory_bits()` to within one bit per port.
pub fn memory_bits_analytic(mft: &Mft, dir: &mut KeyDirectory) -> Result<u64, P3faError> {
    let min = BigUint::from(MIN_KEY);
    let mut sums = PortLogSums::new(mft.rho());
    for entry in mft.entries() {
        let key = dir.key_or_allocate(&entry.flow, &min)?;
        sums.add_opb(big_log2(key.value()), &entry.opb);
    }
    Ok(sums.total_bits())
}

/// Looks the flow up in the directory, then queries.
pub fn query_flow(
    filter: &P3faFilter,
    dir: &KeyDirectory,
    flow: &FlowId,
    ingress: Option<usize>,
) -> Result<QueryResult, P3faError> {
    let key = dir.lookup_key(flow)?;
    filter.query(key, ingress)
}
