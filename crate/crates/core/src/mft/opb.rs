// SPDX-License-Identifier: Apache-2.0 OR MIT

use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;

use super::MftError;

/// Output port bitmap over ports `1..=rho`.
///
/// Rendered as a `rho`-character `0`/`1` string with port 1 leftmost. The
/// integer encoding used by scalar-pair filters reads that string as a
/// binary number, so port 1 is the most significant bit.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Opb {
    rho: usize,
    words: Vec<u64>,
}

impl Opb {
    pub fn empty(rho: usize) -> Self {
        Opb {
            rho,
            words: vec![0; rho.div_ceil(64)],
        }
    }

    pub fn full(rho: usize) -> Self {
        let mut opb = Opb::empty(rho);
        for s in 1..=rho {
            opb.set(s);
        }
        opb
    }

    pub fn from_ports(rho: usize, ports: impl IntoIterator<Item = usize>) -> Result<Self, MftError> {
        let mut opb = Opb::empty(rho);
        for s in ports {
            if s == 0 || s > rho {
                return Err(MftError::PortOutOfRange { port: s, rho });
            }
            opb.set(s);
        }
        Ok(opb)
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    /// Panics if `port` is outside `1..=rho`.
    pub fn get(&self, port: usize) -> bool {
        assert!((1..=self.rho).contains(&port), "port {port} outside 1..={}", self.rho);
        let i = port - 1;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, port: usize) {
        assert!((1..=self.rho).contains(&port), "port {port} outside 1..={}", self.rho);
        let i = port - 1;
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn clear(&mut self, port: usize) {
        assert!((1..=self.rho).contains(&port), "port {port} outside 1..={}", self.rho);
        let i = port - 1;
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Set ports in ascending order.
    pub fn ports(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b + 1)
            })
        })
    }

    /// Integer encoding (port 1 is the most significant of `rho` bits).
    pub fn to_value(&self) -> BigUint {
        let mut v = BigUint::zero();
        for s in self.ports() {
            v.set_bit((self.rho - s) as u64, true);
        }
        v
    }

    pub fn from_value(rho: usize, value: &BigUint) -> Result<Self, MftError> {
        if value.bits() > rho as u64 {
            return Err(MftError::ValueTooWide { rho });
        }
        let mut opb = Opb::empty(rho);
        for s in 1..=rho {
            if value.bit((rho - s) as u64) {
                opb.set(s);
            }
        }
        Ok(opb)
    }

    pub fn parse(text: &str) -> Result<Self, MftError> {
        let mut opb = Opb::empty(text.len());
        for (i, c) in text.bytes().enumerate() {
            match c {
                b'1' => opb.set(i + 1),
                b'0' => {}
                _ => return Err(MftError::BadBitmap(text.to_string())),
            }
        }
        Ok(opb)
    }
}

impl fmt::Display for Opb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (1..=self.rho).map(|p| if self.get(p) { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for Opb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Opb({self})")
    }
}
