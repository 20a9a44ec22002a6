// SPDX-License-Identifier: Apache-2.0 OR MIT

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{is_prime, next_prime, FlowId, KeyError, PrimeKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AllocationPolicy {
    /// Smallest unused prime at or above the requested minimum.
    #[default]
    SmallestFirst,
    /// First unused prime at or above `min + u`, `u` drawn uniformly from
    /// `0..span` with the directory's seeded generator.
    RandomWithin { span: u64 },
}

/// Bijective flow -> prime key map.
///
/// Single writer: `allocate_key`/`release_key` take `&mut self`; lookups are
/// `&self` and can be shared.
#[derive(Debug, Clone)]
pub struct KeyDirectory {
    by_flow: HashMap<FlowId, PrimeKey>,
    by_key: BTreeMap<BigUint, FlowId>,
    // Per minimum-value class: every prime in [min, cursor) is either bound
    // or sitting in `released`.
    cursors: BTreeMap<BigUint, BigUint>,
    released: BTreeSet<BigUint>,
    policy: AllocationPolicy,
    seed: u64,
    rng: ChaCha8Rng,
}

impl Default for KeyDirectory {
    fn default() -> Self {
        KeyDirectory::new(AllocationPolicy::SmallestFirst, 0)
    }
}

impl KeyDirectory {
    pub fn new(policy: AllocationPolicy, seed: u64) -> Self {
        KeyDirectory {
            by_flow: HashMap::new(),
            by_key: BTreeMap::new(),
            cursors: BTreeMap::new(),
            released: BTreeSet::new(),
            policy,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn policy(&self) -> AllocationPolicy {
        self.policy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.by_flow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_flow.is_empty()
    }

    pub fn contains_flow(&self, flow: &FlowId) -> bool {
        self.by_flow.contains_key(flow)
    }

    pub fn is_bound(&self, key: &BigUint) -> bool {
        self.by_key.contains_key(key)
    }

    pub fn flow_of(&self, key: &BigUint) -> Option<&FlowId> {
        self.by_key.get(key)
    }

    /// Bindings in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (&FlowId, &BigUint)> {
        self.by_key.iter().map(|(k, f)| (f, k))
    }

    /// Binds `flow` to a fresh prime no smaller than `min_value`.
    pub fn allocate_key(&mut self, flow: FlowId, min_value: &BigUint) -> Result<PrimeKey, KeyError> {
        if self.by_flow.contains_key(&flow) {
            return Err(KeyError::DuplicateFlow(flow));
        }
        if *min_value < BigUint::from(2u32) {
            return Err(KeyError::MinValueTooSmall(min_value.clone()));
        }
        let key = match self.policy {
            AllocationPolicy::SmallestFirst => self.smallest_free(min_value),
            AllocationPolicy::RandomWithin { span } => {
                let offset = self.rng.gen_range(0..span.max(1));
                self.first_free_from(&(min_value + offset))
            }
        };
        self.released.remove(&key);
        let key = PrimeKey::new_unchecked(key);
        self.by_key.insert(key.value().clone(), flow.clone());
        self.by_flow.insert(flow, key.clone());
        Ok(key)
    }

    /// Returns the key already bound to `flow`, or allocates one.
    pub fn key_or_allocate(&mut self, flow: &FlowId, min_value: &BigUint) -> Result<PrimeKey, KeyError> {
        match self.by_flow.get(flow) {
            Some(k) => Ok(k.clone()),
            None => self.allocate_key(flow.clone(), min_value),
        }
    }

    pub fn lookup_key(&self, flow: &FlowId) -> Result<&PrimeKey, KeyError> {
        self.by_flow
            .get(flow)
            .ok_or_else(|| KeyError::UnknownFlow(flow.clone()))
    }

    /// Unbinds `flow`; its key becomes immediately reusable.
    pub fn release_key(&mut self, flow: &FlowId) -> Result<PrimeKey, KeyError> {
        let key = self
            .by_flow
            .remove(flow)
            .ok_or_else(|| KeyError::UnknownFlow(flow.clone()))?;
        self.by_key.remove(key.value());
        self.released.insert(key.value().clone());
        Ok(key)
    }

    /// Records an externally chosen binding (directory import).
    pub fn bind(&mut self, flow: FlowId, key: BigUint) -> Result<PrimeKey, KeyError> {
        if self.by_flow.contains_key(&flow) {
            return Err(KeyError::DuplicateFlow(flow));
        }
        if !is_prime(&key) {
            return Err(KeyError::NotPrime(key));
        }
        if let Some(owner) = self.by_key.get(&key) {
            return Err(KeyError::DuplicateFlow(owner.clone()));
        }
        // Cursors assume every prime below them is accounted for; a key bound
        // behind a cursor is skipped by the bound check, so no fix-up needed.
        self.released.remove(&key);
        let key = PrimeKey::new_unchecked(key);
        self.by_key.insert(key.value().clone(), flow.clone());
        self.by_flow.insert(flow, key.clone());
        Ok(key)
    }

    fn smallest_free(&mut self, min_value: &BigUint) -> BigUint {
        let cursor = self
            .cursors
            .get(min_value)
            .cloned()
            .unwrap_or_else(|| min_value.clone());
        let recycled = self
            .released
            .range(min_value.clone()..cursor.clone())
            .find(|k| !self.by_key.contains_key(*k))
            .cloned();
        if let Some(k) = recycled {
            return k;
        }
        let fresh = self.first_free_from(&cursor);
        self.cursors.insert(min_value.clone(), &fresh + 1u32);
        fresh
    }

    fn first_free_from(&self, from: &BigUint) -> BigUint {
        let mut candidate = next_prime(from);
        while self.by_key.contains_key(&candidate) {
            candidate = next_prime(&(candidate + 1u32));
        }
        candidate
    }

    /// `flow_id<TAB>key_decimal` lines in ascending key order.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        for (flow, key) in self.iter() {
            let _ = writeln!(out, "{flow}\t{key}");
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self, DumpError> {
        let mut dir = KeyDirectory::default();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (flow, key) = line.split_once('\t').ok_or(DumpError::Malformed { line: lineno + 1 })?;
            let key: BigUint = key.parse().map_err(|_| DumpError::Malformed { line: lineno + 1 })?;
            let flow: FlowId = flow.parse().map_err(|e| DumpError::Key {
                line: lineno + 1,
                source: e,
            })?;
            dir.bind(flow, key).map_err(|e| DumpError::Key {
                line: lineno + 1,
                source: e,
            })?;
        }
        Ok(dir)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("line {line}: expected flow_id<TAB>key")]
    Malformed { line: usize },
    #[error("line {line}: {source}")]
    Key { line: usize, source: KeyError },
}
