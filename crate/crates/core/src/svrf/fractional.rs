// SPDX-License-Identifier: Apache-2.0 OR MIT

use std::fmt::Write as _;

use num_bigint::BigUint;

use super::{Mode, SvrfError, SvrfFilter};
use crate::keyspace::{DumpError, FlowId, KeyDirectory};
use crate::mft::Mft;

/// Group of a flow: 64-bit FNV-1a over the identifier bytes, mod `n_groups`.
/// Seed-free so the data plane can route a packet without the directory.
pub fn group_of(flow: &FlowId, n_groups: usize) -> usize {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let hash = flow
        .as_bytes()
        .iter()
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME));
    (hash % n_groups.max(1) as u64) as usize
}

/// One independent key directory per group, so primes repeat across groups.
#[derive(Debug, Clone)]
pub struct FractionalKeys {
    groups: Vec<KeyDirectory>,
}

impl FractionalKeys {
    pub fn new(n_groups: usize) -> Self {
        FractionalKeys {
            groups: vec![KeyDirectory::default(); n_groups.max(1)],
        }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, g: usize) -> &KeyDirectory {
        &self.groups[g]
    }

    pub fn directory_for(&self, flow: &FlowId) -> &KeyDirectory {
        &self.groups[group_of(flow, self.groups.len())]
    }

    pub fn directory_for_mut(&mut self, flow: &FlowId) -> &mut KeyDirectory {
        let g = group_of(flow, self.groups.len());
        &mut self.groups[g]
    }

    /// Every group's `flow_id<TAB>key` lines, group 0 first.
    pub fn to_dump(&self) -> String {
        self.groups.iter().map(KeyDirectory::to_dump).collect()
    }

    /// Re-partitions a combined dump by recomputing each flow's group.
    pub fn from_dump(text: &str, n_groups: usize) -> Result<Self, DumpError> {
        let mut keys = FractionalKeys::new(n_groups);
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let line_no = i + 1;
            let (flow, key) = line.split_once('\t').ok_or(DumpError::Malformed { line: line_no })?;
            let key: BigUint = key.parse().map_err(|_| DumpError::Malformed { line: line_no })?;
            let flow: FlowId = flow.parse().map_err(|e| DumpError::Key {
                line: line_no,
                source: e,
            })?;
            keys.directory_for_mut(&flow)
                .bind(flow, key)
                .map_err(|e| DumpError::Key {
                    line: line_no,
                    source: e,
                })?;
        }
        Ok(keys)
    }
}

/// `N` scalar pairs; each flow lives in exactly one of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalSvrf {
    subfilters: Vec<SvrfFilter>,
}

impl FractionalSvrf {
    pub fn new(rho: usize, mode: Mode, n_groups: usize) -> Self {
        FractionalSvrf {
            subfilters: vec![SvrfFilter::new(rho, mode); n_groups.max(1)],
        }
    }

    pub fn construct(mft: &Mft, keys: &mut FractionalKeys, mode: Mode) -> Result<Self, SvrfError> {
        let n_groups = keys.n_groups();
        let mut f = FractionalSvrf::new(mft.rho(), mode, n_groups);
        let min = mode.min_key(mft.rho());
        for entry in mft.entries() {
            let g = group_of(&entry.flow, n_groups);
            let value = mode.encode(entry)?;
            let key = keys.groups[g].key_or_allocate(&entry.flow, &min)?;
            f.subfilters[g].insert(&key, &value)?;
        }
        Ok(f)
    }

    pub fn n_groups(&self) -> usize {
        self.subfilters.len()
    }

    pub fn subfilters(&self) -> &[SvrfFilter] {
        &self.subfilters
    }

    pub fn subfilter_mut(&mut self, g: usize) -> &mut SvrfFilter {
        &mut self.subfilters[g]
    }

    pub fn group_for(&self, flow: &FlowId) -> usize {
        group_of(flow, self.subfilters.len())
    }

    /// Looks the flow's key up in its group and consults only that group's
    /// scalar pair.
    pub fn query(&self, flow: &FlowId, keys: &FractionalKeys) -> Result<Option<BigUint>, SvrfError> {
        let g = self.group_for(flow);
        let key = keys.groups[g].lookup_key(flow)?;
        Ok(self.subfilters[g].query(key))
    }

    pub fn memory_bits(&self) -> u64 {
        self.subfilters.iter().map(SvrfFilter::memory_bits).sum()
    }

    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "groups={}", self.subfilters.len());
        for f in &self.subfilters {
            out.push_str(&f.to_dump());
        }
        out
    }

    pub fn from_dump(text: &str, keys: &FractionalKeys) -> Result<Self, SvrfError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        let n_groups: usize = lines
            .first()
            .and_then(|l| l.strip_prefix("groups="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| SvrfError::Dump("expected groups=<N> header".into()))?;
        if lines.len() != 1 + 3 * n_groups || n_groups != keys.n_groups() {
            return Err(SvrfError::Dump(format!(
                "groups={n_groups} does not match {} lines / {} key groups",
                lines.len(),
                keys.n_groups()
            )));
        }
        let subfilters = lines[1..]
            .chunks(3)
            .enumerate()
            .map(|(g, block)| SvrfFilter::from_dump_lines(block[0], block[1], block[2], keys.group(g)))
            .collect::<Result<_, _>>()?;
        Ok(FractionalSvrf { subfilters })
    }
}
