// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Multicast forwarding tables, egress diversity, and synthetic workloads.

mod opb;
mod workload;

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::keyspace::{FlowId, KeyError};

pub use opb::Opb;
pub use workload::{gen_workload, PortDraw, WorkloadSpec, WorkloadStream};

#[derive(Debug, Error)]
pub enum MftError {
    #[error("table is empty")]
    EmptyTable,
    #[error("flow {0} is already in the table")]
    DuplicateFlow(FlowId),
    #[error("flow {0} is not in the table")]
    UnknownFlow(FlowId),
    #[error("port {port} outside 1..={rho}")]
    PortOutOfRange { port: usize, rho: usize },
    #[error("bitmap width {got} does not match rho={rho}")]
    WidthMismatch { got: usize, rho: usize },
    #[error("value does not fit in {rho} bits")]
    ValueTooWide { rho: usize },
    #[error("bad bitmap {0:?}")]
    BadBitmap(String),
    #[error("invalid workload: {0}")]
    InvalidSpec(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One forwarding entry: a flow, its egress set, and optionally the port
/// its packets arrive on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MfEntry {
    pub flow: FlowId,
    pub opb: Opb,
    pub ingress: Option<usize>,
}

impl MfEntry {
    pub fn new(flow: FlowId, opb: Opb) -> Self {
        MfEntry {
            flow,
            opb,
            ingress: None,
        }
    }

    pub fn with_ingress(mut self, port: usize) -> Self {
        self.ingress = Some(port);
        self
    }
}

/// Ordered forwarding table over `rho` ports with distinct flows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mft {
    rho: usize,
    entries: Vec<MfEntry>,
    flows: HashSet<FlowId>,
}

impl Mft {
    pub fn new(rho: usize) -> Self {
        Mft {
            rho,
            entries: Vec::new(),
            flows: HashSet::new(),
        }
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MfEntry] {
        &self.entries
    }

    pub fn get(&self, flow: &FlowId) -> Option<&MfEntry> {
        if !self.flows.contains(flow) {
            return None;
        }
        self.entries.iter().find(|e| &e.flow == flow)
    }

    pub fn add_entry(&mut self, entry: MfEntry) -> Result<(), MftError> {
        if entry.opb.rho() != self.rho {
            return Err(MftError::WidthMismatch {
                got: entry.opb.rho(),
                rho: self.rho,
            });
        }
        if let Some(port) = entry.ingress.filter(|p| !(1..=self.rho).contains(p)) {
            return Err(MftError::PortOutOfRange { port, rho: self.rho });
        }
        if !self.flows.insert(entry.flow.clone()) {
            return Err(MftError::DuplicateFlow(entry.flow));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn remove_entry(&mut self, flow: &FlowId) -> Result<MfEntry, MftError> {
        if !self.flows.remove(flow) {
            return Err(MftError::UnknownFlow(flow.clone()));
        }
        let pos = self
            .entries
            .iter()
            .position(|e| &e.flow == flow)
            .expect("flow index out of sync with entries");
        Ok(self.entries.remove(pos))
    }

    /// Mean popcount of the entries' bitmaps.
    pub fn egress_diversity(&self) -> Result<f64, MftError> {
        if self.entries.is_empty() {
            return Err(MftError::EmptyTable);
        }
        let total: usize = self.entries.iter().map(|e| e.opb.popcount()).sum();
        Ok(total as f64 / self.entries.len() as f64)
    }

    /// Writes the `rho=<int> n=<int>` text format.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "rho={} n={}", self.rho, self.entries.len())?;
        for e in &self.entries {
            match e.ingress {
                Some(p) => writeln!(out, "{}\t{}\t{}", e.flow, p, e.opb)?,
                None => writeln!(out, "{}\t-\t{}", e.flow, e.opb)?,
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("table text is UTF-8")
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, MftError> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(MftError::Parse {
            line: 1,
            msg: "missing header".into(),
        })??;
        let (rho, n) = parse_header(&header)?;
        let mut mft = Mft::new(rho);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| MftError::Parse {
                line: lineno,
                msg: msg.to_string(),
            };
            let mut cols = line.split('\t');
            let (Some(flow), Some(ingress), Some(bitmap), None) = (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(bad("expected flow<TAB>ingress<TAB>bitmap"));
            };
            let flow: FlowId = flow.parse()?;
            let ingress = match ingress {
                "-" => None,
                s => Some(s.parse::<usize>().map_err(|_| bad("bad ingress"))?),
            };
            let opb = Opb::parse(bitmap)?;
            let mut entry = MfEntry::new(flow, opb);
            entry.ingress = ingress;
            mft.add_entry(entry).map_err(|e| bad(&e.to_string()))?;
        }
        if mft.len() != n {
            return Err(MftError::Parse {
                line: 1,
                msg: format!("header says n={n}, found {} entries", mft.len()),
            });
        }
        Ok(mft)
    }
}

fn parse_header(header: &str) -> Result<(usize, usize), MftError> {
    let bad = || MftError::Parse {
        line: 1,
        msg: format!("expected `rho=<int> n=<int>`, got {header:?}"),
    };
    let mut parts = header.split_whitespace();
    let rho = parts
        .next()
        .and_then(|p| p.strip_prefix("rho="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    let n = parts
        .next()
        .and_then(|p| p.strip_prefix("n="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((rho, n))
}
