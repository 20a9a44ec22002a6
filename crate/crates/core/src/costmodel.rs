// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Divider timing and per-packet latency estimates.
//!
//! A `q`-bit long divider reducing a `B`-bit dividend takes
//!
//! ```text
//! T = (ceil(B / q) + 1 + T_o) * (q + 1 + T_o) * (q / w)
//! ```
//!
//! cycles, where `T_o` is the overhead between successive divisions and `w`
//! the width of the divider's internal shifter. `q / w` is kept rational and
//! the product is rounded up to whole cycles.
//!
//! Per-packet latency adds a memory fetch (word count times access latency)
//! and the fixed parser/DEMUX/comparer stages. P³FA runs one divider and one
//! fetch path per port in parallel, so the slowest port decides. A scalar
//! pair shares its fetch path and, by default, gates the extraction on the
//! hit test, so its two divisions add up.

use thiserror::Error;

use crate::keyspace::bitlen;
use crate::p3fa::P3faFilter;
use crate::svrf::{FractionalSvrf, SvrfFilter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("invalid hardware parameters: {0}")]
    InvalidParams(String),
}

/// How a scalar pair schedules its hit test and value extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DivisionSchedule {
    #[default]
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwParams {
    /// Divider width in bits.
    pub q: u64,
    /// Overhead cycles between successive divisions.
    pub t_o: u64,
    /// Shifter data width in bits.
    pub w: u64,
    pub clock_hz: f64,
    pub mem_access_ns: f64,
    pub datapath_bits: u64,
    /// Parser + DEMUX + comparer.
    pub fixed_stage_cycles: u64,
    pub svrf_divisions: DivisionSchedule,
}

impl Default for HwParams {
    fn default() -> Self {
        HwParams {
            q: 32,
            t_o: 1,
            w: 32,
            clock_hz: 2e9,
            mem_access_ns: 10.0,
            datapath_bits: 32,
            fixed_stage_cycles: 3,
            svrf_divisions: DivisionSchedule::Sequential,
        }
    }
}

impl HwParams {
    pub fn validate(&self) -> Result<(), CostError> {
        let bad = |m: &str| Err(CostError::InvalidParams(m.to_string()));
        if self.w < 1 {
            return bad("w must be at least 1");
        }
        if self.q < self.w {
            return bad("q must be at least w");
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return bad("clock_hz must be positive");
        }
        if !(self.mem_access_ns.is_finite() && self.mem_access_ns >= 0.0) {
            return bad("mem_access_ns must be non-negative");
        }
        if self.datapath_bits < 1 {
            return bad("datapath_bits must be at least 1");
        }
        Ok(())
    }

    /// Same parameters with `q` set to the smallest power of two that holds
    /// a `key_bits`-bit key, never narrower than the shifter width `w`.
    pub fn sized_for_keys(&self, key_bits: u64) -> HwParams {
        HwParams {
            q: key_bits.max(1).next_power_of_two().max(self.w),
            ..*self
        }
    }

    fn cycles_to_ns(&self, cycles: u64) -> f64 {
        cycles as f64 / self.clock_hz * 1e9
    }

    fn fetch_ns(&self, bits: u64) -> f64 {
        bits.div_ceil(self.datapath_bits) as f64 * self.mem_access_ns
    }

    fn check_key_bits(&self, key_bits: u64) -> Result<(), CostError> {
        self.validate()?;
        if key_bits > self.q {
            return Err(CostError::InvalidParams(format!(
                "q={} is narrower than {key_bits}-bit keys",
                self.q
            )));
        }
        Ok(())
    }
}

/// Cycles for one `q`-bit division of a `scalar_bits`-bit dividend.
pub fn divider_cycles(scalar_bits: u64, p: &HwParams) -> Result<u64, CostError> {
    p.validate()?;
    if scalar_bits < 1 {
        return Err(CostError::InvalidParams("scalar_bits must be at least 1".into()));
    }
    let q = p.q as u128;
    let t_o = p.t_o as u128;
    let steps = (scalar_bits as u128).div_ceil(q) + 1 + t_o;
    let numerator = steps * (q + 1 + t_o) * q;
    let cycles = numerator.div_ceil(p.w as u128);
    u64::try_from(cycles).map_err(|_| CostError::InvalidParams("cycle count overflows u64".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Fixed,
    Divide,
    Fetch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyEstimate {
    pub divider_cycles: u64,
    pub memory_ns: f64,
    pub total_ns: f64,
    pub breakdown: Vec<(Stage, f64)>,
}

impl LatencyEstimate {
    fn compose(divider_cycles: u64, memory_ns: f64, p: &HwParams) -> Self {
        let fixed_ns = p.cycles_to_ns(p.fixed_stage_cycles);
        let divide_ns = p.cycles_to_ns(divider_cycles);
        LatencyEstimate {
            divider_cycles,
            memory_ns,
            total_ns: fixed_ns + divide_ns + memory_ns,
            breakdown: vec![
                (Stage::Fixed, fixed_ns),
                (Stage::Divide, divide_ns),
                (Stage::Fetch, memory_ns),
            ],
        }
    }

    /// Weighted mean of several estimates (e.g. over fractional groups,
    /// weighted by how many flows each answers).
    pub fn weighted_mean(parts: &[(LatencyEstimate, u64)]) -> Option<LatencyEstimate> {
        let total: u64 = parts.iter().map(|(_, w)| w).sum();
        if total == 0 {
            return None;
        }
        let t = total as f64;
        let avg = |f: &dyn Fn(&LatencyEstimate) -> f64| parts.iter().map(|(e, w)| f(e) * *w as f64).sum::<f64>() / t;
        let stages = [Stage::Fixed, Stage::Divide, Stage::Fetch];
        Some(LatencyEstimate {
            divider_cycles: avg(&|e| e.divider_cycles as f64).round() as u64,
            memory_ns: avg(&|e| e.memory_ns),
            total_ns: avg(&|e| e.total_ns),
            breakdown: stages
                .iter()
                .map(|&s| {
                    let ns = avg(&|e| e.breakdown.iter().find(|b| b.0 == s).map_or(0.0, |b| b.1));
                    (s, ns)
                })
                .collect(),
        })
    }
}

/// Latency of a P³FA lookup given per-port scalar bit lengths.
pub fn latency_p3fa_bits(port_bits: &[u64], key_bits: u64, p: &HwParams) -> Result<LatencyEstimate, CostError> {
    p.check_key_bits(key_bits)?;
    let widest = port_bits.iter().copied().max().unwrap_or(1).max(1);
    // Cycles and fetch time are both monotone in bit length, so the widest
    // port is the slowest on both counts.
    let cycles = divider_cycles(widest, p)?;
    Ok(LatencyEstimate::compose(cycles, p.fetch_ns(widest), p))
}

pub fn latency_p3fa(f: &P3faFilter, key_bits: u64, p: &HwParams) -> Result<LatencyEstimate, CostError> {
    latency_p3fa_bits(&f.port_bits(), key_bits, p)
}

/// Latency of a scalar-pair lookup given the two scalars' bit lengths.
pub fn latency_svrf_bits(
    cp_bits: u64,
    crt_bits: u64,
    key_bits: u64,
    p: &HwParams,
) -> Result<LatencyEstimate, CostError> {
    p.check_key_bits(key_bits)?;
    let hit = divider_cycles(cp_bits.max(1), p)?;
    let extract = divider_cycles(crt_bits.max(1), p)?;
    let cycles = match p.svrf_divisions {
        DivisionSchedule::Sequential => hit + extract,
        DivisionSchedule::Parallel => hit.max(extract),
    };
    Ok(LatencyEstimate::compose(cycles, p.fetch_ns(cp_bits + crt_bits), p))
}

pub fn latency_svrf(f: &SvrfFilter, key_bits: u64, p: &HwParams) -> Result<LatencyEstimate, CostError> {
    latency_svrf_bits(bitlen(f.m_cp()), bitlen(f.m_crt()), key_bits, p)
}

/// Member-weighted mean over groups: each lookup touches only its own
/// group's scalar pair.
pub fn latency_fractional(f: &FractionalSvrf, key_bits: u64, p: &HwParams) -> Result<LatencyEstimate, CostError> {
    let parts = f
        .subfilters()
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| Ok((latency_svrf(s, key_bits, p)?, s.len() as u64)))
        .collect::<Result<Vec<_>, CostError>>()?;
    match LatencyEstimate::weighted_mean(&parts) {
        Some(e) => Ok(e),
        None => latency_svrf_bits(1, 1, key_bits, p),
    }
}
