// SPDX-License-Identifier: Apache-2.0 OR MIT

//! `key = value` sweep configuration.
//!
//! ```text
//! # comments start with '#'
//! n_list = 2^8, 2^12
//! rho_list = 16, 64
//! phi_grid = 1, 2, rho/4, rho/2, rho
//! seed = 7
//! t_o = 1
//! svrf_divisions = sequential
//! ```

use crate::costmodel::{DivisionSchedule, HwParams};

use super::SweepError;

/// A diversity target, either absolute or relative to the port count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiPoint {
    Value(f64),
    /// `rho / d`
    RhoOver(f64),
}

impl PhiPoint {
    /// Concrete target for `rho` ports, or `None` if it falls outside
    /// `[1, rho]`.
    pub fn resolve(self, rho: usize) -> Option<f64> {
        let v = match self {
            PhiPoint::Value(v) => v,
            PhiPoint::RhoOver(d) => rho as f64 / d,
        };
        (v >= 1.0 && v <= rho as f64).then_some(v)
    }

    fn parse(token: &str) -> Option<PhiPoint> {
        if token == "rho" {
            return Some(PhiPoint::RhoOver(1.0));
        }
        if let Some(d) = token.strip_prefix("rho/") {
            return d.trim().parse().ok().filter(|d: &f64| *d > 0.0).map(PhiPoint::RhoOver);
        }
        token.parse().ok().map(PhiPoint::Value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub rho_list: Vec<usize>,
    pub phi_grid: Vec<PhiPoint>,
    pub hw: HwParams,
    /// Pins the divider width for every scheme instead of sizing it to
    /// each scheme's keys.
    pub q_override: Option<u64>,
    pub seed: u64,
    /// Tables larger than this use analytic memory accounting.
    pub analytic_threshold: usize,
    pub force_construct: bool,
    /// Fractional group count; default `ceil(n / 256)` capped at 1024.
    pub groups: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_list: vec![1 << 8, 1 << 12, 1 << 16, 1 << 20],
            rho_list: vec![16, 64, 256, 1024],
            phi_grid: [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]
                .into_iter()
                .map(PhiPoint::Value)
                .chain([PhiPoint::RhoOver(4.0), PhiPoint::RhoOver(2.0)])
                .collect(),
            hw: HwParams::default(),
            q_override: None,
            seed: 1,
            analytic_threshold: 1 << 8,
            force_construct: false,
            groups: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::Config(m));
        if self.n_list.is_empty() || self.rho_list.is_empty() || self.phi_grid.is_empty() {
            return bad("n_list, rho_list and phi_grid must be non-empty".into());
        }
        if let Some(n) = self.n_list.iter().find(|&&n| n < 1) {
            return bad(format!("n={n} must be at least 1"));
        }
        if let Some(r) = self.rho_list.iter().find(|&&r| r < 2) {
            return bad(format!("rho={r} must be at least 2"));
        }
        if self.groups == Some(0) {
            return bad("groups must be at least 1".into());
        }
        let mut hw = self.hw;
        if let Some(q) = self.q_override {
            hw.q = q;
        }
        hw.validate().map_err(|e| SweepError::Config(e.to_string()))
    }

    /// Diversity targets for `rho`, ascending and de-duplicated.
    pub fn phis_for(&self, rho: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.phi_grid.iter().filter_map(|p| p.resolve(rho)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn groups_for(&self, n: usize) -> usize {
        self.groups.unwrap_or_else(|| n.div_ceil(256).clamp(1, 1024))
    }

    pub fn constructs(&self, n: usize) -> bool {
        self.force_construct || n <= self.analytic_threshold
    }

    /// Divider parameters for a scheme whose widest key has `key_bits` bits.
    pub fn hw_for(&self, key_bits: u64) -> HwParams {
        match self.q_override {
            Some(q) => HwParams { q, ..self.hw },
            None => self.hw.sized_for_keys(key_bits),
        }
    }

    /// Parses `key = value` lines over the defaults. `seed` falls back to
    /// `default_seed` when the file does not set it.
    pub fn parse(text: &str, default_seed: Option<u64>) -> Result<Self, SweepError> {
        let mut cfg = SweepConfig::default();
        if let Some(seed) = default_seed {
            cfg.seed = seed;
        }
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| SweepError::Config(format!("line {}: {m}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n_list" => cfg.n_list = parse_list(value, parse_count).ok_or_else(|| err("bad n_list"))?,
                "rho_list" => cfg.rho_list = parse_list(value, parse_count).ok_or_else(|| err("bad rho_list"))?,
                "phi_grid" => cfg.phi_grid = parse_list(value, PhiPoint::parse).ok_or_else(|| err("bad phi_grid"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| err("bad seed"))?,
                "analytic_threshold" => {
                    cfg.analytic_threshold = parse_count(value).ok_or_else(|| err("bad analytic_threshold"))?
                }
                "force_construct" => {
                    cfg.force_construct = parse_bool(value).ok_or_else(|| err("bad force_construct"))?
                }
                "groups" => cfg.groups = Some(parse_count(value).ok_or_else(|| err("bad groups"))?),
                "q" => cfg.q_override = Some(value.parse().map_err(|_| err("bad q"))?),
                "t_o" => cfg.hw.t_o = value.parse().map_err(|_| err("bad t_o"))?,
                "w" => cfg.hw.w = value.parse().map_err(|_| err("bad w"))?,
                "clock_hz" => cfg.hw.clock_hz = value.parse().map_err(|_| err("bad clock_hz"))?,
                "mem_access_ns" => cfg.hw.mem_access_ns = value.parse().map_err(|_| err("bad mem_access_ns"))?,
                "datapath_bits" => cfg.hw.datapath_bits = value.parse().map_err(|_| err("bad datapath_bits"))?,
                "fixed_stage_cycles" => {
                    cfg.hw.fixed_stage_cycles = value.parse().map_err(|_| err("bad fixed_stage_cycles"))?
                }
                "svrf_divisions" => {
                    cfg.hw.svrf_divisions = match value {
                        "sequential" => DivisionSchedule::Sequential,
                        "parallel" => DivisionSchedule::Parallel,
                        _ => return Err(err("svrf_divisions must be sequential or parallel")),
                    }
                }
                other => return Err(err(&format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_list<T>(value: &str, item: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    let items: Option<Vec<T>> = value.split(',').map(|t| item(t.trim())).collect();
    items.filter(|v| !v.is_empty())
}

/// Decimal or `2^k`.
fn parse_count(token: &str) -> Option<usize> {
    match token.split_once('^') {
        Some(("2", exp)) => exp.trim().parse::<u32>().ok().and_then(|e| 1usize.checked_shl(e)),
        Some(_) => None,
        None => token.parse().ok(),
    }
}

fn parse_bool(token: &str) -> Option<bool> {
    match token {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}
