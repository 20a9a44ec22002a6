// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Parameter sweeps over `(n, rho, phi)`: memory footprints, the diversity
//! threshold at which P³FA stops being the smaller structure, and modelled
//! lookup latency.
//!
//! Small tables are built for real. Above `analytic_threshold` entries the
//! footprint is computed from key magnitudes alone: the keys a smallest-first
//! directory would issue are known in advance, so each scalar's bit length is
//! `floor(sum of log2 keys) + 1` without forming the product.

mod config;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{PhiPoint, SweepConfig};

use crate::arith::bits_from_log2;
use crate::costmodel::{latency_p3fa_bits, latency_svrf_bits, CostError, LatencyEstimate};
use crate::keyspace::{next_prime, smallest_first_log2, FlowId, KeyDirectory, PrimeKey, PrimeRun};
use crate::mft::{gen_workload, MftError, WorkloadSpec, WorkloadStream};
use crate::p3fa::{P3faError, P3faFilter, PortLogSums};
use crate::svrf::{group_of, FractionalSvrf, Mode, SvrfError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("no crossing in [1, {rho}] for n={n}: P3FA never exceeds SVRF memory")]
    NoCrossing { n: usize, rho: usize },
    #[error(transparent)]
    Workload(#[from] MftError),
    #[error(transparent)]
    P3fa(#[from] P3faError),
    #[error(transparent)]
    Svrf(#[from] SvrfError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Which filter a footprint or row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    P3fa,
    Svrf(Mode),
    Fractional(Mode),
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::P3fa => "p3fa",
            Scheme::Svrf(Mode::Multicast) => "svrf",
            Scheme::Svrf(Mode::Unicast) => "svrf-unicast",
            Scheme::Fractional(Mode::Multicast) => "fractional",
            Scheme::Fractional(Mode::Unicast) => "fractional-unicast",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Memory and modelled lookup latency of one scheme on one workload.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub scheme: Scheme,
    pub memory_bits: u64,
    /// Bit length of the widest key in use; sizes the divider.
    pub key_bits: u64,
    pub latency: LatencyEstimate,
    /// True when the filter was actually built.
    pub constructed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(u64),
    Real(f64),
    Missing,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v:.4}"),
            Value::Missing => f.write_str("none"),
        }
    }
}

/// One CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scheme: &'static str,
    pub n: usize,
    pub rho: usize,
    pub phi: f64,
    pub metric: &'static str,
    pub value: Value,
}

pub const CSV_HEADER: &str = "scheme,n,rho,phi,metric,value";

/// Sorts rows into the canonical order and renders them with a header.
pub fn to_csv(rows: &mut [Row]) -> String {
    rows.sort_by(|a, b| {
        (a.scheme, a.n, a.rho)
            .cmp(&(b.scheme, b.n, b.rho))
            .then(a.phi.total_cmp(&b.phi))
            .then(a.metric.cmp(b.metric))
    });
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows.iter() {
        out.push_str(&format!(
            "{},{},{},{:.4},{},{}\n",
            r.scheme, r.n, r.rho, r.phi, r.metric, r.value
        ));
    }
    out
}

/// Keys a smallest-first directory issues from a given minimum, shared
/// between cells and threads.
#[derive(Debug, Default)]
pub struct KeyCache {
    logs: Mutex<HashMap<BigUint, Arc<Vec<f64>>>>,
    keys: Mutex<HashMap<BigUint, Arc<Vec<BigUint>>>>,
    groups: Mutex<HashMap<(usize, usize), Arc<Vec<usize>>>>,
}

impl KeyCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache used by the `run_*` entry points. Its contents
    /// depend only on the requested minima, never on a configuration.
    pub fn shared() -> &'static KeyCache {
        static SHARED: OnceLock<KeyCache> = OnceLock::new();
        SHARED.get_or_init(KeyCache::new)
    }

    /// log2 of the first `count` keys at or above `min` (at least `count` long).
    fn logs(&self, min: &BigUint, count: usize) -> Arc<Vec<f64>> {
        if let Some(v) = self.logs.lock().unwrap().get(min).filter(|v| v.len() >= count) {
            return Arc::clone(v);
        }
        let v = Arc::new(smallest_first_log2(min, count).0);
        self.logs.lock().unwrap().insert(min.clone(), Arc::clone(&v));
        v
    }

    /// The first `count` primes at or above `min`.
    fn keys(&self, min: &BigUint, count: usize) -> Arc<Vec<BigUint>> {
        let have = self.keys.lock().unwrap().get(min).cloned();
        if let Some(v) = have.as_ref().filter(|v| v.len() >= count) {
            return Arc::clone(v);
        }
        let mut v: Vec<BigUint> = have.map(|v| v.as_ref().clone()).unwrap_or_default();
        match min.to_u64().filter(|&m| m < 1 << 48) {
            Some(m) => {
                let start = v.last().and_then(|k| k.to_u64()).map_or(m, |k| k + 1);
                v.extend(PrimeRun::starting_at(start).take(count - v.len()).map(BigUint::from));
            }
            None => {
                while v.len() < count {
                    let from = v.last().map_or_else(|| min.clone(), |k| k + 1u32);
                    v.push(next_prime(&from));
                }
            }
        }
        let v = Arc::new(v);
        self.keys.lock().unwrap().insert(min.clone(), Arc::clone(&v));
        v
    }

    /// Group of each synthetic flow `1..=n`.
    fn groups(&self, n: usize, n_groups: usize) -> Arc<Vec<usize>> {
        let key = (n, n_groups);
        if let Some(v) = self.groups.lock().unwrap().get(&key) {
            return Arc::clone(v);
        }
        let v: Arc<Vec<usize>> = Arc::new((1..=n).map(|i| group_of(&FlowId::synthetic(i), n_groups)).collect());
        self.groups.lock().unwrap().insert(key, Arc::clone(&v));
        v
    }
}

fn bits_of_log(log2: f64) -> u64 {
    bits_from_log2(log2)
}

/// Footprint of P³FA on the workload `(n, rho, phi)`.
pub fn p3fa_footprint(
    n: usize,
    rho: usize,
    phi: f64,
    cfg: &SweepConfig,
    cache: &KeyCache,
) -> Result<Footprint, SweepError> {
    let spec = WorkloadSpec::new(n, rho, phi, cfg.seed);
    let (port_bits, key_bits, constructed) = if cfg.constructs(n) {
        let mft = gen_workload(&spec)?;
        let mut dir = KeyDirectory::default();
        let f = P3faFilter::construct(&mft, &mut dir)?;
        let key_bits = dir.iter().map(|(_, k)| k.bits()).max().unwrap_or(1);
        (f.port_bits(), key_bits, true)
    } else {
        let logs = cache.logs(&BigUint::from(2u32), n);
        let mut sums = PortLogSums::new(rho);
        let mut stream = WorkloadStream::new(spec)?;
        let mut i = 0;
        while let Some((_, draw)) = stream.next_draw() {
            sums.add_draw(logs[i], draw);
            i += 1;
        }
        (sums.port_bits(), bits_of_log(logs[n - 1]), false)
    };
    let latency = latency_p3fa_bits(&port_bits, key_bits, &cfg.hw_for(key_bits))?;
    Ok(Footprint {
        scheme: Scheme::P3fa,
        memory_bits: port_bits.iter().sum(),
        key_bits,
        latency,
        constructed,
    })
}

/// Footprint of a single scalar pair holding the whole table.
pub fn svrf_footprint(
    n: usize,
    rho: usize,
    phi: f64,
    mode: Mode,
    cfg: &SweepConfig,
    cache: &KeyCache,
) -> Result<Footprint, SweepError> {
    let mut f = fractional_footprint_with_groups(n, rho, phi, mode, 1, cfg, cache)?;
    f.scheme = Scheme::Svrf(mode);
    Ok(f)
}

/// Footprint of the fractional variant with the configured group count.
pub fn fractional_footprint(
    n: usize,
    rho: usize,
    phi: f64,
    mode: Mode,
    cfg: &SweepConfig,
    cache: &KeyCache,
) -> Result<Footprint, SweepError> {
    fractional_footprint_with_groups(n, rho, phi, mode, cfg.groups_for(n), cfg, cache)
}

/// Plain and fractional footprints together; a single group is the plain
/// filter and is not built twice.
fn svrf_pair(
    n: usize,
    rho: usize,
    phi: f64,
    mode: Mode,
    cfg: &SweepConfig,
    cache: &KeyCache,
) -> Result<(Footprint, Footprint), SweepError> {
    let plain = svrf_footprint(n, rho, phi, mode, cfg, cache)?;
    let fractional = match cfg.groups_for(n) {
        1 => Footprint {
            scheme: Scheme::Fractional(mode),
            ..plain.clone()
        },
        _ => fractional_footprint(n, rho, phi, mode, cfg, cache)?,
    };
    Ok((plain, fractional))
}

fn fractional_footprint_with_groups(
    n: usize,
    rho: usize,
    phi: f64,
    mode: Mode,
    n_groups: usize,
    cfg: &SweepConfig,
    cache: &KeyCache,
) -> Result<Footprint, SweepError> {
    let spec = WorkloadSpec::new(n, rho, phi, cfg.seed);
    spec.validate()?;
    let min = mode.min_key(rho);
    let groups = if n_groups == 1 {
        Arc::new(vec![0; n])
    } else {
        cache.groups(n, n_groups)
    };
    let mut sizes = vec![0usize; n_groups];
    for &g in groups.iter() {
        sizes[g] += 1;
    }
    let largest = sizes.iter().copied().max().unwrap_or(0);

    // (cp bits, crt bits, members) per non-empty group, plus total memory.
    let (pairs, memory_bits, key_bits, constructed): (Vec<(u64, u64, u64)>, u64, u64, bool) = if cfg.constructs(n) {
        let keys = cache.keys(&min, largest);
        let mft = gen_workload(&spec)?;
        let mut f = FractionalSvrf::new(rho, mode, n_groups);
        let mut next = vec![0usize; n_groups];
        for (entry, &g) in mft.entries().iter().zip(groups.iter()) {
            let key = PrimeKey::new_unchecked(keys[next[g]].clone());
            next[g] += 1;
            f.subfilter_mut(g).insert(&key, &mode.encode(entry)?)?;
        }
        let pairs = f
            .subfilters()
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| (s.m_cp().bits().max(1), s.m_crt().bits().max(1), s.len() as u64))
            .collect();
        (pairs, f.memory_bits(), keys[largest - 1].bits(), true)
    } else {
        let logs = cache.logs(&min, largest);
        // Every entry carries the same all-ports bitmap, so the residue is
        // that one value rather than a number as long as m_cp.
        let crt_bits = (mode == Mode::Multicast && phi == rho as f64).then_some(rho as u64);
        let mut prefix = Vec::with_capacity(largest + 1);
        prefix.push(0.0f64);
        for &l in &logs[..largest] {
            prefix.push(prefix.last().unwrap() + l);
        }
        let pairs: Vec<(u64, u64, u64)> = sizes
            .iter()
            .filter(|&&s| s > 0)
            .map(|&s| {
                let b = bits_of_log(prefix[s]);
                (b, crt_bits.map_or(b, |c| c.min(b)), s as u64)
            })
            .collect();
        let empty = (n_groups - pairs.len()) as u64 * 2;
        let memory = pairs.iter().map(|p| p.0 + p.1).sum::<u64>() + empty;
        (pairs, memory, bits_of_log(logs[largest - 1]), false)
    };

    let hw = cfg.hw_for(key_bits);
    let parts = pairs
        .iter()
        .map(|&(cp, crt, members)| Ok((latency_svrf_bits(cp, crt, key_bits, &hw)?, members)))
        .collect::<Result<Vec<_>, CostError>>()?;
    let latency = LatencyEstimate::weighted_mean(&parts).expect("table has at least one entry");
    Ok(Footprint {
        scheme: Scheme::Fractional(mode),
        memory_bits,
        key_bits,
        latency,
        constructed,
    })
}

fn cells(cfg: &SweepConfig) -> Vec<(usize, usize)> {
    cfg.n_list
        .iter()
        .flat_map(|&n| cfg.rho_list.iter().map(move |&rho| (n, rho)))
        .collect()
}

fn row(scheme: &'static str, n: usize, rho: usize, phi: f64, metric: &'static str, value: Value) -> Row {
    Row {
        scheme,
        n,
        rho,
        phi,
        metric,
        value,
    }
}

/// Memory of P³FA, SVRF and fractional SVRF (multicast) over the full grid,
/// plus unicast SVRF at `phi = 1`.
pub fn run_space_sweep(cfg: &SweepConfig) -> Result<Vec<Row>, SweepError> {
    cfg.validate()?;
    let cache = KeyCache::shared();
    let jobs: Vec<(usize, usize, f64)> = cells(cfg)
        .into_iter()
        .flat_map(|(n, rho)| cfg.phis_for(rho).into_iter().map(move |phi| (n, rho, phi)))
        .collect();
    let results: Vec<Result<Vec<Row>, SweepError>> = jobs
        .par_iter()
        .map(|&(n, rho, phi)| {
            let (svrf, fractional) = svrf_pair(n, rho, phi, Mode::Multicast, cfg, cache)?;
            let mut fps = vec![p3fa_footprint(n, rho, phi, cfg, cache)?, svrf, fractional];
            if phi == 1.0 {
                fps.push(svrf_footprint(n, rho, phi, Mode::Unicast, cfg, cache)?);
            }
            Ok(fps
                .iter()
                .map(|f| row(f.scheme.name(), n, rho, phi, "memory_bits", Value::Int(f.memory_bits)))
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Smallest diversity (to 0.1) at which P³FA needs more memory than a
/// multicast SVRF on the same workload.
pub fn find_threshold(n: usize, rho: usize, cfg: &SweepConfig) -> Result<f64, SweepError> {
    find_threshold_with(n, rho, cfg, KeyCache::shared())
}

fn find_threshold_with(n: usize, rho: usize, cfg: &SweepConfig, cache: &KeyCache) -> Result<f64, SweepError> {
    let exceeds = |phi: f64| -> Result<bool, SweepError> {
        let p = p3fa_footprint(n, rho, phi, cfg, cache)?;
        let s = svrf_footprint(n, rho, phi, Mode::Multicast, cfg, cache)?;
        Ok(p.memory_bits > s.memory_bits)
    };
    let (mut lo, mut hi) = (1.0f64, rho as f64);
    if exceeds(lo)? {
        return Ok(lo);
    }
    if !exceeds(hi)? {
        return Err(SweepError::NoCrossing { n, rho });
    }
    while hi - lo > 0.1 {
        let mid = (lo + hi) / 2.0;
        if exceeds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `phi_threshold` for every `(n, rho)`; cells without a crossing get `none`.
pub fn run_threshold_sweep(cfg: &SweepConfig) -> Result<Vec<Row>, SweepError> {
    cfg.validate()?;
    let cache = KeyCache::shared();
    let jobs = cells(cfg);
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(n, rho)| find_threshold_with(n, rho, cfg, cache))
        .collect();
    let mut rows = Vec::new();
    for (&(n, rho), r) in jobs.iter().zip(results) {
        rows.push(match r {
            Ok(phi) => row("p3fa", n, rho, phi, "phi_threshold", Value::Real(phi)),
            Err(SweepError::NoCrossing { .. }) => row("p3fa", n, rho, rho as f64, "phi_threshold", Value::Missing),
            Err(e) => return Err(e),
        });
    }
    Ok(rows)
}

/// Latency comparison for one `(n, rho)` cell.
#[derive(Debug, Clone)]
pub struct TimeCell {
    pub n: usize,
    pub rho: usize,
    /// `None` when P³FA never exceeds SVRF memory.
    pub phi_threshold: Option<f64>,
    /// `(phi, p3fa, svrf multicast, fractional multicast)`, ascending phi.
    pub points: Vec<(f64, Footprint, Footprint, Footprint)>,
    /// Unicast SVRF and its fractional variant at `phi = 1`.
    pub unicast: (Footprint, Footprint),
}

impl TimeCell {
    pub fn at(&self, phi: f64) -> Option<&(f64, Footprint, Footprint, Footprint)> {
        self.points.iter().find(|p| p.0 == phi)
    }

    pub fn speedup_vs_svrf(&self, phi: f64) -> Option<f64> {
        self.at(phi).map(|(_, p, s, _)| s.latency.total_ns / p.latency.total_ns)
    }
}

/// Evaluates the time sweep at `phi` in {1, threshold, rho/2, rho}.
pub fn time_cell(n: usize, rho: usize, cfg: &SweepConfig, cache: &KeyCache) -> Result<TimeCell, SweepError> {
    let phi_threshold = match find_threshold_with(n, rho, cfg, cache) {
        Ok(phi) => Some(phi),
        Err(SweepError::NoCrossing { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut phis: Vec<f64> = [Some(1.0), phi_threshold, Some(rho as f64 / 2.0), Some(rho as f64)]
        .into_iter()
        .flatten()
        .collect();
    phis.sort_by(f64::total_cmp);
    phis.dedup();
    let points = phis
        .into_iter()
        .map(|phi| {
            let (svrf, fractional) = svrf_pair(n, rho, phi, Mode::Multicast, cfg, cache)?;
            Ok((phi, p3fa_footprint(n, rho, phi, cfg, cache)?, svrf, fractional))
        })
        .collect::<Result<_, SweepError>>()?;
    let unicast = svrf_pair(n, rho, 1.0, Mode::Unicast, cfg, cache)?;
    Ok(TimeCell {
        n,
        rho,
        phi_threshold,
        points,
        unicast,
    })
}

/// Runs [`time_cell`] over every `(n, rho)` in the configuration.
pub fn time_cells(cfg: &SweepConfig) -> Result<Vec<TimeCell>, SweepError> {
    cfg.validate()?;
    let cache = KeyCache::shared();
    cells(cfg)
        .par_iter()
        .map(|&(n, rho)| time_cell(n, rho, cfg, cache))
        .collect()
}

/// Modelled latency per scheme and P³FA speedup ratios, as CSV rows.
pub fn run_time_sweep(cfg: &SweepConfig) -> Result<Vec<Row>, SweepError> {
    Ok(time_cells(cfg)?.iter().flat_map(time_rows).collect())
}

fn time_rows(c: &TimeCell) -> Vec<Row> {
    let (n, rho) = (c.n, c.rho);
    let mut rows = Vec::new();
    if let Some(phi) = c.phi_threshold {
        rows.push(row("p3fa", n, rho, phi, "phi_threshold", Value::Real(phi)));
    }
    for (phi, p, s, fr) in &c.points {
        for f in [p, s, fr] {
            rows.push(row(
                f.scheme.name(),
                n,
                rho,
                *phi,
                "latency_ns",
                Value::Real(f.latency.total_ns),
            ));
            rows.push(row(
                f.scheme.name(),
                n,
                rho,
                *phi,
                "divider_cycles",
                Value::Int(f.latency.divider_cycles),
            ));
        }
        let pt = p.latency.total_ns;
        rows.push(row(
            "p3fa",
            n,
            rho,
            *phi,
            "speedup_vs_svrf",
            Value::Real(s.latency.total_ns / pt),
        ));
        rows.push(row(
            "p3fa",
            n,
            rho,
            *phi,
            "speedup_vs_fractional",
            Value::Real(fr.latency.total_ns / pt),
        ));
    }
    let (su, fu) = &c.unicast;
    for f in [su, fu] {
        rows.push(row(
            f.scheme.name(),
            n,
            rho,
            1.0,
            "latency_ns",
            Value::Real(f.latency.total_ns),
        ));
        rows.push(row(
            f.scheme.name(),
            n,
            rho,
            1.0,
            "divider_cycles",
            Value::Int(f.latency.divider_cycles),
        ));
    }
    if let Some((_, p, _, _)) = c.at(1.0) {
        let pt = p.latency.total_ns;
        rows.push(row(
            "p3fa",
            n,
            rho,
            1.0,
            "speedup_vs_svrf_unicast",
            Value::Real(su.latency.total_ns / pt),
        ));
        rows.push(row(
            "p3fa",
            n,
            rho,
            1.0,
            "speedup_vs_fractional_unicast",
            Value::Real(fu.latency.total_ns / pt),
        ));
    }
    rows
}
