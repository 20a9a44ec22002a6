// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use primefwd::keyspace::{next_prime, PrimeRun};
use primefwd::svrf::{FractionalKeys, FractionalSvrf};
use primefwd::sweep::{self, run_space_sweep, run_time_sweep, time_cells, SweepConfig, TimeCell, Value};
use primefwd::{
    divider_cycles, gen_workload, HwParams, KeyDirectory, Mode, Opb, P3faFilter, PrimeKey, SvrfFilter, WorkloadSpec,
};

/// Exact-arithmetic criteria must finish under this wall time.
const FAST_LIMIT: Duration = Duration::from_millis(1);

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn key(v: u64) -> PrimeKey {
    PrimeKey::try_from(v).unwrap()
}

fn opb(ports: &[usize]) -> Opb {
    Opb::from_ports(4, ports.iter().copied()).unwrap()
}

fn worked_example() -> P3faFilter {
    let mut f = P3faFilter::new(4);
    for (k, ports) in [
        (3, &[1, 2][..]),
        (71, &[1]),
        (7, &[2, 3]),
        (11, &[2, 3, 4]),
        (13, &[2, 4]),
        (17, &[3, 4]),
    ] {
        f.insert(&key(k), &opb(ports)).unwrap();
    }
    f
}

fn scalars(f: &P3faFilter) -> Vec<u64> {
    f.scalars().iter().map(|s| s.try_into().unwrap()).collect()
}

fn c1_construction() -> Outcome {
    let mut f = worked_example();
    ensure!(
        scalars(&f) == [213, 3003, 1309, 2431],
        "starting scalars {:?}",
        scalars(&f)
    );
    let (k, ports) = (key(23), opb(&[3, 4]));
    let start = Instant::now();
    f.insert(&k, &ports).unwrap();
    let elapsed = start.elapsed();
    let got = scalars(&f);
    ensure!(got == [213, 3003, 30107, 55913], "got {got:?}");
    ensure!(elapsed < FAST_LIMIT, "insert took {elapsed:?}");
    Ok(format!("{got:?} in {elapsed:?}"))
}

fn c2_query() -> Outcome {
    let mut f = worked_example();
    f.insert(&key(23), &opb(&[3, 4])).unwrap();
    let k = key(23);
    let start = Instant::now();
    let r = f.query(&k, Some(1)).unwrap();
    let elapsed = start.elapsed();
    let rem: Vec<Option<u64>> = r
        .remainders
        .iter()
        .map(|v| v.as_ref().map(|v| v.try_into().unwrap()))
        .collect();
    ensure!(r.ports() == [3, 4], "ports {:?}", r.ports());
    ensure!(rem == [None, Some(13), Some(0), Some(0)], "remainders {rem:?}");
    ensure!(elapsed < FAST_LIMIT, "query took {elapsed:?}");
    Ok(format!(
        "ports {:?}, remainders (13, 0, 0) on ports (2, 3, 4) in {elapsed:?}",
        r.ports()
    ))
}

/// `count` primes above `floor` that the filter has never seen.
fn fresh(floor: &BigUint, count: usize) -> Vec<PrimeKey> {
    let mut next = floor + 1u32;
    (0..count)
        .map(|_| {
            let p = next_prime(&next);
            next = &p + 1u32;
            PrimeKey::new(p).unwrap()
        })
        .collect()
}

fn max_key(dir: &KeyDirectory) -> BigUint {
    dir.iter().map(|(_, k)| k.clone()).max().unwrap()
}

fn c3_membership() -> Outcome {
    let mut grid = Vec::new();
    for n in [1 << 8, 1 << 12] {
        for rho in [4usize, 16, 64] {
            for phi in [1.0, rho as f64 / 4.0, rho as f64 / 2.0, rho as f64] {
                grid.push((n, rho, phi));
            }
        }
    }
    let (mut members, mut probes) = (0usize, 0usize);
    for i in 0..50 {
        let (n, rho, phi) = grid[i % grid.len()];
        let mft = gen_workload(&WorkloadSpec::new(n, rho, phi, 7_000 + i as u64)).unwrap();
        let ctx = format!("workload {i} (n={n}, rho={rho}, phi={phi})");

        let mut dir = KeyDirectory::default();
        let p3fa = P3faFilter::construct(&mft, &mut dir).unwrap();
        for e in mft.entries() {
            let got = p3fa.query(dir.lookup_key(&e.flow).unwrap(), None).unwrap().opb;
            ensure!(got == e.opb, "{ctx}: p3fa returned {got} for {}", e.flow);
        }
        for k in fresh(&max_key(&dir), 1000) {
            ensure!(
                p3fa.query(&k, None).unwrap().opb.is_empty(),
                "{ctx}: p3fa false positive on {k}"
            );
        }

        let modes: &[Mode] = if phi == 1.0 {
            &[Mode::Multicast, Mode::Unicast]
        } else {
            &[Mode::Multicast]
        };
        for &mode in modes {
            let mut dir = KeyDirectory::default();
            let svrf = SvrfFilter::construct(&mft, &mut dir, mode).unwrap();
            for e in mft.entries() {
                let got = svrf.query(dir.lookup_key(&e.flow).unwrap());
                ensure!(
                    got == Some(mode.encode(e).unwrap()),
                    "{ctx}: {mode} svrf returned {got:?} for {}",
                    e.flow
                );
            }
            for k in fresh(&max_key(&dir), 1000) {
                ensure!(svrf.query(&k).is_none(), "{ctx}: {mode} svrf false positive on {k}");
            }

            let n_groups = n.div_ceil(256).max(4);
            let mut keys = FractionalKeys::new(n_groups);
            let frac = FractionalSvrf::construct(&mft, &mut keys, mode).unwrap();
            for e in mft.entries() {
                let got = frac.query(&e.flow, &keys).unwrap();
                ensure!(
                    got == Some(mode.encode(e).unwrap()),
                    "{ctx}: {mode} fractional returned {got:?}"
                );
            }
            let top = (0..n_groups)
                .filter(|&g| !keys.group(g).is_empty())
                .map(|g| max_key(keys.group(g)))
                .max()
                .unwrap();
            for (j, k) in fresh(&top, 1000).into_iter().enumerate() {
                let sub = &frac.subfilters()[j % n_groups];
                ensure!(
                    sub.query(&k).is_none(),
                    "{ctx}: {mode} fractional false positive on {k}"
                );
            }
            members += 2 * mft.len();
            probes += 2000;
        }
        members += mft.len();
        probes += 1000;
    }
    Ok(format!(
        "50 workloads, {members} member queries, {probes} fresh-prime probes, zero errors"
    ))
}

fn crt_check(pairs: &[(u64, u64)]) -> Result<(), String> {
    let mut f = SvrfFilter::new(32, Mode::Multicast);
    for &(k, v) in pairs {
        f.insert(&key(k), &BigUint::from(v)).map_err(|e| e.to_string())?;
    }
    let m_cp: u64 = pairs.iter().map(|p| p.0).product();
    // Scan every candidate congruent to the largest key's value.
    let &(k_max, v_max) = pairs.iter().max().unwrap();
    let brute = (v_max..m_cp)
        .step_by(k_max as usize)
        .find(|x| pairs.iter().all(|&(k, v)| x % k == v))
        .ok_or_else(|| format!("no residue for {pairs:?}"))?;
    if f.m_crt() != &BigUint::from(brute) {
        return Err(format!("{pairs:?}: incremental {} vs brute force {brute}", f.m_crt()));
    }
    Ok(())
}

fn c4_crt_oracle() -> Outcome {
    let mut instances = 0usize;
    // Every pair of distinct keys below 50 with every value combination.
    let small: Vec<u64> = PrimeRun::starting_at(2).take_while(|&p| p < 50).collect();
    for (i, &a) in small.iter().enumerate() {
        for &b in &small[i + 1..] {
            for va in 0..a {
                for vb in 0..b {
                    crt_check(&[(a, va), (b, vb)])?;
                    instances += 1;
                }
            }
        }
    }
    // Random key sets with m_cp below 10^6.
    let pool: Vec<u64> = PrimeRun::starting_at(2).take_while(|&p| p < 1000).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    while instances < 120_000 {
        let mut pairs: Vec<(u64, u64)> = Vec::new();
        let mut m_cp = 1u64;
        for _ in 0..rng.gen_range(1..=5) {
            let k = pool[rng.gen_range(0..pool.len())];
            if pairs.iter().any(|p| p.0 == k) || m_cp * k >= 1_000_000 {
                continue;
            }
            m_cp *= k;
            pairs.push((k, rng.gen_range(0..k)));
        }
        crt_check(&pairs)?;
        instances += 1;
    }
    Ok(format!(
        "{instances} instances with m_cp < 10^6 match the brute-force residue"
    ))
}

fn c5_roundtrip() -> Outcome {
    let spec = WorkloadSpec::new(256, 16, 4.0, 55);
    let mft = gen_workload(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let random_opb = |rng: &mut ChaCha8Rng| loop {
        let v: u16 = rng.gen();
        if v != 0 {
            return Opb::from_value(16, &BigUint::from(v)).unwrap();
        }
    };

    let mut dir = KeyDirectory::default();
    let mut p3fa = P3faFilter::construct(&mft, &mut dir).unwrap();
    let before = p3fa.to_dump();
    let start: u64 = (&max_key(&dir)).try_into().unwrap();
    for k in PrimeRun::starting_at(start + 1).take(10_000) {
        let (k, o) = (key(k), random_opb(&mut rng));
        p3fa.insert(&k, &o).map_err(|e| e.to_string())?;
        p3fa.remove(&k, &o).map_err(|e| e.to_string())?;
        ensure!(p3fa.to_dump() == before, "p3fa dump changed after key {k}");
    }

    let mut dir = KeyDirectory::default();
    let mut svrf = SvrfFilter::construct(&mft, &mut dir, Mode::Multicast).unwrap();
    let before = svrf.to_dump();
    let start: u64 = (&max_key(&dir)).try_into().unwrap();
    for k in PrimeRun::starting_at(start + 1).take(10_000) {
        let (k, v) = (key(k), random_opb(&mut rng).to_value());
        svrf.insert(&k, &v).map_err(|e| e.to_string())?;
        let back = svrf.remove(&k).map_err(|e| e.to_string())?;
        ensure!(back == v, "svrf returned {back} for {v}");
        ensure!(svrf.to_dump() == before, "svrf dump changed after key {k}");
    }
    Ok("10^4 insert/remove pairs per scheme, dumps byte-identical".into())
}

fn c6_divider() -> Outcome {
    let a = divider_cycles(
        64,
        &HwParams {
            q: 32,
            t_o: 1,
            w: 32,
            ..HwParams::default()
        },
    )
    .unwrap();
    let b = divider_cycles(
        32,
        &HwParams {
            q: 32,
            t_o: 0,
            w: 32,
            ..HwParams::default()
        },
    )
    .unwrap();
    ensure!(a == 136 && b == 66, "got {a} and {b}");
    Ok(format!(
        "divider_cycles(64; 32, 1, 32) = {a}, divider_cycles(32; 32, 0, 32) = {b}"
    ))
}

fn c7_space(cells: &[TimeCell]) -> Outcome {
    let cfg = SweepConfig::parse("phi_grid = 1", None).unwrap();
    let rows = run_space_sweep(&cfg).map_err(|e| e.to_string())?;
    let bits = |scheme: &str, n: usize, rho: usize| {
        rows.iter()
            .find(|r| r.scheme == scheme && r.n == n && r.rho == rho)
            .and_then(|r| match r.value {
                Value::Int(v) => Some(v),
                _ => None,
            })
            .unwrap()
    };
    let mut worst = f64::INFINITY;
    for &n in &cfg.n_list {
        for &rho in &cfg.rho_list {
            let p = bits("p3fa", n, rho);
            for scheme in ["svrf", "svrf-unicast"] {
                let s = bits(scheme, n, rho);
                ensure!(p < s, "n={n} rho={rho}: p3fa {p} bits >= {scheme} {s} bits");
                worst = worst.min(s as f64 / p as f64);
            }
        }
    }

    let phi = |n: usize, rho: usize| {
        cells
            .iter()
            .find(|c| c.n == n && c.rho == rho)
            .and_then(|c| c.phi_threshold)
            .ok_or(format!("no threshold for n={n} rho={rho}"))
    };
    let defaults = SweepConfig::default();
    for &n in &defaults.n_list {
        for w in defaults.rho_list.windows(2) {
            let (lo, hi) = (phi(n, w[0])?, phi(n, w[1])?);
            ensure!(
                hi > lo,
                "n={n}: threshold {hi} at rho={} not above {lo} at rho={}",
                w[1],
                w[0]
            );
        }
    }
    for &rho in &defaults.rho_list {
        for w in defaults.n_list.windows(2) {
            let (small, large) = (phi(w[0], rho)?, phi(w[1], rho)?);
            ensure!(
                large < small,
                "rho={rho}: threshold {large} at n={} not below {small} at n={}",
                w[1],
                w[0]
            );
        }
    }
    Ok(format!(
        "phi=1: p3fa smaller on all 16 cells (min svrf/p3fa {worst:.2}); threshold rho=16..1024 at n=2^8: {:.2}..{:.2}, at n=2^20: {:.2}..{:.2}",
        phi(1 << 8, 16)?,
        phi(1 << 8, 1024)?,
        phi(1 << 20, 16)?,
        phi(1 << 20, 1024)?
    ))
}

fn c8_time(cells: &[TimeCell]) -> Outcome {
    let mut min_ratio = f64::INFINITY;
    for c in cells {
        for (phi, p, s, _) in &c.points {
            let r = s.latency.total_ns / p.latency.total_ns;
            ensure!(r >= 1.0, "n={} rho={} phi={phi}: speedup {r:.3}", c.n, c.rho);
            min_ratio = min_ratio.min(r);
        }
        let (_, p, _, _) = c.at(1.0).unwrap();
        let r = c.unicast.0.latency.total_ns / p.latency.total_ns;
        ensure!(r >= 1.0, "n={} rho={}: unicast speedup {r:.3}", c.n, c.rho);
        min_ratio = min_ratio.min(r);
    }
    let defaults = SweepConfig::default();
    for &n in &defaults.n_list {
        let ratios: Vec<f64> = defaults
            .rho_list
            .iter()
            .map(|&rho| {
                let c = cells.iter().find(|c| c.n == n && c.rho == rho).unwrap();
                c.speedup_vs_svrf(rho as f64 / 2.0).unwrap()
            })
            .collect();
        ensure!(
            ratios.windows(2).all(|w| w[1] > w[0]),
            "n={n}: speedups at phi=rho/2 not increasing: {ratios:?}"
        );
    }
    let c = cells.iter().find(|c| c.n == 1 << 12 && c.rho == 16).unwrap();
    let threshold = c.phi_threshold.ok_or("no threshold at rho=16, n=2^12")?;
    let at_threshold = c.speedup_vs_svrf(threshold).unwrap();
    let at_one = c.speedup_vs_svrf(1.0).unwrap();
    ensure!(
        at_threshold >= 10.0,
        "rho=16 n=2^12: multicast speedup {at_threshold:.2} at phi={threshold:.2}"
    );
    Ok(format!(
        "min speedup {min_ratio:.2}; rho=16 n=2^12 multicast speedup {at_threshold:.2} at equal-space phi={threshold:.2} ({at_one:.2} at phi=1, {:.2} at phi=rho/2)",
        c.speedup_vs_svrf(8.0).unwrap()
    ))
}

fn c9_broadcast(cells: &[TimeCell]) -> Outcome {
    let mut min_ratio = f64::INFINITY;
    for c in cells {
        let (_, p, _, _) = c.at(c.rho as f64).unwrap();
        let unicast = &c.unicast.0;
        ensure!(
            p.latency.total_ns < unicast.latency.total_ns,
            "n={} rho={}: broadcast {:.1} ns vs unicast {:.1} ns",
            c.n,
            c.rho,
            p.latency.total_ns,
            unicast.latency.total_ns
        );
        min_ratio = min_ratio.min(unicast.latency.total_ns / p.latency.total_ns);
    }
    Ok(format!(
        "{} cells, svrf unicast / p3fa broadcast >= {min_ratio:.2}",
        cells.len()
    ))
}

fn c10_determinism() -> Outcome {
    let cfg = SweepConfig::parse("n_list = 2^8, 2^12", None).unwrap();
    let space = |c: &SweepConfig| {
        run_space_sweep(c)
            .map(|mut r| sweep::to_csv(&mut r))
            .map_err(|e| e.to_string())
    };
    let time = |c: &SweepConfig| {
        run_time_sweep(c)
            .map(|mut r| sweep::to_csv(&mut r))
            .map_err(|e| e.to_string())
    };
    let (s1, s2) = (space(&cfg)?, space(&cfg)?);
    ensure!(s1 == s2, "space-sweep output differs between runs");
    let (t1, t2) = (time(&cfg)?, time(&cfg)?);
    ensure!(t1 == t2, "time-sweep output differs between runs");
    ensure!(
        s1.starts_with(sweep::CSV_HEADER) && t1.starts_with(sweep::CSV_HEADER),
        "missing header"
    );
    Ok(format!(
        "space-sweep {} bytes, time-sweep {} bytes, identical across runs",
        s1.len(),
        t1.len()
    ))
}

fn report(id: u32, name: &str, outcome: Outcome, elapsed: Duration) -> bool {
    let (status, detail, pass) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!(
        "criterion {id:>2} {status} {name}: {detail} [{:.1}s]",
        elapsed.as_secs_f64()
    );
    pass
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let outcome = f();
    (outcome, start.elapsed())
}

fn main() -> ExitCode {
    let mut all = true;
    let simple: [(u32, &str, fn() -> Outcome); 6] = [
        (1, "worked example construction", c1_construction),
        (2, "worked example query", c2_query),
        (3, "error-free membership", c3_membership),
        (4, "CRT oracle equivalence", c4_crt_oracle),
        (5, "insert/remove round trip", c5_roundtrip),
        (6, "divider cycle formula", c6_divider),
    ];
    for (id, name, f) in simple {
        let (o, t) = timed(f);
        all &= report(id, name, o, t);
    }

    let start = Instant::now();
    let cells = time_cells(&SweepConfig::default());
    let sweep_time = start.elapsed();
    match cells {
        Ok(cells) => {
            let (o, t) = timed(|| c7_space(&cells));
            all &= report(7, "space trend and threshold monotonicity", o, t + sweep_time);
            let (o, t) = timed(|| c8_time(&cells));
            all &= report(8, "latency speedup trend", o, t);
            let (o, t) = timed(|| c9_broadcast(&cells));
            all &= report(9, "broadcast beats unicast SVRF", o, t);
        }
        Err(e) => {
            for (id, name) in [
                (7, "space trend"),
                (8, "latency speedup trend"),
                (9, "broadcast beats unicast SVRF"),
            ] {
                all &= report(id, name, Err(format!("default-grid sweep failed: {e}")), sweep_time);
            }
        }
    }
    let (o, t) = timed(c10_determinism);
    all &= report(10, "sweep determinism", o, t);

    if all {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
