// SPDX-License-Identifier: Apache-2.0 OR MIT

use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use proptest::prelude::*;

use primefwd::keyspace::{next_prime, AllocationPolicy, PrimeRun};
use primefwd::p3fa::memory_bits_analytic;
use primefwd::svrf::{FractionalKeys, FractionalSvrf};
use primefwd::sweep::{p3fa_footprint, KeyCache, SweepConfig};
use primefwd::{
    gen_workload, product, FlowId, KeyDirectory, Mode, Opb, P3faFilter, PrimeKey, SvrfFilter, WorkloadSpec,
};

fn workload() -> impl Strategy<Value = WorkloadSpec> {
    (1usize..120, 2usize..24, any::<u64>())
        .prop_flat_map(|(n, rho, seed)| (Just(n), Just(rho), 1.0..=rho as f64, Just(seed)))
        .prop_map(|(n, rho, phi, seed)| WorkloadSpec::new(n, rho, phi, seed))
}

/// Primes above every key the directory holds.
fn fresh_primes(dir: &KeyDirectory, count: usize) -> Vec<BigUint> {
    let mut next = dir.iter().map(|(_, k)| k.clone()).max().unwrap_or_default() + 1u32;
    (0..count)
        .map(|_| {
            let p = next_prime(&next);
            next = &p + 1u32;
            p
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_hits_target_diversity(spec in workload()) {
        let mft = gen_workload(&spec).unwrap();
        prop_assert_eq!(mft.len(), spec.n);
        let phi = mft.egress_diversity().unwrap();
        prop_assert!((phi - spec.phi_target).abs() <= 1.0 / spec.n as f64 + 1e-9, "{} vs {}", phi, spec.phi_target);
        prop_assert!(mft.entries().iter().all(|e| e.opb.popcount() >= 1));
    }

    #[test]
    fn p3fa_members_exact_and_fresh_keys_miss(spec in workload()) {
        let mft = gen_workload(&spec).unwrap();
        let mut dir = KeyDirectory::default();
        let f = P3faFilter::construct(&mft, &mut dir).unwrap();
        for e in mft.entries() {
            let key = dir.lookup_key(&e.flow).unwrap();
            prop_assert_eq!(&f.query(key, None).unwrap().opb, &e.opb);
        }
        for p in fresh_primes(&dir, 20) {
            prop_assert!(f.query_value(&p, None).unwrap().opb.is_empty());
        }
    }

    #[test]
    fn p3fa_scalars_are_squarefree_products(spec in workload()) {
        let mft = gen_workload(&spec).unwrap();
        let mut dir = KeyDirectory::default();
        let f = P3faFilter::construct(&mft, &mut dir).unwrap();
        for s in 1..=spec.rho {
            let keys: Vec<BigUint> = f.port_keys(s).iter().cloned().collect();
            prop_assert_eq!(f.scalar(s), &product(&keys));
            for k in &keys {
                prop_assert!(!(f.scalar(s) % (k * k)).is_zero());
            }
        }
    }

    #[test]
    fn p3fa_construct_equals_insert_fold(spec in workload()) {
        let mft = gen_workload(&spec).unwrap();
        let mut dir = KeyDirectory::default();
        let built = P3faFilter::construct(&mft, &mut dir).unwrap();
        let mut folded = P3faFilter::new(spec.rho);
        for e in mft.entries() {
            folded.insert(dir.lookup_key(&e.flow).unwrap(), &e.opb).unwrap();
        }
        prop_assert_eq!(built.to_dump(), folded.to_dump());
        prop_assert_eq!(P3faFilter::from_dump(&built.to_dump(), &dir).unwrap(), built);
    }

    #[test]
    fn p3fa_analytic_memory_within_one_bit_per_port(spec in workload()) {
        let mft = gen_workload(&spec).unwrap();
        let mut dir = KeyDirectory::default();
        let exact = P3faFilter::construct(&mft, &mut dir).unwrap().memory_bits();
        let estimate = memory_bits_analytic(&mft, &mut dir).unwrap();
        prop_assert!(exact.abs_diff(estimate) <= spec.rho as u64);

        let cache = KeyCache::new();
        let built = SweepConfig { seed: spec.seed, ..SweepConfig::default() };
        let analytic = SweepConfig { analytic_threshold: 0, ..built.clone() };
        let a = p3fa_footprint(spec.n, spec.rho, spec.phi_target, &built, &cache).unwrap();
        let b = p3fa_footprint(spec.n, spec.rho, spec.phi_target, &analytic, &cache).unwrap();
        prop_assert_eq!(a.memory_bits, exact);
        prop_assert!(a.memory_bits.abs_diff(b.memory_bits) <= spec.rho as u64);
    }

    #[test]
    fn svrf_members_exact_and_fresh_keys_miss(spec in workload()) {
        let mft = gen_workload(&spec).unwrap();
        let mut dir = KeyDirectory::default();
        let f = SvrfFilter::construct(&mft, &mut dir, Mode::Multicast).unwrap();
        prop_assert!(f.m_crt() < f.m_cp());
        for e in mft.entries() {
            let key = dir.lookup_key(&e.flow).unwrap();
            prop_assert_eq!(f.query(key), Some(e.opb.to_value()));
        }
        for p in fresh_primes(&dir, 20) {
            prop_assert_eq!(f.query_value(&p).unwrap(), None);
        }
    }

    #[test]
    fn svrf_unicast_round_trip(n in 1usize..80, rho in 2usize..40, seed: u64) {
        let mft = gen_workload(&WorkloadSpec::new(n, rho, 1.0, seed)).unwrap();
        let mut dir = KeyDirectory::default();
        let f = SvrfFilter::construct(&mft, &mut dir, Mode::Unicast).unwrap();
        for e in mft.entries() {
            let port = e.opb.ports().next().unwrap();
            prop_assert_eq!(f.query(dir.lookup_key(&e.flow).unwrap()), Some(BigUint::from(port)));
        }
        prop_assert_eq!(SvrfFilter::from_dump(&f.to_dump(), &dir).unwrap(), f);
    }

    #[test]
    fn svrf_insert_order_does_not_matter(spec in workload(), rot in 0usize..120) {
        let mft = gen_workload(&spec).unwrap();
        let mut dir = KeyDirectory::default();
        let built = SvrfFilter::construct(&mft, &mut dir, Mode::Multicast).unwrap();
        let mut entries: Vec<_> = mft.entries().to_vec();
        let len = entries.len();
        entries.rotate_left(rot % len);
        let mut folded = SvrfFilter::new(spec.rho, Mode::Multicast);
        for e in entries.iter().rev() {
            folded.insert(dir.lookup_key(&e.flow).unwrap(), &e.opb.to_value()).unwrap();
        }
        prop_assert_eq!(folded.to_dump(), built.to_dump());
    }

    #[test]
    fn crt_matches_brute_force(pairs in prop::collection::vec((0usize..25, any::<u32>()), 1..4)) {
        // Keys up to 101 keep m_cp below 10^6 with three members.
        let primes: Vec<u64> = PrimeRun::starting_at(3).take(25).collect();
        let mut f = SvrfFilter::new(32, Mode::Multicast);
        let mut members = Vec::new();
        for (i, v) in pairs {
            let k = primes[i];
            if members.iter().any(|m: &(u64, u64)| m.0 == k) {
                continue;
            }
            f.insert(&PrimeKey::try_from(k).unwrap(), &BigUint::from(v as u64 % k)).unwrap();
            members.push((k, v as u64 % k));
        }
        let m_cp: u64 = members.iter().map(|m| m.0).product();
        prop_assert_eq!(f.m_cp(), &BigUint::from(m_cp));
        let brute = (0..m_cp).find(|x| members.iter().all(|&(k, v)| x % k == v)).unwrap();
        prop_assert_eq!(f.m_crt(), &BigUint::from(brute));
    }

    #[test]
    fn fractional_members_exact(spec in workload(), groups in 1usize..9) {
        let mft = gen_workload(&spec).unwrap();
        let mut keys = FractionalKeys::new(groups);
        let f = FractionalSvrf::construct(&mft, &mut keys, Mode::Multicast).unwrap();
        for e in mft.entries() {
            prop_assert_eq!(f.query(&e.flow, &keys).unwrap(), Some(e.opb.to_value()));
        }
        prop_assert_eq!(FractionalSvrf::from_dump(&f.to_dump(), &keys).unwrap(), f);
    }

    #[test]
    fn directory_is_bijective_and_deterministic(ops in prop::collection::vec((0usize..30, any::<bool>()), 1..120), seed: u64) {
        let run = || {
            let mut dir = KeyDirectory::new(AllocationPolicy::RandomWithin { span: 500 }, seed);
            let min = BigUint::from(2u32);
            for &(flow, release) in &ops {
                let flow = FlowId::synthetic(flow);
                if release {
                    let _ = dir.release_key(&flow);
                } else if !dir.contains_flow(&flow) {
                    dir.allocate_key(flow, &min).unwrap();
                }
            }
            dir
        };
        let dir = run();
        let keys: HashSet<&BigUint> = dir.iter().map(|(_, k)| k).collect();
        prop_assert_eq!(keys.len(), dir.len());
        for (flow, key) in dir.iter() {
            prop_assert_eq!(dir.lookup_key(flow).unwrap().value(), key);
            prop_assert_eq!(dir.flow_of(key), Some(flow));
        }
        prop_assert_eq!(run().to_dump(), dir.to_dump());
    }

    #[test]
    fn remove_inverts_insert(spec in workload(), extra in 1usize..6, seed: u64) {
        let mft = gen_workload(&spec).unwrap();
        let mut dir = KeyDirectory::default();
        let mut p = P3faFilter::construct(&mft, &mut dir).unwrap();
        let mut s = SvrfFilter::construct(&mft, &mut KeyDirectory::default(), Mode::Multicast).unwrap();
        let (p0, s0) = (p.to_dump(), s.to_dump());
        let opb = gen_workload(&WorkloadSpec::new(1, spec.rho, spec.phi_target, seed)).unwrap().entries()[0].opb.clone();
        for k in fresh_primes(&dir, extra) {
            let key = PrimeKey::new(k).unwrap();
            p.insert(&key, &opb).unwrap();
            p.remove(&key, &opb).unwrap();
        }
        let top = s.members().keys().max().cloned().unwrap();
        let mut next = top + 1u32 + seed % 1000;
        for _ in 0..extra {
            let key = PrimeKey::new(next_prime(&next)).unwrap();
            next = key.value() + 1u32;
            s.insert(&key, &opb.to_value()).unwrap();
            prop_assert_eq!(s.remove(&key).unwrap(), opb.to_value());
        }
        prop_assert_eq!(p.to_dump(), p0);
        prop_assert_eq!(s.to_dump(), s0);
    }
}

#[test]
fn unit_scalars_cost_one_bit() {
    let f = P3faFilter::new(5);
    assert_eq!(f.memory_bits(), 5);
    assert!(f.scalars().iter().all(BigUint::is_one));
    assert_eq!(SvrfFilter::new(5, Mode::Multicast).memory_bits(), 2);
    assert!(Opb::empty(5).is_empty());
}
