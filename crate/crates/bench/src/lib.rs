// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Shared fixtures for the forwarding benchmarks.

use primefwd::{gen_workload, KeyDirectory, Mft, Mode, P3faFilter, PrimeKey, SvrfFilter, WorkloadSpec};

pub struct Fixture {
    pub mft: Mft,
    pub p3fa: P3faFilter,
    pub p3fa_keys: Vec<PrimeKey>,
    pub svrf: SvrfFilter,
    pub svrf_keys: Vec<PrimeKey>,
}

impl Fixture {
    /// Builds both filters over one generated table.
    ///
    /// Panics on invalid parameters; benchmark grids are fixed.
    pub fn new(n: usize, rho: usize, phi: f64, seed: u64) -> Self {
        let mft = gen_workload(&WorkloadSpec::new(n, rho, phi, seed)).expect("workload");
        let mut pdir = KeyDirectory::default();
        let p3fa = P3faFilter::construct(&mft, &mut pdir).expect("p3fa construct");
        let mut sdir = KeyDirectory::default();
        let svrf = SvrfFilter::construct(&mft, &mut sdir, Mode::Multicast).expect("svrf construct");
        let keys = |dir: &KeyDirectory| {
            mft.entries()
                .iter()
                .map(|e| dir.lookup_key(&e.flow).expect("member key").clone())
                .collect()
        };
        let (p3fa_keys, svrf_keys) = (keys(&pdir), keys(&sdir));
        Fixture {
            mft,
            p3fa,
            p3fa_keys,
            svrf,
            svrf_keys,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "n={}/rho={}/phi={:.1}",
            self.mft.len(),
            self.p3fa.rho(),
            self.mft.egress_diversity().unwrap_or(0.0)
        )
    }
}
