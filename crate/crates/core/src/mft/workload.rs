// SPDX-License-Identifier: Apache-2.0 OR MIT

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MfEntry, Mft, MftError, Opb};
use crate::keyspace::FlowId;

/// Knobs for a synthetic table: `n` entries over `rho` ports whose mean
/// popcount is `phi_target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadSpec {
    pub n: usize,
    pub rho: usize,
    pub phi_target: f64,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn new(n: usize, rho: usize, phi_target: f64, seed: u64) -> Self {
        WorkloadSpec {
            n,
            rho,
            phi_target,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), MftError> {
        if self.n < 1 {
            return Err(MftError::InvalidSpec("n must be at least 1".into()));
        }
        if self.rho < 2 {
            return Err(MftError::InvalidSpec("rho must be at least 2".into()));
        }
        if !(self.phi_target.is_finite() && self.phi_target >= 1.0 && self.phi_target <= self.rho as f64) {
            return Err(MftError::InvalidSpec(format!(
                "phi={} outside [1, {}]",
                self.phi_target, self.rho
            )));
        }
        Ok(())
    }

    /// Number of entries drawn at `ceil(phi)`; the rest get `floor(phi)`.
    fn high_count(&self) -> usize {
        let floor = self.phi_target.floor();
        let total = self.n as f64 * self.phi_target;
        // Guard against n*phi landing a hair above an integer.
        let total = (total - 1e-9 * total.max(1.0)).ceil();
        (total - self.n as f64 * floor).max(0.0) as usize
    }
}

/// Ports chosen for one entry. Dense entries are drawn as the complement
/// of a small excluded set, which keeps sampling cost at `min(c, rho - c)`.
#[derive(Debug, Clone, Copy)]
pub enum PortDraw<'a> {
    Only(&'a [u32]),
    AllBut(&'a [u32]),
}

impl PortDraw<'_> {
    pub fn to_opb(&self, rho: usize) -> Opb {
        match *self {
            PortDraw::Only(ports) => {
                let mut opb = Opb::empty(rho);
                ports.iter().for_each(|&p| opb.set(p as usize));
                opb
            }
            PortDraw::AllBut(excluded) => {
                let mut opb = Opb::full(rho);
                excluded.iter().for_each(|&p| opb.clear(p as usize));
                opb
            }
        }
    }
}

/// Entry-by-entry generator behind [`gen_workload`]. Sweeps at large `n`
/// consume draws directly instead of materialising the table.
#[derive(Debug, Clone)]
pub struct WorkloadStream {
    spec: WorkloadSpec,
    high: Vec<bool>,
    perm: Vec<u32>,
    rng: ChaCha8Rng,
    next: usize,
}

impl WorkloadStream {
    pub fn new(spec: WorkloadSpec) -> Result<Self, MftError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let high_count = spec.high_count();
        let mut high = vec![false; spec.n];
        high[..high_count].iter_mut().for_each(|h| *h = true);
        if high_count > 0 && high_count < spec.n {
            high.shuffle(&mut rng);
        }
        Ok(WorkloadStream {
            spec,
            high,
            perm: (1..=spec.rho as u32).collect(),
            rng,
            next: 0,
        })
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    /// Next entry's popcount and port draw, or `None` after `n` entries.
    pub fn next_draw(&mut self) -> Option<(usize, PortDraw<'_>)> {
        let i = self.next;
        if i >= self.spec.n {
            return None;
        }
        self.next += 1;
        let floor = self.spec.phi_target.floor() as usize;
        let c = if self.high[i] { floor + 1 } else { floor };
        let rho = self.spec.rho;
        let k = c.min(rho - c);
        // Partial Fisher-Yates; the permutation carries over between entries,
        // which keeps each prefix a uniform k-subset.
        for j in 0..k {
            let r = self.rng.gen_range(j..rho);
            self.perm.swap(j, r);
        }
        let drawn = &self.perm[..k];
        let draw = if c == k {
            PortDraw::Only(drawn)
        } else {
            PortDraw::AllBut(drawn)
        };
        Some((c, draw))
    }
}

/// Synthetic table with exactly `n` entries and mean popcount within `1/n`
/// of `phi_target`. Flows are named `flow-000001`, `flow-000002`, ...
pub fn gen_workload(spec: &WorkloadSpec) -> Result<Mft, MftError> {
    let mut stream = WorkloadStream::new(*spec)?;
    let mut mft = Mft::new(spec.rho);
    let mut index = 0;
    while let Some((_, draw)) = stream.next_draw() {
        index += 1;
        let opb = draw.to_opb(spec.rho);
        mft.add_entry(MfEntry::new(FlowId::synthetic(index), opb))?;
    }
    Ok(mft)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unicast_forced() {
        let mft = gen_workload(&WorkloadSpec::new(4, 4, 1.0, 7)).unwrap();
        assert_eq!(mft.len(), 4);
        assert!(mft.entries().iter().all(|e| e.opb.popcount() == 1));
    }

    #[test]
    fn fractional_mixture() {
        let mft = gen_workload(&WorkloadSpec::new(4, 4, 2.5, 7)).unwrap();
        let mut counts: Vec<usize> = mft.entries().iter().map(|e| e.opb.popcount()).collect();
        counts.sort();
        assert_eq!(counts, vec![2, 2, 3, 3]);
    }

    #[test]
    fn integer_phi_exact() {
        let mft = gen_workload(&WorkloadSpec::new(256, 16, 8.0, 1)).unwrap();
        assert_eq!(mft.egress_diversity().unwrap(), 8.0);
        assert!(mft.entries().iter().all(|e| e.opb.popcount() == 8));
    }

    #[test]
    fn broadcast_and_near_broadcast() {
        let mft = gen_workload(&WorkloadSpec::new(10, 8, 8.0, 3)).unwrap();
        assert!(mft.entries().iter().all(|e| e.opb == Opb::full(8)));
        let mft = gen_workload(&WorkloadSpec::new(10, 8, 7.5, 3)).unwrap();
        assert_eq!(mft.egress_diversity().unwrap(), 7.5);
    }

    #[test]
    fn flow_names() {
        let mft = gen_workload(&WorkloadSpec::new(2, 4, 1.0, 0)).unwrap();
        assert_eq!(mft.entries()[0].flow.to_string(), "flow-000001");
        assert_eq!(mft.entries()[1].flow.to_string(), "flow-000002");
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            WorkloadSpec::new(0, 4, 1.0, 0),
            WorkloadSpec::new(4, 1, 1.0, 0),
            WorkloadSpec::new(4, 4, 0.5, 0),
            WorkloadSpec::new(4, 4, 4.5, 0),
            WorkloadSpec::new(4, 4, f64::NAN, 0),
        ] {
            assert!(matches!(gen_workload(&spec), Err(MftError::InvalidSpec(_))), "{spec:?}");
        }
    }

    #[test]
    fn same_spec_same_bytes() {
        let spec = WorkloadSpec::new(300, 32, 5.3, 11);
        assert_eq!(
            gen_workload(&spec).unwrap().to_text(),
            gen_workload(&spec).unwrap().to_text()
        );
        let other = WorkloadSpec { seed: 12, ..spec };
        assert_ne!(
            gen_workload(&spec).unwrap().to_text(),
            gen_workload(&other).unwrap().to_text()
        );
    }
}
