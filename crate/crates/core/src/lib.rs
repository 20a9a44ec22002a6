// SPDX-License-Identifier: Apache-2.0 OR MIT

//! Prime-product forwarding structures for multicast packet forwarding
//! engines.
//!
//! * [`p3fa`]: one product-of-primes scalar per egress port; a lookup is one
//!   modulo per port.
//! * [`svrf`]: the scalar-pair (product + CRT residue) baseline and its
//!   N-way partitioned variant.
//! * [`keyspace`]: prime generation and the flow -> key directory.
//! * [`mft`]: forwarding tables, egress diversity, synthetic workloads.
//! * [`costmodel`]: divider cycle counts and per-packet latency.
//! * [`sweep`]: the space/latency/threshold experiments behind the CLI.

mod arith;
pub mod costmodel;
pub mod keyspace;
pub mod mft;
pub mod p3fa;
pub mod svrf;
pub mod sweep;

pub use arith::product;
pub use costmodel::{divider_cycles, HwParams, LatencyEstimate};
pub use keyspace::{FlowId, KeyDirectory, PrimeKey};
pub use mft::{gen_workload, MfEntry, Mft, Opb, WorkloadSpec};
pub use p3fa::P3faFilter;
pub use svrf::{FractionalSvrf, Mode, SvrfFilter};
