//! Desk-scale laboratory for treating a SHA-256 mining ASIC as a physical
//! reservoir computer.
//!
//! The crate is organised by subsystem:
//!
//! - [`infotheory`]: finite distributions, entropy, KL divergence, mutual
//!   information, independence and predictor-vs-baseline certificates.
//! - [`sha_twin`]: bit-exact SHA-256 with per-round traces, block headers,
//!   share targets and the parametric thermal timing model of a device.
//! - [`swh`]: the single-word handshake protocol: wire codec, the blocking
//!   controller, the pipelined baseline and a lossy channel simulator.
//! - [`reservoir`]: NARMA-10, ridge readout, timing metrics, regime
//!   classification and the voltage/frequency/difficulty sweep.
//! - [`tpf`]: early-abort filter: classifier, abort policy, energy ledger.
//! - [`vbm`]: serial versus prefetching mining loop simulator.
//! - [`puf`]: timing-profile enrollment, verification and witnesses.
//! - [`report`]: tidy comma-separated tables with a re-run manifest.
//!
//! Every experiment is a pure function of its configuration and seed.

#![forbid(unsafe_code)]
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod infotheory;
pub mod kv;
pub mod puf;
pub mod report;
pub mod reservoir;
pub mod rng;
pub mod sha_twin;
pub mod swh;
pub mod tpf;
pub mod vbm;

pub use infotheory::{FiniteDistribution, JointRun, Predictor};
pub use sha_twin::{BlockHeader, DeviceProfile, LeakMode, ThermalState, TimingSample, Twin};
pub use swh::{ChannelConfig, HandshakeRecord, JobMessage, ShareMessage};
pub use tpf::{AbortPolicy, Classifier, ConfusionMatrix, EnergyLedger};
pub use vbm::{LoopParams, MiningLoopStats};

/// Crate version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
