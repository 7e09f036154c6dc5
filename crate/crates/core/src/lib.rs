//! Input-aware scheduling for sparse CSR aggregation kernels.
//!
//! A [`scheduler::Scheduler`] picks, per input, among SpMM and SDDMM kernel
//! variants: a roofline-style estimate shortlists candidates, short timed
//! probes on a degree-stratified row sample rank them, and a guardrail only
//! accepts a candidate that beats the reference baseline by the factor
//! `alpha`. Decisions are cached per (device, graph structure, F, op) and
//! can be persisted and replayed without probing.

pub mod attention;
pub mod cache;
pub mod csr;
pub mod env;
pub mod kernels;
pub mod scheduler;

pub use csr::{CsrMatrix, DenseMatrix};
pub use kernels::{KernelVariant, Mapping, Op};
pub use scheduler::{ProbeConfig, ScheduleDecision, Scheduler};

/// Version string baked into device signatures and cache records.
pub const ARTIFACT_VERSION: &str = concat!("autosage-", env!("CARGO_PKG_VERSION"));
