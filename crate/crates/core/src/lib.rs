//! Runtime certification of consensus safety.
//!
//! Per-node certification agents check, round by round, whether the
//! inputs a consensus implementation hands them satisfy agreement and
//! validity, after certifying that the spanning tree they evaluate over
//! is genuinely a tree and that node IDs are unique. At least one node
//! signals an error whenever a checked predicate is violated; no node
//! signals when it holds. Everything runs on a deterministic, seeded
//! discrete-event simulator with fail-stop fault injection, and runs are
//! classified against a centralized ground-truth oracle.
//!
//! Module map:
//! - [`field`], [`digest`], [`types`], [`wire`]: domain types, the prime
//!   field, value digesting and the byte-exact message codec.
//! - [`structure`], [`uniqueness`], [`consensus`]: the three certificates
//!   as pure per-node step functions.
//! - [`tree`], [`agent`]: tree builders and the per-node state machine
//!   that sequences the rounds.
//! - [`simnet`], [`trace`]: the simulator, the run trace and the byte
//!   meter.
//! - [`workload`], [`report`], [`suites`]: scenarios with bug injection,
//!   the ground-truth oracle, run classification and batch drivers.

pub mod agent;
pub mod consensus;
pub mod digest;
pub mod field;
pub mod report;
pub mod simnet;
pub mod structure;
pub mod suites;
pub mod trace;
pub mod tree;
pub mod types;
pub mod uniqueness;
pub mod wire;

pub use agent::{Agent, AgentConfig, Slot};
pub use consensus::ConsensusInput;
pub use digest::{digest_value, Digest, DigestWidth, WireValue};
pub use field::{field_mul_fold, FieldElement, MODULUS};
pub use report::{Classification, Property, Report};
pub use simnet::{RunPlan, SimConfig};
pub use trace::{meter, Meter, Trace};
pub use tree::{Adjacency, TreePolicy};
pub use types::{ErrorKind, ErrorSignal, NodeId, TreeInput};
pub use uniqueness::UniquenessMode;
pub use wire::{CertMessage, WireError};
pub use workload::{Bug, RunOptions, RunOutcome, Scenario, ScenarioError};

pub mod workload;
