//! Deterministic virtual-time simulator for steering plan-then-act policies.
//!
//! A simulated reasoning policy writes a short textual plan, then emits a
//! variable-length action sequence terminated by a `Think` token. The steering
//! loop samples K such sequences on K environment replicas, verifies each
//! predicted outcome against the plan as soon as it finishes, and executes the
//! first one that verifies. Every cost accrues on a virtual clock so latency
//! figures are reproducible bit-for-bit.

pub mod annotate;
pub mod bench;
pub mod clock;
pub mod policy;
pub mod rng;
pub mod rollout;
pub mod stats;
pub mod steer;
pub mod taskworld;
pub mod verify;
