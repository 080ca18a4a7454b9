//! Deterministic discrete-event simulator of a FIFO exchange, with a
//! bounded temporal-fairness auditor.
//!
//! The pieces compose bottom-up: [`kernel`] drives events on a nanosecond
//! clock, [`infra`] models the network between participants and the
//! matching engine in [`book`], [`participants`] race for opportunities,
//! [`auditor`] scores the outcome, and [`scenario`] wires it all together
//! from a JSON config.

pub mod auditor;
pub mod book;
pub mod infra;
pub mod kernel;
pub mod participants;
pub mod remediation;
pub mod rng;
pub mod scenario;
pub mod time;

pub use time::SimTime;
