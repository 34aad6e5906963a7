//! Optimal transmit-power allocation for a downlink distributed antenna
//! system (DAS) doing simultaneous wireless information and power transfer
//! (SWIPT), where every remote antenna unit (RAU) harvests energy and trades
//! its surplus or deficit with a smart grid that must never run a trade
//! deficit.
//!
//! The crate is organised around the solve pipeline:
//!
//! * [`channel`] draws Rayleigh channels, applies distributed MRT and
//!   reduces each RAU to a scalar effective gain.
//! * [`allocator`] computes the globally optimal power vector: the
//!   full-power test for the grid-profitable case and the double-threshold
//!   search with full-/zero-power elimination for the grid-neutral case.
//! * [`metrics`] turns the beamformed objective into harvested energy, rate
//!   and the power-splitting ratio.
//! * [`baselines`] holds the greedy and water-filling reference policies.
//! * [`oracle`] is an independent grid/ascent solver used for verification.
//! * [`audit`] checks an allocation against the optimality structure.
//! * [`harness`] reads instance files and runs Monte-Carlo experiments.
//!
//! Trial-level loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod allocator;
pub mod audit;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod par;

pub use allocator::{optimal_allocation, Allocation, Instance, RauClass, Scenario, TradePlan};
pub use error::{Error, Result};
