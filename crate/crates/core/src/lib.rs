//! Slot-driven simulator for downlink heterogeneous multi-cell OFDMA networks.
//!
//! The crate models macro/femto layouts, a path-loss + shadowing + Jakes
//! fading channel, proportional-fair scheduling and three per-BS power
//! allocators: equal power (EQ), selfish water-filling (WF) and the
//! reference-user taxation scheme (REFIM) with its reduced feedback protocol.
//! A brute-force optimizer over tiny instances serves as a yardstick.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod oracle;
pub mod power;
pub mod reference;
pub mod report;
pub mod rng;
pub mod scheduling;
pub mod topology;

pub use error::{Error, Result};

/// Converts dBm to Watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
