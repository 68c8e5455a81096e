//! Search-planning engine for missing-person cases.
//!
//! The engine turns a structured case record into ranked, time-windowed
//! search products: a masked geographic grid carries a belief map forward
//! through energy-weighted day/night Markov transitions; the resulting
//! per-horizon fields are summarized as sector masses, containment rings,
//! and hotspot concentration; a greedy reward-shaped optimizer selects
//! circular search zones per window; and a plausibility reviewer reweights
//! zone priorities. All artifacts serialize canonically, so identical
//! inputs always produce byte-identical outputs.

pub mod belief;
pub mod canonical;
pub mod case;
pub mod config;
pub mod error;
pub mod export;
pub mod forecast;
pub mod geo;
pub mod grid;
pub mod layers;
pub mod metrics;
pub mod pipeline;
pub mod plan;
pub mod products;
pub mod qa;
pub mod transition;
pub mod zones;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{CoreError, Result};
