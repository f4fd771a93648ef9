//! Simulator for chain-coupled N-level systems driven by STIRAP and
//! fractional-STIRAP pulse protocols, together with the optical
//! sequential-logic machines built on them: toggle and delay flip-flops and
//! serial-in serial-out shift registers encoded in populations and in
//! coherences.
//!
//! All quantities are in reduced units: the pulse width σ is the time unit
//! and 1/σ the frequency unit.

pub mod analysis;
pub mod chain;
pub mod error;
pub mod logic;
pub mod propagator;
pub mod pulses;
pub mod scenario;

pub use error::Error;
