//! Decoy-state finite-key analysis and event simulation for three-user
//! measurement-device-independent conference key agreement.
//!
//! The pipeline runs from a channel model ([`SystemModel`]) through the
//! GHZ analyzer ([`analyzer`]) and the expected-gain forward model
//! ([`forward`]) or the Monte-Carlo simulator ([`sim`]) to a
//! [`CountLedger`], and from there through the decoy estimators
//! ([`decoy`]) and the finite-size analysis ([`finite`]) to a
//! [`KeyRateReport`]. [`optimize`] searches protocol parameters.

pub mod analyzer;
pub mod chernoff;
pub mod config;
pub mod decoy;
mod error;
pub mod finite;
pub mod forward;
pub mod ledger;
pub mod lp;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod sim;

pub use config::{load_config, Config};
pub use error::{Error, Result};
pub use ledger::{load_counts, load_ledger, CountLedger};
pub use model::{
    AnalysisConfig, Basis, Combo, DecoyEstimate, GainEntry, GainMode, GainTable, KeyRateReport, PulseModel, Source,
    SourceSpec, SystemModel,
};
