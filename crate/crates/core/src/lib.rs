//! Secure key rate of four-intensity decoy-state round-robin DPS quantum key
//! distribution when the source intensities fluctuate within known bounds.
//!
//! The pipeline: [`source`] turns intensity error radii into photon-number
//! probability intervals, [`channel`] produces the observed gains and QBERs,
//! [`estimator`] lower-bounds the vacuum, single- and two-photon gains of the
//! signal, and [`keyrate`] combines them into a rate per pulse. [`optimizer`]
//! searches intensities and runs sweeps; [`oracle`] computes exact expected
//! tallies under explicit error patterns to certify the bounds.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod csv;
pub mod error;
pub mod estimator;
pub mod keyrate;
pub mod math;
pub mod optimizer;
pub mod oracle;
pub mod source;

pub use channel::{ChannelParams, ChannelTemplate, ObservedStats};
pub use error::{Error, Result};
pub use estimator::{CoefficientSet, DBounds, YieldBounds};
pub use keyrate::{evaluate, KeyRateResult, RateScope};
pub use math::Probability;
pub use optimizer::{optimize_intensities, SearchConfig, SweepRecord, SweepResult};
pub use source::{EnsembleBounds, PerSource, PhotonBounds, Source, SourceEnsemble, SourceSpec};
