//! Combination tests for independent p-values.
//!
//! Provides the classic combiners (Fisher, Stouffer, minP), adaptive and
//! truncated Fisher variants, Cauchy-type and heavy-tailed combiners, the
//! Fisher ensemble tests FE and FE_CS, Monte Carlo calibration with cached
//! reference tables, power and exact-slope simulation, and a per-feature
//! meta-analysis pipeline.

pub mod combiners;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod metapipe;
pub mod nulldist;
pub mod powersim;
pub mod pvalue;
pub mod rng;
pub mod special;

pub use engine::{EnsembleCalibration, Engine, Prepared, RejectionRule, TableSettings};
pub use error::{Error, Result};
pub use nulldist::{NullTable, TableCache};
pub use pvalue::{
    Calibration, CombineResult, Direction, InputKind, Method, MethodSpec, Observation,
    OneSidedPair, PValueVector, SignedAssociation,
};
