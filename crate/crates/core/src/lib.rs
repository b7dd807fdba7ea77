//! Many-short-chains (MSC) Monte Carlo estimation.
//!
//! Estimates `∫ φ dΠ` by averaging return-time-truncated path sums of many
//! independent Markov chains whose starting points are drawn from a
//! self-normalized importance sample of `Π`.

pub mod ar;
pub mod baselines;
pub mod bounds;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod logit;
pub mod polya_gamma;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use engine::{
    build_initial_distribution, estimate_weight_second_moment, msc_estimate, run_excursion, DriftSpec,
    EngineConfig, Excursion, ModelBundle, MscResult, Observable, WeightedAtoms,
};
pub use error::{MscError, Result};
pub use rng::{derive_stream, RngStream};
