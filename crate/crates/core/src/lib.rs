//! Hidden causes of binary data under a noisy-OR likelihood.
//!
//! Observations X (N×T) are explained by a bipartite graph Z (N×K) between
//! hidden causes and observed variables and by the causes' activations
//! Y (K×T). Z gets an Indian buffet process prior, so the number of causes
//! is inferred. Two samplers are provided: a collapsed Gibbs sampler for
//! the infinite model ([`gibbs`]) and a reversible-jump sampler for the
//! finite model ([`rjmcmc`]). Hyperparameter updates live in [`hyper`].

pub mod chain;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod hyper;
pub mod ibp;
pub mod matrix;
pub mod model;
pub mod rjmcmc;
pub mod sampling;
pub mod state;

pub use chain::{run_chain, ChainConfig, ChainOutput, InitMode, SamplerKind, TraceRecord};
pub use error::{Error, Result};
pub use matrix::BinaryMatrix;
pub use model::{ModelParams, ZPrior};
pub use state::{SamplerState, StateSnapshot};
