//! Causal structure learning for binary latent variables observed through a
//! sparse measurement layer of mixed-type responses.
//!
//! The crate implements an estimate–resample–discover pipeline:
//!
//! 1. **Estimate** — fit the latent law, measurement coefficients, and
//!    dispersions by penalized Gibbs–SAEM with spectral initialization
//!    ([`saem`], [`spectral`]); the measurement graph is the support of the
//!    fitted coefficients.
//! 2. **Resample** — draw synthetic latent configurations from the fitted
//!    latent law ([`pipeline`]).
//! 3. **Discover** — run greedy equivalence search with a BDeu or BIC score
//!    on the resampled latents to recover the Markov equivalence class of
//!    the latent DAG ([`ges`]).
//!
//! Supporting modules provide exact graph algorithms ([`graphs`]), the
//! generative model and likelihoods ([`model`]), design-condition checkers
//! for measurement matrices ([`identcheck`]), and synthetic benchmark
//! generators ([`synth`]).

pub mod error;
pub mod ges;
pub mod graphs;
pub mod identcheck;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod saem;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
