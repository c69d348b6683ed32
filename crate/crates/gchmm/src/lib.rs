//! Epidemic inference on dynamic contact networks.
//!
//! A library for simulating susceptible-infectious-susceptible diffusion
//! over per-day contact graphs and inferring who was infected when, from
//! partially observed symptom reports. Each person runs a binary hidden
//! Markov chain whose transition couples to their contacts' states, with
//! optional per-person infection parameters generated from covariates
//! through a link function.
//!
//! Modules:
//! - [`data`]: tensors, contact networks, loaders, PCA preprocessing.
//! - [`sim`]: the generative model and forward simulation.
//! - [`bp`]: factor-graph belief propagation (sum-product marginals and
//!   max-product decoding).
//! - [`gbw`]: EM over belief-propagation marginals with count-based
//!   parameter updates.
//! - [`gibbs`]: blocked Gibbs sampling with auxiliary infection-source
//!   variables.
//! - [`bgem`]: burn-in Gibbs EM for covariate-linked parameter estimation.
//! - [`eval`]: metrics, forecasting and the two-step regression baseline.
//! - [`io`]: the CSV/JSON file formats shared with the CLI.

pub mod bgem;
pub mod bp;
pub mod data;
pub mod error;
pub mod eval;
mod exec;
pub mod gbw;
pub mod gibbs;
pub mod io;
pub mod linalg;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
