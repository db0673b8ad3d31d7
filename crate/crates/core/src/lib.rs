//! Discovery of governing parameters and symbolic equations of single-object
//! 2D motion from observed trajectories.
//!
//! The pipeline mirrors a lab workflow: simulate trajectories for a physical
//! scenario ([`scenario`]), optionally rasterize and re-detect positions
//! ([`detect`]), learn per-trajectory latent parameters with a small β-VAE
//! ([`vae`]), run genetic-programming symbolic regression over
//! `(t, l1, l2, l3)` to obtain a Pareto front of candidate equations
//! ([`symreg`]), and evaluate the selected equations quantitatively
//! ([`metrics`]). [`pipeline`] ties the stages into reproducible runs.

pub mod detect;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod symreg;
pub mod vae;

pub use error::{Error, Result};
