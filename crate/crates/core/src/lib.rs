//! Differentially private iterative screening for L1-constrained linear
//! regression.
//!
//! This crate implements a screening rule for the L1-constrained least
//! squares problem
//!
//! ```text
//! minimize  f(Xw) = (1/2n) ||Xw - y||^2   subject to  ||w||_1 <= lambda
//! ```
//!
//! together with two differentially private training loops built on a
//! private Frank-Wolfe optimizer:
//!
//! * an aggressive variant that screens every coordinate at selected
//!   iterations using the Gaussian mechanism under advanced composition
//!   ([`pipelines::run_adp_screen`]), and
//! * a weaker variant that screens at most one coordinate per iteration
//!   via report-noisy-min ([`pipelines::run_rnm_screen`]).
//!
//! The remaining modules supply the experiment harness: synthetic and CSV
//! data pipelines, support-recovery metrics, and a closed-form analysis of
//! the uniform-selection model of screening.
//!
//! Noise throughout is sampled with ordinary IEEE-754 doubles from a
//! seeded, splittable generator. This is a research artifact: the privacy
//! calibration arithmetic is faithful, but no attempt is made at
//! side-channel-hardened (snapped / discrete) noise generation.

pub mod data;
pub mod domain;
pub mod error;
pub mod fw;
pub mod mechanisms;
pub mod metrics;
pub mod pipelines;
pub mod rng;
pub mod screening;

pub use error::{Error, Result};
