//! Spectral toolkit for quasi-periodic Jacobi and CMV operators: spectra,
//! integrated density of states, rotation numbers, uniform hyperbolicity,
//! gap labelling, projection-lemma algebra and resonance tongues.

pub mod cocycle;
pub mod dynamics;
pub mod error;
pub mod gaps;
pub mod operators;
mod par;
pub mod projection;
pub mod tongues;

pub use error::{Error, Result};
