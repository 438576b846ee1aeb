//! Core algorithms for audio-visual instance discrimination with active
//! contrastive set mining, sized for synthetic desk-scale experiments.
//!
//! The crate is `no_std` (with `alloc`) so the numerical pipeline stays free
//! of IO concerns; file formats and the command-line front end live in the
//! companion `avid-cli` crate. Everything is `f64`, single-threaded, and
//! deterministic under a fixed root seed.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod semlib;
pub mod synthdata;
pub mod trainer;

mod fmath;

pub use error::{CoreError, Result};
pub use model::{Classifier, Embedding, ModalityEncoder};
pub use semlib::{LibraryMode, PseudoState, SemanticLibrary};
pub use synthdata::{Dataset, LabeledPair, SyntheticConfig};
pub use trainer::{EpochMetrics, HardMining, MiningMode, TrainConfig, TrainOutcome, TrainState};
