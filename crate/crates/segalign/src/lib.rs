//! Temporal action segmentation with per-action subaction chains, grammar-
//! constrained Viterbi decoding, length-prior regularization and iterative
//! realignment training under weak, sparse or full supervision.

pub mod constraints;
pub mod data;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod grammar;
pub mod hmm;
pub mod io;
pub mod lengthprior;
pub mod observation;
pub mod training;
pub mod types;

pub use error::{Result, SegalignError};
