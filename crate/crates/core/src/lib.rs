//! Continuous-output sequence decoding toolkit.
//!
//! The pipeline: generate (or load) a frozen unit-norm target embedding table
//! ([`embed`]), train a small continuous-output encoder-decoder against it
//! with the cosine objective ([`toymodel`]), map predicted hidden states back
//! to tokens with exact or bit-plane-prefiltered nearest-neighbor search and
//! vMF-likelihood beam search ([`decoder`]), and measure what happened:
//! embedding-space geometry by frequency rank ([`geometry`]) and BLEU /
//! frequency-bucketed token F1 ([`eval`]).

pub mod decoder;
pub mod embed;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod scoring;
mod select;
pub mod toymodel;
pub mod vecmath;

pub use error::{Error, Result};
