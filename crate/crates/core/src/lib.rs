//! Blind reconstruction of a convolutional code and a random block
//! interleaver from noisy interleaved codewords.
//!
//! The chain is: convolutional encoder, block interleaver, binary symmetric
//! channel. Reconstruction recovers low-weight parity checks of the
//! interleaved code, groups them by type, deduces the block length `n`,
//! recovers a representative check of the code by labeled-multigraph
//! matching, orders the interleaved checks along the shift sequence and
//! finally reads the interleaver off the edge labels.

pub mod bits;
pub mod channel;
pub mod classify;
pub mod conv;
pub mod dual;
pub mod error;
pub mod graph;
pub mod interleaver;
pub mod ordering;
pub mod pipeline;

pub use channel::{Dataset, Interleaver};
pub use conv::{ConvCode, EquationClass, ParityCheck};
pub use error::{Error, Result};
