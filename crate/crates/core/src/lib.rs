//! Recovery of structured signals from random linear measurements by
//! minimum-entropy pursuit over b-bit quantized sequences.
//!
//! The crate is organized bottom-up:
//!
//! * [`quantization`] — the `[x]_b` map, grids and quantized sequences;
//! * [`empirical`] — empirical block laws, conditional entropies, LZ78 code
//!   lengths and divergences;
//! * [`sources`] — sparse i.i.d. and finite Markov sources with exact
//!   quantized block laws and information-dimension estimates;
//! * [`sensing`] — seeded Gaussian measurement matrices;
//! * [`weights`] — weight vectors for the linearized structure term;
//! * [`solvers`] — the L-MEP and A-MEP objectives, an exhaustive oracle, a
//!   simulated-annealing solver and exhaustive verifiers;
//! * [`experiments`] — configuration, sweeps, studies and reports used by the
//!   `qmep` binary.

pub mod empirical;
pub mod error;
pub mod experiments;
pub mod quantization;
pub mod seeding;
pub mod sensing;
pub mod solvers;
pub mod sources;
pub mod tables;
pub mod weights;

pub use error::{Error, Result};
pub use quantization::{
    quantize_scalar, quantize_sequence, Alphabet, QuantSpec, QuantizedSequence,
};
