//! Exact small-dimension simulation of thermodynamic uncertainty relations for
//! quantum channels.

pub mod channels;
pub mod correlator;
pub mod error;
pub mod gates;
pub mod harness;
pub mod linalg;
pub mod random;
pub mod shots;
pub mod tur;
pub mod verify;

pub use channels::{Dilation, KrausChannel, PerturbedChannel};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, SpectralDecomposition, StateVector, SubsystemLayout};
