//! Numerical laboratory for the Fibonacci Hamiltonian
//!
//! ```text
//! (H_ω ψ)(n) = ψ(n+1) + ψ(n-1) + V·1_[1-α,1)(ω + nα mod 1) ψ(n),   α = (√5 - 1)/2,
//! ```
//!
//! truncated to the sites `[-L, L]`: spectral measures, the phase-averaged
//! density of states, convolution powers, Fourier decay of measures and
//! phase-averaged transition amplitudes.

pub mod analysis;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod io;
pub mod measures;
pub mod operator;
pub mod special;
pub mod spectral;

pub use analysis::{BlockMax, DecayFit};
pub use dynamics::{AmplitudeSeries, StateVector};
pub use error::{Error, Result};
pub use grid::Grid;
pub use measures::{Atom, AtomicMeasure, ConvolutionMode, FourierTrace};
pub use operator::{ModelParams, PhaseInterval, PhasePartition, TridiagonalOperator};
pub use spectral::EigenSystem;
