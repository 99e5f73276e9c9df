//! Closed-form spin-½ dynamics: single-spin propagators, Kronecker-sum
//! multi-spin Hamiltonians, complex susceptibility of spin ensembles, an RK4
//! reference integrator, spectra and a small pulse-sequence language.
//!
//! Frequencies are angular (rad/s) throughout and follow ω = −γB.

pub mod builders;
pub mod error;
pub mod io;
pub mod matrix;
pub mod multispin;
pub mod oracle;
pub mod propagator;
pub mod sequence;
pub mod spectra;
pub mod state;
pub mod suscept;
pub mod tolerance;

pub use error::{Result, SpinError};
pub use matrix::{mat_apply, mat_mul, pauli, tensor_product, Axis, Complex, ComplexMatrix, StateVector};
pub use state::{make_state, PhysicalConstants, PolarState, SpinState};
