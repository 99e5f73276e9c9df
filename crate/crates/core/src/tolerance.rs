//! Tolerance constants shared by the engine, the validation suite and the
//! canned experiments.

/// Unit-norm check applied to spin states after construction or evolution.
pub const NORM_TOL: f64 = 1e-10;

/// Maximum entry deviation of `U·U† - I` for a matrix to be flagged unitary.
pub const UNITARY_TOL: f64 = 1e-10;

/// Closed form versus numerical-integration agreement, per matrix entry.
pub const ORACLE_TOL: f64 = 1e-8;

/// Norm drift allowed over a whole RK4 run before it is rejected.
pub const NORM_DRIFT_TOL: f64 = 1e-9;

/// `product == e_part · r_part` consistency of every factorized propagator.
pub const FACTOR_TOL: f64 = 1e-12;

/// Input tolerance for `r1² + r2² = 1` in polar states.
pub const POLAR_INPUT_TOL: f64 = 1e-9;

/// Input tolerance for unit rotation axes.
pub const AXIS_TOL: f64 = 1e-9;

/// Hermiticity precondition for eigen-decomposition and evolution.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Direct DFT versus FFT agreement.
pub const DFT_AGREEMENT_TOL: f64 = 1e-9;

/// Peaks are local maxima above this fraction of the global maximum.
pub const PEAK_THRESHOLD: f64 = 1e-3;

/// Dense matrices stop at 12 spins (4096 x 4096).
pub const MAX_SPINS: usize = 12;
pub const MAX_DIM: usize = 1 << MAX_SPINS;
