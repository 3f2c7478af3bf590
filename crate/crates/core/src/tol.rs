//! Centralized numeric tolerances.
//!
//! Every threshold used by the library and the selftest suite is named here
//! so that nothing is tuned ad hoc inside an algorithm.

/// Validation of unitarity and homomorphism laws for groupoid actions.
pub const UNITARY_TOL: f64 = 1e-10;

/// Derived operator identities (one composition of validated pieces).
pub const DERIVED_IDENTITY_TOL: f64 = 1e-9;

/// Eigen-solver noise floor; fiber Gram matrices at or above this are PSD.
pub const PD_EIG_TOL: f64 = 1e-9;

/// Duality pairing between the direct sum and the representation side.
pub const PAIRING_TOL: f64 = 1e-10;

/// Off-block mass allowed in a direct-sum decomposition.
pub const BLOCK_TOL: f64 = 1e-10;

/// C*-identity and seminorm laws of the representation norm.
pub const CSTAR_IDENTITY_TOL: f64 = 1e-8;

/// Fourier-Stieltjes norm comparisons (SDP-backed values).
pub const BNORM_TOL: f64 = 1e-6;

/// Submultiplicativity slack for Banach-algebra checks.
pub const SUBMULT_TOL: f64 = 1e-5;

/// Relative residual of the Hermitian eigendecomposition.
pub const EIGEN_RESIDUAL_REL: f64 = 1e-10;

/// Most negative eigenvalue tolerated in a converged SDP completion.
pub const SDP_CERTIFICATE_TOL: f64 = 1e-8;

/// Isometry checks with exact scalar formulas (one multiply, one sqrt).
pub const ISOMETRY_TOL: f64 = 1e-12;

/// Haar left-invariance check for weights read from files.
pub const HAAR_TOL: f64 = 1e-12;

/// Witness factorizations must reproduce their matrix this tightly.
pub const FACTORIZATION_TOL: f64 = 1e-6;
