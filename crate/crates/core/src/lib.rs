//! Harmonic analysis on finite groupoids.
//!
//! The crate builds finite groupoids with Haar systems, quasi-invariant
//! measures and their modular data, the convolution *-algebra with its
//! I-norm, representation triples on Hilbert bundles with integrated forms,
//! positive definite and coefficient functions with the Fourier-Stieltjes
//! norm, and a certified semidefinite solver for the completely bounded
//! norm of Schur multipliers. The `selftest` module wires the whole stack
//! into one reproducible verification suite.

pub mod acceptance;
pub mod algebra;
pub mod bundle;
pub mod error;
pub mod fourier;
pub mod groupoid;
pub mod json;
pub mod linalg;
pub mod measure;
pub mod sdp;
pub mod tol;

pub use error::{CoreError, Result};
pub use groupoid::{
    classify, cyclic_group_bundle, disjoint_union, disjoint_union_haar, pair_groupoid,
    unit_groupoid, validate_all, validate_groupoid, validate_haar, ArrowId, FiniteGroupoid,
    GroupoidClass, HaarSystem, UnitId, ValidationReport,
};
pub use measure::{
    density_half_scale, induced_measure, is_quasi_invariant, lebesgue_decompose,
    modular_function, symmetrized_from_unit_measure, symmetrized_measure, InducedMeasure,
    ModularFunction, UnitMeasure,
};
pub use algebra::{convolve, i_norm, involution, GroupoidFunction};
pub use bundle::{
    cstar_norm, direct_sum_decompose, integrated_form, intertwiner_check,
    random_representation_triple, random_section, regular_group_bundle_triple, validate_action,
    BundleSection, FlattenedSpace, GroupoidAction, HilbertBundle, IntegratedOperator,
    RepresentationTriple,
};
pub use fourier::{
    b_norm, cb_lower_bound, coefficient_function, duality_pairing, is_positive_definite,
    pointwise_product, pointwise_star, tensor_product_triple, BNormMethod, BNormResult,
    BNormWitness, DualityPairing, PositiveDefiniteReport,
};
pub use linalg::CMatrix;
pub use sdp::{
    extract_factorization, hermitian_eigen, psd_project, schur_cb_norm_sdp,
    schur_cb_norm_sdp_with, spectral_norm, HermitianMatrix, SdpOptions, SdpSolution,
};
