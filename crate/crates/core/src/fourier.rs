//! Positive definite functions, coefficient functions of representation
//! triples, the Fourier-Stieltjes norm for the supported groupoid classes,
//! the duality pairing against the convolution algebra, and sampled lower
//! bounds for the completely bounded Schur-multiplier norm.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::algebra::{involution, GroupoidFunction};
use crate::bundle::{
    integrated_form, BundleSection, FlattenedSpace, GroupoidAction, HilbertBundle,
    RepresentationTriple,
};
use crate::error::{CoreError, Result};
use crate::groupoid::{classify, FiniteGroupoid, GroupoidClass, HaarSystem};
use crate::linalg::{inner, vec_norm, CMatrix, C64, C_ZERO};
use crate::measure::{is_quasi_invariant, symmetrized_from_unit_measure, UnitMeasure};
use crate::sdp::{
    extract_factorization, hermitian_eigen, schur_cb_norm_sdp, spectral_norm, HermitianMatrix,
};
use crate::tol::PD_EIG_TOL;

/// Result of the positive definiteness check. `min_eigenvalue` is the worst
/// positivity margin over the weighted fiber Gram matrices: the smallest
/// eigenvalue of the Hermitian part, or minus the norm of the skew part when
/// a fiber matrix fails to be Hermitian at all (the quadratic form then
/// takes non-real values, which certifies failure).
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PositiveDefiniteReport {
    pub is_pd: bool,
    pub worst_unit: Option<String>,
    pub min_eigenvalue: f64,
    /// Set when the margin is within the eigen-solver noise floor of zero.
    pub borderline: bool,
}

/// Checks positive definiteness of `phi` by assembling, for every unit in
/// the support of `mu`, the fiber Gram matrix
/// `M[g1, g2] = phi(g2^{-1} g1) sqrt(h(g1) h(g2))` over `G^x` and testing
/// Hermitian positive semidefiniteness.
pub fn is_positive_definite(
    phi: &GroupoidFunction,
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu: &UnitMeasure,
) -> Result<PositiveDefiniteReport> {
    phi.check_groupoid(g, "function")?;
    let mut min_eigenvalue = f64::INFINITY;
    let mut worst_unit = None;
    let mut any = false;
    for x in g.units() {
        if !mu.in_support(x) {
            continue;
        }
        any = true;
        let fiber = g.range_fiber(x)?;
        let k = fiber.len();
        let mut m = CMatrix::zeros(k, k);
        for (i, &g1) in fiber.iter().enumerate() {
            for (j, &g2) in fiber.iter().enumerate() {
                let arg = g
                    .product(g.inverse(g2), g1)
                    .expect("fiber members compose");
                let w = (haar.weight(g1) * haar.weight(g2)).sqrt();
                m.set(i, j, phi.value(arg) * w);
            }
        }
        let herm = HermitianMatrix::symmetrize(&m)?;
        let (eigenvalues, _) = hermitian_eigen(&herm)?;
        let lambda_min = eigenvalues.first().copied().unwrap_or(0.0);
        let skew_norm = spectral_norm(&m.skew_part()?)?;
        let margin = if skew_norm > PD_EIG_TOL {
            lambda_min.min(-skew_norm)
        } else {
            lambda_min
        };
        if margin < min_eigenvalue {
            min_eigenvalue = margin;
            worst_unit = Some(g.unit_label(x).to_string());
        }
    }
    if !any {
        // Empty support: the condition is vacuous.
        return Ok(PositiveDefiniteReport {
            is_pd: true,
            worst_unit: None,
            min_eigenvalue: 0.0,
            borderline: false,
        });
    }
    let is_pd = min_eigenvalue >= -PD_EIG_TOL;
    Ok(PositiveDefiniteReport {
        is_pd,
        worst_unit,
        min_eigenvalue,
        borderline: is_pd && min_eigenvalue < 0.0,
    })
}

/// The coefficient function `phi(g) = <L_g alpha_{s(g)}, beta_{r(g)}>`.
pub fn coefficient_function(
    alpha: &BundleSection,
    beta: &BundleSection,
    rep: &RepresentationTriple,
    g: &FiniteGroupoid,
) -> Result<GroupoidFunction> {
    for x in g.units() {
        if alpha.block(x).len() != rep.bundle.dim(x) || beta.block(x).len() != rep.bundle.dim(x) {
            return Err(CoreError::DimensionMismatch(format!(
                "section blocks at unit {} do not match the bundle",
                g.unit_label(x)
            )));
        }
    }
    let mut values = Vec::with_capacity(g.n_arrows());
    for a in g.arrows() {
        let moved = rep.action.unitary(a).matvec(alpha.block(g.source(a)))?;
        values.push(inner(&moved, beta.block(g.range(a))));
    }
    GroupoidFunction::from_values(g, values)
}

/// Entrywise product; corresponds to the tensor product of realizations.
pub fn pointwise_product(
    phi: &GroupoidFunction,
    psi: &GroupoidFunction,
    g: &FiniteGroupoid,
) -> Result<GroupoidFunction> {
    phi.check_groupoid(g, "left factor")?;
    psi.check_groupoid(g, "right factor")?;
    let values = g.arrows().map(|a| phi.value(a) * psi.value(a)).collect();
    GroupoidFunction::from_values(g, values)
}

/// `phi^*(g) = conj(phi(g^{-1}))`; the coefficient-level identity is
/// `(alpha, beta)^* = (beta, alpha)`.
pub fn pointwise_star(phi: &GroupoidFunction, g: &FiniteGroupoid) -> GroupoidFunction {
    involution(phi, g)
}

/// Tensor product of two triples over the same groupoid and measure: fiber
/// dimensions multiply and arrows act by Kronecker products.
pub fn tensor_product_triple(
    rep1: &RepresentationTriple,
    rep2: &RepresentationTriple,
    g: &FiniteGroupoid,
    haar: &HaarSystem,
) -> Result<RepresentationTriple> {
    if rep1.mu.weights() != rep2.mu.weights() {
        return Err(CoreError::GroupoidMismatch(
            "tensor product needs the same base measure".into(),
        ));
    }
    let dims: Vec<usize> = g
        .units()
        .map(|x| rep1.bundle.dim(x) * rep2.bundle.dim(x))
        .collect();
    let unitaries: Vec<CMatrix> = g
        .arrows()
        .map(|a| rep1.action.unitary(a).kron(rep2.action.unitary(a)))
        .collect();
    RepresentationTriple::validated(
        g,
        haar,
        HilbertBundle::new(g, dims)?,
        GroupoidAction::new(g, unitaries)?,
        rep1.mu.clone(),
    )
}

/// Norm computation route.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BNormMethod {
    Sdp,
    Linfty,
    DftL1,
    GroupDual,
}

/// A factorization achieving the norm: sections of a constant-dimension
/// bundle with the identity action, so that
/// `phi(i,j) = <alpha at source, beta at range>`.
#[derive(Clone, Debug)]
pub struct BNormWitness {
    pub dim: usize,
    pub alpha: Vec<Vec<C64>>,
    pub beta: Vec<Vec<C64>>,
}

impl BNormWitness {
    /// Materializes the witness as an explicit triple plus sections; meant
    /// for verification at small sizes (the identity unitaries are dense).
    pub fn to_triple_sections(
        &self,
        g: &FiniteGroupoid,
        haar: &HaarSystem,
        mu: &UnitMeasure,
    ) -> Result<(RepresentationTriple, BundleSection, BundleSection)> {
        let bundle = HilbertBundle::new(g, vec![self.dim; g.n_units()])?;
        let action = GroupoidAction::new(
            g,
            g.arrows().map(|_| CMatrix::identity(self.dim)).collect(),
        )?;
        let rep = RepresentationTriple::validated(g, haar, bundle.clone(), action, mu.clone())?;
        let alpha = BundleSection::from_blocks(&bundle, self.alpha.clone())?;
        let beta = BundleSection::from_blocks(&bundle, self.beta.clone())?;
        Ok((rep, alpha, beta))
    }

    pub fn sup_norms(&self) -> (f64, f64) {
        let a = self.alpha.iter().map(|v| vec_norm(v)).fold(0.0, f64::max);
        let b = self.beta.iter().map(|v| vec_norm(v)).fold(0.0, f64::max);
        (a, b)
    }
}

/// Value of the Fourier-Stieltjes norm together with the route that
/// computed it and, for the SDP route, a witness factorization.
#[derive(Clone, Debug)]
pub struct BNormResult {
    pub value: f64,
    pub method: BNormMethod,
    pub witness: Option<BNormWitness>,
    /// Set when the inputs leave the regime the formulas are certified for
    /// (non-counting Haar weights on a pair groupoid).
    pub note: Option<String>,
}

/// The norm `inf ||alpha|| ||beta||` over realizations `phi = (alpha, beta)`:
/// the Schur-multiplier cb norm of `[phi(i,j)]` on pair groupoids, the sup
/// norm over the measure support on unit groupoids, and the maximal total
/// variation of the fiberwise Fourier coefficients on bundles of cyclic
/// groups.
pub fn b_norm(
    phi: &GroupoidFunction,
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu: &UnitMeasure,
) -> Result<BNormResult> {
    phi.check_groupoid(g, "function")?;
    match classify(g) {
        GroupoidClass::Unit => {
            let mut value = 0.0f64;
            for x in g.units() {
                if mu.in_support(x) {
                    value = value.max(phi.value(g.unit_arrow(x)).norm());
                }
            }
            Ok(BNormResult {
                value,
                method: BNormMethod::Linfty,
                witness: None,
                note: None,
            })
        }
        GroupoidClass::Pair => {
            let qi = is_quasi_invariant(g, haar, mu);
            if !qi.holds {
                let w = qi.witness.expect("witness accompanies failure");
                return Err(CoreError::NotQuasiInvariant(g.arrow_label(w).to_string()));
            }
            let n = g.n_units();
            let mut a = CMatrix::zeros(n, n);
            for arrow in g.arrows() {
                a.set(g.range(arrow).0, g.source(arrow).0, phi.value(arrow));
            }
            let sol = schur_cb_norm_sdp(&a, 1e-7)?;
            if !sol.converged {
                return Err(CoreError::NonConvergence {
                    iterations: sol.iterations,
                    residual: sol.certificate.abs(),
                });
            }
            let (xi, eta) = extract_factorization(&sol, &a)?;
            // alpha at unit j carries xi_j, beta at unit i carries eta_i.
            let witness = BNormWitness {
                dim: 2 * n,
                alpha: xi,
                beta: eta,
            };
            let note = if haar.is_counting() {
                None
            } else {
                Some(
                    "norm computed from [phi(i,j)] only; non-counting Haar weights are \
                     outside the certified regime"
                        .to_string(),
                )
            };
            Ok(BNormResult {
                value: sol.t,
                method: BNormMethod::Sdp,
                witness: Some(witness),
                note,
            })
        }
        GroupoidClass::GroupBundle { fibers } => {
            let mut value = 0.0f64;
            let mut single_base = true;
            for fiber in &fibers {
                if fiber.base.0 > 0 {
                    single_base = false;
                }
                if !mu.in_support(fiber.base) {
                    continue;
                }
                let m = fiber.elements.len();
                let mut total = 0.0;
                for j in 0..m {
                    let mut c = C_ZERO;
                    for (k, &arrow) in fiber.elements.iter().enumerate() {
                        let phase =
                            -2.0 * std::f64::consts::PI * ((j * k) % m) as f64 / m as f64;
                        c += phi.value(arrow) * Complex64::new(phase.cos(), phase.sin());
                    }
                    total += (c / m as f64).norm();
                }
                value = value.max(total);
            }
            Ok(BNormResult {
                value,
                method: if single_base {
                    BNormMethod::GroupDual
                } else {
                    BNormMethod::DftL1
                },
                witness: None,
                note: None,
            })
        }
        GroupoidClass::Unsupported => Err(CoreError::UnsupportedClass(
            "Fourier-Stieltjes norm is implemented for unit groupoids, pair groupoids, and \
             bundles of cyclic groups"
                .into(),
        )),
    }
}

/// Both sides of the duality pairing and their difference:
/// the direct sum `sum_g F(g) phi(g) a(s(g)) conj(b(r(g))) nu_0(g)` versus
/// the representation value `<pi(F)(a alpha), b beta>` in the weighted
/// metric, for `phi = (alpha, beta)`.
#[derive(Clone, Debug)]
pub struct DualityPairing {
    pub direct: C64,
    pub representation: C64,
    pub difference: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn duality_pairing(
    phi: &GroupoidFunction,
    f: &GroupoidFunction,
    a_fn: &[C64],
    b_fn: &[C64],
    rep: &RepresentationTriple,
    alpha: &BundleSection,
    beta: &BundleSection,
    g: &FiniteGroupoid,
    haar: &HaarSystem,
) -> Result<DualityPairing> {
    phi.check_groupoid(g, "phi")?;
    f.check_groupoid(g, "F")?;
    if a_fn.len() != g.n_units() || b_fn.len() != g.n_units() {
        return Err(CoreError::DimensionMismatch(
            "unit functions must cover the unit space".into(),
        ));
    }
    let nu0 = symmetrized_from_unit_measure(g, haar, &rep.mu)?;
    let mut direct = C_ZERO;
    for arrow in g.arrows() {
        let w = nu0.weight(arrow);
        if w == 0.0 {
            continue;
        }
        direct += f.value(arrow)
            * phi.value(arrow)
            * a_fn[g.source(arrow).0]
            * b_fn[g.range(arrow).0].conj()
            * w;
    }
    let op = integrated_form(f, rep, g, haar)?;
    let a_alpha = alpha.scaled_by_unit_function(a_fn)?;
    let b_beta = beta.scaled_by_unit_function(b_fn)?;
    let image = op.matrix.matvec(&op.space.flatten(&a_alpha))?;
    let representation = op.space.weighted_inner(&image, &op.space.flatten(&b_beta));
    Ok(DualityPairing {
        direct,
        representation,
        difference: (direct - representation).norm(),
    })
}

/// Sampled lower bound for the cb norm of the Schur multiplier of `A`:
/// the best ratio `||A o B|| / ||B||` over matrix units, the identity,
/// seeded Gaussian matrices, and blockwise amplifications up to level 3
/// (the multiplier applied entrywise to each block). Always at most the
/// true norm; deterministic for a fixed seed.
pub fn cb_lower_bound(a: &CMatrix, samples: usize, seed: u64) -> Result<f64> {
    if !a.is_square() {
        return Err(CoreError::DimensionMismatch(
            "cb lower bound needs a square matrix".into(),
        ));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    // Matrix units certify max |A_ij| exactly.
    best = best.max(a.max_abs_entry());
    // Identity sample.
    let id = CMatrix::identity(n);
    best = best.max(spectral_norm(&a.schur(&id)?)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..samples {
        let k = 1 + s % 3;
        let m = k * n;
        let mut b = CMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                b.set(
                    i,
                    j,
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)),
                );
            }
        }
        let norm_b = spectral_norm(&b)?;
        if norm_b == 0.0 {
            continue;
        }
        // Blockwise Schur product: the level-k amplification of the
        // multiplier acts entrywise on each n x n block.
        let mut image = CMatrix::zeros(m, m);
        for bi in 0..k {
            for bj in 0..k {
                for i in 0..n {
                    for j in 0..n {
                        image.set(
                            bi * n + i,
                            bj * n + j,
                            a.get(i, j) * b.get(bi * n + i, bj * n + j),
                        );
                    }
                }
            }
        }
        best = best.max(spectral_norm(&image)? / norm_b);
    }
    Ok(best)
}

/// Weighted fiber space of a representation triple; re-exported here for
/// callers pairing sections with operators.
pub fn flattened_space(
    g: &FiniteGroupoid,
    rep: &RepresentationTriple,
) -> FlattenedSpace {
    FlattenedSpace::new(g, &rep.bundle, &rep.mu)
}
