//! Hilbert bundles over the unit space, unitary groupoid actions,
//! representation triples, and the integrated form of the convolution
//! algebra on weighted section spaces.
//!
//! Sections are stored blockwise per unit; operators act on a flattened
//! coordinate vector that drops fibers of measure zero. The measure enters
//! through the weighted inner product, so adjoints and operator norms are
//! taken in the weighted metric.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::GroupoidFunction;
use crate::error::{CoreError, Result};
use crate::groupoid::{
    classify, ArrowId, FiniteGroupoid, GroupoidClass, HaarSystem, UnitId, ValidationReport,
};
use crate::linalg::{inner, CMatrix, C64, C_ZERO};
use crate::measure::{is_quasi_invariant, modular_function, UnitMeasure};
use crate::sdp::spectral_norm;
use crate::tol::UNITARY_TOL;

/// Fiber dimensions of a Hilbert bundle over the unit space.
#[derive(Clone, Debug, PartialEq)]
pub struct HilbertBundle {
    dims: Vec<usize>,
}

impl HilbertBundle {
    pub fn new(g: &FiniteGroupoid, dims: Vec<usize>) -> Result<Self> {
        if dims.len() != g.n_units() {
            return Err(CoreError::DimensionMismatch(format!(
                "bundle gives {} fiber dimensions, groupoid has {} units",
                dims.len(),
                g.n_units()
            )));
        }
        Ok(Self { dims })
    }

    /// The trivial line bundle: every fiber is one-dimensional.
    pub fn trivial(g: &FiniteGroupoid) -> Self {
        Self {
            dims: vec![1; g.n_units()],
        }
    }

    pub fn dim(&self, x: UnitId) -> usize {
        self.dims[x.0]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }
}

/// A section of a Hilbert bundle: one complex block per unit.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleSection {
    blocks: Vec<Vec<C64>>,
}

impl BundleSection {
    pub fn zeros(bundle: &HilbertBundle) -> Self {
        Self {
            blocks: bundle.dims().iter().map(|&d| vec![C_ZERO; d]).collect(),
        }
    }

    pub fn from_blocks(bundle: &HilbertBundle, blocks: Vec<Vec<C64>>) -> Result<Self> {
        if blocks.len() != bundle.dims().len() {
            return Err(CoreError::DimensionMismatch(
                "section has the wrong number of blocks".into(),
            ));
        }
        for (i, block) in blocks.iter().enumerate() {
            if block.len() != bundle.dims()[i] {
                return Err(CoreError::DimensionMismatch(format!(
                    "section block at unit #{} has length {}, fiber dimension is {}",
                    i,
                    block.len(),
                    bundle.dims()[i]
                )));
            }
        }
        Ok(Self { blocks })
    }

    pub fn block(&self, x: UnitId) -> &[C64] {
        &self.blocks[x.0]
    }

    pub fn block_mut(&mut self, x: UnitId) -> &mut [C64] {
        &mut self.blocks[x.0]
    }

    /// Essential sup of the fiber norms over the support of `mu`.
    pub fn sup_norm(&self, mu: &UnitMeasure) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(x, _)| mu.in_support(UnitId(*x)))
            .map(|(_, b)| b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Pointwise scaling by a scalar function on units.
    pub fn scaled_by_unit_function(&self, scalars: &[C64]) -> Result<BundleSection> {
        if scalars.len() != self.blocks.len() {
            return Err(CoreError::DimensionMismatch(
                "unit function length differs from unit count".into(),
            ));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(scalars.iter())
            .map(|(b, &s)| b.iter().map(|&z| z * s).collect())
            .collect();
        Ok(BundleSection { blocks })
    }

    /// Fiberwise tensor product.
    pub fn tensor(&self, other: &BundleSection) -> BundleSection {
        let blocks = self
            .blocks
            .iter()
            .zip(other.blocks.iter())
            .map(|(a, b)| {
                let mut out = Vec::with_capacity(a.len() * b.len());
                for &za in a {
                    for &zb in b {
                        out.push(za * zb);
                    }
                }
                out
            })
            .collect();
        BundleSection { blocks }
    }
}

/// Deterministic pseudo-random section with standard Gaussian entries.
pub fn random_section(bundle: &HilbertBundle, seed: u64) -> BundleSection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = bundle
        .dims()
        .iter()
        .map(|&d| {
            (0..d)
                .map(|_| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                })
                .collect()
        })
        .collect();
    BundleSection { blocks }
}

/// One unitary per arrow, mapping the source fiber to the range fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupoidAction {
    unitaries: Vec<CMatrix>,
}

impl GroupoidAction {
    pub fn new(g: &FiniteGroupoid, unitaries: Vec<CMatrix>) -> Result<Self> {
        if unitaries.len() != g.n_arrows() {
            return Err(CoreError::DimensionMismatch(
                "action must give one matrix per arrow".into(),
            ));
        }
        Ok(Self { unitaries })
    }

    /// The trivial action on the line bundle.
    pub fn trivial(g: &FiniteGroupoid) -> Self {
        Self {
            unitaries: vec![CMatrix::identity(1); g.n_arrows()],
        }
    }

    pub fn unitary(&self, a: ArrowId) -> &CMatrix {
        &self.unitaries[a.0]
    }

    pub fn unitaries(&self) -> &[CMatrix] {
        &self.unitaries
    }
}

/// Checks shapes, unitarity, the homomorphism law, the inverse law, and
/// identity at units. Violations are reported with arrow witnesses.
pub fn validate_action(
    g: &FiniteGroupoid,
    bundle: &HilbertBundle,
    action: &GroupoidAction,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let push = |axiom: &str, witness: Vec<String>, report: &mut ValidationReport| {
        report.violations.push(crate::groupoid::Violation {
            axiom: axiom.to_string(),
            witness,
        });
    };
    for a in g.arrows() {
        let l = action.unitary(a);
        let (dr, ds) = (bundle.dim(g.range(a)), bundle.dim(g.source(a)));
        if l.rows() != dr || l.cols() != ds {
            push(
                "action matrix shape matches fiber dimensions",
                vec![g.arrow_label(a).to_string()],
                &mut report,
            );
            continue;
        }
        if dr == 0 || ds == 0 {
            continue;
        }
        let gram = l.adjoint().mul(l).expect("shapes agree");
        if gram
            .sub(&CMatrix::identity(ds))
            .expect("square")
            .max_abs_entry()
            > UNITARY_TOL
        {
            push("action is unitary", vec![g.arrow_label(a).to_string()], &mut report);
        }
        let co_gram = l.mul(&l.adjoint()).expect("shapes agree");
        if co_gram
            .sub(&CMatrix::identity(dr))
            .expect("square")
            .max_abs_entry()
            > UNITARY_TOL
        {
            push("action is co-unitary", vec![g.arrow_label(a).to_string()], &mut report);
        }
        let inv = action.unitary(g.inverse(a));
        if inv.rows() == ds && inv.cols() == dr {
            if inv.sub(&l.adjoint()).expect("shapes agree").max_abs_entry() > UNITARY_TOL {
                push(
                    "inverse arrows act by adjoints",
                    vec![g.arrow_label(a).to_string()],
                    &mut report,
                );
            }
        }
    }
    for x in g.units() {
        let e = g.unit_arrow(x);
        let l = action.unitary(e);
        let d = bundle.dim(x);
        if l.rows() == d && l.cols() == d && d > 0 {
            if l.sub(&CMatrix::identity(d)).expect("square").max_abs_entry() > UNITARY_TOL {
                push(
                    "unit arrows act as the identity",
                    vec![g.unit_label(x).to_string()],
                    &mut report,
                );
            }
        }
    }
    for a in g.arrows() {
        for b in g.arrows() {
            let Some(ab) = g.product(a, b) else { continue };
            let la = action.unitary(a);
            let lb = action.unitary(b);
            let lab = action.unitary(ab);
            if la.cols() != lb.rows() || lab.rows() != la.rows() || lab.cols() != lb.cols() {
                continue; // shape violations already reported
            }
            let composed = la.mul(lb).expect("shapes agree");
            if composed.sub(lab).expect("shapes agree").max_abs_entry() > UNITARY_TOL {
                push(
                    "action is a homomorphism",
                    vec![
                        g.arrow_label(a).to_string(),
                        g.arrow_label(b).to_string(),
                    ],
                    &mut report,
                );
            }
        }
    }
    report
}

/// A validated triple: unitary action, Hilbert bundle, quasi-invariant
/// measure. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationTriple {
    pub bundle: HilbertBundle,
    pub action: GroupoidAction,
    pub mu: UnitMeasure,
}

impl RepresentationTriple {
    pub fn validated(
        g: &FiniteGroupoid,
        haar: &HaarSystem,
        bundle: HilbertBundle,
        action: GroupoidAction,
        mu: UnitMeasure,
    ) -> Result<Self> {
        let qi = is_quasi_invariant(g, haar, &mu);
        if !qi.holds {
            let w = qi.witness.expect("witness accompanies failure");
            return Err(CoreError::NotQuasiInvariant(g.arrow_label(w).to_string()));
        }
        let report = validate_action(g, &bundle, &action);
        if !report.is_empty() {
            return Err(CoreError::InvalidConstruction(format!(
                "action fails validation: {} (witness {:?})",
                report.violations[0].axiom, report.violations[0].witness
            )));
        }
        if mu.len() != g.n_units() {
            return Err(CoreError::DimensionMismatch(
                "measure does not cover the unit space".into(),
            ));
        }
        Ok(Self { bundle, action, mu })
    }

    /// Same bundle and action over a different measure.
    pub fn with_measure(
        &self,
        g: &FiniteGroupoid,
        haar: &HaarSystem,
        mu: UnitMeasure,
    ) -> Result<Self> {
        RepresentationTriple::validated(g, haar, self.bundle.clone(), self.action.clone(), mu)
    }
}

/// Coordinates of the weighted section space: units of positive measure,
/// their fiber offsets, and the per-coordinate weights of the inner product.
#[derive(Clone, Debug)]
pub struct FlattenedSpace {
    units: Vec<UnitId>,
    position: Vec<Option<usize>>,
    offsets: Vec<usize>,
    dims: Vec<usize>,
    total: usize,
    coordinate_weights: Vec<f64>,
}

impl FlattenedSpace {
    pub fn new(g: &FiniteGroupoid, bundle: &HilbertBundle, mu: &UnitMeasure) -> Self {
        let mut units = Vec::new();
        let mut position = vec![None; g.n_units()];
        let mut offsets = Vec::new();
        let mut dims = Vec::new();
        let mut coordinate_weights = Vec::new();
        let mut total = 0usize;
        for x in g.units() {
            if !mu.in_support(x) {
                continue;
            }
            position[x.0] = Some(units.len());
            units.push(x);
            offsets.push(total);
            let d = bundle.dim(x);
            dims.push(d);
            total += d;
            for _ in 0..d {
                coordinate_weights.push(mu.weight(x));
            }
        }
        Self {
            units,
            position,
            offsets,
            dims,
            total,
            coordinate_weights,
        }
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn units(&self) -> &[UnitId] {
        &self.units
    }

    pub fn contains(&self, x: UnitId) -> bool {
        self.position[x.0].is_some()
    }

    pub fn offset_of(&self, x: UnitId) -> Option<usize> {
        self.position[x.0].map(|p| self.offsets[p])
    }

    pub fn flatten(&self, section: &BundleSection) -> Vec<C64> {
        let mut out = vec![C_ZERO; self.total];
        for (p, &x) in self.units.iter().enumerate() {
            let block = section.block(x);
            out[self.offsets[p]..self.offsets[p] + self.dims[p]].copy_from_slice(block);
        }
        out
    }

    pub fn unflatten(&self, bundle: &HilbertBundle, v: &[C64]) -> BundleSection {
        let mut out = BundleSection::zeros(bundle);
        for (p, &x) in self.units.iter().enumerate() {
            out.block_mut(x)
                .copy_from_slice(&v[self.offsets[p]..self.offsets[p] + self.dims[p]]);
        }
        out
    }

    /// Weighted inner product, linear in the first slot.
    pub fn weighted_inner(&self, u: &[C64], v: &[C64]) -> C64 {
        let mut acc = C_ZERO;
        for i in 0..self.total {
            acc += u[i] * v[i].conj() * self.coordinate_weights[i];
        }
        acc
    }

    /// Adjoint in the weighted metric: `W^{-1} A^* W`.
    pub fn weighted_adjoint(&self, a: &CMatrix) -> CMatrix {
        let n = self.total;
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let scale = self.coordinate_weights[j] / self.coordinate_weights[i];
                out.set(i, j, a.get(j, i).conj() * scale);
            }
        }
        out
    }

    /// Operator norm in the weighted metric, via conjugation by `W^{1/2}`.
    pub fn weighted_op_norm(&self, a: &CMatrix) -> Result<f64> {
        let n = self.total;
        let mut b = CMatrix::zeros(n, n);
        for i in 0..n {
            let wi = self.coordinate_weights[i].sqrt();
            for j in 0..n {
                let wj = self.coordinate_weights[j].sqrt();
                b.set(i, j, a.get(i, j) * (wi / wj));
            }
        }
        spectral_norm(&b)
    }
}

/// The integrated form of a representation triple applied to one function,
/// as a matrix on the flattened section space.
#[derive(Clone, Debug)]
pub struct IntegratedOperator {
    pub space: FlattenedSpace,
    pub matrix: CMatrix,
}

impl IntegratedOperator {
    pub fn weighted_adjoint(&self) -> CMatrix {
        self.space.weighted_adjoint(&self.matrix)
    }

    pub fn op_norm(&self) -> Result<f64> {
        self.space.weighted_op_norm(&self.matrix)
    }
}

/// Builds `pi(F)`: block `(r(g), s(g))` accumulates
/// `F(g) Delta(g)^{-1/2} haar(g) L_g` over the arrows `g` between fibers of
/// positive measure. The weighted pairing then satisfies
/// `<pi(F) xi, eta> = sum_g F(g) <L_g xi_{s(g)}, eta_{r(g)}> nu_0(g)`.
pub fn integrated_form(
    f: &GroupoidFunction,
    rep: &RepresentationTriple,
    g: &FiniteGroupoid,
    haar: &HaarSystem,
) -> Result<IntegratedOperator> {
    f.check_groupoid(g, "integrated function")?;
    let delta = modular_function(g, haar, &rep.mu)?;
    let space = FlattenedSpace::new(g, &rep.bundle, &rep.mu);
    let mut matrix = CMatrix::zeros(space.total_dim(), space.total_dim());
    for a in g.arrows() {
        let (Some(ro), Some(so)) = (space.offset_of(g.range(a)), space.offset_of(g.source(a)))
        else {
            continue;
        };
        let value = f.value(a);
        if value == C_ZERO {
            continue;
        }
        let weight = haar.weight(a) / delta.value(a).sqrt();
        let coeff = value * weight;
        let l = rep.action.unitary(a);
        if l.rows() != rep.bundle.dim(g.range(a)) || l.cols() != rep.bundle.dim(g.source(a)) {
            return Err(CoreError::DimensionMismatch(format!(
                "action matrix at arrow {} has the wrong shape",
                g.arrow_label(a)
            )));
        }
        for i in 0..l.rows() {
            for j in 0..l.cols() {
                matrix.add_assign_at(ro + i, so + j, coeff * l.get(i, j));
            }
        }
    }
    Ok(IntegratedOperator { space, matrix })
}

/// The representation norm of `F` for the groupoid classes where the sup
/// over representation triples collapses to a finite formula:
/// spectral norm of the integrated matrix for pair groupoids, the sup norm
/// over the measure support for unit groupoids, and the maximal character
/// sum per base point for bundles of cyclic groups. Anything else is
/// rejected explicitly.
pub fn cstar_norm(
    f: &GroupoidFunction,
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu: &UnitMeasure,
) -> Result<f64> {
    f.check_groupoid(g, "function")?;
    match classify(g) {
        GroupoidClass::Unit => {
            let mut best = 0.0f64;
            for x in g.units() {
                if mu.in_support(x) {
                    best = best.max(f.value(g.unit_arrow(x)).norm());
                }
            }
            Ok(best)
        }
        GroupoidClass::Pair => {
            let rep = RepresentationTriple::validated(
                g,
                haar,
                HilbertBundle::trivial(g),
                GroupoidAction::trivial(g),
                mu.clone(),
            )?;
            let op = integrated_form(f, &rep, g, haar)?;
            op.op_norm()
        }
        GroupoidClass::GroupBundle { fibers } => {
            let mut best = 0.0f64;
            for fiber in &fibers {
                if !mu.in_support(fiber.base) {
                    continue;
                }
                best = best.max(max_character_sum(f, &fiber.elements));
            }
            Ok(best)
        }
        GroupoidClass::Unsupported => Err(CoreError::UnsupportedClass(
            "representation norm is implemented for unit groupoids, pair groupoids, and \
             bundles of cyclic groups"
                .into(),
        )),
    }
}

/// `max_chi |sum_k F(gen^k) chi(k)|` over the characters of `Z_m`.
pub(crate) fn max_character_sum(f: &GroupoidFunction, elements: &[ArrowId]) -> f64 {
    let m = elements.len();
    let mut best = 0.0f64;
    for j in 0..m {
        let mut acc = C_ZERO;
        for (k, &a) in elements.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * ((j * k) % m) as f64 / m as f64;
            acc += f.value(a) * Complex64::new(phase.cos(), phase.sin());
        }
        best = best.max(acc.norm());
    }
    best
}

/// Outcome of splitting a representation along two mutually singular
/// quasi-invariant measures.
#[derive(Clone, Debug)]
pub struct DirectSumDecomposition {
    pub rep0: RepresentationTriple,
    pub rep1: RepresentationTriple,
    /// Largest magnitude found in the blocks coupling the two supports.
    pub off_block_max: f64,
    /// Largest deviation between the diagonal blocks and the sub-operators.
    pub diagonal_mismatch: f64,
    pub samples: usize,
}

/// Verifies that the measure split `mu = c0 mu0 + c1 mu1` (mutually singular
/// quasi-invariant parts) makes every integrated operator block diagonal,
/// with the diagonal blocks given by the sub-triples.
#[allow(clippy::too_many_arguments)]
pub fn direct_sum_decompose(
    rep: &RepresentationTriple,
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu0: &UnitMeasure,
    mu1: &UnitMeasure,
    c0: f64,
    c1: f64,
    seed: u64,
) -> Result<DirectSumDecomposition> {
    if !(c0 >= 0.0 && c1 >= 0.0 && c0.is_finite() && c1.is_finite()) {
        return Err(CoreError::InvalidConstruction(
            "coefficients must be finite and nonnegative".into(),
        ));
    }
    if mu0.len() != g.n_units() || mu1.len() != g.n_units() {
        return Err(CoreError::DimensionMismatch(
            "measures do not cover the unit space".into(),
        ));
    }
    for x in g.units() {
        if mu0.in_support(x) && mu1.in_support(x) {
            return Err(CoreError::InvalidConstruction(format!(
                "parts are not mutually singular: both charge unit {}",
                g.unit_label(x)
            )));
        }
        let combined = c0 * mu0.weight(x) + c1 * mu1.weight(x);
        if (rep.mu.weight(x) - combined).abs() > 1e-12 * combined.max(1.0) {
            return Err(CoreError::InvalidConstruction(format!(
                "measure does not split as c0*mu0 + c1*mu1 at unit {}",
                g.unit_label(x)
            )));
        }
    }
    let effective = |c: f64, part: &UnitMeasure| -> Result<UnitMeasure> {
        if c == 0.0 {
            UnitMeasure::new(g, vec![0.0; g.n_units()])
        } else {
            Ok(part.clone())
        }
    };
    let m0 = effective(c0, mu0)?;
    let m1 = effective(c1, mu1)?;
    let rep0 = rep.with_measure(g, haar, m0.clone())?;
    let rep1 = rep.with_measure(g, haar, m1.clone())?;

    let mut off_block_max = 0.0f64;
    let mut diagonal_mismatch = 0.0f64;
    let mut samples = Vec::new();
    samples.push(GroupoidFunction::unit_indicator(g));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..3 {
        samples.push(GroupoidFunction::from_fn(g, |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        }));
    }

    for f in &samples {
        let full = integrated_form(f, rep, g, haar)?;
        let part0 = integrated_form(f, &rep0, g, haar)?;
        let part1 = integrated_form(f, &rep1, g, haar)?;
        for (pi, &xi) in full.space.units().iter().enumerate() {
            for (pj, &xj) in full.space.units().iter().enumerate() {
                let io = full.space.offsets[pi];
                let jo = full.space.offsets[pj];
                let in0_i = m0.in_support(xi);
                let in0_j = m0.in_support(xj);
                let di = full.space.dims[pi];
                let dj = full.space.dims[pj];
                if in0_i != in0_j {
                    for i in 0..di {
                        for j in 0..dj {
                            off_block_max =
                                off_block_max.max(full.matrix.get(io + i, jo + j).norm());
                        }
                    }
                } else {
                    let part = if in0_i { &part0 } else { &part1 };
                    let (Some(so_i), Some(so_j)) = (part.space.offset_of(xi), part.space.offset_of(xj))
                    else {
                        continue;
                    };
                    for i in 0..di {
                        for j in 0..dj {
                            let d = (full.matrix.get(io + i, jo + j)
                                - part.matrix.get(so_i + i, so_j + j))
                            .norm();
                            diagonal_mismatch = diagonal_mismatch.max(d);
                        }
                    }
                }
            }
        }
    }

    Ok(DirectSumDecomposition {
        rep0,
        rep1,
        off_block_max,
        diagonal_mismatch,
        samples: samples.len(),
    })
}

/// Builds the half-density rescaling matrix from the `mu_prime` section
/// space into the `mu` section space and returns the deviation
/// `|| R^# pi_mu(F) R - pi_mu'(F) ||_F`, where `#` is the adjoint in the
/// weighted metrics.
pub fn intertwiner_check(
    rep: &RepresentationTriple,
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu_prime: &UnitMeasure,
    f: &GroupoidFunction,
) -> Result<f64> {
    let qi = is_quasi_invariant(g, haar, mu_prime);
    if !qi.holds {
        let w = qi.witness.expect("witness accompanies failure");
        return Err(CoreError::NotQuasiInvariant(g.arrow_label(w).to_string()));
    }
    for x in g.units() {
        if mu_prime.in_support(x) && !rep.mu.in_support(x) {
            return Err(CoreError::NotAbsolutelyContinuous(
                g.unit_label(x).to_string(),
            ));
        }
    }
    let rep_prime = rep.with_measure(g, haar, mu_prime.clone())?;
    let pi = integrated_form(f, rep, g, haar)?;
    let pi_prime = integrated_form(f, &rep_prime, g, haar)?;

    let space = &pi.space;
    let space_prime = &pi_prime.space;
    // R: L^2(mu') -> L^2(mu), diagonal with sqrt(d mu'/d mu) per fiber.
    let mut r = CMatrix::zeros(space.total_dim(), space_prime.total_dim());
    // R^#: L^2(mu) -> L^2(mu'), the weighted adjoint, diagonal with the
    // reciprocal factor.
    let mut r_sharp = CMatrix::zeros(space_prime.total_dim(), space.total_dim());
    for (p, &x) in space_prime.units().iter().enumerate() {
        let rho = (mu_prime.weight(x) / rep.mu.weight(x)).sqrt();
        let dst = space.offset_of(x).expect("absolute continuity checked");
        let src = space_prime.offsets[p];
        for k in 0..space_prime.dims[p] {
            r.set(dst + k, src + k, Complex64::new(rho, 0.0));
            r_sharp.set(src + k, dst + k, Complex64::new(1.0 / rho, 0.0));
        }
    }
    let conjugated = r_sharp.mul(&pi.matrix)?.mul(&r)?;
    Ok(conjugated.sub(&pi_prime.matrix)?.frobenius_norm())
}

/// Deterministic random representation triple. Fiber dimensions are drawn
/// per orbit; unitaries come from random unitary frames per unit combined
/// with a character-diagonal representation of the (cyclic) isotropy at the
/// orbit root, which makes the homomorphism law hold by construction.
/// Non-cyclic isotropy falls back to the trivial isotropy representation.
pub fn random_representation_triple(
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu: &UnitMeasure,
    max_dim: usize,
    seed: u64,
) -> Result<RepresentationTriple> {
    if max_dim == 0 {
        return Err(CoreError::InvalidConstruction(
            "max_dim must be at least 1".into(),
        ));
    }
    let qi = is_quasi_invariant(g, haar, mu);
    if !qi.holds {
        let w = qi.witness.expect("witness accompanies failure");
        return Err(CoreError::NotQuasiInvariant(g.arrow_label(w).to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_units = g.n_units();
    let mut dims = vec![0usize; n_units];
    let mut unitaries: Vec<CMatrix> = vec![CMatrix::zeros(0, 0); g.n_arrows()];
    let mut visited = vec![false; n_units];

    for root in 0..n_units {
        if visited[root] {
            continue;
        }
        // BFS over the orbit, recording a transport arrow to the root.
        let root_unit = UnitId(root);
        let mut orbit = vec![root_unit];
        let mut transport = vec![None; n_units]; // p_x with r = root, s = x
        transport[root] = Some(g.unit_arrow(root_unit));
        visited[root] = true;
        let mut queue = std::collections::VecDeque::from([root_unit]);
        while let Some(x) = queue.pop_front() {
            for &a in g.range_fiber(x)? {
                let y = g.source(a);
                if !visited[y.0] {
                    visited[y.0] = true;
                    let p = g
                        .product(transport[x.0].expect("visited"), a)
                        .expect("transport composes");
                    transport[y.0] = Some(p);
                    orbit.push(y);
                    queue.push_back(y);
                }
            }
        }

        let d = 1 + (rng.gen::<u64>() as usize) % max_dim;
        for &x in &orbit {
            dims[x.0] = d;
        }

        // Isotropy at the root; cyclic fibers get a random character-diagonal
        // representation, anything else the trivial one.
        let isotropy: Vec<ArrowId> = g
            .range_fiber(root_unit)?
            .iter()
            .copied()
            .filter(|&a| g.source(a) == root_unit)
            .collect();
        let mut power_of = std::collections::HashMap::new();
        let mut character_exponents: Vec<u64> = Vec::new();
        let cyclic = cyclic_order_enumeration(g, root_unit, &isotropy);
        let order = cyclic.as_ref().map(|e| e.len()).unwrap_or(1);
        if let Some(elements) = &cyclic {
            for (k, &a) in elements.iter().enumerate() {
                power_of.insert(a, k);
            }
            character_exponents = (0..d).map(|_| rng.gen::<u64>() % order as u64).collect();
        }
        let iso_rep = |k: usize, d: usize| -> CMatrix {
            let mut m = CMatrix::zeros(d, d);
            for (i, row) in (0..d).enumerate() {
                let c = character_exponents.get(i).copied().unwrap_or(0);
                let phase =
                    2.0 * std::f64::consts::PI * ((c as usize * k) % order) as f64 / order as f64;
                m.set(row, row, Complex64::new(phase.cos(), phase.sin()));
            }
            m
        };

        let mut frames = vec![CMatrix::zeros(0, 0); n_units];
        for &x in &orbit {
            frames[x.0] = random_unitary(d, &mut rng);
        }

        for &x in &orbit {
            for &a in g.range_fiber(x)? {
                let y = g.source(a);
                // gamma = p_x a p_y^{-1} lies in the isotropy at the root.
                let px = transport[x.0].expect("orbit member");
                let py = transport[y.0].expect("orbit member");
                let gamma = g
                    .product(g.product(px, a).expect("composable"), g.inverse(py))
                    .expect("composable");
                let k = power_of.get(&gamma).copied().unwrap_or(0);
                let middle = iso_rep(k, d);
                unitaries[a.0] = frames[x.0]
                    .mul(&middle)
                    .expect("square")
                    .mul(&frames[y.0].adjoint())
                    .expect("square");
            }
        }
    }

    let bundle = HilbertBundle::new(g, dims)?;
    let action = GroupoidAction::new(g, unitaries)?;
    RepresentationTriple::validated(g, haar, bundle, action, mu.clone())
}

/// Enumerates the isotropy group as powers of a single generator when it is
/// cyclic; mirrors the classification helper but works on any unit.
fn cyclic_order_enumeration(
    g: &FiniteGroupoid,
    x: UnitId,
    isotropy: &[ArrowId],
) -> Option<Vec<ArrowId>> {
    let e = g.unit_arrow(x);
    if isotropy.len() == 1 {
        return Some(vec![e]);
    }
    for &cand in isotropy {
        if cand == e {
            continue;
        }
        let mut elements = vec![e];
        let mut cur = cand;
        while cur != e && elements.len() <= isotropy.len() {
            elements.push(cur);
            cur = g.product(cur, cand)?;
        }
        if cur == e && elements.len() == isotropy.len() {
            return Some(elements);
        }
    }
    None
}

/// Gram-Schmidt on a Gaussian matrix; deterministic given the generator.
fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
    for _ in 0..d {
        loop {
            let mut v: Vec<C64> = (0..d)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            for prev in &cols {
                let overlap = inner(&v, prev);
                for (vi, pi) in v.iter_mut().zip(prev.iter()) {
                    *vi -= overlap * pi;
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for vi in v.iter_mut() {
                    *vi /= norm;
                }
                cols.push(v);
                break;
            }
        }
    }
    let mut m = CMatrix::zeros(d, d);
    for (j, col) in cols.iter().enumerate() {
        for (i, &z) in col.iter().enumerate() {
            m.set(i, j, z);
        }
    }
    m
}

/// The left regular representation of a bundle of cyclic groups: the fiber
/// at each base point has dimension equal to the group order and the
/// generator acts by the cyclic shift.
pub fn regular_group_bundle_triple(
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu: &UnitMeasure,
) -> Result<RepresentationTriple> {
    let GroupoidClass::GroupBundle { fibers } = classify(g) else {
        return Err(CoreError::UnsupportedClass(
            "regular triple needs a bundle of cyclic groups".into(),
        ));
    };
    let mut dims = vec![0usize; g.n_units()];
    let mut unitaries: Vec<CMatrix> = vec![CMatrix::zeros(0, 0); g.n_arrows()];
    for fiber in &fibers {
        let m = fiber.elements.len();
        dims[fiber.base.0] = m;
        for (k, &a) in fiber.elements.iter().enumerate() {
            let mut shift = CMatrix::zeros(m, m);
            for j in 0..m {
                shift.set((j + k) % m, j, Complex64::new(1.0, 0.0));
            }
            unitaries[a.0] = shift;
        }
    }
    let bundle = HilbertBundle::new(g, dims)?;
    let action = GroupoidAction::new(g, unitaries)?;
    RepresentationTriple::validated(g, haar, bundle, action, mu.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{convolve, i_norm, involution};
    use crate::groupoid::{
        cyclic_group_bundle, disjoint_union, disjoint_union_haar, pair_groupoid, unit_groupoid,
    };

    fn random_function(g: &FiniteGroupoid, seed: u64) -> GroupoidFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GroupoidFunction::from_fn(g, |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    #[test]
    fn trivial_pair_representation_is_the_matrix() {
        let (g, h) = pair_groupoid(3).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let rep = RepresentationTriple::validated(
            &g,
            &h,
            HilbertBundle::trivial(&g),
            GroupoidAction::trivial(&g),
            mu,
        )
        .unwrap();
        let f = random_function(&g, 1);
        let op = integrated_form(&f, &rep, &g, &h).unwrap();
        assert_eq!(op.matrix.rows(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let a = g.find_arrow(&format!("({},{})", i + 1, j + 1)).unwrap();
                assert!((op.matrix.get(i, j) - f.value(a)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn unit_groupoid_representation_is_diagonal() {
        let (g, h) = unit_groupoid(4).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let rep = RepresentationTriple::validated(
            &g,
            &h,
            HilbertBundle::trivial(&g),
            GroupoidAction::trivial(&g),
            mu,
        )
        .unwrap();
        let f = random_function(&g, 2);
        let op = integrated_form(&f, &rep, &g, &h).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j {
                    f.value(g.unit_arrow(UnitId(i)))
                } else {
                    C_ZERO
                };
                assert!((op.matrix.get(i, j) - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn unit_indicator_integrates_to_identity() {
        let (g, h) = cyclic_group_bundle(2, 3).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.4, 0.6]).unwrap();
        let rep = random_representation_triple(&g, &h, &mu, 3, 5).unwrap();
        let op = integrated_form(&GroupoidFunction::unit_indicator(&g), &rep, &g, &h).unwrap();
        let n = op.matrix.rows();
        assert!(op.matrix.sub(&CMatrix::identity(n)).unwrap().max_abs_entry() < 1e-10);
    }

    #[test]
    fn integrated_form_matches_pairing() {
        let (g, h) = pair_groupoid(3).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.2, 0.5, 0.3]).unwrap();
        let rep = random_representation_triple(&g, &h, &mu, 2, 9).unwrap();
        let f = random_function(&g, 10);
        let op = integrated_form(&f, &rep, &g, &h).unwrap();
        let xi = random_section(&rep.bundle, 11);
        let eta = random_section(&rep.bundle, 12);
        let lhs = op
            .space
            .weighted_inner(&op.matrix.matvec(&op.space.flatten(&xi)).unwrap(), &op.space.flatten(&eta));

        let nu0 = crate::measure::symmetrized_from_unit_measure(&g, &h, &rep.mu).unwrap();
        let mut rhs = C_ZERO;
        for a in g.arrows() {
            let l = rep.action.unitary(a);
            let moved = l.matvec(xi.block(g.source(a))).unwrap();
            rhs += f.value(a) * inner(&moved, eta.block(g.range(a))) * nu0.weight(a);
        }
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn integrated_form_is_star_homomorphism() {
        for (g, h) in [
            pair_groupoid(3).unwrap(),
            unit_groupoid(4).unwrap(),
            cyclic_group_bundle(2, 3).unwrap(),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let weights: Vec<f64> = (0..g.n_units()).map(|_| 0.2 + rng.gen::<f64>()).collect();
            let mu = UnitMeasure::new(&g, weights).unwrap();
            let rep = random_representation_triple(&g, &h, &mu, 3, 13).unwrap();
            let f1 = random_function(&g, 21);
            let f2 = random_function(&g, 22);
            let conv = convolve(&f1, &f2, &g, &h).unwrap();
            let op1 = integrated_form(&f1, &rep, &g, &h).unwrap();
            let op2 = integrated_form(&f2, &rep, &g, &h).unwrap();
            let opc = integrated_form(&conv, &rep, &g, &h).unwrap();
            let product = op1.matrix.mul(&op2.matrix).unwrap();
            assert!(product.sub(&opc.matrix).unwrap().frobenius_norm() < 1e-9);

            let star = integrated_form(&involution(&f1, &g), &rep, &g, &h).unwrap();
            let adj = op1.weighted_adjoint();
            assert!(star.matrix.sub(&adj).unwrap().frobenius_norm() < 1e-9);
        }
    }

    #[test]
    fn operator_norm_bounded_by_i_norm() {
        let (g, h) = pair_groupoid(4).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let rep = random_representation_triple(&g, &h, &mu, 3, 31).unwrap();
        for seed in 0..5 {
            let f = random_function(&g, 40 + seed);
            let op = integrated_form(&f, &rep, &g, &h).unwrap();
            assert!(op.op_norm().unwrap() <= i_norm(&f, &g, &h) + 1e-9);
        }
    }

    #[test]
    fn cstar_norm_examples() {
        let (g, h) = pair_groupoid(2).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let e12 = GroupoidFunction::delta(&g, g.find_arrow("(1,2)").unwrap());
        assert!((cstar_norm(&e12, &g, &h, &mu).unwrap() - 1.0).abs() < 1e-10);

        let (g, h) = unit_groupoid(3).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let mut f = GroupoidFunction::zero(&g);
        f.set(ArrowId(0), Complex64::new(1.0, 0.0));
        f.set(ArrowId(1), Complex64::new(-2.0, 0.0));
        f.set(ArrowId(2), Complex64::new(3.0, 0.0));
        assert_eq!(cstar_norm(&f, &g, &h, &mu).unwrap(), 3.0);

        let (g, h) = cyclic_group_bundle(1, 2).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let delta0 = GroupoidFunction::delta(&g, g.find_arrow("(1,0)").unwrap());
        assert!((cstar_norm(&delta0, &g, &h, &mu).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cstar_norm_rejects_unsupported() {
        let (a, ha) = pair_groupoid(2).unwrap();
        let (b, hb) = pair_groupoid(2).unwrap();
        let u = disjoint_union(&a, &b).unwrap();
        let hu = disjoint_union_haar(&ha, &hb);
        let mu = UnitMeasure::uniform(&u);
        let f = GroupoidFunction::unit_indicator(&u);
        assert!(matches!(
            cstar_norm(&f, &u, &hu, &mu),
            Err(CoreError::UnsupportedClass(_))
        ));
    }

    #[test]
    fn cstar_norm_satisfies_cstar_identity() {
        for (g, h) in [
            pair_groupoid(3).unwrap(),
            unit_groupoid(4).unwrap(),
            cyclic_group_bundle(2, 4).unwrap(),
        ] {
            let mu = UnitMeasure::uniform(&g);
            for seed in 0..5u64 {
                let f = random_function(&g, 60 + seed);
                let fs = involution(&f, &g);
                let fsf = convolve(&fs, &f, &g, &h).unwrap();
                let lhs = cstar_norm(&fsf, &g, &h, &mu).unwrap();
                let rhs = cstar_norm(&f, &g, &h, &mu).unwrap().powi(2);
                assert!(
                    (lhs - rhs).abs() <= 1e-8 * rhs.max(1.0),
                    "cstar identity violated: {} vs {}",
                    lhs,
                    rhs
                );
                // Involution isometry and submultiplicativity.
                assert!(
                    (cstar_norm(&fs, &g, &h, &mu).unwrap()
                        - cstar_norm(&f, &g, &h, &mu).unwrap())
                    .abs()
                        < 1e-10
                );
                let f2 = random_function(&g, 80 + seed);
                let prod = convolve(&f, &f2, &g, &h).unwrap();
                assert!(
                    cstar_norm(&prod, &g, &h, &mu).unwrap()
                        <= cstar_norm(&f, &g, &h, &mu).unwrap()
                            * cstar_norm(&f2, &g, &h, &mu).unwrap()
                            + 1e-8
                );
            }
        }
    }

    #[test]
    fn direct_sum_split_is_block_diagonal() {
        let (a, ha) = pair_groupoid(2).unwrap();
        let (b, hb) = pair_groupoid(3).unwrap();
        let g = disjoint_union(&a, &b).unwrap();
        let h = disjoint_union_haar(&ha, &hb);
        let mut w0 = vec![0.0; 5];
        let mut w1 = vec![0.0; 5];
        w0[0] = 0.5;
        w0[1] = 0.5;
        w1[2] = 0.4;
        w1[3] = 0.3;
        w1[4] = 0.3;
        let mu0 = UnitMeasure::new(&g, w0).unwrap();
        let mu1 = UnitMeasure::new(&g, w1).unwrap();
        let mu = UnitMeasure::new(
            &g,
            (0..5)
                .map(|i| 0.5 * mu0.weights()[i] + 0.5 * mu1.weights()[i])
                .collect(),
        )
        .unwrap();
        let rep = random_representation_triple(&g, &h, &mu, 2, 3).unwrap();
        let out = direct_sum_decompose(&rep, &g, &h, &mu0, &mu1, 0.5, 0.5, 7).unwrap();
        assert_eq!(out.off_block_max, 0.0);
        assert!(out.diagonal_mismatch < 1e-10);
    }

    #[test]
    fn direct_sum_with_zero_coefficient_leaves_empty_part() {
        let (g, h) = cyclic_group_bundle(2, 2).unwrap();
        let mu0 = UnitMeasure::new(&g, vec![0.7, 0.3]).unwrap();
        let mu1 = UnitMeasure::new(&g, vec![0.0, 0.0]).unwrap();
        let mu = mu0.clone();
        let rep = random_representation_triple(&g, &h, &mu, 2, 1).unwrap();
        let out = direct_sum_decompose(&rep, &g, &h, &mu0, &mu1, 1.0, 0.0, 0).unwrap();
        assert_eq!(out.rep1.mu.total_mass(), 0.0);
        assert_eq!(out.off_block_max, 0.0);
    }

    #[test]
    fn direct_sum_rejects_overlapping_parts() {
        let (g, h) = cyclic_group_bundle(2, 2).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let rep = random_representation_triple(&g, &h, &mu, 1, 0).unwrap();
        let err = direct_sum_decompose(&rep, &g, &h, &mu, &mu, 0.5, 0.5, 0);
        assert!(err.is_err());
    }

    #[test]
    fn intertwiner_zero_for_same_measure() {
        let (g, h) = cyclic_group_bundle(3, 2).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.5, 0.25, 0.25]).unwrap();
        let rep = random_representation_triple(&g, &h, &mu, 2, 17).unwrap();
        let f = random_function(&g, 18);
        let dev = intertwiner_check(&rep, &g, &h, &mu, &f).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn intertwiner_small_for_downscaled_measure() {
        let (g, h) = cyclic_group_bundle(3, 2).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let rep = random_representation_triple(&g, &h, &mu, 3, 19).unwrap();
        let mu_prime = UnitMeasure::new(&g, vec![0.5, 0.25, 0.25]).unwrap();
        let f = random_function(&g, 20);
        let dev = intertwiner_check(&rep, &g, &h, &mu_prime, &f).unwrap();
        assert!(dev <= 1e-9, "deviation {}", dev);
    }

    #[test]
    fn intertwiner_rejects_partial_support_on_pair_groupoid() {
        let (g, h) = pair_groupoid(3).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.2, 0.3, 0.5]).unwrap();
        let rep = random_representation_triple(&g, &h, &mu, 2, 23).unwrap();
        // Restriction to two units is not quasi-invariant on the pair groupoid.
        let mu_prime = UnitMeasure::new(&g, vec![0.4, 0.6, 0.0]).unwrap();
        let f = random_function(&g, 24);
        assert!(matches!(
            intertwiner_check(&rep, &g, &h, &mu_prime, &f),
            Err(CoreError::NotQuasiInvariant(_))
        ));
    }

    #[test]
    fn random_triples_are_deterministic_and_valid() {
        let (g, h) = cyclic_group_bundle(2, 3).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.5, 0.5]).unwrap();
        let a = random_representation_triple(&g, &h, &mu, 3, 99).unwrap();
        let b = random_representation_triple(&g, &h, &mu, 3, 99).unwrap();
        assert_eq!(a, b);
        for seed in 0..40 {
            for (g, h) in [
                pair_groupoid(3).unwrap(),
                unit_groupoid(3).unwrap(),
                cyclic_group_bundle(2, 4).unwrap(),
            ] {
                let mu = UnitMeasure::uniform(&g);
                let rep = random_representation_triple(&g, &h, &mu, 3, seed).unwrap();
                assert!(validate_action(&g, &rep.bundle, &rep.action).is_empty());
            }
        }
    }

    #[test]
    fn scalar_triples_on_pair_groupoid() {
        let (g, h) = pair_groupoid(4).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let rep = random_representation_triple(&g, &h, &mu, 1, 7).unwrap();
        for a in g.arrows() {
            let u = rep.action.unitary(a);
            assert_eq!(u.rows(), 1);
            assert!((u.get(0, 0).norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn regular_triple_validates() {
        let (g, h) = cyclic_group_bundle(3, 4).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let rep = regular_group_bundle_triple(&g, &h, &mu).unwrap();
        assert!(validate_action(&g, &rep.bundle, &rep.action).is_empty());
        assert_eq!(rep.bundle.dim(UnitId(0)), 4);
    }

    #[test]
    fn zero_measure_fibers_are_dropped() {
        let (g, h) = unit_groupoid(3).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.5, 0.0, 0.5]).unwrap();
        let rep = RepresentationTriple::validated(
            &g,
            &h,
            HilbertBundle::new(&g, vec![2, 3, 1]).unwrap(),
            {
                let mut us = Vec::new();
                for d in [2usize, 3, 1] {
                    us.push(CMatrix::identity(d));
                }
                GroupoidAction::new(&g, us).unwrap()
            },
            mu,
        )
        .unwrap();
        let f = GroupoidFunction::unit_indicator(&g);
        let op = integrated_form(&f, &rep, &g, &h).unwrap();
        assert_eq!(op.matrix.rows(), 3); // 2 + 1, middle fiber dropped
    }
}
