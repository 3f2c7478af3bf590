//! Finite groupoids with dense arrow tables and left Haar systems.
//!
//! Units and arrows are dense integer indices into label tables; range,
//! source, product, and inverse are array lookups, so exhaustive iteration
//! over fibers and composable pairs is cheap and fully deterministic.
//! The product convention is `product(g1, g2)` defined iff `s(g1) = r(g2)`.

use crate::error::{CoreError, Result};
use crate::tol::HAAR_TOL;

/// Index of a unit in the unit space.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct UnitId(pub usize);

/// Index of an arrow.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ArrowId(pub usize);

/// A finite groupoid: a small category with inverses, stored as arrays.
#[derive(Clone, Debug)]
pub struct FiniteGroupoid {
    unit_labels: Vec<String>,
    arrow_labels: Vec<String>,
    range: Vec<usize>,
    source: Vec<usize>,
    /// Dense composition table, `g1 * n_arrows + g2`; `Some` iff composable.
    product: Vec<Option<usize>>,
    inverse: Vec<usize>,
    /// Arrow embedding each unit.
    unit_arrow: Vec<usize>,
    range_fibers: Vec<Vec<ArrowId>>,
    source_fibers: Vec<Vec<ArrowId>>,
    fingerprint: u64,
}

/// Weights of a left Haar system: the restriction to `G^x` is the measure
/// `lambda^x` on the range fiber of `x`.
#[derive(Clone, Debug)]
pub struct HaarSystem {
    weights: Vec<f64>,
}

/// One violated axiom together with a witness tuple of arrow/unit labels.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Violation {
    pub axiom: String,
    pub witness: Vec<String>,
}

/// Violations are data, not errors: an empty report means all axioms hold.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, axiom: &str, witness: Vec<String>) {
        self.violations.push(Violation {
            axiom: axiom.to_string(),
            witness,
        });
    }
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = if seed == 0 { 0xcbf2_9ce4_8422_2325 } else { seed };
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl FiniteGroupoid {
    /// Builds a groupoid from explicit tables, checking structural
    /// well-formedness (`product` defined exactly on composable pairs,
    /// indices in range, unit embedding injective). Axioms such as
    /// associativity are checked separately by [`validate_groupoid`].
    pub fn from_parts(
        unit_labels: Vec<String>,
        arrow_labels: Vec<String>,
        range: Vec<usize>,
        source: Vec<usize>,
        products: &[(usize, usize, usize)],
        inverse: Vec<usize>,
        unit_arrow: Vec<usize>,
    ) -> Result<Self> {
        let nu = unit_labels.len();
        let na = arrow_labels.len();
        if nu == 0 || na == 0 {
            return Err(CoreError::InvalidConstruction(
                "a groupoid needs at least one unit and one arrow".into(),
            ));
        }
        if range.len() != na || source.len() != na || inverse.len() != na {
            return Err(CoreError::InvalidConstruction(
                "range, source, and inverse must be defined on every arrow".into(),
            ));
        }
        if unit_arrow.len() != nu {
            return Err(CoreError::InvalidConstruction(
                "unit embedding must be defined on every unit".into(),
            ));
        }
        if range.iter().chain(source.iter()).any(|&u| u >= nu) {
            return Err(CoreError::InvalidConstruction(
                "range/source refers to an unknown unit".into(),
            ));
        }
        if inverse.iter().chain(unit_arrow.iter()).any(|&a| a >= na) {
            return Err(CoreError::InvalidConstruction(
                "inverse/unit embedding refers to an unknown arrow".into(),
            ));
        }
        let mut seen = vec![false; na];
        for &a in &unit_arrow {
            if seen[a] {
                return Err(CoreError::InvalidConstruction(
                    "unit embedding is not injective".into(),
                ));
            }
            seen[a] = true;
        }

        let mut table = vec![None; na * na];
        for &(g1, g2, g3) in products {
            if g1 >= na || g2 >= na || g3 >= na {
                return Err(CoreError::InvalidConstruction(
                    "product entry refers to an unknown arrow".into(),
                ));
            }
            if source[g1] != range[g2] {
                return Err(CoreError::InvalidConstruction(format!(
                    "product defined for non-composable pair ({}, {})",
                    arrow_labels[g1], arrow_labels[g2]
                )));
            }
            if table[g1 * na + g2].is_some() {
                return Err(CoreError::InvalidConstruction(format!(
                    "duplicate product entry for ({}, {})",
                    arrow_labels[g1], arrow_labels[g2]
                )));
            }
            table[g1 * na + g2] = Some(g3);
        }
        for g1 in 0..na {
            for g2 in 0..na {
                if source[g1] == range[g2] && table[g1 * na + g2].is_none() {
                    return Err(CoreError::InvalidConstruction(format!(
                        "product missing for composable pair ({}, {})",
                        arrow_labels[g1], arrow_labels[g2]
                    )));
                }
            }
        }

        let mut range_fibers = vec![Vec::new(); nu];
        let mut source_fibers = vec![Vec::new(); nu];
        for a in 0..na {
            range_fibers[range[a]].push(ArrowId(a));
            source_fibers[source[a]].push(ArrowId(a));
        }

        let mut h = 0u64;
        for l in unit_labels.iter().chain(arrow_labels.iter()) {
            h = fnv1a(h, l.as_bytes());
        }
        for &v in range.iter().chain(source.iter()).chain(inverse.iter()) {
            h = fnv1a(h, &(v as u64).to_le_bytes());
        }
        for cell in &table {
            let v = cell.map(|x| x as u64 + 1).unwrap_or(0);
            h = fnv1a(h, &v.to_le_bytes());
        }

        Ok(Self {
            unit_labels,
            arrow_labels,
            range,
            source,
            product: table,
            inverse,
            unit_arrow,
            range_fibers,
            source_fibers,
            fingerprint: h,
        })
    }

    pub fn n_units(&self) -> usize {
        self.unit_labels.len()
    }

    pub fn n_arrows(&self) -> usize {
        self.arrow_labels.len()
    }

    pub fn units(&self) -> impl Iterator<Item = UnitId> {
        (0..self.n_units()).map(UnitId)
    }

    pub fn arrows(&self) -> impl Iterator<Item = ArrowId> {
        (0..self.n_arrows()).map(ArrowId)
    }

    pub fn unit_label(&self, x: UnitId) -> &str {
        &self.unit_labels[x.0]
    }

    pub fn arrow_label(&self, g: ArrowId) -> &str {
        &self.arrow_labels[g.0]
    }

    pub fn range(&self, g: ArrowId) -> UnitId {
        UnitId(self.range[g.0])
    }

    pub fn source(&self, g: ArrowId) -> UnitId {
        UnitId(self.source[g.0])
    }

    /// `g1 g2`, defined iff `s(g1) = r(g2)`.
    pub fn product(&self, g1: ArrowId, g2: ArrowId) -> Option<ArrowId> {
        self.product[g1.0 * self.n_arrows() + g2.0].map(ArrowId)
    }

    pub fn inverse(&self, g: ArrowId) -> ArrowId {
        ArrowId(self.inverse[g.0])
    }

    pub fn unit_arrow(&self, x: UnitId) -> ArrowId {
        ArrowId(self.unit_arrow[x.0])
    }

    pub fn is_unit_arrow(&self, g: ArrowId) -> bool {
        self.unit_arrow[self.range[g.0]] == g.0 && self.range[g.0] == self.source[g.0]
    }

    /// `G^x = { g : r(g) = x }` in arrow-set order.
    pub fn range_fiber(&self, x: UnitId) -> Result<&[ArrowId]> {
        self.range_fibers
            .get(x.0)
            .map(Vec::as_slice)
            .ok_or_else(|| CoreError::UnknownUnit(format!("#{}", x.0)))
    }

    /// `G_x = { g : s(g) = x }` in arrow-set order.
    pub fn source_fiber(&self, x: UnitId) -> Result<&[ArrowId]> {
        self.source_fibers
            .get(x.0)
            .map(Vec::as_slice)
            .ok_or_else(|| CoreError::UnknownUnit(format!("#{}", x.0)))
    }

    pub fn find_unit(&self, label: &str) -> Option<UnitId> {
        self.unit_labels.iter().position(|l| l == label).map(UnitId)
    }

    pub fn find_arrow(&self, label: &str) -> Option<ArrowId> {
        self.arrow_labels
            .iter()
            .position(|l| l == label)
            .map(ArrowId)
    }

    /// Structural hash used to detect cross-groupoid mixups.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// The pair groupoid on `{1, ..., n}`: arrows `(i,j)`, product
/// `(i,j)(j,k) = (i,k)`, inverse `(i,j)^{-1} = (j,i)`, counting Haar system.
pub fn pair_groupoid(n: usize) -> Result<(FiniteGroupoid, HaarSystem)> {
    if n == 0 {
        return Err(CoreError::InvalidConstruction(
            "pair groupoid needs n >= 1".into(),
        ));
    }
    let unit_labels: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let mut arrow_labels = Vec::with_capacity(n * n);
    let mut range = Vec::with_capacity(n * n);
    let mut source = Vec::with_capacity(n * n);
    let mut inverse = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            arrow_labels.push(format!("({},{})", i + 1, j + 1));
            range.push(i);
            source.push(j);
            inverse.push(j * n + i);
        }
    }
    let mut products = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // (i,j)(j,k) = (i,k)
                products.push((i * n + j, j * n + k, i * n + k));
            }
        }
    }
    let unit_arrow: Vec<usize> = (0..n).map(|i| i * n + i).collect();
    let g = FiniteGroupoid::from_parts(
        unit_labels,
        arrow_labels,
        range,
        source,
        &products,
        inverse,
        unit_arrow,
    )?;
    let h = HaarSystem::counting(&g);
    Ok((g, h))
}

/// The unit groupoid on `n` points: every arrow is a unit, `g g = g`.
pub fn unit_groupoid(n: usize) -> Result<(FiniteGroupoid, HaarSystem)> {
    if n == 0 {
        return Err(CoreError::InvalidConstruction(
            "unit groupoid needs n >= 1".into(),
        ));
    }
    let labels: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let range: Vec<usize> = (0..n).collect();
    let source = range.clone();
    let inverse: Vec<usize> = (0..n).collect();
    let products: Vec<(usize, usize, usize)> = (0..n).map(|i| (i, i, i)).collect();
    let unit_arrow: Vec<usize> = (0..n).collect();
    let g = FiniteGroupoid::from_parts(
        labels.clone(),
        labels,
        range,
        source,
        &products,
        inverse,
        unit_arrow,
    )?;
    let h = HaarSystem::counting(&g);
    Ok((g, h))
}

/// A bundle of cyclic groups: arrows `(n,k)` with `k` in `Z_m`, composing
/// fiberwise by addition mod `m`; units are the `(n,0)`.
pub fn cyclic_group_bundle(
    base_size: usize,
    fiber_order: usize,
) -> Result<(FiniteGroupoid, HaarSystem)> {
    if base_size == 0 || fiber_order == 0 {
        return Err(CoreError::InvalidConstruction(
            "cyclic group bundle needs base_size >= 1 and fiber_order >= 1".into(),
        ));
    }
    let m = fiber_order;
    let unit_labels: Vec<String> = (1..=base_size).map(|b| format!("({},0)", b)).collect();
    let mut arrow_labels = Vec::with_capacity(base_size * m);
    let mut range = Vec::with_capacity(base_size * m);
    let mut source = Vec::with_capacity(base_size * m);
    let mut inverse = Vec::with_capacity(base_size * m);
    for b in 0..base_size {
        for k in 0..m {
            arrow_labels.push(format!("({},{})", b + 1, k));
            range.push(b);
            source.push(b);
            inverse.push(b * m + (m - k) % m);
        }
    }
    let mut products = Vec::new();
    for b in 0..base_size {
        for k1 in 0..m {
            for k2 in 0..m {
                products.push((b * m + k1, b * m + k2, b * m + (k1 + k2) % m));
            }
        }
    }
    let unit_arrow: Vec<usize> = (0..base_size).map(|b| b * m).collect();
    let g = FiniteGroupoid::from_parts(
        unit_labels,
        arrow_labels,
        range,
        source,
        &products,
        inverse,
        unit_arrow,
    )?;
    let h = HaarSystem::counting(&g);
    Ok((g, h))
}

/// Disjoint union of two groupoids; labels are prefixed to stay unique.
pub fn disjoint_union(
    a: &FiniteGroupoid,
    b: &FiniteGroupoid,
) -> Result<FiniteGroupoid> {
    let nu_a = a.n_units();
    let na_a = a.n_arrows();
    let unit_labels: Vec<String> = a
        .unit_labels
        .iter()
        .map(|l| format!("1:{}", l))
        .chain(b.unit_labels.iter().map(|l| format!("2:{}", l)))
        .collect();
    let arrow_labels: Vec<String> = a
        .arrow_labels
        .iter()
        .map(|l| format!("1:{}", l))
        .chain(b.arrow_labels.iter().map(|l| format!("2:{}", l)))
        .collect();
    let range: Vec<usize> = a
        .range
        .iter()
        .copied()
        .chain(b.range.iter().map(|&u| u + nu_a))
        .collect();
    let source: Vec<usize> = a
        .source
        .iter()
        .copied()
        .chain(b.source.iter().map(|&u| u + nu_a))
        .collect();
    let inverse: Vec<usize> = a
        .inverse
        .iter()
        .copied()
        .chain(b.inverse.iter().map(|&g| g + na_a))
        .collect();
    let unit_arrow: Vec<usize> = a
        .unit_arrow
        .iter()
        .copied()
        .chain(b.unit_arrow.iter().map(|&g| g + na_a))
        .collect();
    let mut products = Vec::new();
    for g1 in 0..na_a {
        for g2 in 0..na_a {
            if let Some(g3) = a.product[g1 * na_a + g2] {
                products.push((g1, g2, g3));
            }
        }
    }
    let na_b = b.n_arrows();
    for g1 in 0..na_b {
        for g2 in 0..na_b {
            if let Some(g3) = b.product[g1 * na_b + g2] {
                products.push((g1 + na_a, g2 + na_a, g3 + na_a));
            }
        }
    }
    FiniteGroupoid::from_parts(
        unit_labels,
        arrow_labels,
        range,
        source,
        &products,
        inverse,
        unit_arrow,
    )
}

/// Concatenates the Haar weights of two groupoids for their disjoint union.
pub fn disjoint_union_haar(a: &HaarSystem, b: &HaarSystem) -> HaarSystem {
    let mut weights = a.weights.clone();
    weights.extend_from_slice(&b.weights);
    HaarSystem { weights }
}

impl HaarSystem {
    /// Counting measure on every fiber.
    pub fn counting(g: &FiniteGroupoid) -> Self {
        Self {
            weights: vec![1.0; g.n_arrows()],
        }
    }

    /// Arbitrary strictly positive weights; left invariance is checked by
    /// [`validate_haar`], not here.
    pub fn from_weights(g: &FiniteGroupoid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != g.n_arrows() {
            return Err(CoreError::DimensionMismatch(format!(
                "haar weights cover {} arrows, groupoid has {}",
                weights.len(),
                g.n_arrows()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(CoreError::NonFiniteInput("haar weight".into()));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(CoreError::InvalidConstruction(
                "haar weights must be strictly positive".into(),
            ));
        }
        Ok(Self { weights })
    }

    pub fn weight(&self, g: ArrowId) -> f64 {
        self.weights[g.0]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_counting(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }
}

/// Checks all groupoid axioms and returns every violation with a witness.
pub fn validate_groupoid(g: &FiniteGroupoid) -> ValidationReport {
    let mut report = ValidationReport::default();
    let al = |a: ArrowId| g.arrow_label(a).to_string();

    for x in g.units() {
        let e = g.unit_arrow(x);
        if g.range(e) != x || g.source(e) != x {
            report.push("unit embedding has r(e)=s(e)=u", vec![g.unit_label(x).into()]);
        }
    }
    for a in g.arrows() {
        let er = g.unit_arrow(g.range(a));
        let es = g.unit_arrow(g.source(a));
        if g.product(er, a) != Some(a) || g.product(a, es) != Some(a) {
            report.push("unit arrows act as identities", vec![al(a)]);
        }
    }
    // Associativity over all triples with both products defined.
    for g1 in g.arrows() {
        for g2 in g.arrows() {
            let Some(g12) = g.product(g1, g2) else { continue };
            for g3 in g.arrows() {
                let Some(g23) = g.product(g2, g3) else { continue };
                if g.product(g12, g3) != g.product(g1, g23) {
                    report.push("associativity", vec![al(g1), al(g2), al(g3)]);
                }
            }
        }
    }
    for a in g.arrows() {
        let inv = g.inverse(a);
        if g.inverse(inv) != a {
            report.push("inverse is an involution", vec![al(a)]);
        }
        if g.range(inv) != g.source(a) || g.source(inv) != g.range(a) {
            report.push("inverse swaps range and source", vec![al(a)]);
        }
        if g.product(a, inv) != Some(g.unit_arrow(g.range(a))) {
            report.push("r(g) = g g^{-1}", vec![al(a)]);
        }
        if g.product(inv, a) != Some(g.unit_arrow(g.source(a))) {
            report.push("s(g) = g^{-1} g", vec![al(a)]);
        }
    }
    report
}

/// Checks Haar positivity and left invariance: for every arrow `g`, the
/// translation `h -> g h` carries the weights on `G^{s(g)}` onto `G^{r(g)}`.
pub fn validate_haar(g: &FiniteGroupoid, haar: &HaarSystem) -> ValidationReport {
    let mut report = ValidationReport::default();
    for a in g.arrows() {
        if !(haar.weight(a) > 0.0) {
            report.push(
                "haar weights are strictly positive",
                vec![g.arrow_label(a).to_string()],
            );
        }
    }
    for a in g.arrows() {
        let fiber = g.range_fiber(g.source(a)).expect("unit exists");
        for &h in fiber {
            let Some(ah) = g.product(a, h) else {
                report.push(
                    "left translation is defined on the source fiber",
                    vec![g.arrow_label(a).to_string(), g.arrow_label(h).to_string()],
                );
                continue;
            };
            let lhs = haar.weight(ah);
            let rhs = haar.weight(h);
            if (lhs - rhs).abs() > HAAR_TOL * rhs.abs().max(1.0) {
                report.push(
                    "haar left invariance",
                    vec![g.arrow_label(a).to_string(), g.arrow_label(h).to_string()],
                );
            }
        }
    }
    report
}

/// Groupoid and Haar axioms together.
pub fn validate_all(g: &FiniteGroupoid, haar: &HaarSystem) -> ValidationReport {
    let mut report = validate_groupoid(g);
    report
        .violations
        .extend(validate_haar(g, haar).violations);
    report
}

/// A cyclic isotropy fiber: `elements[k]` is the k-th power of a generator,
/// with `elements[0]` the unit arrow.
#[derive(Clone, Debug)]
pub struct CyclicFiber {
    pub base: UnitId,
    pub elements: Vec<ArrowId>,
}

/// Structural class of a groupoid, as far as the norm formulas support it.
#[derive(Clone, Debug)]
pub enum GroupoidClass {
    /// Every arrow is a unit.
    Unit,
    /// Exactly one arrow between every ordered pair of units.
    Pair,
    /// Every arrow has `r = s` and each isotropy group is cyclic.
    GroupBundle { fibers: Vec<CyclicFiber> },
    Unsupported,
}

/// Detects the groupoid class by structure (labels play no role).
pub fn classify(g: &FiniteGroupoid) -> GroupoidClass {
    if g.arrows().all(|a| g.is_unit_arrow(a)) {
        return GroupoidClass::Unit;
    }
    let n = g.n_units();
    if g.n_arrows() == n * n {
        let mut counts = vec![0usize; n * n];
        for a in g.arrows() {
            counts[g.range(a).0 * n + g.source(a).0] += 1;
        }
        if counts.iter().all(|&c| c == 1) {
            return GroupoidClass::Pair;
        }
    }
    if g.arrows().all(|a| g.range(a) == g.source(a)) {
        let mut fibers = Vec::new();
        for x in g.units() {
            let fiber = g.range_fiber(x).expect("unit exists");
            match cyclic_enumeration(g, x, fiber) {
                Some(elements) => fibers.push(CyclicFiber { base: x, elements }),
                None => return GroupoidClass::Unsupported,
            }
        }
        return GroupoidClass::GroupBundle { fibers };
    }
    GroupoidClass::Unsupported
}

/// Tries each fiber element in arrow order as a generator; returns the power
/// enumeration `gen^0, gen^1, ...` when one generates the whole fiber.
fn cyclic_enumeration(
    g: &FiniteGroupoid,
    x: UnitId,
    fiber: &[ArrowId],
) -> Option<Vec<ArrowId>> {
    let e = g.unit_arrow(x);
    if fiber.len() == 1 {
        return Some(vec![e]);
    }
    for &cand in fiber {
        if cand == e {
            continue;
        }
        let mut elements = vec![e];
        let mut cur = cand;
        while cur != e && elements.len() <= fiber.len() {
            elements.push(cur);
            cur = g.product(cur, cand)?;
        }
        if cur == e && elements.len() == fiber.len() {
            return Some(elements);
        }
    }
    None
}
