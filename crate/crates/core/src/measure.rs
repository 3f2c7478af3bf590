//! Quasi-invariant measures on the unit space, the induced arrow measures
//! `nu` and `nu^{-1}`, the modular function, the symmetrized measure, and
//! measure decompositions.
//!
//! On a finite unit space equivalence of measures collapses to equality of
//! supports, so quasi-invariance and absolute continuity are exact set
//! comparisons with no tolerance.

use crate::bundle::{BundleSection, HilbertBundle};
use crate::error::{CoreError, Result};
use crate::groupoid::{ArrowId, FiniteGroupoid, HaarSystem, UnitId};

/// Nonnegative weights on the unit space. Not normalized internally;
/// [`UnitMeasure::normalized`] is the explicit probability rescaling.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitMeasure {
    weights: Vec<f64>,
    total: f64,
}

impl UnitMeasure {
    pub fn new(g: &FiniteGroupoid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != g.n_units() {
            return Err(CoreError::DimensionMismatch(format!(
                "measure covers {} units, groupoid has {}",
                weights.len(),
                g.n_units()
            )));
        }
        Self::from_raw(weights)
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(CoreError::NonFiniteInput("measure weight".into()));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(CoreError::InvalidConstruction(
                "measure weights must be nonnegative".into(),
            ));
        }
        let total = weights.iter().sum();
        Ok(Self { weights, total })
    }

    pub fn uniform(g: &FiniteGroupoid) -> Self {
        let n = g.n_units();
        Self {
            weights: vec![1.0 / n as f64; n],
            total: 1.0,
        }
    }

    pub fn weight(&self, x: UnitId) -> f64 {
        self.weights[x.0]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// Units with strictly positive weight.
    pub fn support(&self) -> Vec<UnitId> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| UnitId(i))
            .collect()
    }

    pub fn in_support(&self, x: UnitId) -> bool {
        self.weights[x.0] > 0.0
    }

    /// Rescales to total mass one.
    pub fn normalized(&self) -> Result<Self> {
        if self.total <= 0.0 {
            return Err(CoreError::InvalidConstruction(
                "cannot normalize a zero measure".into(),
            ));
        }
        let weights: Vec<f64> = self.weights.iter().map(|w| w / self.total).collect();
        Self::from_raw(weights)
    }
}

/// Direction tag for an induced measure on arrows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `nu(g) = mu(r(g)) lambda^{r(g)}(g)`.
    Forward,
    /// `nu^{-1}(g) = nu(g^{-1})`.
    Inverse,
}

/// A measure on arrows induced by integrating the Haar system against a
/// unit measure.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedMeasure {
    arrow_weights: Vec<f64>,
    direction: Direction,
}

impl InducedMeasure {
    pub fn weight(&self, g: ArrowId) -> f64 {
        self.arrow_weights[g.0]
    }

    pub fn weights(&self) -> &[f64] {
        &self.arrow_weights
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Pullback under inversion; applying it twice returns the original
    /// weights bit for bit.
    pub fn inverted(&self, g: &FiniteGroupoid) -> InducedMeasure {
        let arrow_weights = g
            .arrows()
            .map(|a| self.arrow_weights[g.inverse(a).0])
            .collect();
        InducedMeasure {
            arrow_weights,
            direction: match self.direction {
                Direction::Forward => Direction::Inverse,
                Direction::Inverse => Direction::Forward,
            },
        }
    }
}

/// Modular function: the density of `nu` with respect to `nu^{-1}`,
/// extended by 1 off the common support so downstream formulas never divide
/// by zero (nothing is ever integrated there).
#[derive(Clone, Debug)]
pub struct ModularFunction {
    values: Vec<f64>,
    on_support: Vec<bool>,
}

impl ModularFunction {
    pub fn value(&self, g: ArrowId) -> f64 {
        self.values[g.0]
    }

    pub fn on_support(&self, g: ArrowId) -> bool {
        self.on_support[g.0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `nu(g) = mu(r(g)) * haar(g)` for every arrow.
pub fn induced_measure(
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu: &UnitMeasure,
) -> InducedMeasure {
    let arrow_weights = g
        .arrows()
        .map(|a| mu.weight(g.range(a)) * haar.weight(a))
        .collect();
    InducedMeasure {
        arrow_weights,
        direction: Direction::Forward,
    }
}

/// Outcome of the quasi-invariance check; the witness is an arrow where the
/// supports of `nu` and `nu^{-1}` differ.
#[derive(Clone, Debug)]
pub struct QuasiInvariance {
    pub holds: bool,
    pub witness: Option<ArrowId>,
}

/// A unit measure is quasi-invariant when `nu` and `nu^{-1}` are equivalent,
/// which over a finite arrow set means equal supports. The witness scan
/// reports an arrow that is `nu`-null but `nu^{-1}`-positive first.
pub fn is_quasi_invariant(
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu: &UnitMeasure,
) -> QuasiInvariance {
    let nu = induced_measure(g, haar, mu);
    let nu_inv = nu.inverted(g);
    for a in g.arrows() {
        if nu.weight(a) == 0.0 && nu_inv.weight(a) > 0.0 {
            return QuasiInvariance {
                holds: false,
                witness: Some(a),
            };
        }
    }
    for a in g.arrows() {
        if nu.weight(a) > 0.0 && nu_inv.weight(a) == 0.0 {
            return QuasiInvariance {
                holds: false,
                witness: Some(a),
            };
        }
    }
    QuasiInvariance {
        holds: true,
        witness: None,
    }
}

/// `Delta(g) = nu(g) / nu^{-1}(g)` on the support, 1 elsewhere.
pub fn modular_function(
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu: &UnitMeasure,
) -> Result<ModularFunction> {
    let qi = is_quasi_invariant(g, haar, mu);
    if !qi.holds {
        let w = qi.witness.expect("witness accompanies failure");
        return Err(CoreError::NotQuasiInvariant(g.arrow_label(w).to_string()));
    }
    let nu = induced_measure(g, haar, mu);
    let nu_inv = nu.inverted(g);
    let mut values = vec![1.0; g.n_arrows()];
    let mut on_support = vec![false; g.n_arrows()];
    for a in g.arrows() {
        if nu.weight(a) > 0.0 {
            values[a.0] = nu.weight(a) / nu_inv.weight(a);
            on_support[a.0] = true;
        }
    }
    Ok(ModularFunction { values, on_support })
}

/// The symmetrized measure `nu_0 = Delta^{-1/2} nu`. Computed through the
/// algebraically equal form `sqrt(nu(g)) * sqrt(nu(g^{-1}))`, which makes
/// the inversion invariance `nu_0(g) = nu_0(g^{-1})` hold bit for bit.
pub fn symmetrized_measure(
    g: &FiniteGroupoid,
    nu: &InducedMeasure,
    delta: &ModularFunction,
) -> Result<InducedMeasure> {
    let nu_inv = nu.inverted(g);
    for a in g.arrows() {
        if delta.on_support(a) != (nu.weight(a) > 0.0) {
            return Err(CoreError::InvalidConstruction(format!(
                "modular function support disagrees with nu at arrow {}",
                g.arrow_label(a)
            )));
        }
    }
    let arrow_weights = g
        .arrows()
        .map(|a| nu.weight(a).sqrt() * nu_inv.weight(a).sqrt())
        .collect();
    Ok(InducedMeasure {
        arrow_weights,
        direction: Direction::Forward,
    })
}

/// Convenience: induced measure, modular function, and symmetrization in one
/// call for a quasi-invariant `mu`.
pub fn symmetrized_from_unit_measure(
    g: &FiniteGroupoid,
    haar: &HaarSystem,
    mu: &UnitMeasure,
) -> Result<InducedMeasure> {
    let nu = induced_measure(g, haar, mu);
    let delta = modular_function(g, haar, mu)?;
    symmetrized_measure(g, &nu, &delta)
}

/// Lebesgue decomposition of `mu_prime` with respect to `mu`: the singular
/// part lives where `mu` vanishes, the absolutely continuous part where it
/// does not. Each weight is copied, never recomputed, so the parts sum back
/// to the input exactly.
pub fn lebesgue_decompose(
    mu_prime: &UnitMeasure,
    mu: &UnitMeasure,
) -> Result<(UnitMeasure, UnitMeasure)> {
    if mu_prime.len() != mu.len() {
        return Err(CoreError::DimensionMismatch(
            "measures live on different unit spaces".into(),
        ));
    }
    let mut singular = vec![0.0; mu.len()];
    let mut abs_cont = vec![0.0; mu.len()];
    for i in 0..mu.len() {
        if mu.weights()[i] == 0.0 {
            singular[i] = mu_prime.weights()[i];
        } else {
            abs_cont[i] = mu_prime.weights()[i];
        }
    }
    Ok((
        UnitMeasure::from_raw(singular)?,
        UnitMeasure::from_raw(abs_cont)?,
    ))
}

/// The half-density rescaling `(R xi')(x) = xi'(x) (d mu'/d mu)^{1/2}(x)`,
/// an isometry from sections square-integrable for `mu_prime` into those for
/// `mu`. Fails when `mu_prime` is not absolutely continuous w.r.t. `mu`.
pub fn density_half_scale(
    section: &BundleSection,
    bundle: &HilbertBundle,
    mu_prime: &UnitMeasure,
    mu: &UnitMeasure,
) -> Result<BundleSection> {
    if mu_prime.len() != mu.len() {
        return Err(CoreError::DimensionMismatch(
            "measures live on different unit spaces".into(),
        ));
    }
    for i in 0..mu.len() {
        if mu.weights()[i] == 0.0 && mu_prime.weights()[i] > 0.0 {
            return Err(CoreError::NotAbsolutelyContinuous(format!("#{}", i)));
        }
    }
    let mut out = BundleSection::zeros(bundle);
    for x in 0..mu.len() {
        let factor = if mu.weights()[x] > 0.0 {
            (mu_prime.weights()[x] / mu.weights()[x]).sqrt()
        } else {
            0.0
        };
        let src = section.block(UnitId(x));
        let dst = out.block_mut(UnitId(x));
        if src.len() != dst.len() {
            return Err(CoreError::DimensionMismatch(format!(
                "section block at unit #{} has length {}, bundle dimension is {}",
                x,
                src.len(),
                dst.len()
            )));
        }
        for (d, s) in dst.iter_mut().zip(src.iter()) {
            *d = s * factor;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::{cyclic_group_bundle, pair_groupoid, unit_groupoid};
    use num_complex::Complex64;

    #[test]
    fn induced_measure_on_pair_uniform() {
        let (g, h) = pair_groupoid(2).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let nu = induced_measure(&g, &h, &mu);
        for a in g.arrows() {
            assert_eq!(nu.weight(a), 0.5);
        }
    }

    #[test]
    fn induced_measure_on_unit_groupoid_is_mu() {
        let (g, h) = unit_groupoid(3).unwrap();
        let mu = UnitMeasure::new(&g, vec![1.0 / 3.0; 3]).unwrap();
        let nu = induced_measure(&g, &h, &mu);
        for x in g.units() {
            assert_eq!(nu.weight(g.unit_arrow(x)), mu.weight(x));
        }
    }

    #[test]
    fn induced_measure_zero_row() {
        let (g, h) = pair_groupoid(2).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.0, 1.0]).unwrap();
        let nu = induced_measure(&g, &h, &mu);
        assert_eq!(nu.weight(g.find_arrow("(1,1)").unwrap()), 0.0);
        assert_eq!(nu.weight(g.find_arrow("(1,2)").unwrap()), 0.0);
        assert_eq!(nu.weight(g.find_arrow("(2,1)").unwrap()), 1.0);
    }

    #[test]
    fn double_inversion_is_identity() {
        let (g, h) = pair_groupoid(3).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.2, 0.3, 0.5]).unwrap();
        let nu = induced_measure(&g, &h, &mu);
        let back = nu.inverted(&g).inverted(&g);
        assert_eq!(nu.weights(), back.weights());
        assert_eq!(back.direction(), Direction::Forward);
    }

    #[test]
    fn quasi_invariance_full_support_pair() {
        let (g, h) = pair_groupoid(3).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.1, 0.5, 0.4]).unwrap();
        assert!(is_quasi_invariant(&g, &h, &mu).holds);
    }

    #[test]
    fn quasi_invariance_fails_with_witness() {
        let (g, h) = pair_groupoid(2).unwrap();
        let mu = UnitMeasure::new(&g, vec![1.0, 0.0]).unwrap();
        let qi = is_quasi_invariant(&g, &h, &mu);
        assert!(!qi.holds);
        assert_eq!(g.arrow_label(qi.witness.unwrap()), "(2,1)");
    }

    #[test]
    fn unit_groupoid_always_quasi_invariant() {
        let (g, h) = unit_groupoid(4).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.0, 1.0, 0.0, 2.0]).unwrap();
        assert!(is_quasi_invariant(&g, &h, &mu).holds);
    }

    #[test]
    fn modular_function_uniform_is_one() {
        let (g, h) = pair_groupoid(3).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let delta = modular_function(&g, &h, &mu).unwrap();
        for a in g.arrows() {
            assert_eq!(delta.value(a), 1.0);
        }
    }

    #[test]
    fn modular_function_ratio_of_unit_weights() {
        let (g, h) = pair_groupoid(2).unwrap();
        let mu = UnitMeasure::new(&g, vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let delta = modular_function(&g, &h, &mu).unwrap();
        let a12 = g.find_arrow("(1,2)").unwrap();
        let a21 = g.find_arrow("(2,1)").unwrap();
        assert!((delta.value(a12) - 0.5).abs() < 1e-15);
        assert!((delta.value(a21) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn modular_function_trivial_on_group_bundle() {
        let (g, h) = cyclic_group_bundle(2, 3).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.3, 0.7]).unwrap();
        let delta = modular_function(&g, &h, &mu).unwrap();
        for a in g.arrows() {
            assert_eq!(delta.value(a), 1.0);
        }
    }

    #[test]
    fn modular_function_requires_quasi_invariance() {
        let (g, h) = pair_groupoid(2).unwrap();
        let mu = UnitMeasure::new(&g, vec![1.0, 0.0]).unwrap();
        assert!(modular_function(&g, &h, &mu).is_err());
    }

    #[test]
    fn delta_times_delta_of_inverse_is_one() {
        let (g, h) = pair_groupoid(4).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let delta = modular_function(&g, &h, &mu).unwrap();
        for a in g.arrows() {
            assert!((delta.value(a) * delta.value(g.inverse(a)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetrized_measure_matches_sqrt_of_unit_weights() {
        let (g, h) = pair_groupoid(2).unwrap();
        let mu = UnitMeasure::new(&g, vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let nu = induced_measure(&g, &h, &mu);
        let delta = modular_function(&g, &h, &mu).unwrap();
        let nu0 = symmetrized_measure(&g, &nu, &delta).unwrap();
        let a12 = g.find_arrow("(1,2)").unwrap();
        let a21 = g.find_arrow("(2,1)").unwrap();
        let expected = (2.0f64).sqrt() / 3.0;
        assert!((nu0.weight(a12) - expected).abs() < 1e-15);
        assert_eq!(nu0.weight(a12), nu0.weight(a21));
    }

    #[test]
    fn symmetrized_measure_inversion_invariant_bitwise() {
        let (g, h) = pair_groupoid(4).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.15, 0.25, 0.35, 0.25]).unwrap();
        let nu = induced_measure(&g, &h, &mu);
        let delta = modular_function(&g, &h, &mu).unwrap();
        let nu0 = symmetrized_measure(&g, &nu, &delta).unwrap();
        for a in g.arrows() {
            assert_eq!(nu0.weight(a), nu0.weight(g.inverse(a)));
        }
    }

    #[test]
    fn symmetrized_equals_nu_for_uniform() {
        let (g, h) = pair_groupoid(3).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let nu = induced_measure(&g, &h, &mu);
        let delta = modular_function(&g, &h, &mu).unwrap();
        let nu0 = symmetrized_measure(&g, &nu, &delta).unwrap();
        for a in g.arrows() {
            assert!((nu0.weight(a) - nu.weight(a)).abs() < 1e-16);
        }
    }

    #[test]
    fn lebesgue_decompose_support_split() {
        let (g, _) = unit_groupoid(3).unwrap();
        let mu_prime = UnitMeasure::new(&g, vec![0.0, 0.5, 0.5]).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.5, 0.5, 0.0]).unwrap();
        let (sing, abs) = lebesgue_decompose(&mu_prime, &mu).unwrap();
        assert_eq!(sing.weights(), &[0.0, 0.0, 0.5]);
        assert_eq!(abs.weights(), &[0.0, 0.5, 0.0]);
    }

    #[test]
    fn lebesgue_decompose_extreme_cases() {
        let (g, _) = unit_groupoid(2).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.4, 0.6]).unwrap();
        let (sing, abs) = lebesgue_decompose(&mu, &mu).unwrap();
        assert_eq!(sing.total_mass(), 0.0);
        assert_eq!(abs.weights(), mu.weights());

        let ortho = UnitMeasure::new(&g, vec![0.0, 1.0]).unwrap();
        let base = UnitMeasure::new(&g, vec![1.0, 0.0]).unwrap();
        let (sing, abs) = lebesgue_decompose(&ortho, &base).unwrap();
        assert_eq!(sing.weights(), ortho.weights());
        assert_eq!(abs.total_mass(), 0.0);
    }

    #[test]
    fn density_half_scale_identity_and_ratio() {
        let (g, _) = unit_groupoid(2).unwrap();
        let bundle = HilbertBundle::new(&g, vec![1, 1]).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.5, 0.5]).unwrap();
        let mut xi = BundleSection::zeros(&bundle);
        xi.block_mut(UnitId(0))[0] = Complex64::new(1.0, 0.0);
        xi.block_mut(UnitId(1))[0] = Complex64::new(0.0, 2.0);

        let same = density_half_scale(&xi, &bundle, &mu, &mu).unwrap();
        assert_eq!(same.block(UnitId(0)), xi.block(UnitId(0)));
        assert_eq!(same.block(UnitId(1)), xi.block(UnitId(1)));

        let mu_prime = UnitMeasure::new(&g, vec![1.0, 0.0]).unwrap();
        let scaled = density_half_scale(&xi, &bundle, &mu_prime, &mu).unwrap();
        assert!((scaled.block(UnitId(0))[0].re - (2.0f64).sqrt()).abs() < 1e-15);
        assert_eq!(scaled.block(UnitId(1))[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn density_half_scale_is_isometric() {
        let (g, _) = unit_groupoid(4).unwrap();
        let bundle = HilbertBundle::new(&g, vec![2, 1, 3, 1]).unwrap();
        let mu = UnitMeasure::new(&g, vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let mu_prime = UnitMeasure::new(&g, vec![0.2, 0.0, 0.5, 0.3]).unwrap();
        let mut xi = BundleSection::zeros(&bundle);
        let vals = [0.3, -0.7, 1.1, 0.2, -0.4, 0.9, 0.5];
        let mut k = 0;
        for x in g.units() {
            for slot in xi.block_mut(x).iter_mut() {
                *slot = Complex64::new(vals[k], vals[(k + 3) % 7]);
                k += 1;
            }
        }
        let image = density_half_scale(&xi, &bundle, &mu_prime, &mu).unwrap();
        let norm_src: f64 = g
            .units()
            .map(|x| {
                mu_prime.weight(x)
                    * xi.block(x).iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum();
        let norm_dst: f64 = g
            .units()
            .map(|x| {
                mu.weight(x) * image.block(x).iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum();
        assert!((norm_src - norm_dst).abs() < 1e-12);
    }

    #[test]
    fn density_half_scale_requires_absolute_continuity() {
        let (g, _) = unit_groupoid(2).unwrap();
        let bundle = HilbertBundle::new(&g, vec![1, 1]).unwrap();
        let mu = UnitMeasure::new(&g, vec![1.0, 0.0]).unwrap();
        let mu_prime = UnitMeasure::new(&g, vec![0.5, 0.5]).unwrap();
        let xi = BundleSection::zeros(&bundle);
        assert!(density_half_scale(&xi, &bundle, &mu_prime, &mu).is_err());
    }

    #[test]
    fn zero_section_maps_to_zero() {
        let (g, _) = unit_groupoid(3).unwrap();
        let bundle = HilbertBundle::new(&g, vec![2, 2, 2]).unwrap();
        let mu = UnitMeasure::uniform(&g);
        let mu_prime = UnitMeasure::new(&g, vec![0.1, 0.2, 0.7]).unwrap();
        let xi = BundleSection::zeros(&bundle);
        let image = density_half_scale(&xi, &bundle, &mu_prime, &mu).unwrap();
        for x in g.units() {
            assert!(image.block(x).iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        }
    }
}
