//! JSON wire formats for groupoids, measures, functions, matrices, and
//! representation triples. One schema per value; everything round-trips.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bundle::{BundleSection, GroupoidAction, HilbertBundle, RepresentationTriple};
use crate::error::{CoreError, Result};
use crate::groupoid::{FiniteGroupoid, HaarSystem};
use crate::algebra::GroupoidFunction;
use crate::linalg::{CMatrix, C64};
use crate::measure::UnitMeasure;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArrowJson {
    pub id: String,
    pub r: String,
    pub s: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HaarEntryJson {
    pub arrow: String,
    pub weight: f64,
}

/// `{"units": [...], "arrows": [{"id","r","s"}...], "product": [[g1,g2,g3]...],
/// "inverse": [[g, ginv]...], "haar": [{"arrow","weight"}...]}`
/// with Haar weights optional (default 1).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupoidJson {
    pub units: Vec<String>,
    pub arrows: Vec<ArrowJson>,
    pub product: Vec<[String; 3]>,
    pub inverse: Vec<[String; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub haar: Option<Vec<HaarEntryJson>>,
}

impl GroupoidJson {
    pub fn from_groupoid(g: &FiniteGroupoid, haar: &HaarSystem) -> Self {
        let arrows = g
            .arrows()
            .map(|a| ArrowJson {
                id: g.arrow_label(a).to_string(),
                r: g.unit_label(g.range(a)).to_string(),
                s: g.unit_label(g.source(a)).to_string(),
            })
            .collect();
        let mut product = Vec::new();
        for a in g.arrows() {
            for b in g.arrows() {
                if let Some(c) = g.product(a, b) {
                    product.push([
                        g.arrow_label(a).to_string(),
                        g.arrow_label(b).to_string(),
                        g.arrow_label(c).to_string(),
                    ]);
                }
            }
        }
        let inverse = g
            .arrows()
            .map(|a| {
                [
                    g.arrow_label(a).to_string(),
                    g.arrow_label(g.inverse(a)).to_string(),
                ]
            })
            .collect();
        let haar = Some(
            g.arrows()
                .map(|a| HaarEntryJson {
                    arrow: g.arrow_label(a).to_string(),
                    weight: haar.weight(a),
                })
                .collect(),
        );
        Self {
            units: g.units().map(|x| g.unit_label(x).to_string()).collect(),
            arrows,
            product,
            inverse,
            haar,
        }
    }

    pub fn to_groupoid(&self) -> Result<(FiniteGroupoid, HaarSystem)> {
        let unit_index = |label: &str| -> Result<usize> {
            self.units
                .iter()
                .position(|u| u == label)
                .ok_or_else(|| CoreError::UnknownUnit(label.to_string()))
        };
        let arrow_labels: Vec<String> = self.arrows.iter().map(|a| a.id.clone()).collect();
        let arrow_index = |label: &str| -> Result<usize> {
            arrow_labels
                .iter()
                .position(|a| a == label)
                .ok_or_else(|| CoreError::UnknownArrow(label.to_string()))
        };
        {
            let mut seen = std::collections::HashSet::new();
            for u in &self.units {
                if !seen.insert(u) {
                    return Err(CoreError::InvalidConstruction(format!(
                        "duplicate unit label {}",
                        u
                    )));
                }
            }
            let mut seen = std::collections::HashSet::new();
            for a in &arrow_labels {
                if !seen.insert(a) {
                    return Err(CoreError::InvalidConstruction(format!(
                        "duplicate arrow label {}",
                        a
                    )));
                }
            }
        }
        let mut range = Vec::with_capacity(self.arrows.len());
        let mut source = Vec::with_capacity(self.arrows.len());
        for a in &self.arrows {
            range.push(unit_index(&a.r)?);
            source.push(unit_index(&a.s)?);
        }
        let mut products = Vec::with_capacity(self.product.len());
        for [g1, g2, g3] in &self.product {
            products.push((arrow_index(g1)?, arrow_index(g2)?, arrow_index(g3)?));
        }
        let mut inverse = vec![usize::MAX; self.arrows.len()];
        for [a, ainv] in &self.inverse {
            inverse[arrow_index(a)?] = arrow_index(ainv)?;
        }
        if inverse.iter().any(|&i| i == usize::MAX) {
            return Err(CoreError::InvalidConstruction(
                "inverse map does not cover every arrow".into(),
            ));
        }
        // The unit embedding is recovered from arrows with r = s = u that
        // act as identities; structurally we take the arrow whose label the
        // inverse map fixes and whose product squares to itself.
        let mut unit_arrow = vec![usize::MAX; self.units.len()];
        let product_lookup = |a: usize, b: usize| -> Option<usize> {
            products
                .iter()
                .find(|&&(x, y, _)| x == a && y == b)
                .map(|&(_, _, z)| z)
        };
        for (ai, a) in self.arrows.iter().enumerate() {
            if a.r == a.s {
                let u = unit_index(&a.r)?;
                if product_lookup(ai, ai) == Some(ai) && inverse[ai] == ai {
                    if unit_arrow[u] == usize::MAX {
                        unit_arrow[u] = ai;
                    } else {
                        // Prefer the arrow that acts as a two-sided identity.
                        let acts_as_identity = |cand: usize| {
                            products.iter().all(|&(x, y, z)| {
                                (x != cand || source[cand] != range[y] || z == y)
                                    && (y != cand || source[x] != range[cand] || z == x)
                            })
                        };
                        if acts_as_identity(ai) && !acts_as_identity(unit_arrow[u]) {
                            unit_arrow[u] = ai;
                        }
                    }
                }
            }
        }
        if unit_arrow.iter().any(|&i| i == usize::MAX) {
            return Err(CoreError::InvalidConstruction(
                "could not identify a unit arrow for every unit".into(),
            ));
        }
        let g = FiniteGroupoid::from_parts(
            self.units.clone(),
            arrow_labels,
            range,
            source,
            &products,
            inverse,
            unit_arrow,
        )?;
        let haar = match &self.haar {
            None => HaarSystem::counting(&g),
            Some(entries) => {
                let mut weights = vec![1.0; g.n_arrows()];
                for e in entries {
                    let a = g
                        .find_arrow(&e.arrow)
                        .ok_or_else(|| CoreError::UnknownArrow(e.arrow.clone()))?;
                    weights[a.0] = e.weight;
                }
                HaarSystem::from_weights(&g, weights)?
            }
        };
        Ok((g, haar))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureEntryJson {
    pub unit: String,
    pub weight: f64,
}

/// `{"measure": [{"unit","weight"}...]}`; missing units carry weight 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureJson {
    pub measure: Vec<MeasureEntryJson>,
}

impl MeasureJson {
    pub fn from_measure(g: &FiniteGroupoid, mu: &UnitMeasure) -> Self {
        Self {
            measure: g
                .units()
                .map(|x| MeasureEntryJson {
                    unit: g.unit_label(x).to_string(),
                    weight: mu.weight(x),
                })
                .collect(),
        }
    }

    pub fn to_measure(&self, g: &FiniteGroupoid) -> Result<UnitMeasure> {
        let mut weights = vec![0.0; g.n_units()];
        for e in &self.measure {
            let x = g
                .find_unit(&e.unit)
                .ok_or_else(|| CoreError::UnknownUnit(e.unit.clone()))?;
            weights[x.0] = e.weight;
        }
        UnitMeasure::new(g, weights)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionEntryJson {
    pub arrow: String,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// `{"function": [{"arrow","re","im"}...]}`; missing arrows are zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionJson {
    pub function: Vec<FunctionEntryJson>,
}

impl FunctionJson {
    pub fn from_function(g: &FiniteGroupoid, f: &GroupoidFunction) -> Self {
        Self {
            function: g
                .arrows()
                .map(|a| FunctionEntryJson {
                    arrow: g.arrow_label(a).to_string(),
                    re: f.value(a).re,
                    im: f.value(a).im,
                })
                .collect(),
        }
    }

    pub fn to_function(&self, g: &FiniteGroupoid) -> Result<GroupoidFunction> {
        let mut values = vec![Complex64::new(0.0, 0.0); g.n_arrows()];
        for e in &self.function {
            let a = g
                .find_arrow(&e.arrow)
                .ok_or_else(|| CoreError::UnknownArrow(e.arrow.clone()))?;
            values[a.0] = Complex64::new(e.re, e.im);
        }
        GroupoidFunction::from_values(g, values)
    }
}

/// `{"matrix": [[[re, im], ...], ...]}`, row major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            matrix: (0..m.rows())
                .map(|i| {
                    (0..m.cols())
                        .map(|j| {
                            let z = m.get(i, j);
                            [z.re, z.im]
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self
            .matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&[re, im]| Complex64::new(re, im))
                    .collect::<Vec<C64>>()
            })
            .collect();
        let m = CMatrix::from_rows(rows)?;
        if !m.is_finite() {
            return Err(CoreError::NonFiniteInput("matrix entry".into()));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DimEntryJson {
    pub unit: String,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnitaryEntryJson {
    pub arrow: String,
    /// Row-major `[re, im]` pairs of the `dim(r) x dim(s)` matrix.
    pub matrix: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionEntryJson {
    pub unit: String,
    pub vector: Vec<[f64; 2]>,
}

/// A representation triple with optional bundled sections.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentationJson {
    pub dims: Vec<DimEntryJson>,
    pub unitaries: Vec<UnitaryEntryJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<SectionEntryJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<SectionEntryJson>>,
}

impl RepresentationJson {
    pub fn from_triple(
        g: &FiniteGroupoid,
        rep: &RepresentationTriple,
        alpha: Option<&BundleSection>,
        beta: Option<&BundleSection>,
    ) -> Self {
        let dims = g
            .units()
            .map(|x| DimEntryJson {
                unit: g.unit_label(x).to_string(),
                dim: rep.bundle.dim(x),
            })
            .collect();
        let unitaries = g
            .arrows()
            .map(|a| {
                let m = rep.action.unitary(a);
                let mut flat = Vec::with_capacity(m.rows() * m.cols());
                for i in 0..m.rows() {
                    for j in 0..m.cols() {
                        let z = m.get(i, j);
                        flat.push([z.re, z.im]);
                    }
                }
                UnitaryEntryJson {
                    arrow: g.arrow_label(a).to_string(),
                    matrix: flat,
                }
            })
            .collect();
        let pack = |s: &BundleSection| {
            g.units()
                .map(|x| SectionEntryJson {
                    unit: g.unit_label(x).to_string(),
                    vector: s.block(x).iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect()
        };
        Self {
            dims,
            unitaries,
            alpha: alpha.map(pack),
            beta: beta.map(pack),
        }
    }

    pub fn to_triple(
        &self,
        g: &FiniteGroupoid,
        haar: &HaarSystem,
        mu: &UnitMeasure,
    ) -> Result<RepresentationTriple> {
        let mut dims = vec![usize::MAX; g.n_units()];
        for e in &self.dims {
            let x = g
                .find_unit(&e.unit)
                .ok_or_else(|| CoreError::UnknownUnit(e.unit.clone()))?;
            dims[x.0] = e.dim;
        }
        if dims.iter().any(|&d| d == usize::MAX) {
            return Err(CoreError::InvalidConstruction(
                "dims must cover every unit".into(),
            ));
        }
        let bundle = HilbertBundle::new(g, dims)?;
        let mut unitaries = vec![None; g.n_arrows()];
        for e in &self.unitaries {
            let a = g
                .find_arrow(&e.arrow)
                .ok_or_else(|| CoreError::UnknownArrow(e.arrow.clone()))?;
            let (dr, ds) = (bundle.dim(g.range(a)), bundle.dim(g.source(a)));
            if e.matrix.len() != dr * ds {
                return Err(CoreError::DimensionMismatch(format!(
                    "unitary at arrow {} has {} entries, expected {}",
                    e.arrow,
                    e.matrix.len(),
                    dr * ds
                )));
            }
            let mut m = CMatrix::zeros(dr, ds);
            for i in 0..dr {
                for j in 0..ds {
                    let [re, im] = e.matrix[i * ds + j];
                    m.set(i, j, Complex64::new(re, im));
                }
            }
            unitaries[a.0] = Some(m);
        }
        let unitaries: Vec<CMatrix> = unitaries
            .into_iter()
            .enumerate()
            .map(|(i, u)| {
                u.ok_or_else(|| {
                    CoreError::InvalidConstruction(format!(
                        "missing unitary for arrow #{}",
                        i
                    ))
                })
            })
            .collect::<Result<_>>()?;
        RepresentationTriple::validated(
            g,
            haar,
            bundle,
            GroupoidAction::new(g, unitaries)?,
            mu.clone(),
        )
    }

    pub fn section(
        &self,
        which: SectionSlot,
        g: &FiniteGroupoid,
        bundle: &HilbertBundle,
    ) -> Result<Option<BundleSection>> {
        let entries = match which {
            SectionSlot::Alpha => &self.alpha,
            SectionSlot::Beta => &self.beta,
        };
        let Some(entries) = entries else {
            return Ok(None);
        };
        let mut section = BundleSection::zeros(bundle);
        for e in entries {
            let x = g
                .find_unit(&e.unit)
                .ok_or_else(|| CoreError::UnknownUnit(e.unit.clone()))?;
            if e.vector.len() != bundle.dim(x) {
                return Err(CoreError::DimensionMismatch(format!(
                    "section at unit {} has {} entries, fiber dimension is {}",
                    e.unit,
                    e.vector.len(),
                    bundle.dim(x)
                )));
            }
            for (slot, &[re, im]) in section.block_mut(x).iter_mut().zip(e.vector.iter()) {
                *slot = Complex64::new(re, im);
            }
        }
        Ok(Some(section))
    }
}

#[derive(Clone, Copy, Debug)]
pub enum SectionSlot {
    Alpha,
    Beta,
}
