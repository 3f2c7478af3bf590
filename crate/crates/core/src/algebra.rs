//! The convolution *-algebra of complex functions on a finite groupoid,
//! with the I-norm.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::groupoid::{ArrowId, FiniteGroupoid, HaarSystem};

/// A complex-valued function on the arrows of one fixed groupoid.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupoidFunction {
    values: Vec<Complex64>,
    fingerprint: u64,
}

impl GroupoidFunction {
    pub fn zero(g: &FiniteGroupoid) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); g.n_arrows()],
            fingerprint: g.fingerprint(),
        }
    }

    /// Indicator of a single arrow.
    pub fn delta(g: &FiniteGroupoid, a: ArrowId) -> Self {
        let mut f = Self::zero(g);
        f.values[a.0] = Complex64::new(1.0, 0.0);
        f
    }

    /// Value 1 on every unit arrow, 0 elsewhere; the convolution identity
    /// under a counting Haar system.
    pub fn unit_indicator(g: &FiniteGroupoid) -> Self {
        let mut f = Self::zero(g);
        for x in g.units() {
            f.values[g.unit_arrow(x).0] = Complex64::new(1.0, 0.0);
        }
        f
    }

    pub fn from_values(g: &FiniteGroupoid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != g.n_arrows() {
            return Err(CoreError::DimensionMismatch(format!(
                "function defined on {} arrows, groupoid has {}",
                values.len(),
                g.n_arrows()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoreError::NonFiniteInput("function value".into()));
        }
        Ok(Self {
            values,
            fingerprint: g.fingerprint(),
        })
    }

    pub fn from_fn(g: &FiniteGroupoid, f: impl FnMut(ArrowId) -> Complex64) -> Self {
        Self {
            values: g.arrows().map(f).collect(),
            fingerprint: g.fingerprint(),
        }
    }

    pub fn value(&self, a: ArrowId) -> Complex64 {
        self.values[a.0]
    }

    pub fn set(&mut self, a: ArrowId, z: Complex64) {
        self.values[a.0] = z;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn check_groupoid(&self, g: &FiniteGroupoid, what: &str) -> Result<()> {
        if self.fingerprint != g.fingerprint() {
            return Err(CoreError::GroupoidMismatch(format!(
                "{} was built over a different groupoid",
                what
            )));
        }
        Ok(())
    }
}

/// Convolution `(F * F')(g) = sum over k in G^{r(g)} of
/// F(k) F'(k^{-1} g) haar(k)`.
pub fn convolve(
    f: &GroupoidFunction,
    fp: &GroupoidFunction,
    g: &FiniteGroupoid,
    haar: &HaarSystem,
) -> Result<GroupoidFunction> {
    f.check_groupoid(g, "left factor")?;
    fp.check_groupoid(g, "right factor")?;
    let mut out = GroupoidFunction::zero(g);
    for a in g.arrows() {
        let mut acc = Complex64::new(0.0, 0.0);
        for &k in g.range_fiber(g.range(a))? {
            // k^{-1} g is always composable here: s(k^{-1}) = r(k) = r(g).
            let kg = g
                .product(g.inverse(k), a)
                .expect("fiber membership guarantees composability");
            acc += f.value(k) * fp.value(kg) * haar.weight(k);
        }
        out.values[a.0] = acc;
    }
    Ok(out)
}

/// Involution `F^*(g) = conj(F(g^{-1}))`.
pub fn involution(f: &GroupoidFunction, g: &FiniteGroupoid) -> GroupoidFunction {
    let values = g.arrows().map(|a| f.value(g.inverse(a)).conj()).collect();
    GroupoidFunction {
        values,
        fingerprint: f.fingerprint,
    }
}

/// The I-norm: the larger of the sup over units of the weighted absolute
/// fiber sums along range fibers and along source fibers, the latter taken
/// with the inverted weights `lambda_x(g) = lambda^x(g^{-1})`.
pub fn i_norm(f: &GroupoidFunction, g: &FiniteGroupoid, haar: &HaarSystem) -> f64 {
    let mut best = 0.0f64;
    for x in g.units() {
        let mut range_sum = 0.0;
        for &a in g.range_fiber(x).expect("unit exists") {
            range_sum += f.value(a).norm() * haar.weight(a);
        }
        let mut source_sum = 0.0;
        for &a in g.source_fiber(x).expect("unit exists") {
            source_sum += f.value(a).norm() * haar.weight(g.inverse(a));
        }
        best = best.max(range_sum).max(source_sum);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::{cyclic_group_bundle, pair_groupoid, unit_groupoid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_function(g: &FiniteGroupoid, seed: u64) -> GroupoidFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GroupoidFunction::from_fn(g, |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    #[test]
    fn single_term_convolution_on_pair() {
        let (g, h) = pair_groupoid(2).unwrap();
        let e12 = GroupoidFunction::delta(&g, g.find_arrow("(1,2)").unwrap());
        let e21 = GroupoidFunction::delta(&g, g.find_arrow("(2,1)").unwrap());
        let prod = convolve(&e12, &e21, &g, &h).unwrap();
        let expected = GroupoidFunction::delta(&g, g.find_arrow("(1,1)").unwrap());
        assert_eq!(prod.values(), expected.values());
    }

    #[test]
    fn pair_convolution_is_matrix_product() {
        let n = 4;
        let (g, h) = pair_groupoid(n).unwrap();
        let f = random_function(&g, 11);
        let fp = random_function(&g, 12);
        let conv = convolve(&f, &fp, &g, &h).unwrap();
        // Oracle: matrix product of [F(i,j)] and [F'(i,j)] in the same
        // ascending summation order; the comparison is exact.
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..n {
                    let a = g.find_arrow(&format!("({},{})", i + 1, m + 1)).unwrap();
                    let b = g.find_arrow(&format!("({},{})", m + 1, j + 1)).unwrap();
                    acc += f.value(a) * fp.value(b) * 1.0;
                }
                let target = g.find_arrow(&format!("({},{})", i + 1, j + 1)).unwrap();
                assert_eq!(conv.value(target), acc);
            }
        }
    }

    #[test]
    fn bundle_convolution_is_cyclic_convolution() {
        let m = 5;
        let (g, h) = cyclic_group_bundle(1, m).unwrap();
        let f = random_function(&g, 3);
        let fp = random_function(&g, 4);
        let conv = convolve(&f, &fp, &g, &h).unwrap();
        // Direct cyclic convolution oracle.
        for k in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for k1 in 0..m {
                let a = g.find_arrow(&format!("(1,{})", k1)).unwrap();
                let b = g
                    .find_arrow(&format!("(1,{})", (k + m - k1) % m))
                    .unwrap();
                acc += f.value(a) * fp.value(b);
            }
            let target = g.find_arrow(&format!("(1,{})", k)).unwrap();
            assert!((conv.value(target) - acc).norm() < 1e-14);
        }
        // Cross-check through the Fourier transform: pointwise products.
        let dft = |func: &GroupoidFunction, j: usize| -> Complex64 {
            (0..m)
                .map(|k| {
                    let a = g.find_arrow(&format!("(1,{})", k)).unwrap();
                    let phase = -2.0 * PI * (j * k) as f64 / m as f64;
                    func.value(a) * Complex64::new(phase.cos(), phase.sin())
                })
                .sum()
        };
        for j in 0..m {
            let lhs = dft(&conv, j);
            let rhs = dft(&f, j) * dft(&fp, j);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn unit_groupoid_convolution_is_pointwise() {
        let (g, h) = unit_groupoid(5).unwrap();
        let f = random_function(&g, 7);
        let fp = random_function(&g, 8);
        let conv = convolve(&f, &fp, &g, &h).unwrap();
        for a in g.arrows() {
            assert_eq!(conv.value(a), f.value(a) * fp.value(a) * 1.0);
        }
    }

    #[test]
    fn convolution_rejects_foreign_functions() {
        let (g2, _) = pair_groupoid(2).unwrap();
        let (g3, h3) = pair_groupoid(3).unwrap();
        let f2 = GroupoidFunction::zero(&g2);
        let f3 = GroupoidFunction::zero(&g3);
        assert!(convolve(&f2, &f3, &g3, &h3).is_err());
    }

    #[test]
    fn involution_examples() {
        let (g, _) = pair_groupoid(2).unwrap();
        let e12 = GroupoidFunction::delta(&g, g.find_arrow("(1,2)").unwrap());
        let star = involution(&e12, &g);
        let e21 = GroupoidFunction::delta(&g, g.find_arrow("(2,1)").unwrap());
        assert_eq!(star.values(), e21.values());

        let mut f = GroupoidFunction::zero(&g);
        f.set(g.find_arrow("(1,1)").unwrap(), Complex64::new(0.0, 1.0));
        let star = involution(&f, &g);
        assert_eq!(
            star.value(g.find_arrow("(1,1)").unwrap()),
            Complex64::new(0.0, -1.0)
        );

        // Real symmetric functions are fixed points.
        let mut sym = GroupoidFunction::zero(&g);
        for a in g.arrows() {
            sym.set(a, Complex64::new(1.0 + (a.0 % 2) as f64, 0.0));
        }
        let symmetrized = GroupoidFunction::from_fn(&g, |a| {
            (sym.value(a) + sym.value(g.inverse(a))) * 0.5
        });
        assert_eq!(involution(&symmetrized, &g).values(), symmetrized.values());
    }

    #[test]
    fn involution_is_involutive() {
        let (g, _) = cyclic_group_bundle(2, 4).unwrap();
        let f = random_function(&g, 21);
        let back = involution(&involution(&f, &g), &g);
        assert_eq!(f.values(), back.values());
    }

    #[test]
    fn i_norm_examples() {
        let (g, h) = pair_groupoid(2).unwrap();
        let ones = GroupoidFunction::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        assert_eq!(i_norm(&ones, &g, &h), 2.0);

        let e12 = GroupoidFunction::delta(&g, g.find_arrow("(1,2)").unwrap());
        assert_eq!(i_norm(&e12, &g, &h), 1.0);

        let (g, h) = cyclic_group_bundle(2, 3).unwrap();
        let ones = GroupoidFunction::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        assert_eq!(i_norm(&ones, &g, &h), 3.0);
    }

    #[test]
    fn associativity_and_anti_multiplicativity() {
        for (g, h) in [
            pair_groupoid(4).unwrap(),
            unit_groupoid(6).unwrap(),
            cyclic_group_bundle(2, 3).unwrap(),
        ] {
            for seed in 0..5u64 {
                let f1 = random_function(&g, 100 + seed);
                let f2 = random_function(&g, 200 + seed);
                let f3 = random_function(&g, 300 + seed);
                let left = convolve(&convolve(&f1, &f2, &g, &h).unwrap(), &f3, &g, &h).unwrap();
                let right = convolve(&f1, &convolve(&f2, &f3, &g, &h).unwrap(), &g, &h).unwrap();
                for a in g.arrows() {
                    assert!((left.value(a) - right.value(a)).norm() < 1e-12);
                }

                let lhs = involution(&convolve(&f1, &f2, &g, &h).unwrap(), &g);
                let rhs = convolve(&involution(&f2, &g), &involution(&f1, &g), &g, &h).unwrap();
                for a in g.arrows() {
                    assert!((lhs.value(a) - rhs.value(a)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn i_norm_submultiplicative() {
        let (g, h) = pair_groupoid(5).unwrap();
        for seed in 0..10u64 {
            let f1 = random_function(&g, 400 + seed);
            let f2 = random_function(&g, 500 + seed);
            let prod = convolve(&f1, &f2, &g, &h).unwrap();
            assert!(
                i_norm(&prod, &g, &h) <= i_norm(&f1, &g, &h) * i_norm(&f2, &g, &h) + 1e-10
            );
        }
    }

    #[test]
    fn unit_indicator_is_convolution_identity() {
        let (g, h) = cyclic_group_bundle(2, 3).unwrap();
        let f = random_function(&g, 9);
        let id = GroupoidFunction::unit_indicator(&g);
        let left = convolve(&id, &f, &g, &h).unwrap();
        let right = convolve(&f, &id, &g, &h).unwrap();
        for a in g.arrows() {
            assert!((left.value(a) - f.value(a)).norm() < 1e-15);
            assert!((right.value(a) - f.value(a)).norm() < 1e-15);
        }
    }
}
