//! Finite-dimensional Lie algebras given by structure constants.
//!
//! Constants follow `[e_i, e_j] = sum_k c^k_ij e_k` and are stored sparsely,
//! keyed by 0-based `(i, j, k)`. Left-invariant vector fields are identified
//! with their algebra elements, so brackets of such fields reduce to
//! coefficient arithmetic here.

use std::collections::BTreeMap;
use std::ops::{Add, Index, IndexMut, Neg, Sub};

use nalgebra::{DVector, Matrix3, Vector3};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Coefficients of an algebra element (equivalently, a left-invariant vector
/// field) in the algebra's basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraVector<T = f64>(pub Vec<T>);

impl<T: Scalar> AlgebraVector<T> {
    pub fn zeros(n: usize) -> Self {
        AlgebraVector(vec![T::zero(); n])
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = T::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn scale(&self, a: &T) -> Self {
        AlgebraVector(self.0.iter().map(|x| x.clone() * a.clone()).collect())
    }

    pub fn dot(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn to_f64(&self) -> AlgebraVector<f64> {
        AlgebraVector(self.0.iter().map(Scalar::to_f64).collect())
    }
}

impl AlgebraVector<f64> {
    pub fn from_slice(xs: &[f64]) -> Self {
        AlgebraVector(xs.to_vec())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        AlgebraVector(v.iter().copied().collect())
    }

    /// Splits an se(3) element into its angular and linear parts.
    pub fn split3(&self) -> (Vector3<f64>, Vector3<f64>) {
        let x = &self.0;
        (
            Vector3::new(x[0], x[1], x[2]),
            Vector3::new(x[3], x[4], x[5]),
        )
    }

    pub fn join3(w: &Vector3<f64>, v: &Vector3<f64>) -> Self {
        AlgebraVector(vec![w[0], w[1], w[2], v[0], v[1], v[2]])
    }
}

impl<T> Index<usize> for AlgebraVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for AlgebraVector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Scalar> Add for &AlgebraVector<T> {
    type Output = AlgebraVector<T>;
    fn add(self, rhs: Self) -> AlgebraVector<T> {
        AlgebraVector(
            self.0
                .iter()
                .zip(&rhs.0)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        )
    }
}

impl<T: Scalar> Sub for &AlgebraVector<T> {
    type Output = AlgebraVector<T>;
    fn sub(self, rhs: Self) -> AlgebraVector<T> {
        AlgebraVector(
            self.0
                .iter()
                .zip(&rhs.0)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        )
    }
}

impl<T: Scalar> Neg for &AlgebraVector<T> {
    type Output = AlgebraVector<T>;
    fn neg(self) -> AlgebraVector<T> {
        AlgebraVector(self.0.iter().map(|a| -a.clone()).collect())
    }
}

/// A Lie algebra defined by its structure constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra<T = f64> {
    dim: usize,
    constants: BTreeMap<(usize, usize, usize), T>,
    labels: Vec<String>,
}

impl<T: Scalar> LieAlgebra<T> {
    /// Builds an algebra from a complete table of 0-based `(i, j, k, c^k_ij)`
    /// entries. Every nonzero entry must come with its antisymmetric partner.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (usize, usize, usize, T)>) -> Result<Self> {
        let constants = collect_entries(dim, entries)?;
        for (&(i, j, k), c) in &constants {
            if i == j {
                return Err(Error::NotAntisymmetric { i, j, k });
            }
            let partner = constants.get(&(j, i, k)).cloned().unwrap_or_else(T::zero);
            if !(partner + c.clone()).near(&T::zero(), 1e-12) {
                return Err(Error::NotAntisymmetric { i, j, k });
            }
        }
        Ok(Self::assemble(dim, constants))
    }

    /// Builds an algebra from a partial table: the partner `c^k_ji = -c^k_ij`
    /// is filled in automatically. Supplying both orders with inconsistent
    /// values is an error.
    pub fn from_partial(
        dim: usize,
        entries: impl IntoIterator<Item = (usize, usize, usize, T)>,
    ) -> Result<Self> {
        let given = collect_entries(dim, entries)?;
        let mut constants = BTreeMap::new();
        for (&(i, j, k), c) in &given {
            if i == j {
                return Err(Error::NotAntisymmetric { i, j, k });
            }
            if let Some(p) = given.get(&(j, i, k)) {
                if !(p.clone() + c.clone()).near(&T::zero(), 1e-12) {
                    return Err(Error::NotAntisymmetric { i, j, k });
                }
            }
            constants.insert((i, j, k), c.clone());
            constants.entry((j, i, k)).or_insert_with(|| -c.clone());
        }
        Ok(Self::assemble(dim, constants))
    }

    fn assemble(dim: usize, mut constants: BTreeMap<(usize, usize, usize), T>) -> Self {
        constants.retain(|_, c| !c.is_zero());
        let labels = (1..=dim).map(|i| format!("e{i}")).collect();
        LieAlgebra {
            dim,
            constants,
            labels,
        }
    }

    /// The abelian algebra of dimension `n`.
    pub fn abelian(n: usize) -> Self {
        Self::assemble(n, BTreeMap::new())
    }

    /// The 3-dimensional Heisenberg algebra, `[e1, e2] = e3`.
    pub fn heisenberg() -> Self {
        Self::from_partial(3, [(0, 1, 2, T::one())]).expect("valid table")
    }

    /// se(3) in the basis (angular 1..3, linear 4..6).
    pub fn se3() -> Self {
        // (k, i, j) with c^k_ij = 1; the partners c^k_ji = -1 are filled in.
        const POSITIVE: [(usize, usize, usize); 9] = [
            (1, 2, 3),
            (2, 3, 1),
            (3, 1, 2),
            (4, 2, 6),
            (4, 5, 3),
            (5, 3, 4),
            (5, 6, 1),
            (6, 1, 5),
            (6, 4, 2),
        ];
        let entries = POSITIVE
            .iter()
            .map(|&(k, i, j)| (i - 1, j - 1, k - 1, T::one()));
        Self::from_partial(6, entries).expect("se(3) table is antisymmetric")
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        check_dim(self.dim, labels.len())?;
        self.labels = labels;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `c^k_ij` (0-based).
    pub fn constant(&self, i: usize, j: usize, k: usize) -> T {
        self.constants.get(&(i, j, k)).cloned().unwrap_or_else(T::zero)
    }

    /// Nonzero constants as `((i, j, k), c^k_ij)`, 0-based.
    pub fn nonzero_constants(&self) -> impl Iterator<Item = (&(usize, usize, usize), &T)> {
        self.constants.iter()
    }

    pub fn bracket(&self, x: &AlgebraVector<T>, y: &AlgebraVector<T>) -> Result<AlgebraVector<T>> {
        check_dim(self.dim, x.dim())?;
        check_dim(self.dim, y.dim())?;
        let mut out = AlgebraVector::<T>::zeros(self.dim);
        for (&(i, j, k), c) in &self.constants {
            if x[i].is_zero() || y[j].is_zero() {
                continue;
            }
            out[k] = out[k].clone() + c.clone() * x[i].clone() * y[j].clone();
        }
        Ok(out)
    }

    /// Coadjoint action, `(ad*_x alpha)(y) = alpha([x, y])`.
    pub fn ad_star(&self, x: &AlgebraVector<T>, alpha: &AlgebraVector<T>) -> Result<AlgebraVector<T>> {
        check_dim(self.dim, x.dim())?;
        check_dim(self.dim, alpha.dim())?;
        let mut out = AlgebraVector::<T>::zeros(self.dim);
        for (&(i, j, k), c) in &self.constants {
            if x[i].is_zero() || alpha[k].is_zero() {
                continue;
            }
            out[j] = out[j].clone() + x[i].clone() * c.clone() * alpha[k].clone();
        }
        Ok(out)
    }

    /// Largest absolute Jacobi sum over all `(i, j, k, m)`; zero for a Lie algebra.
    pub fn jacobi_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = vec![T::zero(); n];
                    for l in 0..n {
                        let a = self.constant(i, j, l);
                        let b = self.constant(j, k, l);
                        let c = self.constant(k, i, l);
                        if a.is_zero() && b.is_zero() && c.is_zero() {
                            continue;
                        }
                        for (m, slot) in acc.iter_mut().enumerate() {
                            let term = a.clone() * self.constant(l, k, m)
                                + b.clone() * self.constant(l, i, m)
                                + c.clone() * self.constant(l, j, m);
                            *slot = slot.clone() + term;
                        }
                    }
                    for s in &acc {
                        worst = worst.max(s.to_f64().abs());
                    }
                }
            }
        }
        worst
    }

    /// Converts the constants to another scalar type.
    pub fn map_scalars<U: Scalar>(&self, f: impl Fn(&T) -> U) -> LieAlgebra<U> {
        LieAlgebra {
            dim: self.dim,
            constants: self.constants.iter().map(|(&key, c)| (key, f(c))).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn to_f64(&self) -> LieAlgebra<f64> {
        self.map_scalars(Scalar::to_f64)
    }

    /// True when every constant agrees with `other` within `tol`.
    pub fn same_constants(&self, other: &LieAlgebra<T>, tol: f64) -> bool {
        self.dim == other.dim
            && self
                .constants
                .keys()
                .chain(other.constants.keys())
                .all(|&(i, j, k)| self.constant(i, j, k).near(&other.constant(i, j, k), tol))
    }
}

fn collect_entries<T: Scalar>(
    dim: usize,
    entries: impl IntoIterator<Item = (usize, usize, usize, T)>,
) -> Result<BTreeMap<(usize, usize, usize), T>> {
    let mut map = BTreeMap::new();
    for (i, j, k, c) in entries {
        if i >= dim || j >= dim || k >= dim {
            return Err(Error::IndexOutOfRange { i, j, k, dim });
        }
        match map.get(&(i, j, k)) {
            Some(prev) if !T::near(prev, &c, 1e-12) => {
                return Err(Error::NotAntisymmetric { i, j, k });
            }
            _ => {
                map.insert((i, j, k), c);
            }
        }
    }
    Ok(map)
}

/// The skew matrix `S(x)` with `S(x) y = x × y`.
pub fn hat(x: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -x[2], x[1], x[2], 0.0, -x[0], -x[1], x[0], 0.0)
}

/// Inverse of [`hat`] on skew-symmetric matrices.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use nalgebra::Matrix4;
    use proptest::prelude::*;

    fn q(n: i64) -> Rational {
        Rational::from_i64(n)
    }

    fn e<T: Scalar>(i: usize) -> AlgebraVector<T> {
        AlgebraVector::basis(6, i - 1)
    }

    fn se3_matrix(x: &AlgebraVector<f64>) -> Matrix4<f64> {
        let (w, v) = x.split3();
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&w));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&v);
        m
    }

    #[test]
    fn se3_bracket_e2_e3_is_e1() {
        let g = LieAlgebra::<Rational>::se3();
        assert_eq!(g.bracket(&e(2), &e(3)).unwrap(), e(1));
    }

    #[test]
    fn se3_listed_constants() {
        let g = LieAlgebra::<Rational>::se3();
        assert_eq!(g.constant(2, 3, 4), q(1)); // c^5_34
        assert_eq!(g.constant(1, 3, 5), q(-1)); // c^6_24
        assert_eq!(g.nonzero_constants().count(), 18);
        // no constant mixes two linear directions into anything
        for i in 3..6 {
            for j in 3..6 {
                for k in 0..6 {
                    assert_eq!(g.constant(i, j, k), q(0));
                }
            }
        }
    }

    #[test]
    fn bracket_of_scaled_controls() {
        // Y1 = e1/2, Y2 = e2/2 gives [Y1, Y2] = e3/4
        let g = LieAlgebra::<Rational>::se3();
        let half = Rational::ratio(1, 2);
        let y1 = e::<Rational>(1).scale(&half);
        let y2 = e::<Rational>(2).scale(&half);
        assert_eq!(g.bracket(&y1, &y2).unwrap(), e::<Rational>(3).scale(&Rational::ratio(1, 4)));
    }

    #[test]
    fn ad_star_matches_brute_force_on_basis() {
        let g = LieAlgebra::<Rational>::se3();
        let got = g.ad_star(&e(1), &e(2)).unwrap();
        // alpha([e1, y]) for each basis y
        let brute: Vec<Rational> = (1..=6)
            .map(|j| g.bracket(&e(1), &e(j)).unwrap().dot(&e(2)))
            .collect();
        assert_eq!(got.0, brute);
        let mut expected = AlgebraVector::<Rational>::zeros(6);
        expected[2] = q(-1);
        assert_eq!(got, expected);
    }

    #[test]
    fn ad_star_of_zero_vanishes() {
        let g = LieAlgebra::<f64>::se3();
        let alpha = AlgebraVector::from_slice(&[1.0, -2.0, 3.0, 0.5, 0.1, 7.0]);
        assert!(g.ad_star(&AlgebraVector::zeros(6), &alpha).unwrap().is_zero());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = LieAlgebra::<f64>::se3();
        let err = g.bracket(&AlgebraVector::zeros(6), &AlgebraVector::zeros(5));
        assert!(matches!(err, Err(Error::DimensionMismatch { expected: 6, found: 5 })));
        assert!(g.ad_star(&AlgebraVector::zeros(3), &AlgebraVector::zeros(6)).is_err());
    }

    #[test]
    fn jacobi_defect_of_valid_algebras() {
        assert!(LieAlgebra::<f64>::se3().jacobi_defect() < 1e-14);
        assert_eq!(LieAlgebra::<Rational>::se3().jacobi_defect(), 0.0);
        assert_eq!(LieAlgebra::<Rational>::heisenberg().jacobi_defect(), 0.0);
    }

    #[test]
    fn lone_constant_rejected_by_strict_constructor() {
        let err = LieAlgebra::<f64>::new(6, [(1, 2, 0, 1.0)]);
        assert!(matches!(err, Err(Error::NotAntisymmetric { .. })));
        // the partial constructor fills the partner instead
        let g = LieAlgebra::<f64>::from_partial(6, [(1, 2, 0, 1.0)]).unwrap();
        assert_eq!(g.constant(2, 1, 0), -1.0);
    }

    #[test]
    fn inconsistent_partner_rejected() {
        let err = LieAlgebra::<f64>::from_partial(3, [(0, 1, 2, 1.0), (1, 0, 2, 0.5)]);
        assert!(matches!(err, Err(Error::NotAntisymmetric { .. })));
        let err = LieAlgebra::<f64>::new(3, [(0, 0, 2, 1.0)]);
        assert!(err.is_err());
        let err = LieAlgebra::<f64>::new(3, [(0, 1, 3, 1.0)]);
        assert!(matches!(err, Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn perturbed_se3_breaks_jacobi() {
        // perturb one antisymmetric pair: c^1_23 -> 1 + 1e-3
        let base = LieAlgebra::<f64>::se3();
        let entries = base.nonzero_constants().map(|(&(i, j, k), &c)| {
            let c = if k == 0 && ((i, j) == (1, 2) || (i, j) == (2, 1)) {
                c * (1.0 + 1e-3)
            } else {
                c
            };
            (i, j, k, c)
        });
        let g = LieAlgebra::new(6, entries).unwrap();
        let d = g.jacobi_defect();
        assert!(d > 1e-4, "defect {d}");
    }

    #[test]
    fn hat_matches_display() {
        let s = hat(&Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(s, Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0));
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        prop::array::uniform3(-10.0f64..10.0).prop_map(|a| Vector3::new(a[0], a[1], a[2]))
    }

    fn vec6() -> impl Strategy<Value = AlgebraVector<f64>> {
        prop::collection::vec(-5.0f64..5.0, 6).prop_map(AlgebraVector)
    }

    proptest! {
        #[test]
        fn hat_is_cross_product(x in vec3(), y in vec3()) {
            prop_assert!((hat(&x) * x).norm() < 1e-12);
            prop_assert!((hat(&x) * y - x.cross(&y)).norm() < 1e-12);
            prop_assert!((hat(&x) * y + hat(&y) * x).norm() < 1e-12);
        }

        #[test]
        fn bracket_is_antisymmetric_and_bilinear(x in vec6(), y in vec6(), z in vec6(), a in -3.0f64..3.0) {
            let g = LieAlgebra::<f64>::se3();
            let xy = g.bracket(&x, &y).unwrap();
            let yx = g.bracket(&y, &x).unwrap();
            prop_assert!((&xy + &yx).norm() < 1e-12);
            prop_assert!(g.bracket(&x, &x).unwrap().norm() < 1e-12);
            let lhs = g.bracket(&(&x.scale(&a) + &z), &y).unwrap();
            let rhs = &g.bracket(&x, &y).unwrap().scale(&a) + &g.bracket(&z, &y).unwrap();
            prop_assert!((&lhs - &rhs).norm() < 1e-10);
        }

        #[test]
        fn bracket_is_matrix_commutator(x in vec6(), y in vec6()) {
            let g = LieAlgebra::<f64>::se3();
            let b = g.bracket(&x, &y).unwrap();
            let (mx, my) = (se3_matrix(&x), se3_matrix(&y));
            let comm = mx * my - my * mx;
            prop_assert!((se3_matrix(&b) - comm).norm() < 1e-12 * (1.0 + comm.norm()));
        }

        #[test]
        fn ad_star_defining_identity(x in vec6(), y in vec6(), alpha in vec6()) {
            let g = LieAlgebra::<f64>::se3();
            let lhs = g.ad_star(&x, &alpha).unwrap().dot(&y);
            let rhs = alpha.dot(&g.bracket(&x, &y).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
