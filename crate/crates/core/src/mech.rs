//! Invariant mechanical structure: inertia, symmetric product, Levi-Civita
//! connection and kinetic energy for left-invariant fields.
//!
//! For an invariant metric `M` the symmetric product of two left-invariant
//! fields is
//!
//! ```text
//! <x : y> = -M^{-1} (ad*_x M y + ad*_y M x)
//! ```
//!
//! and the connection is recovered as `∇_x y = ([x, y] + <x : y>) / 2`.
//! Christoffel symbols are never formed.

use std::collections::BTreeMap;

use crate::error::{check_dim, Error, Result};
use crate::liealg::{AlgebraVector, LieAlgebra};
use crate::scalar::Scalar;

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T = f64> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(vec![T::one(); n])
    }

    pub fn diagonal(diag: Vec<T>) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, d) in diag.into_iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            check_dim(n, row.len())?;
            data.extend(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n.max(1)).map(<[T]>::to_vec).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn apply(&self, x: &AlgebraVector<T>) -> Result<AlgebraVector<T>> {
        check_dim(self.n, x.dim())?;
        let out = (0..self.n)
            .map(|i| {
                (0..self.n).fold(T::zero(), |acc, j| acc + self.get(i, j).clone() * x[j].clone())
            })
            .collect();
        Ok(AlgebraVector(out))
    }

    pub fn column(&self, j: usize) -> AlgebraVector<T> {
        AlgebraVector((0..self.n).map(|i| self.get(i, j).clone()).collect())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix {
            n: self.n,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Gauss-Jordan inverse with partial pivoting on magnitude.
    fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let pivot = (col..n)
                .filter(|&r| !a[r * n + col].is_zero())
                .max_by(|&r, &s| {
                    a[r * n + col]
                        .to_f64()
                        .abs()
                        .total_cmp(&a[s * n + col].to_f64().abs())
                })?;
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                    inv.swap(col * n + j, pivot * n + j);
                }
            }
            let p = a[col * n + col].clone();
            for j in 0..n {
                a[col * n + j] = a[col * n + j].clone() / p.clone();
                inv[col * n + j] = inv[col * n + j].clone() / p.clone();
            }
            for r in 0..n {
                if r == col || a[r * n + col].is_zero() {
                    continue;
                }
                let f = a[r * n + col].clone();
                for j in 0..n {
                    a[r * n + j] = a[r * n + j].clone() - f.clone() * a[col * n + j].clone();
                    inv[r * n + j] = inv[r * n + j].clone() - f.clone() * inv[col * n + j].clone();
                }
            }
        }
        Some(Matrix { n, data: inv })
    }
}

/// Symmetric positive-definite inertia tensor together with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct InertiaTensor<T = f64> {
    matrix: Matrix<T>,
    inverse: Matrix<T>,
}

impl<T: Scalar> InertiaTensor<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        let n = matrix.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                let tol = 1e-12 * (1.0 + matrix.get(i, j).to_f64().abs());
                if !matrix.get(i, j).near(matrix.get(j, i), tol) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        // Symmetric elimination without pivoting: all pivots are positive iff SPD.
        let mut a = matrix.data.clone();
        for k in 0..n {
            let p = a[k * n + k].clone();
            if !p.is_positive() {
                return Err(Error::NotPositiveDefinite {
                    pivot: k,
                    value: p.to_f64(),
                });
            }
            for r in (k + 1)..n {
                let f = a[r * n + k].clone() / p.clone();
                for c in k..n {
                    a[r * n + c] = a[r * n + c].clone() - f.clone() * a[k * n + c].clone();
                }
            }
        }
        let inverse = matrix.inverse().ok_or(Error::NotPositiveDefinite {
            pivot: 0,
            value: 0.0,
        })?;
        Ok(InertiaTensor { matrix, inverse })
    }

    pub fn diagonal(diag: Vec<T>) -> Result<Self> {
        Self::new(Matrix::diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn inverse(&self) -> &Matrix<T> {
        &self.inverse
    }

    pub fn apply(&self, x: &AlgebraVector<T>) -> Result<AlgebraVector<T>> {
        self.matrix.apply(x)
    }

    pub fn solve(&self, x: &AlgebraVector<T>) -> Result<AlgebraVector<T>> {
        self.inverse.apply(x)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.matrix.get(i, j).is_zero()))
    }
}

/// An invariant forced affine-connection control system on a Lie group:
/// `∇_γ' γ' = Y(γ') + Σ u_a Y_a` with the Levi-Civita connection of the
/// invariant metric, constant control fields and affine drift
/// `Y(v) = Y0 + D v` in body coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MechSystem<T = f64> {
    algebra: LieAlgebra<T>,
    inertia: InertiaTensor<T>,
    controls: Vec<AlgebraVector<T>>,
    drift_const: AlgebraVector<T>,
    drift_linear: Matrix<T>,
}

impl<T: Scalar> MechSystem<T> {
    pub fn new(
        algebra: LieAlgebra<T>,
        inertia: InertiaTensor<T>,
        controls: Vec<AlgebraVector<T>>,
    ) -> Result<Self> {
        let n = algebra.dim();
        check_dim(n, inertia.dim())?;
        if controls.is_empty() {
            return Err(Error::NoControls);
        }
        for c in &controls {
            check_dim(n, c.dim())?;
        }
        Ok(MechSystem {
            algebra,
            inertia,
            controls,
            drift_const: AlgebraVector::zeros(n),
            drift_linear: Matrix::zeros(n),
        })
    }

    pub fn with_drift(mut self, constant: AlgebraVector<T>, linear: Matrix<T>) -> Result<Self> {
        check_dim(self.dim(), constant.dim())?;
        check_dim(self.dim(), linear.dim())?;
        self.drift_const = constant;
        self.drift_linear = linear;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn algebra(&self) -> &LieAlgebra<T> {
        &self.algebra
    }

    pub fn inertia(&self) -> &InertiaTensor<T> {
        &self.inertia
    }

    pub fn controls(&self) -> &[AlgebraVector<T>] {
        &self.controls
    }

    pub fn drift_const(&self) -> &AlgebraVector<T> {
        &self.drift_const
    }

    pub fn drift_linear(&self) -> &Matrix<T> {
        &self.drift_linear
    }

    pub fn has_drift(&self) -> bool {
        !self.drift_const.is_zero() || !self.drift_linear.is_zero()
    }

    /// Drift vectors that must lie in a span for `Y(v)` to lie there for
    /// every `v`: `Y0` and the columns of `D`.
    pub fn drift_vectors(&self) -> Vec<AlgebraVector<T>> {
        let mut out = vec![self.drift_const.clone()];
        out.extend((0..self.dim()).map(|j| self.drift_linear.column(j)));
        out
    }

    pub fn drift(&self, v: &AlgebraVector<T>) -> Result<AlgebraVector<T>> {
        Ok(&self.drift_const + &self.drift_linear.apply(v)?)
    }

    pub fn symmetric_product(&self, x: &AlgebraVector<T>, y: &AlgebraVector<T>) -> Result<AlgebraVector<T>> {
        let mx = self.inertia.apply(x)?;
        let my = self.inertia.apply(y)?;
        let a = self.algebra.ad_star(x, &my)?;
        let b = self.algebra.ad_star(y, &mx)?;
        Ok(-&self.inertia.solve(&(&a + &b))?)
    }

    /// `γ^k_ij = <e_i : e_j>^k`, from the index formula
    /// `γ^k_ij = -M^{hk} (M_il c^l_jh + M_jl c^l_ih)`. Keys are 0-based `(i, j, k)`.
    pub fn gamma_constants(&self) -> BTreeMap<(usize, usize, usize), T> {
        let n = self.dim();
        let m = self.inertia.matrix();
        let minv = self.inertia.inverse();
        let g = &self.algebra;
        let mut out = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = T::zero();
                    for h in 0..n {
                        let mhk = minv.get(h, k);
                        if mhk.is_zero() {
                            continue;
                        }
                        let mut inner = T::zero();
                        for l in 0..n {
                            inner = inner
                                + m.get(i, l).clone() * g.constant(j, h, l)
                                + m.get(j, l).clone() * g.constant(i, h, l);
                        }
                        acc = acc - mhk.clone() * inner;
                    }
                    if !acc.is_zero() {
                        out.insert((i, j, k), acc);
                    }
                }
            }
        }
        out
    }

    /// Levi-Civita covariant derivative of left-invariant fields.
    pub fn connection(&self, x: &AlgebraVector<T>, y: &AlgebraVector<T>) -> Result<AlgebraVector<T>> {
        let b = self.algebra.bracket(x, y)?;
        let s = self.symmetric_product(x, y)?;
        let half = T::ratio(1, 2);
        Ok((&b + &s).scale(&half))
    }

    /// Kinetic energy `ξᵀ M ξ / 2`.
    pub fn energy(&self, xi: &AlgebraVector<T>) -> Result<T> {
        let m = self.inertia.apply(xi)?;
        Ok(xi.dot(&m) * T::ratio(1, 2))
    }

    pub fn to_f64(&self) -> MechSystem<f64> {
        MechSystem {
            algebra: self.algebra.to_f64(),
            inertia: InertiaTensor {
                matrix: self.inertia.matrix.map(Scalar::to_f64),
                inverse: self.inertia.inverse.map(Scalar::to_f64),
            },
            controls: self.controls.iter().map(AlgebraVector::to_f64).collect(),
            drift_const: self.drift_const.to_f64(),
            drift_linear: self.drift_linear.map(Scalar::to_f64),
        }
    }
}

/// The submarine of the Kirchhoff example: se(3), `M = diag(J1, J2, J3, M1, M2, M3)`,
/// controls `Y1 = e1/J1`, `Y2 = e2/J2`, `Y3 = e6/M3`, no drift.
pub fn submarine<T: Scalar>(inertia_diag: [T; 6]) -> Result<MechSystem<T>> {
    let n = 6;
    let y = |idx: usize| AlgebraVector::<T>::basis(n, idx).scale(&(T::one() / inertia_diag[idx].clone()));
    let controls = vec![y(0), y(1), y(5)];
    let inertia = InertiaTensor::diagonal(inertia_diag.to_vec())?;
    MechSystem::new(LieAlgebra::se3(), inertia, controls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    fn q(n: i64) -> Rational {
        Rational::from_i64(n)
    }

    fn e(i: usize) -> AlgebraVector<Rational> {
        AlgebraVector::basis(6, i - 1)
    }

    /// Symmetric regime J1 = J2 = 2, M1 = M2 = 5.
    fn symmetric() -> MechSystem<Rational> {
        submarine([q(2), q(2), q(3), q(5), q(5), q(7)]).unwrap()
    }

    #[test]
    fn symmetric_case_products() {
        let sys = symmetric();
        let y = sys.controls().to_vec();
        let jm = Rational::ratio(1, 10); // 1/(J1 M1)
        assert!(sys.symmetric_product(&y[0], &y[1]).unwrap().is_zero());
        assert_eq!(sys.symmetric_product(&y[0], &y[2]).unwrap(), e(5).scale(&-jm.clone()));
        assert_eq!(sys.symmetric_product(&y[1], &y[2]).unwrap(), e(4).scale(&jm));
        for j in 1..=6 {
            assert!(sys.symmetric_product(&e(j), &e(j)).unwrap().is_zero());
        }
    }

    #[test]
    fn gamma_table_entries() {
        let (j1, j2, j3, m1, m2, m3) = (2, 3, 5, 7, 11, 13);
        let sys = submarine([q(j1), q(j2), q(j3), q(m1), q(m2), q(m3)]).unwrap();
        let g = sys.gamma_constants();
        assert_eq!(g[&(2, 1, 0)], Rational::ratio(j3 - j2, j1));
        assert_eq!(g[&(1, 3, 5)], Rational::ratio(-m1, m3));
        assert_eq!(g.len(), 24);
    }

    #[test]
    fn gamma_constants_agree_with_symmetric_product() {
        let sys = submarine([q(2), q(3), q(5), q(7), q(11), q(13)]).unwrap();
        let g = sys.gamma_constants();
        for i in 1..=6 {
            for j in 1..=6 {
                let p = sys.symmetric_product(&e(i), &e(j)).unwrap();
                for k in 0..6 {
                    let expected = g.get(&(i - 1, j - 1, k)).cloned().unwrap_or_else(|| q(0));
                    assert_eq!(p[k], expected);
                }
            }
        }
    }

    #[test]
    fn connection_on_basis() {
        let sys = symmetric();
        assert!(sys.connection(&e(1), &e(1)).unwrap().is_zero());
    }

    #[test]
    fn energy_values() {
        let sys = submarine([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(sys.energy(&AlgebraVector::zeros(6)).unwrap(), 0.0);
        assert_eq!(sys.energy(&AlgebraVector::basis(6, 0)).unwrap(), 0.5);
    }

    #[test]
    fn inertia_validation() {
        assert!(matches!(
            InertiaTensor::diagonal(vec![1.0, -1.0]),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
        let m = Matrix::from_rows(vec![vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert!(matches!(InertiaTensor::new(m), Err(Error::NotSymmetric { .. })));
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(InertiaTensor::new(m).is_err());
        let m = Matrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let t = InertiaTensor::new(m).unwrap();
        let x = AlgebraVector::from_slice(&[1.0, -3.0]);
        let back = t.solve(&t.apply(&x).unwrap()).unwrap();
        assert!((&back - &x).norm() < 1e-14);
    }

    #[test]
    fn system_validation() {
        let inertia = InertiaTensor::diagonal(vec![1.0; 6]).unwrap();
        assert!(matches!(
            MechSystem::new(LieAlgebra::se3(), inertia.clone(), vec![]),
            Err(Error::NoControls)
        ));
        assert!(MechSystem::new(LieAlgebra::se3(), inertia, vec![AlgebraVector::zeros(5)]).is_err());
    }

    fn vec6() -> impl Strategy<Value = AlgebraVector<f64>> {
        prop::collection::vec(-3.0f64..3.0, 6).prop_map(AlgebraVector)
    }

    fn generic_system() -> impl Strategy<Value = MechSystem<f64>> {
        // random SPD inertia = B Bᵀ + I
        prop::collection::vec(-1.0f64..1.0, 36).prop_map(|b| {
            let rows = (0..6)
                .map(|i| {
                    (0..6)
                        .map(|j| {
                            let s: f64 = (0..6).map(|k| b[i * 6 + k] * b[j * 6 + k]).sum();
                            s + if i == j { 1.0 } else { 0.0 }
                        })
                        .collect()
                })
                .collect();
            let inertia = InertiaTensor::new(Matrix::from_rows(rows).unwrap()).unwrap();
            MechSystem::new(LieAlgebra::se3(), inertia, vec![AlgebraVector::basis(6, 0)]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn product_is_symmetric(sys in generic_system(), x in vec6(), y in vec6()) {
            let a = sys.symmetric_product(&x, &y).unwrap();
            let b = sys.symmetric_product(&y, &x).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn polarization(sys in generic_system(), x in vec6(), y in vec6()) {
            let xy = sys.symmetric_product(&x, &y).unwrap();
            let s = &x + &y;
            let pol = (&(&sys.symmetric_product(&s, &s).unwrap() - &sys.symmetric_product(&x, &x).unwrap())
                - &sys.symmetric_product(&y, &y).unwrap()).scale(&0.5);
            prop_assert!((&xy - &pol).norm() < 1e-12 * (1.0 + xy.norm()) * 100.0);
        }

        #[test]
        fn quadratic_scaling(sys in generic_system(), x in vec6(), a in -4.0f64..4.0) {
            let lhs = sys.symmetric_product(&x.scale(&a), &x.scale(&a)).unwrap();
            let rhs = sys.symmetric_product(&x, &x).unwrap().scale(&(a * a));
            prop_assert!((&lhs - &rhs).norm() < 1e-11 * (1.0 + rhs.norm()));
        }

        #[test]
        fn connection_reconstructs_product_and_bracket(sys in generic_system(), x in vec6(), y in vec6()) {
            let nxy = sys.connection(&x, &y).unwrap();
            let nyx = sys.connection(&y, &x).unwrap();
            let sum = &nxy + &nyx;
            let diff = &nxy - &nyx;
            let sp = sys.symmetric_product(&x, &y).unwrap();
            let br = sys.algebra().bracket(&x, &y).unwrap();
            prop_assert!((&sum - &sp).norm() < 1e-11 * (1.0 + sp.norm()));
            prop_assert!((&diff - &br).norm() < 1e-11 * (1.0 + br.norm()));
            let nxx = sys.connection(&x, &x).unwrap();
            let half = sys.symmetric_product(&x, &x).unwrap().scale(&0.5);
            prop_assert!((&nxx - &half).norm() < 1e-11 * (1.0 + half.norm()));
        }

        #[test]
        fn energy_positive(sys in generic_system(), x in vec6()) {
            prop_assume!(x.norm() > 1e-6);
            prop_assert!(sys.energy(&x).unwrap() > 0.0);
        }
    }
}
