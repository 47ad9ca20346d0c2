//! Matrix representations of the supported groups and integrators for
//! left-invariant motions on them.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::dynamics::{polar_project, rotation_angle, step_count, ControlLaw};
use crate::error::{check_dim, Error, Result};
use crate::liealg::{hat, AlgebraVector, LieAlgebra};
use crate::mech::MechSystem;

/// Faithful matrix representation `x -> E(x)` with `[E(x), E(y)] = E([x, y])`.
pub trait MatrixGroup: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn algebra_dim(&self) -> usize;
    fn matrix_dim(&self) -> usize;
    fn embed(&self, xi: &AlgebraVector) -> DMatrix<f64>;

    fn exp(&self, xi: &AlgebraVector) -> DMatrix<f64> {
        self.embed(xi).exp()
    }

    /// Pulls a numerically drifted element back onto the group.
    fn normalize(&self, _g: &mut DMatrix<f64>) {}

    fn distance(&self, g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> f64 {
        (g1 - g2).norm()
    }

    fn identity(&self) -> DMatrix<f64> {
        DMatrix::identity(self.matrix_dim(), self.matrix_dim())
    }
}

/// SE(3) as 4x4 homogeneous matrices; body velocity `(omega, v)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Se3Group;

impl MatrixGroup for Se3Group {
    fn name(&self) -> &'static str {
        "SE(3)"
    }

    fn algebra_dim(&self) -> usize {
        6
    }

    fn matrix_dim(&self) -> usize {
        4
    }

    fn embed(&self, xi: &AlgebraVector) -> DMatrix<f64> {
        let (w, v) = xi.split3();
        let mut m = DMatrix::zeros(4, 4);
        m.view_mut((0, 0), (3, 3)).copy_from(&hat(&w));
        m.view_mut((0, 3), (3, 1)).copy_from(&v);
        m
    }

    fn normalize(&self, g: &mut DMatrix<f64>) {
        let a: Matrix3<f64> = g.fixed_view::<3, 3>(0, 0).into_owned();
        g.view_mut((0, 0), (3, 3)).copy_from(&polar_project(&a));
        g.view_mut((3, 0), (1, 4)).copy_from(&DMatrix::from_row_slice(1, 4, &[0.0, 0.0, 0.0, 1.0]));
    }

    /// `|r1 - r2| + angle(A1^T A2)`
    fn distance(&self, g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> f64 {
        let a1: Matrix3<f64> = g1.fixed_view::<3, 3>(0, 0).into_owned();
        let a2: Matrix3<f64> = g2.fixed_view::<3, 3>(0, 0).into_owned();
        let r1: Vector3<f64> = g1.fixed_view::<3, 1>(0, 3).into_owned();
        let r2: Vector3<f64> = g2.fixed_view::<3, 1>(0, 3).into_owned();
        (r1 - r2).norm() + rotation_angle(&(a1.transpose() * a2))
    }
}

/// Heisenberg group as unipotent 3x3 matrices, `[e1, e2] = e3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeisenbergGroup;

impl MatrixGroup for HeisenbergGroup {
    fn name(&self) -> &'static str {
        "Heisenberg"
    }

    fn algebra_dim(&self) -> usize {
        3
    }

    fn matrix_dim(&self) -> usize {
        3
    }

    fn embed(&self, xi: &AlgebraVector) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.0, xi[0], xi[2], 0.0, 0.0, xi[1], 0.0, 0.0, 0.0])
    }

    fn exp(&self, xi: &AlgebraVector) -> DMatrix<f64> {
        let e = self.embed(xi);
        DMatrix::identity(3, 3) + &e + &e * &e * 0.5
    }

    fn normalize(&self, g: &mut DMatrix<f64>) {
        for i in 0..3 {
            g[(i, i)] = 1.0;
            for j in 0..i {
                g[(i, j)] = 0.0;
            }
        }
    }
}

/// `R^n` as translations in homogeneous coordinates.
#[derive(Debug, Clone, Copy)]
pub struct TranslationGroup(pub usize);

impl MatrixGroup for TranslationGroup {
    fn name(&self) -> &'static str {
        "R^n"
    }

    fn algebra_dim(&self) -> usize {
        self.0
    }

    fn matrix_dim(&self) -> usize {
        self.0 + 1
    }

    fn embed(&self, xi: &AlgebraVector) -> DMatrix<f64> {
        let n = self.0;
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            m[(i, n)] = xi[i];
        }
        m
    }

    fn exp(&self, xi: &AlgebraVector) -> DMatrix<f64> {
        self.identity() + self.embed(xi)
    }
}

/// Matrix group whose Lie algebra has the constants of `algebra`.
pub fn group_for(algebra: &LieAlgebra) -> Result<Arc<dyn MatrixGroup>> {
    let n = algebra.dim();
    if n == 6 && algebra.same_constants(&LieAlgebra::se3(), 1e-12) {
        Ok(Arc::new(Se3Group))
    } else if n == 3 && algebra.same_constants(&LieAlgebra::heisenberg(), 1e-12) {
        Ok(Arc::new(HeisenbergGroup))
    } else if algebra.nonzero_constants().next().is_none() {
        Ok(Arc::new(TranslationGroup(n)))
    } else {
        Err(Error::InvalidArgument(
            "no matrix representation for this algebra (se(3), Heisenberg and abelian algebras are supported)".into(),
        ))
    }
}

/// Time-sampled configurations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupPath {
    pub times: Vec<f64>,
    pub configs: Vec<DMatrix<f64>>,
}

fn rk4_group_step(
    group: &dyn MatrixGroup,
    g: &DMatrix<f64>,
    x0: &AlgebraVector,
    xm: &AlgebraVector,
    x1: &AlgebraVector,
    h: f64,
) -> DMatrix<f64> {
    let (e0, em, e1) = (group.embed(x0), group.embed(xm), group.embed(x1));
    let k1 = g * &e0;
    let k2 = (g + &k1 * (0.5 * h)) * &em;
    let k3 = (g + &k2 * (0.5 * h)) * &em;
    let k4 = (g + &k3 * h) * &e1;
    let mut next = g + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    group.normalize(&mut next);
    next
}

fn check_finite(g: &DMatrix<f64>, t: f64) -> Result<()> {
    if g.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { time: t })
    }
}

/// Integrates `dg/dt = g E(xi(t))` from `g0` with RK4, keeping every
/// `record_every`-th step and the endpoint.
pub fn integrate_kinematic(
    group: &dyn MatrixGroup,
    g0: &DMatrix<f64>,
    velocity: &dyn Fn(f64) -> AlgebraVector,
    t_final: f64,
    dt: f64,
    record_every: usize,
) -> Result<GroupPath> {
    let n = step_count(t_final, dt)?;
    let h = t_final / n as f64;
    let every = record_every.max(1);
    let mut path = GroupPath {
        times: vec![0.0],
        configs: vec![g0.clone()],
    };
    let mut g = g0.clone();
    let mut x0 = velocity(0.0);
    check_dim(group.algebra_dim(), x0.dim())?;
    for i in 0..n {
        let t = i as f64 * h;
        let t_next = if i + 1 == n { t_final } else { (i + 1) as f64 * h };
        let xm = velocity(t + 0.5 * h);
        let x1 = velocity(t_next);
        g = rk4_group_step(group, &g, &x0, &xm, &x1, h);
        check_finite(&g, t_next)?;
        if (i + 1) % every == 0 || i + 1 == n {
            path.times.push(t_next);
            path.configs.push(g.clone());
        }
        x0 = x1;
    }
    Ok(path)
}

/// Integrates the body-coordinate equations of a mechanical system,
/// `dxi/dt = -<xi : xi>/2 + Y0 + D xi + sum u_a Y_a`, `dg/dt = g E(xi)`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_body(
    sys: &MechSystem,
    group: &dyn MatrixGroup,
    g0: &DMatrix<f64>,
    xi0: &AlgebraVector,
    u: &dyn ControlLaw,
    t_final: f64,
    dt: f64,
    record_every: usize,
) -> Result<(GroupPath, Vec<AlgebraVector>)> {
    check_dim(sys.dim(), group.algebra_dim())?;
    check_dim(sys.dim(), xi0.dim())?;
    check_dim(sys.controls().len(), u.channels())?;
    let n = step_count(t_final, dt)?;
    let h = t_final / n as f64;
    let every = record_every.max(1);
    let k = sys.controls().len();
    let mut ub = vec![0.0; k];

    let mut accel = |t: f64, xi: &AlgebraVector| -> Result<AlgebraVector> {
        u.eval_into(t, &mut ub);
        let mut a = sys.symmetric_product(xi, xi)?.scale(&-0.5);
        a = &a + &sys.drift(xi)?;
        for (ua, y) in ub.iter().zip(sys.controls()) {
            a = &a + &y.scale(ua);
        }
        Ok(a)
    };

    let mut path = GroupPath {
        times: vec![0.0],
        configs: vec![g0.clone()],
    };
    let mut vels = vec![xi0.clone()];
    let mut g = g0.clone();
    let mut xi = xi0.clone();
    for i in 0..n {
        let t = i as f64 * h;
        let t_next = if i + 1 == n { t_final } else { (i + 1) as f64 * h };
        let a1 = accel(t, &xi)?;
        let x2 = &xi + &a1.scale(&(0.5 * h));
        let a2 = accel(t + 0.5 * h, &x2)?;
        let x3 = &xi + &a2.scale(&(0.5 * h));
        let a3 = accel(t + 0.5 * h, &x3)?;
        let x4 = &xi + &a3.scale(&h);
        let a4 = accel(t_next, &x4)?;
        let (e1, e2, e3, e4) = (group.embed(&xi), group.embed(&x2), group.embed(&x3), group.embed(&x4));
        let k1 = &g * e1;
        let k2 = (&g + &k1 * (0.5 * h)) * e2;
        let k3 = (&g + &k2 * (0.5 * h)) * e3;
        let k4 = (&g + &k3 * h) * e4;
        g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        group.normalize(&mut g);
        let incr = &(&a1 + &a4) + &(&a2 + &a3).scale(&2.0);
        xi = &xi + &incr.scale(&(h / 6.0));
        check_finite(&g, t_next)?;
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { time: t_next });
        }
        if (i + 1) % every == 0 || i + 1 == n {
            path.times.push(t_next);
            path.configs.push(g.clone());
            vels.push(xi.clone());
        }
    }
    Ok((path, vels))
}
