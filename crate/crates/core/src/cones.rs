//! Inner polyhedral approximations of the cones `K_l` at the identity and
//! the cone-based trackability analyzer.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::closure::{default_lie_depth, lie_closure, span_rank, AnalysisReport, ConeSummary, FieldFamily, LevelRecord, Verdict};
use crate::error::{check_dim, Error, Result};
use crate::exec::Execution;
use crate::liealg::AlgebraVector;
use crate::linalg::{self, RANK_TOL};
use crate::mech::MechSystem;

/// Relative distance below which a vector counts as a cone member.
pub const MEMBER_TOL: f64 = 1e-8;

const SEED: u64 = 0x6b63_6f6e_6573;

/// Where a ray came from.
#[derive(Debug, Clone, PartialEq)]
pub enum RayOrigin {
    /// Carried over from the previous level.
    Inherited,
    /// `-<Z:Z> / |<Z:Z>|` for a sample `Z` of the previous lineality.
    Product(AlgebraVector),
}

/// `cone(rays) + lineality`, rays unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCone {
    ambient_dim: usize,
    rays: Vec<DVector<f64>>,
    origins: Vec<RayOrigin>,
    lineality: Vec<DVector<f64>>,
}

impl PolyCone {
    /// The linear span of `vectors`.
    pub fn subspace(n: usize, vectors: &[DVector<f64>]) -> Self {
        PolyCone {
            ambient_dim: n,
            rays: Vec::new(),
            origins: Vec::new(),
            lineality: linalg::orthonormal_basis(n, vectors, RANK_TOL),
        }
    }

    /// The conic hull of `rays` (zero vectors dropped); lineality is
    /// computed.
    pub fn from_rays(n: usize, rays: &[DVector<f64>]) -> Result<Self> {
        let mut c = PolyCone::subspace(n, &[]);
        for r in rays {
            check_dim(n, r.len())?;
            c.push_ray(r.clone(), RayOrigin::Inherited);
        }
        c.lineality = lineality_of(&c, Execution::Sequential)?;
        Ok(c)
    }

    fn push_ray(&mut self, r: DVector<f64>, origin: RayOrigin) {
        let norm = r.norm();
        if norm > 0.0 && norm.is_finite() {
            self.rays.push(r / norm);
            self.origins.push(origin);
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rays(&self) -> &[DVector<f64>] {
        &self.rays
    }

    pub fn origins(&self) -> &[RayOrigin] {
        &self.origins
    }

    /// Orthonormal basis of the largest subspace in the cone.
    pub fn lineality(&self) -> &[DVector<f64>] {
        &self.lineality
    }

    /// Dimension of the cone's linear hull.
    pub fn hull_dim(&self) -> usize {
        let mut all = self.lineality.clone();
        all.extend(self.rays.iter().cloned());
        linalg::rank(self.ambient_dim, &all, RANK_TOL)
    }

    pub fn is_subspace(&self) -> bool {
        self.lineality.len() == self.hull_dim()
    }

    /// Distance from `v` to the cone; `None` if the solver gave up.
    fn distance(&self, v: &DVector<f64>) -> Option<f64> {
        let project = |x: &DVector<f64>| x - linalg::project(&self.lineality, x);
        let target = project(v);
        if self.rays.is_empty() {
            return Some(target.norm());
        }
        let cols: Vec<DVector<f64>> = self.rays.iter().map(project).collect();
        let a = linalg::columns(self.ambient_dim, &cols);
        let mu = linalg::nnls(&a, &target)?;
        Some((a * mu - target).norm())
    }
}

/// Whether `v` lies within `tol * |v|` of the cone.
pub fn cone_member(c: &PolyCone, v: &DVector<f64>, tol: f64) -> Result<bool> {
    check_dim(c.ambient_dim, v.len())?;
    let d = c
        .distance(v)
        .ok_or_else(|| Error::Indeterminate(format!("non-negative least squares did not converge for {v:?}")))?;
    Ok(d <= tol * v.norm())
}

/// Lineality of `c`: the given subspace plus every ray whose negation is in
/// the cone.
pub fn lineality_of(c: &PolyCone, exec: Execution) -> Result<Vec<DVector<f64>>> {
    let opposite = exec.map(&c.rays, |r| cone_member(c, &-r, MEMBER_TOL));
    let mut span = c.lineality.clone();
    for (r, inside) in c.rays.iter().zip(opposite) {
        if inside? {
            span.push(r.clone());
        }
    }
    Ok(linalg::orthonormal_basis(c.ambient_dim, &span, RANK_TOL))
}

/// Samples per level when the caller does not choose: `8 n^2`.
pub fn default_samples(n: usize) -> usize {
    8 * n * n
}

fn sphere_samples(basis: &[DVector<f64>], n: usize, count: usize, seed: u64) -> Vec<AlgebraVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut z = DVector::zeros(n);
            for b in basis {
                let g: f64 = StandardNormal.sample(&mut rng);
                z += b * g;
            }
            let norm = z.norm();
            AlgebraVector::from_dvector(&(z / norm.max(f64::MIN_POSITIVE)))
        })
        .collect()
}

fn next_cone(sys: &MechSystem, prev: &PolyCone, samples: usize, seed: u64, exec: Execution) -> Result<PolyCone> {
    let n = sys.dim();
    let mut c = prev.clone();
    c.origins.iter_mut().for_each(|o| *o = RayOrigin::Inherited);
    if !prev.lineality.is_empty() {
        let zs = sphere_samples(&prev.lineality, n, samples, seed);
        let products = exec.map(&zs, |z| sys.symmetric_product(z, z));
        let scale = sys.controls().iter().map(|y| y.norm()).fold(1.0, f64::max);
        for (z, p) in zs.into_iter().zip(products) {
            let p = p?.to_dvector();
            if p.norm() > 1e-12 * scale * scale {
                c.push_ray(-p, RayOrigin::Product(z));
            }
        }
    }
    c.lineality = lineality_of(&c, exec)?;
    Ok(c)
}

/// Cones `K_0, ..., K_l` at the identity. `K_0 = span Y`; level `l` adds
/// `-<Z:Z>` for `samples` points `Z` on the unit sphere of the lineality of
/// `K_{l-1}`. Every ray is an exact member, so the result is an inner
/// approximation.
pub fn k_cones(sys: &MechSystem, l: usize, samples: usize, exec: Execution) -> Result<Vec<PolyCone>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("cone sampling needs at least one sample".into()));
    }
    let n = sys.dim();
    let ys: Vec<DVector<f64>> = sys.controls().iter().map(AlgebraVector::to_dvector).collect();
    let mut out = vec![PolyCone::subspace(n, &ys)];
    for level in 1..=l {
        let next = next_cone(sys, &out[level - 1], samples, SEED.wrapping_add(level as u64), exec)?;
        out.push(next);
    }
    Ok(out)
}

pub fn k_cone(sys: &MechSystem, l: usize, samples: usize, exec: Execution) -> Result<PolyCone> {
    Ok(k_cones(sys, l, samples, exec)?.pop().expect("level 0 always present"))
}

fn lie_dim(sys: &MechSystem, basis: &[DVector<f64>]) -> Result<usize> {
    let gens: Vec<AlgebraVector> = basis.iter().map(AlgebraVector::from_dvector).collect();
    let fam = FieldFamily::new(sys.dim(), &gens)?;
    Ok(span_rank(&lie_closure(sys.algebra(), &fam, default_lie_depth(sys.dim()))?))
}

/// Decides trackability from the cones: the smallest `l` with the drift in
/// `K_l`, both `K_{l-1}` and `K_l` subspaces, and `Lie(L(K_{l-1}))` the
/// whole algebra.
pub fn analyze_k(sys: &MechSystem, l_max: usize, samples: usize, exec: Execution) -> Result<AnalysisReport> {
    if l_max == 0 {
        return Err(Error::InvalidArgument("l_max must be at least 1".into()));
    }
    let n = sys.dim();
    let cones = k_cones(sys, l_max, samples, exec)?;
    let drift: Vec<DVector<f64>> = sys.drift_vectors().iter().map(AlgebraVector::to_dvector).collect();
    let mut levels = Vec::new();
    let mut summaries = Vec::new();
    for (l, c) in cones.iter().enumerate() {
        let drift_in = drift
            .iter()
            .map(|d| cone_member(c, d, MEMBER_TOL))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .all(|b| b);
        levels.push(LevelRecord {
            l,
            span_dim: c.lineality.len(),
            lie_dim: lie_dim(sys, &c.lineality)?,
            condition3_holds: None,
            condition3_method: None,
            drift_in_span: drift_in,
            members: c.rays.len(),
        });
        summaries.push(ConeSummary {
            l,
            rays: c.rays.len(),
            lineality_dim: c.lineality.len(),
            hull_dim: c.hull_dim(),
            is_subspace: c.is_subspace(),
            samples: if l == 0 { 0 } else { samples },
        });
    }
    let qualifying: Vec<usize> = (1..=l_max)
        .filter(|&l| {
            levels[l].drift_in_span && summaries[l - 1].is_subspace && summaries[l].is_subspace && levels[l - 1].lie_dim == n
        })
        .collect();
    let witness = qualifying.first().copied();
    Ok(AnalysisReport {
        method: "K".into(),
        dim: n,
        drift_in_span: levels[witness.unwrap_or(l_max)].drift_in_span,
        levels,
        verdict: if witness.is_some() { Verdict::CtpByK } else { Verdict::Inconclusive },
        witness_level: witness,
        qualifying_levels: qualifying,
        cones: Some(summaries),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::analyze_z;
    use crate::liealg::LieAlgebra;
    use crate::mech::{submarine, InertiaTensor};

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn symmetric() -> MechSystem {
        submarine([2.0, 2.0, 3.0, 4.0, 4.0, 6.0]).unwrap()
    }

    #[test]
    fn elementary_cones() {
        let line = PolyCone::subspace(3, &[e(3, 0)]);
        assert_eq!(line.lineality().len(), 1);
        let ray = PolyCone::from_rays(3, &[e(3, 0)]).unwrap();
        assert_eq!(ray.lineality().len(), 0);
        assert!(cone_member(&ray, &e(3, 0), 1e-9).unwrap());
        assert!(!cone_member(&ray, &-e(3, 0), 1e-9).unwrap());
        assert!(cone_member(&ray, &DVector::zeros(3), 1e-9).unwrap());
        let pair = PolyCone::from_rays(3, &[e(3, 0), -e(3, 0), e(3, 1)]).unwrap();
        assert_eq!(pair.lineality().len(), 1);
        assert!(!pair.is_subspace());
    }

    #[test]
    fn level_zero_is_the_control_span() {
        let c = k_cone(&symmetric(), 0, 10, Execution::Sequential).unwrap();
        assert_eq!(c.lineality().len(), 3);
        for i in [0, 1, 5] {
            assert!(cone_member(&c, &e(6, i), 1e-9).unwrap());
            assert!(cone_member(&c, &-e(6, i), 1e-9).unwrap());
        }
        assert!(!cone_member(&c, &e(6, 3), 1e-9).unwrap());
    }

    #[test]
    fn symmetric_level_one_contains_the_translation_plane() {
        let c = k_cone(&symmetric(), 1, 24, Execution::Sequential).unwrap();
        for i in [3, 4] {
            assert!(cone_member(&c, &e(6, i), 1e-8).unwrap());
            assert!(cone_member(&c, &-e(6, i), 1e-8).unwrap());
        }
        assert_eq!(c.lineality().len(), 5);
        assert!(c.is_subspace());
        assert!(!cone_member(&c, &e(6, 2), 1e-8).unwrap());
    }

    #[test]
    fn rays_are_reconstructed_from_their_samples() {
        let sys = submarine([1.0, 1.0, 1.0, 4.0, 5.0, 6.0]).unwrap();
        let cones = k_cones(&sys, 2, 40, Execution::Sequential).unwrap();
        let mut checked = 0;
        for l in 1..=2 {
            let prev = &cones[l - 1];
            for (r, o) in cones[l].rays().iter().zip(cones[l].origins()) {
                if let RayOrigin::Product(z) = o {
                    let zd = z.to_dvector();
                    assert!(linalg::residual(prev.lineality(), &zd) < 1e-10);
                    let p = sys.symmetric_product(z, z).unwrap().to_dvector();
                    assert!((r * p.norm() + &p).norm() < 1e-10);
                    checked += 1;
                }
                if checked >= 20 {
                    return;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn more_samples_never_shrink_the_lineality() {
        let sys = submarine([1.0, 1.0, 1.0, 4.0, 5.0, 6.0]).unwrap();
        let mut last = 0;
        for s in [2, 8, 32, 64] {
            let d = k_cone(&sys, 2, s, Execution::Sequential).unwrap().lineality().len();
            assert!(d >= last);
            last = d;
        }
        assert_eq!(last, 6);
    }

    #[test]
    fn zero_products_leave_the_cone_unchanged() {
        let alg = LieAlgebra::abelian(3);
        let sys = MechSystem::new(alg, InertiaTensor::diagonal(vec![1.0, 2.0, 3.0]).unwrap(), vec![AlgebraVector::basis(3, 0)]).unwrap();
        let cones = k_cones(&sys, 1, 10, Execution::Sequential).unwrap();
        assert!(cones[1].rays().is_empty());
        assert_eq!(cones[1].lineality().len(), cones[0].lineality().len());
    }

    #[test]
    fn verdicts_agree_with_span_analysis() {
        let sys = symmetric();
        let k = analyze_k(&sys, 3, default_samples(6), Execution::Parallel).unwrap();
        let z = analyze_z(&sys, 3).unwrap();
        assert_eq!(k.verdict, Verdict::CtpByK);
        assert_eq!(k.witness_level, z.witness_level);
        for l in 0..=2 {
            assert_eq!(k.levels[l].span_dim, z.levels[l].span_dim, "level {l}");
        }
    }

    #[test]
    fn full_controls_and_no_controls() {
        let alg = LieAlgebra::se3();
        let inertia = InertiaTensor::diagonal(vec![2.0, 2.0, 3.0, 4.0, 4.0, 6.0]).unwrap();
        let all: Vec<AlgebraVector> = (0..6).map(|i| AlgebraVector::basis(6, i)).collect();
        let sys = MechSystem::new(alg.clone(), inertia.clone(), all).unwrap();
        let k = analyze_k(&sys, 2, 10, Execution::Sequential).unwrap();
        assert_eq!((k.verdict, k.witness_level), (Verdict::CtpByK, Some(1)));

        let zero = MechSystem::new(alg, inertia, vec![AlgebraVector::zeros(6)]).unwrap();
        let k = analyze_k(&zero, 2, 10, Execution::Sequential).unwrap();
        assert_eq!(k.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let sys = submarine([1.0, 1.0, 1.0, 4.0, 5.0, 6.0]).unwrap();
        let a = k_cone(&sys, 2, 30, Execution::Parallel).unwrap();
        let b = k_cone(&sys, 2, 30, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }
}
