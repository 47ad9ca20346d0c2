//! Iterated symmetric-product families, Lie closures and the `Z`-family
//! trackability analyzer.
//!
//! For left-invariant fields every span below is position independent, so
//! `C^∞(Q)`-span membership is decided as constant-coefficient span
//! membership of algebra vectors.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::liealg::{AlgebraVector, LieAlgebra};
use crate::linalg::{self, RANK_TOL};
use crate::mech::MechSystem;
use crate::tracking::BodyPath;

/// How a family member was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// The `a`-th input field.
    Generator(usize),
    /// Symmetric product of members `i` and `j`.
    Sym(usize, usize),
    /// Lie bracket of members `i` and `j`.
    Bracket(usize, usize),
}

/// Ordered family of left-invariant fields with generation provenance.
///
/// Families only grow by appending, so indices in [`Provenance`] always
/// point at earlier members.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFamily {
    dim: usize,
    level: usize,
    members: Vec<AlgebraVector>,
    provenance: Vec<Provenance>,
}

impl FieldFamily {
    pub fn new(dim: usize, generators: &[AlgebraVector]) -> Result<Self> {
        for g in generators {
            crate::error::check_dim(dim, g.dim())?;
        }
        Ok(FieldFamily {
            dim,
            level: 0,
            members: generators.to_vec(),
            provenance: (0..generators.len()).map(Provenance::Generator).collect(),
        })
    }

    pub fn empty(dim: usize) -> Self {
        FieldFamily {
            dim,
            level: 0,
            members: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn members(&self) -> &[AlgebraVector] {
        &self.members
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn vectors(&self) -> Vec<DVector<f64>> {
        self.members.iter().map(AlgebraVector::to_dvector).collect()
    }

    /// Orthonormal basis of the span.
    pub fn span_basis(&self) -> Vec<DVector<f64>> {
        linalg::orthonormal_basis(self.dim, &self.vectors(), RANK_TOL)
    }

    /// Distance from `v` to the span, relative to `max(|v|, 1)`.
    pub fn span_residual(&self, v: &AlgebraVector) -> f64 {
        let dv = v.to_dvector();
        linalg::residual(&self.span_basis(), &dv) / dv.norm().max(1.0)
    }

    fn push(&mut self, v: AlgebraVector, p: Provenance) {
        self.members.push(v);
        self.provenance.push(p);
    }

    fn max_norm(&self) -> f64 {
        self.members.iter().map(AlgebraVector::norm).fold(0.0, f64::max)
    }
}

/// Incremental span tracker used for pruning.
struct SpanTracker {
    basis: Vec<DVector<f64>>,
    scale: f64,
}

impl SpanTracker {
    fn new(fam: &FieldFamily) -> Self {
        SpanTracker {
            basis: fam.span_basis(),
            scale: fam.max_norm(),
        }
    }

    /// Adds `v` if it leaves the current span; returns whether it did.
    fn try_extend(&mut self, v: &AlgebraVector) -> bool {
        let dv = v.to_dvector();
        let scale = self.scale.max(dv.norm());
        if scale <= f64::MIN_POSITIVE {
            return false;
        }
        let mut r = &dv - linalg::project(&self.basis, &dv);
        // second pass keeps the basis orthonormal to working precision
        r -= linalg::project(&self.basis, &r);
        let rn = r.norm();
        if rn <= RANK_TOL * scale {
            return false;
        }
        self.basis.push(r / rn);
        self.scale = scale;
        true
    }
}

fn contains_exact(fam: &FieldFamily, v: &AlgebraVector) -> bool {
    let tol = 1e-12 * (1.0 + v.norm());
    fam.members.iter().any(|m| (m - v).norm() <= tol)
}

/// Next level `Z_l = Z_{l-1} ∪ {<Z_a : Z_b>}`. With `prune`, products
/// already in the span are dropped; otherwise only exact duplicates are
/// merged (set semantics). Returns `None` if an unpruned family would exceed
/// `cap` members.
fn next_level(sys: &MechSystem, prev: &FieldFamily, prune: bool, cap: usize) -> Result<Option<FieldFamily>> {
    let mut next = prev.clone();
    next.level = prev.level + 1;
    let n = prev.len();
    let mut tracker = prune.then(|| SpanTracker::new(prev));
    for a in 0..n {
        for b in a..n {
            let p = sys.symmetric_product(&prev.members[a], &prev.members[b])?;
            let keep = match tracker.as_mut() {
                Some(t) => t.try_extend(&p),
                None => !contains_exact(&next, &p),
            };
            if keep {
                next.push(p, Provenance::Sym(a, b));
                if !prune && next.len() > cap {
                    return Ok(None);
                }
            }
        }
    }
    Ok(Some(next))
}

/// The family `Z_l` (level 0 is exactly the control list).
pub fn z_family(sys: &MechSystem, l: usize, prune: bool) -> Result<FieldFamily> {
    let mut fam = FieldFamily::new(sys.dim(), sys.controls())?;
    for _ in 0..l {
        fam = next_level(sys, &fam, prune, usize::MAX)?.expect("uncapped");
    }
    Ok(fam)
}

/// All pruned levels `Z_0 ..= Z_{l_max}`.
pub fn z_levels(sys: &MechSystem, l_max: usize) -> Result<Vec<FieldFamily>> {
    let mut out = vec![FieldFamily::new(sys.dim(), sys.controls())?];
    for _ in 0..l_max {
        let next = next_level(sys, out.last().expect("nonempty"), true, usize::MAX)?.expect("uncapped");
        out.push(next);
    }
    Ok(out)
}

pub fn span_rank(fam: &FieldFamily) -> usize {
    linalg::rank(fam.dim, &fam.vectors(), RANK_TOL)
}

/// `fam` together with all pairwise symmetric products of its members.
pub fn sym1(sys: &MechSystem, fam: &FieldFamily) -> Result<FieldFamily> {
    let mut out = fam.clone();
    out.level = fam.level + 1;
    for a in 0..fam.len() {
        for b in a..fam.len() {
            let p = sys.symmetric_product(&fam.members[a], &fam.members[b])?;
            out.push(p, Provenance::Sym(a, b));
        }
    }
    Ok(out)
}

/// Whether the control-linear system with fields `candidate` is a kinematic
/// reduction of the mechanical system with control fields `controls`:
/// `Sym^(1)(candidate) ⊆ span(controls)`. Constant rank holds automatically
/// for invariant families.
pub fn is_kinematic_reduction(sys: &MechSystem, controls: &FieldFamily, candidate: &FieldFamily) -> Result<bool> {
    if candidate.is_empty() {
        return Ok(true);
    }
    let s = sym1(sys, candidate)?;
    let mut all = controls.vectors();
    let base = linalg::rank(controls.dim, &all, RANK_TOL);
    all.extend(s.vectors());
    Ok(linalg::rank(controls.dim, &all, RANK_TOL) == base)
}

/// Span of the Lie algebra generated by `fam`, built from right-normed
/// brackets of length at most `max_depth`. Stops early at a fixed point.
pub fn lie_closure(algebra: &LieAlgebra, fam: &FieldFamily, max_depth: usize) -> Result<FieldFamily> {
    let mut out = FieldFamily::empty(fam.dim);
    out.level = fam.level;
    let mut tracker = SpanTracker {
        basis: Vec::new(),
        scale: fam.max_norm(),
    };
    let mut gens = Vec::new();
    for (a, m) in fam.members.iter().enumerate() {
        if tracker.try_extend(m) {
            gens.push(out.len());
            out.push(m.clone(), Provenance::Generator(a));
        }
    }
    let mut layer = gens.clone();
    for _ in 1..max_depth.max(1) {
        let mut next = Vec::new();
        for &g in &gens {
            for &b in &layer {
                let v = algebra.bracket(&out.members[g], &out.members[b])?;
                if tracker.try_extend(&v) {
                    next.push(out.len());
                    out.push(v, Provenance::Bracket(g, b));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layer = next;
    }
    Ok(out)
}

pub fn default_lie_depth(dim: usize) -> usize {
    2 * dim
}

/// How hypothesis (3) was decided at a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition3Method {
    /// `<Z : Z>` tested for every member of the set-theoretic family.
    Members,
    /// `<V_a : V_b>` tested over a basis of the span (sufficient condition),
    /// used when the set-theoretic family is too large to enumerate.
    PairwiseBasis,
}

/// Largest unpruned family enumerated for the member-wise test.
pub const UNPRUNED_CAP: usize = 4096;

fn in_span(basis: &[DVector<f64>], scale: f64, v: &AlgebraVector) -> bool {
    let dv = v.to_dvector();
    linalg::residual(basis, &dv) <= 1e-9 * scale.max(dv.norm()).max(f64::MIN_POSITIVE)
}

fn members_condition(sys: &MechSystem, fam: &FieldFamily) -> Result<bool> {
    let basis = fam.span_basis();
    let scale = fam.max_norm();
    for z in &fam.members {
        if !in_span(&basis, scale, &sys.symmetric_product(z, z)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Sufficient form of hypothesis (3): `<V_a : V_b> ∈ span Z_i` for all pairs
/// from a basis of `span Z_i`.
pub fn condition3_strong(sys: &MechSystem, fam: &FieldFamily) -> Result<bool> {
    let basis = fam.span_basis();
    let scale = fam.max_norm();
    for a in 0..basis.len() {
        for b in a..basis.len() {
            let va = AlgebraVector::from_dvector(&basis[a]);
            let vb = AlgebraVector::from_dvector(&basis[b]);
            if !in_span(&basis, scale.max(1.0), &sys.symmetric_product(&va, &vb)?) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Hypothesis (3) at each level `i < l`: `<Z : Z> ∈ span Z_i` for every
/// member `Z` of `Z_i`.
pub fn condition3_levels(sys: &MechSystem, l: usize) -> Result<Vec<(bool, Condition3Method)>> {
    let mut out = Vec::with_capacity(l);
    let mut unpruned = Some(FieldFamily::new(sys.dim(), sys.controls())?);
    let mut pruned = FieldFamily::new(sys.dim(), sys.controls())?;
    for i in 0..l {
        let entry = match &unpruned {
            Some(fam) => (members_condition(sys, fam)?, Condition3Method::Members),
            None => (condition3_strong(sys, &pruned)?, Condition3Method::PairwiseBasis),
        };
        out.push(entry);
        if i + 1 < l {
            unpruned = match &unpruned {
                Some(fam) => next_level(sys, fam, false, UNPRUNED_CAP)?,
                None => None,
            };
            pruned = next_level(sys, &pruned, true, usize::MAX)?.expect("uncapped");
        }
    }
    Ok(out)
}

pub fn condition3_check(sys: &MechSystem, l: usize) -> Result<Vec<bool>> {
    Ok(condition3_levels(sys, l)?.into_iter().map(|(ok, _)| ok).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "CTP_by_Z")]
    CtpByZ,
    #[serde(rename = "SCTP_by_trackZ")]
    SctpByTrackZ,
    #[serde(rename = "CTP_by_K")]
    CtpByK,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Verdict {
    pub fn is_positive(self) -> bool {
        self != Verdict::Inconclusive
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::CtpByZ => "CTP_by_Z",
            Verdict::SctpByTrackZ => "SCTP_by_trackZ",
            Verdict::CtpByK => "CTP_by_K",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// Summary of one cone level, filled by the cone analyzer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeSummary {
    pub l: usize,
    pub rays: usize,
    pub lineality_dim: usize,
    pub hull_dim: usize,
    pub is_subspace: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub l: usize,
    /// Dimension of `span Z_l`, or of the cone's lineality in cone reports.
    pub span_dim: usize,
    /// Dimension of the Lie closure of the same level.
    pub lie_dim: usize,
    /// Hypothesis (3) at this level; absent in cone reports.
    pub condition3_holds: Option<bool>,
    pub condition3_method: Option<Condition3Method>,
    pub drift_in_span: bool,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub method: String,
    pub dim: usize,
    pub levels: Vec<LevelRecord>,
    pub verdict: Verdict,
    pub witness_level: Option<usize>,
    /// Every `l <= l_max` satisfying the CTP hypotheses.
    pub qualifying_levels: Vec<usize>,
    /// Drift membership at the witness level (at `l_max` when there is none).
    pub drift_in_span: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cones: Option<Vec<ConeSummary>>,
}

impl AnalysisReport {
    pub fn level(&self, l: usize) -> Option<&LevelRecord> {
        self.levels.iter().find(|r| r.l == l)
    }
}

fn drift_in(sys: &MechSystem, fam: &FieldFamily) -> bool {
    let basis = fam.span_basis();
    let scale = fam.max_norm().max(1.0);
    sys.drift_vectors().iter().all(|v| in_span(&basis, scale, v))
}

/// Decides trackability from the `Z` families.
///
/// Level `l` supports the CTP when the drift lies in `span Z_l`, hypothesis
/// (3) holds for all `i < l` and `Lie(Z_{l-1})` is the whole algebra. It
/// supports the SCTP when additionally `span Z_l` itself is the whole
/// algebra. The strongest verdict found wins; the witness is the smallest
/// level reaching it.
pub fn analyze_z(sys: &MechSystem, l_max: usize) -> Result<AnalysisReport> {
    if l_max == 0 {
        return Err(Error::InvalidArgument("l_max must be at least 1".into()));
    }
    let n = sys.dim();
    let levels = z_levels(sys, l_max)?;
    let cond3 = condition3_levels(sys, l_max + 1)?;
    let depth = default_lie_depth(n);

    let mut records = Vec::with_capacity(l_max + 1);
    for (l, fam) in levels.iter().enumerate() {
        let lie = lie_closure(sys.algebra(), fam, depth)?;
        records.push(LevelRecord {
            l,
            span_dim: span_rank(fam),
            lie_dim: span_rank(&lie),
            condition3_holds: Some(cond3[l].0),
            condition3_method: Some(cond3[l].1),
            drift_in_span: drift_in(sys, fam),
            members: fam.len(),
        });
    }

    let mut ctp = Vec::new();
    let mut sctp = Vec::new();
    for l in 1..=l_max {
        let base = records[l].drift_in_span && records[..l].iter().all(|r| r.condition3_holds == Some(true));
        if base && records[l - 1].lie_dim == n {
            ctp.push(l);
        }
        if base && records[l].span_dim == n {
            sctp.push(l);
        }
    }
    let (verdict, witness) = if let Some(&l) = sctp.first() {
        (Verdict::SctpByTrackZ, Some(l))
    } else if let Some(&l) = ctp.first() {
        (Verdict::CtpByZ, Some(l))
    } else {
        (Verdict::Inconclusive, None)
    };
    let mut qualifying: Vec<usize> = ctp.iter().chain(&sctp).copied().collect();
    qualifying.sort_unstable();
    qualifying.dedup();
    let drift_in_span = records[witness.unwrap_or(l_max)].drift_in_span;

    Ok(AnalysisReport {
        method: "Z".into(),
        dim: n,
        levels: records,
        verdict,
        witness_level: witness,
        qualifying_levels: qualifying,
        drift_in_span,
        cones: None,
    })
}

/// Number of samples used when testing a curve against a Lie span.
pub const CURVE_SAMPLES: usize = 257;

/// Whether the body velocity of `curve` lies in `Lie(Z_{l-1})` at every
/// sample, where `l` is the report's witness level.
pub fn trackable_curve_z(sys: &MechSystem, curve: &dyn BodyPath, report: &AnalysisReport) -> Result<bool> {
    let l = report
        .witness_level
        .ok_or_else(|| Error::InvalidArgument("report has no witness level".into()))?;
    let fam = z_family(sys, l - 1, true)?;
    let lie = lie_closure(sys.algebra(), &fam, default_lie_depth(sys.dim()))?;
    velocity_in_span(&lie, curve)
}

pub(crate) fn velocity_in_span(fam: &FieldFamily, curve: &dyn BodyPath) -> Result<bool> {
    crate::error::check_dim(fam.dim(), curve.algebra_dim())?;
    let basis = fam.span_basis();
    let tau = curve.duration();
    for s in 0..CURVE_SAMPLES {
        let t = tau * s as f64 / (CURVE_SAMPLES - 1) as f64;
        let xi = curve.body_velocity(t);
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidCurve(format!("velocity not defined at t = {t}")));
        }
        let dv = xi.to_dvector();
        if linalg::residual(&basis, &dv) > 1e-8 * dv.norm().max(1.0) {
            return Ok(false);
        }
    }
    Ok(true)
}
