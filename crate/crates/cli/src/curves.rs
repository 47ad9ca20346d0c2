//! Reference curves from a built-in name or a TOML curve file.
//!
//! Built-ins take optional `key=value` parameters after a colon, for example
//! `circle:radius=2,duration=10`. `exp:0,0,0.5,duration=1` is the
//! one-parameter subgroup through the given body velocity and works on any
//! algebra with a matrix realization.
//!
//! Curve files pick a `kind`:
//!
//! ```toml
//! kind = "waypoints"
//! [[waypoints]]
//! t = 0
//! position = [0, 0, 0]
//! rotation = [0, 0, 0]
//! [[waypoints]]
//! t = 2
//! position = [1, 0, 0]
//! rotation = [0, 0, 0.5]
//! ```
//!
//! `kind = "segments"` lists cubic Hermite pieces (`t0`, `t1`, `r`, `dr`,
//! `phi`, `dphi`, each endpoint pair a 2x3 array) which must join with
//! matching value and slope. `circle`, `line`, `helix`, `slew` and `exp` take
//! the same parameters as the built-ins.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;
use std::sync::Arc;

use faccs::liealg::AlgebraVector;
use faccs::mech::MechSystem;
use faccs::tracking::{group_for, BodyPath, ExpCurve, HermiteSegment, ReferenceCurve};
use nalgebra::Vector3;
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::spec::{Diagnostic, Num, Source};

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("unknown curve `{0}` (circle, line, helix, slew, exp, or a curve file)")]
    Unknown(String),
    #[error("curve `{name}`: {message}")]
    Parameter { name: String, message: String },
    #[error(transparent)]
    Invalid(#[from] Diagnostic),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] faccs::Error),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(try_from = "Num")]
struct Real(f64);

impl TryFrom<Num> for Real {
    type Error = String;

    fn try_from(n: Num) -> Result<Self, String> {
        match n {
            Num::Int(i) => Ok(Real(i as f64)),
            Num::Float(x) => Ok(Real(x)),
            Num::Text(s) => s.parse().map(Real).map_err(|_| format!("not a number: `{s}`")),
        }
    }
}

fn v3(x: [Real; 3]) -> Vector3<f64> {
    Vector3::new(x[0].0, x[1].0, x[2].0)
}

/// Parameters of a named curve, with defaults filled in by the caller.
struct Params<'a> {
    name: &'a str,
    values: BTreeMap<String, f64>,
    positional: Vec<f64>,
}

impl Params<'_> {
    fn get(&self, key: &str, default: f64) -> f64 {
        self.values.get(key).copied().unwrap_or(default)
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<(), CurveError> {
        if let Some(k) = self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(self.error(format!("unknown parameter `{k}` (expected {})", allowed.join(", "))));
        }
        if self.name != "exp" && !self.positional.is_empty() {
            return Err(self.error("parameters must be written key=value".into()));
        }
        Ok(())
    }

    fn error(&self, message: String) -> CurveError {
        CurveError::Parameter {
            name: self.name.to_string(),
            message,
        }
    }
}

fn builtin(sys: &MechSystem, p: &Params) -> Result<Arc<dyn BodyPath>, CurveError> {
    let curve: Arc<dyn BodyPath> = match p.name {
        "circle" => {
            p.reject_unknown(&["radius", "duration"])?;
            Arc::new(ReferenceCurve::circle(p.get("radius", 1.0), p.get("duration", TAU))?)
        }
        "line" => {
            p.reject_unknown(&["x", "y", "z", "duration"])?;
            let d = Vector3::new(p.get("x", 1.0), p.get("y", 0.0), p.get("z", 0.0));
            Arc::new(ReferenceCurve::line(d, p.get("duration", 2.0))?)
        }
        "helix" => {
            p.reject_unknown(&["radius", "pitch", "duration"])?;
            Arc::new(ReferenceCurve::helix(p.get("radius", 1.0), p.get("pitch", 0.5), p.get("duration", TAU))?)
        }
        "slew" => {
            p.reject_unknown(&["x", "y", "z", "angle", "duration"])?;
            let axis = Vector3::new(p.get("x", 0.0), p.get("y", 0.0), p.get("z", 1.0));
            Arc::new(ReferenceCurve::attitude_slew(axis, p.get("angle", 1.0), p.get("duration", 2.0))?)
        }
        "exp" => {
            p.reject_unknown(&["duration"])?;
            exp_curve(sys, &p.positional, p.get("duration", 1.0))?
        }
        other => return Err(CurveError::Unknown(other.to_string())),
    };
    Ok(curve)
}

fn exp_curve(sys: &MechSystem, xi: &[f64], duration: f64) -> Result<Arc<dyn BodyPath>, CurveError> {
    let group = group_for(sys.algebra())?;
    Ok(Arc::new(ExpCurve::new(group, AlgebraVector::from_slice(xi), duration)?))
}

fn parse_named(arg: &str) -> Result<Params<'_>, CurveError> {
    let (name, rest) = arg.split_once(':').unwrap_or((arg, ""));
    let mut p = Params {
        name,
        values: BTreeMap::new(),
        positional: Vec::new(),
    };
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = match item.split_once('=') {
            Some((k, v)) => (Some(k.trim()), v.trim()),
            None => (None, item),
        };
        let x: f64 = value.parse().map_err(|_| p.error(format!("not a number: `{value}`")))?;
        match key {
            Some(k) => {
                p.values.insert(k.to_string(), x);
            }
            None => p.positional.push(x),
        }
    }
    Ok(p)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum CurveFile {
    Waypoints { waypoints: Vec<Waypoint> },
    Circle { radius: Option<Real>, duration: Option<Real> },
    Line { displacement: [Real; 3], duration: Real },
    Helix { radius: Real, pitch: Real, duration: Real },
    Slew { axis: [Real; 3], angle: Real, duration: Real },
    Exp { velocity: Vec<Real>, duration: Real },
}

/// Segment files are read outside the tagged enum so spans survive.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentsFile {
    #[allow(dead_code)]
    kind: String,
    segments: Vec<Spanned<Segment>>,
}

#[derive(Debug, Deserialize)]
struct KindOnly {
    kind: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Waypoint {
    t: Real,
    position: [Real; 3],
    rotation: [Real; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Segment {
    t0: Real,
    t1: Real,
    r: [[Real; 3]; 2],
    dr: [[Real; 3]; 2],
    phi: [[Real; 3]; 2],
    dphi: [[Real; 3]; 2],
}

/// Parses a curve file. Curve invariant violations are anchored at the
/// offending segment when one can be identified.
pub fn parse_file(sys: &MechSystem, name: &str, text: &str) -> Result<Arc<dyn BodyPath>, CurveError> {
    let src = Source {
        name: name.to_string(),
        text,
    };
    if src.parse::<KindOnly>()?.kind.as_deref() == Some("segments") {
        return segments(&src, src.parse()?);
    }
    let file: CurveFile = src.parse()?;
    let curve: Arc<dyn BodyPath> = match file {
        CurveFile::Waypoints { waypoints } => {
            let pts: Vec<_> = waypoints.into_iter().map(|w| (w.t.0, v3(w.position), v3(w.rotation))).collect();
            Arc::new(ReferenceCurve::waypoints(&pts).map_err(|e| src.at(0..0, e.to_string()))?)
        }
        CurveFile::Circle { radius, duration } => Arc::new(ReferenceCurve::circle(
            radius.map_or(1.0, |r| r.0),
            duration.map_or(TAU, |d| d.0),
        )?),
        CurveFile::Line { displacement, duration } => Arc::new(ReferenceCurve::line(v3(displacement), duration.0)?),
        CurveFile::Helix { radius, pitch, duration } => Arc::new(ReferenceCurve::helix(radius.0, pitch.0, duration.0)?),
        CurveFile::Slew { axis, angle, duration } => Arc::new(ReferenceCurve::attitude_slew(v3(axis), angle.0, duration.0)?),
        CurveFile::Exp { velocity, duration } => {
            let xi: Vec<f64> = velocity.iter().map(|r| r.0).collect();
            exp_curve(sys, &xi, duration.0)?
        }
    };
    Ok(curve)
}

fn segments(src: &Source, file: SegmentsFile) -> Result<Arc<dyn BodyPath>, CurveError> {
    let segments = file.segments;
    let spans: Vec<_> = segments.iter().map(|s| s.span()).collect();
    let segs: Vec<HermiteSegment> = segments
        .into_iter()
        .map(|s| {
            let s = s.into_inner();
            let pair = |a: [[Real; 3]; 2]| [v3(a[0]), v3(a[1])];
            HermiteSegment {
                t0: s.t0.0,
                t1: s.t1.0,
                r: pair(s.r),
                dr: pair(s.dr),
                phi: pair(s.phi),
                dphi: pair(s.dphi),
            }
        })
        .collect();
    let joint = first_bad_joint(&segs);
    let curve = ReferenceCurve::hermite(segs).map_err(|e| {
        let at = joint.and_then(|i| spans.get(i).cloned()).or_else(|| spans.first().cloned());
        src.at(at.unwrap_or(0..0), e.to_string())
    })?;
    Ok(Arc::new(curve))
}

/// Index of the second segment of the first joint whose value or slope
/// jumps.
fn first_bad_joint(segs: &[HermiteSegment]) -> Option<usize> {
    let tol = faccs::tracking::curve::JOINT_TOL;
    segs.windows(2).position(|w| {
        let (a, b) = (&w[0], &w[1]);
        (a.t1 - b.t0).abs() > tol
            || (a.r[1] - b.r[0]).norm() > tol
            || (a.dr[1] - b.dr[0]).norm() > tol
            || (a.phi[1] - b.phi[0]).norm() > tol
            || (a.dphi[1] - b.dphi[0]).norm() > tol
    })
    .map(|i| i + 1)
}

/// Resolves `arg` as a curve file when it names an existing file, and as a
/// built-in otherwise.
pub fn resolve(sys: &MechSystem, arg: &str) -> Result<Arc<dyn BodyPath>, CurveError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| CurveError::Io {
            path: arg.to_string(),
            source,
        })?;
        return parse_file(sys, arg, &text);
    }
    builtin(sys, &parse_named(arg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use faccs::mech::submarine;

    fn sub() -> MechSystem {
        submarine([2.0, 2.0, 3.0, 4.0, 4.0, 6.0]).unwrap()
    }

    #[test]
    fn builtins_with_parameters() {
        let c = resolve(&sub(), "circle:radius=2,duration=3").unwrap();
        assert_eq!(c.duration(), 3.0);
        assert!((c.config(1.5)[(1, 3)] - 4.0).abs() < 1e-12);
        assert_eq!(resolve(&sub(), "slew").unwrap().duration(), 2.0);
        assert_eq!(resolve(&sub(), "exp:0.1,0,0,0,0,0.2,duration=4").unwrap().duration(), 4.0);
    }

    #[test]
    fn bad_names_and_parameters() {
        assert!(matches!(resolve(&sub(), "spiral"), Err(CurveError::Unknown(_))));
        assert!(matches!(resolve(&sub(), "circle:r=2"), Err(CurveError::Parameter { .. })));
        assert!(matches!(resolve(&sub(), "circle:radius=x"), Err(CurveError::Parameter { .. })));
        assert!(resolve(&sub(), "exp:1,0").is_err());
    }

    #[test]
    fn waypoint_file() {
        let text = "kind = \"waypoints\"\n[[waypoints]]\nt = 0\nposition = [0, 0, 0]\nrotation = [0, 0, 0]\n\
                    [[waypoints]]\nt = 1\nposition = [1, 0, 0]\nrotation = [0, 0, 0.5]\n";
        let c = parse_file(&sub(), "w.toml", text).unwrap();
        assert_eq!(c.duration(), 1.0);
        assert!((c.config(1.0)[(0, 3)] - 1.0).abs() < 1e-12);
    }

    fn segment(t0: f64, t1: f64, r0: f64, r1: f64, slope0: f64, slope1: f64) -> String {
        format!(
            "[[segments]]\nt0 = {t0:?}\nt1 = {t1:?}\nr = [[{r0:?}, 0, 0], [{r1:?}, 0, 0]]\n\
             dr = [[{slope0:?}, 0, 0], [{slope1:?}, 0, 0]]\nphi = [[0, 0, 0], [0, 0, 0]]\ndphi = [[0, 0, 0], [0, 0, 0]]\n"
        )
    }

    #[test]
    fn slope_jump_is_rejected_at_its_segment() {
        let good = format!("kind = \"segments\"\n{}{}", segment(0.0, 1.0, 0.0, 1.0, 1.0, 1.0), segment(1.0, 2.0, 1.0, 2.0, 1.0, 1.0));
        if let Err(e) = parse_file(&sub(), "ok.toml", &good) {
            panic!("{e}");
        }
        let bad = format!("kind = \"segments\"\n{}{}", segment(0.0, 1.0, 0.0, 1.0, 1.0, 1.0), segment(1.0, 2.0, 1.0, 2.0, 3.0, 1.0));
        match parse_file(&sub(), "bad.toml", &bad) {
            Err(CurveError::Invalid(d)) => assert_eq!(d.line, 9, "{d}"),
            Err(e) => panic!("{e}"),
            Ok(_) => panic!("C1 violation accepted"),
        }
    }
}
