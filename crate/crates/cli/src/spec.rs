//! System-spec files: a TOML document describing the algebra, inertia,
//! control fields and drift of a mechanical system.
//!
//! ```toml
//! name = "example"
//! labels = ["x", "y", "z"]
//!
//! [algebra]
//! dim = 3
//! constants = [{ i = 1, j = 2, k = 3, value = 1 }]   # c^3_12 = 1
//!
//! [inertia]
//! diagonal = [1, 1, "1/2"]
//!
//! [controls]
//! vectors = [[1, 0, 0], [0, 1, 0]]
//!
//! [drift]
//! constant = [0, 0, 0]
//! ```
//!
//! `algebra.kind` may name a built-in table (`se3`, `heisenberg`, `abelian`)
//! instead of listing constants. Numbers may be integers, decimals or
//! strings holding fractions; all are read exactly.

use std::ops::Range;
use std::path::{Path, PathBuf};

use faccs::liealg::{AlgebraVector, LieAlgebra};
use faccs::mech::{InertiaTensor, Matrix, MechSystem};
use faccs::scalar::{parse_rational, Rational};
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

/// A diagnostic anchored at a line of an input file.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{file}:{line}:{column}: {message}")]
pub struct Diagnostic {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Maps byte offsets of a document to 1-based line and column.
pub(crate) struct Source<'a> {
    pub name: String,
    pub text: &'a str,
}

impl Source<'_> {
    pub fn at(&self, span: Range<usize>, message: impl Into<String>) -> Diagnostic {
        let start = span.start.min(self.text.len());
        let before = &self.text[..start];
        let line = before.matches('\n').count() + 1;
        let column = start - before.rfind('\n').map_or(0, |i| i + 1) + 1;
        Diagnostic {
            file: self.name.clone(),
            line,
            column,
            message: message.into(),
        }
    }

    pub fn parse<T: serde::de::DeserializeOwned>(&self) -> Result<T, Diagnostic> {
        toml::from_str(self.text).map_err(|e| {
            let msg = e.message().trim().to_string();
            self.at(e.span().unwrap_or(0..0), msg)
        })
    }
}

/// A number as written in a spec file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub(crate) enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn exact(&self) -> Option<Rational> {
        match self {
            Num::Int(i) => parse_rational(&i.to_string()),
            Num::Float(x) if x.is_finite() => parse_rational(&format!("{x}")),
            Num::Float(_) => None,
            Num::Text(s) => parse_rational(s),
        }
    }
}

pub(crate) fn exact_vec(src: &Source, v: &Spanned<Vec<Num>>) -> Result<Vec<Rational>, Diagnostic> {
    v.get_ref()
        .iter()
        .map(|x| x.exact().ok_or_else(|| src.at(v.span(), format!("not an exact number: {x:?}"))))
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: Option<String>,
    labels: Option<Spanned<Vec<String>>>,
    algebra: Spanned<RawAlgebra>,
    inertia: Spanned<RawInertia>,
    controls: Spanned<RawControls>,
    drift: Option<Spanned<RawDrift>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgebra {
    dim: Option<Spanned<usize>>,
    kind: Option<Spanned<String>>,
    constants: Option<Vec<Spanned<RawConstant>>>,
}

/// `c^k_ij = value`, 1-based.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstant {
    i: usize,
    j: usize,
    k: usize,
    value: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInertia {
    diagonal: Option<Spanned<Vec<Num>>>,
    matrix: Option<Vec<Spanned<Vec<Num>>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControls {
    vectors: Vec<Spanned<Vec<Num>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrift {
    constant: Option<Spanned<Vec<Num>>>,
    matrix: Option<Vec<Spanned<Vec<Num>>>>,
}

/// A parsed system, in exact and floating-point form.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub name: String,
    pub exact: MechSystem<Rational>,
    pub system: MechSystem,
}

pub const BUNDLED: [(&str, &str); 3] = [
    ("submarine-symmetric", include_str!("../specs/submarine-symmetric.toml")),
    ("submarine-asymmetric", include_str!("../specs/submarine-asymmetric.toml")),
    ("heisenberg-toy", include_str!("../specs/heisenberg-toy.toml")),
];

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Invalid(#[from] Diagnostic),
}

/// Reads a spec from `arg`: a file path, or the name of a bundled spec when
/// no such file exists.
pub fn load(arg: &str) -> Result<SystemSpec, LoadError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some((name, text)) = BUNDLED.iter().find(|(n, _)| *n == arg) {
            return Ok(parse(name, text)?);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse(arg, &text)?)
}

pub fn parse(file: &str, text: &str) -> Result<SystemSpec, Diagnostic> {
    let src = Source {
        name: file.to_string(),
        text,
    };
    let raw: RawSpec = src.parse()?;
    let algebra = build_algebra(&src, &raw.algebra)?;
    let n = algebra.dim();

    let algebra = match &raw.labels {
        Some(l) => algebra
            .with_labels(l.get_ref().clone())
            .map_err(|e| src.at(l.span(), e.to_string()))?,
        None => algebra,
    };

    let inertia = build_inertia(&src, &raw.inertia, n)?;

    let mut controls = Vec::new();
    for v in &raw.controls.get_ref().vectors {
        let x = exact_vec(&src, v)?;
        if x.len() != n {
            return Err(src.at(v.span(), format!("control vector has {} entries, algebra has dimension {n}", x.len())));
        }
        controls.push(AlgebraVector(x));
    }
    let anchor = raw.controls.span();
    let mut sys = MechSystem::new(algebra, inertia, controls).map_err(|e| src.at(anchor.clone(), e.to_string()))?;

    if let Some(d) = &raw.drift {
        let span = d.span();
        let d = d.get_ref();
        let constant = match &d.constant {
            Some(c) => {
                let x = exact_vec(&src, c)?;
                if x.len() != n {
                    return Err(src.at(c.span(), format!("drift vector has {} entries, expected {n}", x.len())));
                }
                AlgebraVector(x)
            }
            None => AlgebraVector::zeros(n),
        };
        let linear = match &d.matrix {
            Some(rows) => square(&src, rows, n, span.clone())?,
            None => Matrix::zeros(n),
        };
        sys = sys.with_drift(constant, linear).map_err(|e| src.at(span, e.to_string()))?;
    }

    let name = raw.name.unwrap_or_else(|| {
        Path::new(file)
            .file_stem()
            .map_or_else(|| file.to_string(), |s| s.to_string_lossy().into_owned())
    });
    Ok(SystemSpec {
        name,
        system: sys.to_f64(),
        exact: sys,
    })
}

fn build_algebra(src: &Source, raw: &Spanned<RawAlgebra>) -> Result<LieAlgebra<Rational>, Diagnostic> {
    let span = raw.span();
    let a = raw.get_ref();
    let dim = a.dim.as_ref().map(|d| (*d.get_ref(), d.span()));
    let check_dim = |alg: LieAlgebra<Rational>| match &dim {
        Some((d, s)) if *d != alg.dim() => Err(src.at(s.clone(), format!("dim = {d} but the table has dimension {}", alg.dim()))),
        _ => Ok(alg),
    };
    match (&a.kind, &a.constants) {
        (Some(_), Some(_)) => Err(src.at(span, "give either `kind` or `constants`, not both")),
        (Some(kind), None) => match kind.get_ref().as_str() {
            "se3" => check_dim(LieAlgebra::se3()),
            "heisenberg" => check_dim(LieAlgebra::heisenberg()),
            "abelian" => match &dim {
                Some((d, _)) if *d > 0 => Ok(LieAlgebra::abelian(*d)),
                _ => Err(src.at(kind.span(), "an abelian algebra needs a positive `dim`")),
            },
            other => Err(src.at(kind.span(), format!("unknown algebra kind `{other}` (se3, heisenberg, abelian)"))),
        },
        (None, constants) => {
            let Some((n, _)) = dim else {
                return Err(src.at(span, "`dim` is required with a constants table"));
            };
            if n == 0 {
                return Err(src.at(span, "`dim` must be positive"));
            }
            let mut entries = Vec::new();
            for c in constants.iter().flatten() {
                let e = c.get_ref();
                if [e.i, e.j, e.k].iter().any(|&x| x == 0 || x > n) {
                    return Err(src.at(c.span(), format!("index out of range 1..={n} in c^{}_{{{}{}}}", e.k, e.i, e.j)));
                }
                let v = e.value.exact().ok_or_else(|| src.at(c.span(), format!("not an exact number: {:?}", e.value)))?;
                entries.push((e.i - 1, e.j - 1, e.k - 1, v, c.span()));
            }
            let spans: Vec<_> = entries.iter().map(|e| ((e.0, e.1, e.2), e.4.clone())).collect();
            LieAlgebra::from_partial(n, entries.into_iter().map(|(i, j, k, v, _)| (i, j, k, v))).map_err(|e| {
                let at = match &e {
                    faccs::Error::NotAntisymmetric { i, j, k } => spans
                        .iter()
                        .find(|(key, _)| *key == (*i, *j, *k) || *key == (*j, *i, *k))
                        .map(|(_, s)| s.clone()),
                    _ => None,
                };
                src.at(at.unwrap_or(span), e.to_string())
            })
        }
    }
}

fn square(src: &Source, rows: &[Spanned<Vec<Num>>], n: usize, span: Range<usize>) -> Result<Matrix<Rational>, Diagnostic> {
    if rows.len() != n {
        return Err(src.at(span, format!("matrix has {} rows, expected {n}", rows.len())));
    }
    let mut out = Vec::with_capacity(n);
    for r in rows {
        let x = exact_vec(src, r)?;
        if x.len() != n {
            return Err(src.at(r.span(), format!("row has {} entries, expected {n}", x.len())));
        }
        out.push(x);
    }
    Matrix::from_rows(out).map_err(|e| src.at(span, e.to_string()))
}

fn build_inertia(src: &Source, raw: &Spanned<RawInertia>, n: usize) -> Result<InertiaTensor<Rational>, Diagnostic> {
    let span = raw.span();
    let m = match (&raw.get_ref().diagonal, &raw.get_ref().matrix) {
        (Some(d), None) => {
            let x = exact_vec(src, d)?;
            if x.len() != n {
                return Err(src.at(d.span(), format!("diagonal has {} entries, expected {n}", x.len())));
            }
            Matrix::diagonal(x)
        }
        (None, Some(rows)) => square(src, rows, n, span.clone())?,
        _ => return Err(src.at(span, "give exactly one of `diagonal` or `matrix`")),
    };
    InertiaTensor::new(m).map_err(|e| {
        let at = match (&e, &raw.get_ref().matrix) {
            (faccs::Error::NotSymmetric { row, .. }, Some(rows)) => rows.get(*row).map(|r| r.span()),
            (faccs::Error::NotPositiveDefinite { pivot, .. }, Some(rows)) => rows.get(*pivot).map(|r| r.span()),
            _ => None,
        };
        src.at(at.unwrap_or(span), e.to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use faccs::mech::submarine;
    use faccs::scalar::Scalar;

    #[test]
    fn bundled_specs_parse() {
        for (name, text) in BUNDLED {
            let s = parse(name, text).unwrap_or_else(|e| panic!("{e}"));
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn symmetric_spec_is_the_submarine() {
        let s = load("submarine-symmetric").unwrap();
        let q = Rational::from_i64;
        let sub = submarine([q(2), q(2), q(3), q(4), q(4), q(6)]).unwrap();
        assert_eq!(s.exact.controls(), sub.controls());
        assert_eq!(s.exact.inertia(), sub.inertia());
        assert!(s.exact.algebra().same_constants(sub.algebra(), 0.0));
    }

    #[test]
    fn constants_table_matches_builtin() {
        let text = "[algebra]\ndim = 3\nconstants = [{ i = 1, j = 2, k = 3, value = 1 }]\n\
                    [inertia]\ndiagonal = [1, 1, 1]\n[controls]\nvectors = [[1, 0, 0], [0, 1, 0]]\n";
        let s = parse("h.toml", text).unwrap();
        assert!(s.exact.algebra().same_constants(&LieAlgebra::heisenberg(), 0.0));
        assert_eq!(s.name, "h");
    }

    #[test]
    fn fractions_and_decimals_are_exact() {
        let text = "[algebra]\nkind = \"heisenberg\"\n[inertia]\ndiagonal = [\"1/3\", 0.25, 2]\n\
                    [controls]\nvectors = [[1, 0, 0]]\n";
        let s = parse("x", text).unwrap();
        assert_eq!(s.exact.inertia().matrix().get(0, 0), &Rational::ratio(1, 3));
        assert_eq!(s.exact.inertia().matrix().get(1, 1), &Rational::ratio(1, 4));
    }

    fn line_of(text: &str) -> usize {
        parse("bad.toml", text).unwrap_err().line
    }

    #[test]
    fn syntax_error_is_anchored() {
        assert_eq!(line_of("[algebra]\nkind = \"se3\"\n[inertia\n"), 3);
    }

    #[test]
    fn semantic_errors_are_anchored() {
        let head = "[algebra]\nkind = \"heisenberg\"\n";
        let ctl = "[controls]\nvectors = [[1, 0, 0]]\n";
        // short control vector on line 4
        assert_eq!(line_of(&format!("{head}[controls]\nvectors = [\n[1, 0, 0],\n[1, 0],\n]\n[inertia]\ndiagonal = [1, 1, 1]\n")), 6);
        // nonpositive inertia row
        let bad = format!("{head}[inertia]\nmatrix = [\n[1, 0, 0],\n[0, -1, 0],\n[0, 0, 1],\n]\n{ctl}");
        let err = parse("bad.toml", &bad).unwrap_err();
        assert_eq!(err.line, 6);
        assert!(err.message.contains("positive definite"));
        // inconsistent antisymmetric pair
        let alg = "[algebra]\ndim = 3\nconstants = [\n{ i = 1, j = 2, k = 3, value = 1 },\n{ i = 2, j = 1, k = 3, value = 1 },\n]\n";
        let err = parse("bad.toml", &format!("{alg}[inertia]\ndiagonal = [1, 1, 1]\n{ctl}")).unwrap_err();
        assert!((4..=5).contains(&err.line), "{err}");
        // unknown key
        assert_eq!(line_of(&format!("{head}[inertia]\ndiagonal = [1, 1, 1]\nmass = 3\n{ctl}")), 5);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load("/nonexistent/spec.toml"), Err(LoadError::Io { .. })));
    }
}
