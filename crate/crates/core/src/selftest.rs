//! Exact-arithmetic check of the submarine's structure constants and
//! symmetric products against their closed forms.

use std::fmt;

use num_traits::Zero;
use serde::Serialize;

use crate::error::Result;
use crate::liealg::{AlgebraVector, LieAlgebra};
use crate::mech::{InertiaTensor, MechSystem};
use crate::scalar::{Rational, Scalar};

/// One failed comparison, named with 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub entry: String,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, found {}", self.entry, self.expected, self.found)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestReport {
    pub checks: usize,
    pub mismatches: Vec<Mismatch>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    fn compare(&mut self, entry: String, expected: &Rational, found: &Rational) {
        self.checks += 1;
        if expected != found {
            self.mismatches.push(Mismatch {
                entry,
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
    }

    fn compare_vec(&mut self, entry: &str, expected: &AlgebraVector<Rational>, found: &AlgebraVector<Rational>) {
        for k in 0..expected.dim() {
            self.compare(format!("{entry}^{}", k + 1), &expected[k], &found[k]);
        }
    }
}

/// Nonzero `c^k_ij = 1` as 1-based `(k, i, j)`; the swapped indices give -1.
const BRACKETS: [(usize, usize, usize); 9] = [
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

/// `gamma^k_ij = gamma^k_ji` as 1-based `(k, i, j)` with its closed form in
/// `d = (J1, J2, J3, M1, M2, M3)`.
fn gamma_table(d: &[Rational; 6]) -> Vec<((usize, usize, usize), Rational)> {
    let (j1, j2, j3, m1, m2, m3) = (&d[0], &d[1], &d[2], &d[3], &d[4], &d[5]);
    vec![
        ((1, 3, 2), (j3 - j2) / j1),
        ((1, 5, 6), (m3 - m2) / j1),
        ((2, 3, 1), (j1 - j3) / j2),
        ((2, 4, 6), (m1 - m3) / j2),
        ((3, 2, 1), (j2 - j1) / j3),
        ((3, 4, 5), (m2 - m1) / j3),
        ((4, 2, 6), m3 / m1),
        ((4, 3, 5), -(m2 / m1)),
        ((5, 1, 6), -(m3 / m2)),
        ((5, 3, 4), m1 / m2),
        ((6, 1, 5), m2 / m3),
        ((6, 2, 4), -(m1 / m3)),
    ]
}

fn q(n: i64) -> Rational {
    Rational::from_i64(n)
}

fn basis(i: usize) -> AlgebraVector<Rational> {
    AlgebraVector::basis(6, i - 1)
}

fn controls(d: &[Rational; 6]) -> Vec<AlgebraVector<Rational>> {
    vec![
        basis(1).scale(&(q(1) / d[0].clone())),
        basis(2).scale(&(q(1) / d[1].clone())),
        basis(6).scale(&(q(1) / d[5].clone())),
    ]
}

/// Inertia used for the constant tables.
pub fn table_inertia() -> [Rational; 6] {
    [q(1), q(2), q(3), q(4), q(5), q(6)]
}

/// Inertia used for the equal-axes products (`J1 = J2`, `M1 = M2`).
pub fn symmetric_inertia() -> [Rational; 6] {
    [q(2), q(2), q(3), q(4), q(4), q(6)]
}

/// Checks `algebra` against the se(3) bracket table, the symmetric-product
/// table at `table` and the equal-axes products at `symmetric`.
pub fn check(algebra: &LieAlgebra<Rational>, table: &[Rational; 6], symmetric: &[Rational; 6]) -> Result<SelfTestReport> {
    let mut report = SelfTestReport { checks: 0, mismatches: Vec::new() };
    crate::error::check_dim(6, algebra.dim())?;

    let mut expected_c = std::collections::BTreeMap::new();
    for &(k, i, j) in &BRACKETS {
        expected_c.insert((i, j, k), q(1));
        expected_c.insert((j, i, k), q(-1));
    }
    for i in 1..=6 {
        for j in 1..=6 {
            for k in 1..=6 {
                let exp = expected_c.get(&(i, j, k)).cloned().unwrap_or_else(|| q(0));
                let found = algebra.constant(i - 1, j - 1, k - 1);
                if !exp.is_zero() || !found.is_zero() {
                    report.compare(format!("c^{k}_{{{i}{j}}}"), &exp, &found);
                }
            }
        }
    }

    let sys = MechSystem::new(algebra.clone(), InertiaTensor::diagonal(table.to_vec())?, controls(table))?;
    let found_g = sys.gamma_constants();
    let mut expected_g = std::collections::BTreeMap::new();
    for ((k, i, j), v) in gamma_table(table) {
        expected_g.insert((i, j, k), v.clone());
        expected_g.insert((j, i, k), v);
    }
    for i in 1..=6 {
        for j in 1..=6 {
            for k in 1..=6 {
                let exp = expected_g.get(&(i, j, k)).cloned().unwrap_or_else(|| q(0));
                let found = found_g.get(&(i - 1, j - 1, k - 1)).cloned().unwrap_or_else(|| q(0));
                if !exp.is_zero() || !found.is_zero() {
                    report.compare(format!("gamma^{k}_{{{i}{j}}}"), &exp, &found);
                }
            }
        }
    }

    let s = symmetric;
    let sys = MechSystem::new(algebra.clone(), InertiaTensor::diagonal(s.to_vec())?, controls(s))?;
    let y = sys.controls().to_vec();
    let jm = q(1) / (s[0].clone() * s[3].clone());
    let zero = AlgebraVector::zeros(6);
    report.compare_vec("<Y1:Y2>", &zero, &sys.symmetric_product(&y[0], &y[1])?);
    report.compare_vec("<Y1:Y3>", &basis(5).scale(&-jm.clone()), &sys.symmetric_product(&y[0], &y[2])?);
    report.compare_vec("<Y2:Y3>", &basis(4).scale(&jm), &sys.symmetric_product(&y[1], &y[2])?);
    for j in 1..=6 {
        report.compare_vec(&format!("<e{j}:e{j}>"), &zero, &sys.symmetric_product(&basis(j), &basis(j))?);
    }
    let j1sq = q(1) / (s[0].clone() * s[0].clone());
    report.compare_vec("[Y1,Y2]", &basis(3).scale(&j1sq), &algebra.bracket(&y[0], &y[1])?);
    Ok(report)
}

/// The built-in check on the reference se(3) algebra.
pub fn run() -> SelfTestReport {
    check(&LieAlgebra::se3(), &table_inertia(), &symmetric_inertia()).expect("reference inertias are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pristine_tables_match() {
        let r = run();
        assert!(r.passed(), "{:?}", r.mismatches);
        // 18 brackets, 24 products, 4 vectors of 6 plus 6 self-products of 6
        assert_eq!(r.checks, 18 + 24 + 6 * (3 + 6 + 1));
    }

    #[test]
    fn documented_entry() {
        let d = table_inertia();
        let sys = MechSystem::new(LieAlgebra::se3(), InertiaTensor::diagonal(d.to_vec()).unwrap(), controls(&d)).unwrap();
        assert_eq!(sys.gamma_constants()[&(1, 5, 3)], Rational::ratio(3, 2));
    }

    #[test]
    fn mutation_is_named() {
        let mut entries: Vec<(usize, usize, usize, Rational)> =
            LieAlgebra::<Rational>::se3().nonzero_constants().map(|(&(i, j, k), v)| (i, j, k, v.clone())).collect();
        for e in entries.iter_mut() {
            if (e.0, e.1, e.2) == (1, 5, 3) {
                e.3 = q(2);
            }
            if (e.0, e.1, e.2) == (5, 1, 3) {
                e.3 = q(-2);
            }
        }
        let alg = LieAlgebra::new(6, entries).unwrap();
        let r = check(&alg, &table_inertia(), &symmetric_inertia()).unwrap();
        assert!(!r.passed());
        assert!(r.mismatches.iter().any(|m| m.entry == "c^4_{26}" && m.found == "2"));
    }
}
