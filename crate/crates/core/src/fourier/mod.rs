//! Fourier encoding of discrete decision trees.
//!
//! A tree over attributes with cardinalities `λ_m` is the function
//! `f(x) = Σ_j ω_j · conj(ψ_j(x))`, where `ψ_j(x) = Π_m exp(2πi·j_m·x_m/λ_m)`
//! and `ω_j = (1/Πλ) Σ_x f(x)·ψ_j(x)`. Coefficients are computed directly
//! from the tree's leaf schemata, never from a truth table, and kept in a
//! sparse map keyed by partition.

mod oracle;
mod space;
mod spectrum;
mod text;
mod transform;
mod tree;

use std::cmp::Ordering;
use std::f64::consts::TAU;

use num_complex::Complex64;

pub use oracle::dft_brute_force;
pub use space::{Assignments, AttributeSpace, MAX_ENUMERABLE};
pub use spectrum::{classify_score, energy_threshold, Spectrum};
pub use transform::dft_from_tree;
pub use tree::{DecisionTree, TreeNode};

/// Coefficients below this magnitude are treated as exact zeros.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// A partition index `j`: one digit per attribute, digit `m` in `[0, λ_m)`.
///
/// Ordered by order (number of nonzero digits) first, then
/// lexicographically, so maps keyed by partition iterate low orders first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition(Vec<u32>);

impl Partition {
    pub fn new(digits: Vec<u32>) -> Self {
        Self(digits)
    }

    pub fn zero(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn digits(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn order(&self) -> usize {
        self.0.iter().filter(|&&d| d != 0).count()
    }

    pub fn into_digits(self) -> Vec<u32> {
        self.0
    }
}

impl Ord for Partition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Partition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<Vec<u32>> for Partition {
    fn from(digits: Vec<u32>) -> Self {
        Self(digits)
    }
}

/// A leaf path: fixed values along the path, wildcards (`None`) elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub symbols: Vec<Option<u32>>,
    pub label: f64,
}

impl Schema {
    pub fn new(symbols: Vec<Option<u32>>, label: f64) -> Self {
        Self { symbols, label }
    }

    /// Fraction of the input space covered by the schema.
    pub fn weight(&self, space: &AttributeSpace) -> f64 {
        self.symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some())
            .map(|(m, _)| 1.0 / space.cardinality(m) as f64)
            .product()
    }

    pub fn matches(&self, x: &[u32]) -> bool {
        self.symbols
            .iter()
            .zip(x)
            .all(|(s, &v)| s.is_none_or(|fixed| fixed == v))
    }

    pub fn fixed(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.symbols
            .iter()
            .enumerate()
            .filter_map(|(m, s)| s.map(|v| (m, v)))
    }
}

/// `exp(2πi·k/n)`, exact at quarter turns.
pub fn root_of_unity(k: u32, n: u32) -> Complex64 {
    let k = k % n;
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if 2 * k == n {
        return Complex64::new(-1.0, 0.0);
    }
    if 4 * k == n {
        return Complex64::new(0.0, 1.0);
    }
    if 4 * k == 3 * n {
        return Complex64::new(0.0, -1.0);
    }
    let (s, c) = (TAU * k as f64 / n as f64).sin_cos();
    Complex64::new(c, s)
}

/// The Fourier basis function `ψ_j(x)` over a full assignment.
///
/// Panics if `j` or `x` do not match the space's dimensionality.
pub fn basis(space: &AttributeSpace, j: &Partition, x: &[u32]) -> Complex64 {
    assert_eq!(j.len(), space.dim(), "partition length mismatch");
    assert_eq!(x.len(), space.dim(), "assignment length mismatch");
    let mut acc = Complex64::new(1.0, 0.0);
    for ((&jm, &xm), &card) in j.digits().iter().zip(x).zip(space.cardinalities()) {
        if jm != 0 && xm != 0 {
            acc *= root_of_unity((jm as u64 * xm as u64 % card as u64) as u32, card);
        }
    }
    acc
}

/// `Σ_{x ∈ S} ψ_j(x)` over every completion of the schema's wildcards,
/// without enumerating them: zero if any wildcard meets a nonzero digit of
/// `j`, otherwise the wildcard volume times `ψ_j` on the fixed positions.
pub fn basis_sum(space: &AttributeSpace, j: &Partition, schema: &Schema) -> Complex64 {
    assert_eq!(j.len(), space.dim(), "partition length mismatch");
    assert_eq!(schema.symbols.len(), space.dim(), "schema length mismatch");
    let mut volume = 1.0;
    let mut phase = Complex64::new(1.0, 0.0);
    for (m, (&jm, sym)) in j.digits().iter().zip(&schema.symbols).enumerate() {
        let card = space.cardinality(m);
        match sym {
            None if jm != 0 => return Complex64::new(0.0, 0.0),
            None => volume *= card as f64,
            Some(v) => {
                if jm != 0 && *v != 0 {
                    phase *= root_of_unity((jm as u64 * *v as u64 % card as u64) as u32, card);
                }
            }
        }
    }
    phase * volume
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(d: &[u32]) -> Partition {
        Partition::new(d.to_vec())
    }

    #[test]
    fn zero_partition_is_unity() {
        let space = AttributeSpace::binary(3);
        for x in space.assignments().unwrap() {
            assert_eq!(basis(&space, &p(&[0, 0, 0]), &x), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn binary_basis_signs() {
        let space = AttributeSpace::binary(3);
        assert_eq!(basis(&space, &p(&[0, 0, 1]), &[0, 1, 0]).re, 1.0);
        assert_eq!(basis(&space, &p(&[0, 1, 0]), &[0, 1, 0]).re, -1.0);
        assert_eq!(basis(&space, &p(&[0, 1, 0]), &[0, 1, 0]).im, 0.0);
    }

    #[test]
    fn ternary_basis_matches_exponential() {
        let space = AttributeSpace::from_cardinalities(&[3]).unwrap();
        let got = basis(&space, &p(&[1]), &[2]);
        let want = Complex64::from_polar(1.0, 4.0 * std::f64::consts::PI / 3.0);
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    #[should_panic]
    fn basis_length_mismatch_panics() {
        let space = AttributeSpace::binary(3);
        basis(&space, &p(&[0, 1]), &[0, 1, 0]);
    }

    #[test]
    fn basis_sum_cases() {
        let space = AttributeSpace::binary(3);
        let s = Schema::new(vec![None, None, Some(0)], 1.0);
        assert_eq!(basis_sum(&space, &p(&[1, 0, 0]), &s), Complex64::new(0.0, 0.0));
        assert_eq!(basis_sum(&space, &p(&[0, 0, 1]), &s), Complex64::new(4.0, 0.0));
        let all = Schema::new(vec![None; 3], 1.0);
        assert_eq!(basis_sum(&space, &p(&[0, 0, 0]), &all), Complex64::new(8.0, 0.0));
    }

    #[test]
    fn partition_order_then_lex() {
        let mut v = vec![p(&[1, 1]), p(&[0, 1]), p(&[1, 0]), p(&[0, 0])];
        v.sort();
        assert_eq!(v, vec![p(&[0, 0]), p(&[0, 1]), p(&[1, 0]), p(&[1, 1])]);
        let mut w = vec![p(&[2, 0]), p(&[0, 1])];
        w.sort();
        assert_eq!(w[0], p(&[0, 1]));
    }

    #[test]
    fn schema_weight() {
        let space = AttributeSpace::from_cardinalities(&[2, 3, 4]).unwrap();
        let s = Schema::new(vec![Some(1), None, Some(3)], 0.0);
        assert!((s.weight(&space) - 1.0 / 8.0).abs() < 1e-15);
        assert!(s.matches(&[1, 2, 3]));
        assert!(!s.matches(&[0, 2, 3]));
    }
}
