use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::spectrum::energy_reached;
use super::{root_of_unity, AttributeSpace, DecisionTree, Partition, Spectrum};
use crate::error::{Error, Result};

struct PositivePath {
    /// (local attribute slot, fixed value, cardinality)
    fixed: Vec<(usize, u32, u32)>,
    weight: f64,
}

/// Encodes a {0,1}-labeled tree as a spectrum over the attributes it uses.
///
/// Each leaf schema `S` contributes `weight(S) · ψ_j(fixed part of S)` to
/// `ω_j` when every nonzero digit of `j` sits on a fixed position of `S`,
/// and nothing otherwise, so only those partitions are ever visited.
/// Coefficients are produced one order at a time; since the total energy
/// is known up front (`ω_0` = fraction of the space labeled 1), generation
/// stops at the first order where the cumulative energy reaches
/// `e_t · ω_0`.
pub fn dft_from_tree<T: DecisionTree + ?Sized>(
    tree: &T,
    space: &Arc<AttributeSpace>,
    e_t: f64,
) -> Result<Spectrum> {
    if !(e_t > 0.0 && e_t <= 1.0) {
        return Err(Error::InvalidEnergyThreshold(e_t));
    }
    let paths = tree.schemata(space);
    let mut used = vec![false; space.dim()];
    for path in &paths {
        if path.symbols.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: path.symbols.len(),
            });
        }
        if path.label != 0.0 && path.label != 1.0 {
            return Err(Error::NonBinaryLabel(path.label));
        }
        for (m, _) in path.fixed() {
            used[m] = true;
        }
    }
    let attr_set: Vec<usize> = (0..space.dim()).filter(|&m| used[m]).collect();
    let mut slot = vec![usize::MAX; space.dim()];
    for (k, &m) in attr_set.iter().enumerate() {
        slot[m] = k;
    }

    let positive: Vec<PositivePath> = paths
        .iter()
        .filter(|p| p.label == 1.0)
        .map(|p| PositivePath {
            fixed: p
                .fixed()
                .map(|(m, v)| (slot[m], v, space.cardinality(m)))
                .collect(),
            weight: p.weight(space),
        })
        .collect();
    let total: f64 = positive.iter().map(|p| p.weight).sum();
    let max_order = positive.iter().map(|p| p.fixed.len()).max().unwrap_or(0);

    let roots: Vec<Vec<Complex64>> = attr_set
        .iter()
        .map(|&m| {
            let card = space.cardinality(m);
            (0..card).map(|k| root_of_unity(k, card)).collect()
        })
        .collect();

    let mut coeffs = BTreeMap::new();
    let mut cum = 0.0;
    if !positive.is_empty() {
        for order in 0..=max_order {
            let mut layer: BTreeMap<Vec<u32>, (Complex64, f64)> = BTreeMap::new();
            let mut digits = vec![0u32; attr_set.len()];
            for path in positive.iter().filter(|p| p.fixed.len() >= order) {
                accumulate(
                    &path.fixed,
                    &roots,
                    order,
                    &mut digits,
                    Complex64::new(path.weight, 0.0),
                    path.weight,
                    &mut layer,
                );
            }
            for (digits, (sum, magnitude)) in layer {
                // cancellation residue relative to the contributing terms
                if sum.norm() > 1e-12 * magnitude {
                    cum += sum.norm_sqr();
                    coeffs.insert(Partition::new(digits), sum);
                }
            }
            if e_t < 1.0 && energy_reached(cum, total, e_t) {
                break;
            }
        }
    }
    Ok(Spectrum::from_map(space.clone(), attr_set, coeffs, e_t))
}

/// Adds every order-`remaining` partition supported on `fixed`.
fn accumulate(
    fixed: &[(usize, u32, u32)],
    roots: &[Vec<Complex64>],
    remaining: usize,
    digits: &mut Vec<u32>,
    term: Complex64,
    weight: f64,
    layer: &mut BTreeMap<Vec<u32>, (Complex64, f64)>,
) {
    if remaining == 0 {
        let entry = layer.entry(digits.clone()).or_default();
        entry.0 += term;
        entry.1 += weight;
        return;
    }
    for i in 0..=fixed.len() - remaining {
        let (k, value, card) = fixed[i];
        for d in 1..card {
            digits[k] = d;
            let phase = roots[k][((d as u64 * value as u64) % card as u64) as usize];
            accumulate(
                &fixed[i + 1..],
                roots,
                remaining - 1,
                digits,
                term * phase,
                weight,
                layer,
            );
        }
        digits[k] = 0;
    }
}
