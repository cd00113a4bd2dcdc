use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::{root_of_unity, AttributeSpace, Partition, Spectrum, MAX_ENUMERABLE, ZERO_TOLERANCE};
use crate::error::{Error, Result};

/// Reference transform: tabulates `f` over the whole input space and
/// computes every `ω_j = (1/Πλ) Σ_x f(x)·ψ_j(x)` without thresholding.
///
/// The sum is evaluated one attribute axis at a time (the basis factorises
/// per attribute), which is exact and keeps spaces up to
/// [`MAX_ENUMERABLE`] points tractable. Shares nothing with the
/// schema-based transform beyond the basis definition.
pub fn dft_brute_force<F>(f: F, space: &Arc<AttributeSpace>) -> Result<Spectrum>
where
    F: Fn(&[u32]) -> f64,
{
    let size = space.size();
    if size > MAX_ENUMERABLE as u128 {
        return Err(Error::SpaceTooLarge {
            size,
            limit: MAX_ENUMERABLE,
        });
    }
    let n = size as usize;
    let cards = space.cardinalities();
    let mut table: Vec<Complex64> = space
        .assignments()?
        .map(|x| Complex64::new(f(&x), 0.0))
        .collect();

    let mut stride = n;
    let mut scratch = Vec::new();
    for &card in cards {
        let card = card as usize;
        stride /= card;
        let roots: Vec<Complex64> = (0..card as u32).map(|k| root_of_unity(k, card as u32)).collect();
        // blocks of `card * stride` entries; within each, lines of stride `stride`
        for block in (0..n).step_by(card * stride) {
            for offset in 0..stride {
                scratch.clear();
                scratch.extend((0..card).map(|v| table[block + offset + v * stride]));
                for j in 0..card {
                    let mut acc = Complex64::default();
                    for (v, value) in scratch.iter().enumerate() {
                        acc += value * roots[(j * v) % card];
                    }
                    table[block + offset + j * stride] = acc;
                }
            }
        }
    }

    let scale = 1.0 / n as f64;
    let mut coeffs = BTreeMap::new();
    for (j, value) in space.assignments()?.zip(table) {
        let w = value * scale;
        if w.norm() > ZERO_TOLERANCE {
            coeffs.insert(Partition::new(j), w);
        }
    }
    Ok(Spectrum::from_map(
        space.clone(),
        (0..space.dim()).collect(),
        coeffs,
        1.0,
    ))
}
