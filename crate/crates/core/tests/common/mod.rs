#![allow(dead_code)]

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use fourier_stream::fourier::{basis, AttributeSpace, Partition, Schema, Spectrum, TreeNode};

/// Random cardinalities from {2, 3, 4} with a total size of at most `max_size`.
pub fn random_space<R: Rng>(rng: &mut R, max_dim: usize, max_size: u128) -> Arc<AttributeSpace> {
    let mut cards = Vec::new();
    let mut size = 1u128;
    let dim = rng.gen_range(1..=max_dim);
    while cards.len() < dim {
        let card = rng.gen_range(2..=4u32);
        if size * card as u128 > max_size {
            if size * 2 > max_size {
                break;
            }
            continue;
        }
        size *= card as u128;
        cards.push(card);
    }
    Arc::new(AttributeSpace::from_cardinalities(&cards).unwrap())
}

/// A random {0,1}-labeled tree; each node splits with probability `split`
/// on a not-yet-used attribute.
pub fn random_tree<R: Rng>(rng: &mut R, space: &AttributeSpace, split: f64) -> TreeNode {
    random_tree_on(rng, space, (0..space.dim()).collect(), split)
}

/// Like [`random_tree`], but splitting only on `attrs`.
pub fn random_tree_on<R: Rng>(rng: &mut R, space: &AttributeSpace, mut attrs: Vec<usize>, split: f64) -> TreeNode {
    fn grow<R: Rng>(rng: &mut R, space: &AttributeSpace, free: &mut Vec<usize>, split: f64) -> TreeNode {
        if free.is_empty() || !rng.gen_bool(split) {
            return TreeNode::leaf(f64::from(rng.gen_range(0..2u8)));
        }
        let k = rng.gen_range(0..free.len());
        let attr = free.swap_remove(k);
        let children = (0..space.cardinality(attr))
            .map(|_| grow(rng, space, free, split * 0.85))
            .collect();
        free.push(attr);
        TreeNode::split(attr, children)
    }
    grow(rng, space, &mut attrs, split)
}

/// `Σ_{x ∈ S} ψ_j(x)` by listing every completion of the schema.
pub fn naive_basis_sum(space: &AttributeSpace, j: &Partition, schema: &Schema) -> Complex64 {
    space
        .assignments()
        .unwrap()
        .filter(|x| schema.matches(x))
        .map(|x| basis(space, j, &x))
        .sum()
}

/// The spectrum's coefficient at every partition of the full space.
pub fn dense(spectrum: &Spectrum) -> Vec<(Vec<u32>, Complex64)> {
    let space = spectrum.space();
    let full: Vec<usize> = (0..space.dim()).collect();
    let wide = spectrum.expand_to(&full).unwrap();
    space
        .assignments()
        .unwrap()
        .map(|j| {
            let w = wide.coefficient(&j);
            (j, w)
        })
        .collect()
}
