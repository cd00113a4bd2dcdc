use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_complex::Complex64;

use super::{root_of_unity, AttributeSpace, Partition, ZERO_TOLERANCE};
use crate::error::{Error, Result};

/// Relative slack when comparing cumulative energy against its target.
const ENERGY_SLACK: f64 = 1e-12;

/// A sparse Fourier spectrum over a local attribute set.
///
/// Partitions carry one digit per entry of `attr_set` (ascending global
/// attribute indices); attributes outside the set implicitly have digit 0.
#[derive(Debug, Clone)]
pub struct Spectrum {
    space: Arc<AttributeSpace>,
    attr_set: Vec<usize>,
    coeffs: BTreeMap<Partition, Complex64>,
    energy_threshold: f64,
    eval: Evaluator,
}

#[derive(Debug, Clone)]
enum Evaluator {
    /// All local attributes binary: `ψ_j(x) = (-1)^{popcount(j & x)}`.
    Binary(Vec<(u64, f64)>),
    General {
        /// Per local attribute: the `λ` roots of unity.
        roots: Vec<Vec<Complex64>>,
        terms: Vec<(Vec<(usize, u32)>, Complex64)>,
    },
}

impl Evaluator {
    fn build(space: &AttributeSpace, attr_set: &[usize], coeffs: &BTreeMap<Partition, Complex64>) -> Self {
        let binary = attr_set.len() <= 64 && attr_set.iter().all(|&m| space.cardinality(m) == 2);
        if binary {
            let terms = coeffs
                .iter()
                .map(|(j, w)| {
                    let mask = j
                        .digits()
                        .iter()
                        .enumerate()
                        .filter(|(_, &d)| d != 0)
                        .fold(0u64, |acc, (k, _)| acc | (1 << k));
                    (mask, w.re)
                })
                .collect();
            return Evaluator::Binary(terms);
        }
        let roots = attr_set
            .iter()
            .map(|&m| {
                let card = space.cardinality(m);
                (0..card).map(|k| root_of_unity(k, card)).collect()
            })
            .collect();
        let terms = coeffs
            .iter()
            .map(|(j, w)| {
                let digits = j
                    .digits()
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d != 0)
                    .map(|(k, &d)| (k, d))
                    .collect();
                (digits, *w)
            })
            .collect();
        Evaluator::General { roots, terms }
    }
}

impl Spectrum {
    /// Builds a spectrum, validating partition shapes and dropping exact zeros.
    pub fn new(
        space: Arc<AttributeSpace>,
        attr_set: Vec<usize>,
        coeffs: impl IntoIterator<Item = (Partition, Complex64)>,
        energy_threshold: f64,
    ) -> Result<Self> {
        if !(energy_threshold > 0.0 && energy_threshold <= 1.0) {
            return Err(Error::InvalidEnergyThreshold(energy_threshold));
        }
        if attr_set.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "attribute set must be strictly ascending".into(),
            ));
        }
        if let Some(&m) = attr_set.iter().find(|&&m| m >= space.dim()) {
            return Err(Error::InvalidInput(format!(
                "attribute {m} outside a {}-dimensional space",
                space.dim()
            )));
        }
        let mut map = BTreeMap::new();
        for (j, w) in coeffs {
            if j.len() != attr_set.len() {
                return Err(Error::DimensionMismatch {
                    expected: attr_set.len(),
                    got: j.len(),
                });
            }
            for (k, &d) in j.digits().iter().enumerate() {
                let card = space.cardinality(attr_set[k]);
                if d >= card {
                    return Err(Error::ValueOutOfRange {
                        attr: attr_set[k],
                        value: d,
                        cardinality: card,
                    });
                }
            }
            if w.norm_sqr() != 0.0 {
                map.insert(j, w);
            }
        }
        Ok(Self::from_map(space, attr_set, map, energy_threshold))
    }

    /// A spectrum with no coefficients (the constant-zero function).
    pub fn empty(space: Arc<AttributeSpace>, attr_set: Vec<usize>) -> Result<Self> {
        Self::new(space, attr_set, std::iter::empty(), 1.0)
    }

    pub(crate) fn from_map(
        space: Arc<AttributeSpace>,
        attr_set: Vec<usize>,
        coeffs: BTreeMap<Partition, Complex64>,
        energy_threshold: f64,
    ) -> Self {
        if space.is_binary() {
            debug_assert!(
                coeffs.values().all(|w| w.im.abs() < ZERO_TOLERANCE),
                "binary spectrum with an imaginary component"
            );
        }
        let eval = Evaluator::build(&space, &attr_set, &coeffs);
        Self {
            space,
            attr_set,
            coeffs,
            energy_threshold,
            eval,
        }
    }

    pub fn space(&self) -> &Arc<AttributeSpace> {
        &self.space
    }

    pub fn attr_set(&self) -> &[usize] {
        &self.attr_set
    }

    pub fn energy_threshold(&self) -> f64 {
        self.energy_threshold
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficients in (order, lexicographic) order.
    pub fn iter(&self) -> impl Iterator<Item = (&Partition, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn coefficient(&self, j: &[u32]) -> Complex64 {
        self.coeffs
            .get(&Partition::new(j.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    pub fn max_order(&self) -> usize {
        self.coeffs.keys().map(Partition::order).max().unwrap_or(0)
    }

    /// The zero-order coefficient's real part. Equals the sum of squared
    /// magnitudes for unthresholded spectra of {0,1}-labeled trees; does not
    /// hold for aggregates.
    pub fn total_energy(&self) -> f64 {
        self.coeffs
            .get(&Partition::zero(self.attr_set.len()))
            .map_or(0.0, |w| w.re)
    }

    /// `Σ_j |ω_j|²` over the stored coefficients.
    pub fn energy(&self) -> f64 {
        self.coeffs.values().map(Complex64::norm_sqr).sum()
    }

    /// `Re(Σ_j ω_j · conj(ψ_j(x)))` for a full assignment `x`.
    pub fn score(&self, x: &[u32]) -> f64 {
        debug_assert_eq!(x.len(), self.space.dim());
        match &self.eval {
            Evaluator::Binary(terms) => {
                let xmask = self
                    .attr_set
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (k, &m)| acc | ((x[m] as u64 & 1) << k));
                terms
                    .iter()
                    .map(|&(mask, w)| {
                        if (mask & xmask).count_ones() & 1 == 0 {
                            w
                        } else {
                            -w
                        }
                    })
                    .sum()
            }
            Evaluator::General { roots, terms } => terms
                .iter()
                .map(|(digits, w)| {
                    let mut z = Complex64::new(1.0, 0.0);
                    for &(k, d) in digits {
                        let table = &roots[k];
                        let v = x[self.attr_set[k]] as usize;
                        z *= table[(d as usize * v) % table.len()];
                    }
                    w.re * z.re + w.im * z.im
                })
                .sum(),
        }
    }

    /// Class 1 when the score reaches 0.5.
    pub fn predict(&self, x: &[u32]) -> u8 {
        classify_score(self.score(x))
    }

    /// Keeps whole orders `0..=O`, with `O` the smallest order whose
    /// cumulative energy reaches `e_t` times the zero-order coefficient.
    pub fn threshold(&self, e_t: f64) -> Result<Spectrum> {
        if !(e_t > 0.0 && e_t <= 1.0) {
            return Err(Error::InvalidEnergyThreshold(e_t));
        }
        let total = self.total_energy();
        if total <= 0.0 {
            return Ok(Self::from_map(
                self.space.clone(),
                self.attr_set.clone(),
                BTreeMap::new(),
                e_t,
            ));
        }
        if e_t >= 1.0 {
            let mut out = self.clone();
            out.energy_threshold = e_t;
            return Ok(out);
        }
        let mut kept = BTreeMap::new();
        let mut cum = 0.0;
        let mut current = 0;
        for (j, w) in &self.coeffs {
            let order = j.order();
            if order != current {
                if energy_reached(cum, total, e_t) {
                    break;
                }
                current = order;
            }
            cum += w.norm_sqr();
            kept.insert(j.clone(), *w);
        }
        Ok(Self::from_map(
            self.space.clone(),
            self.attr_set.clone(),
            kept,
            e_t,
        ))
    }

    /// Inserts zero digits for `added` attributes. Scores are unchanged.
    pub fn expand(&self, added: &[usize]) -> Result<Spectrum> {
        if let Some(&m) = added.iter().find(|m| self.attr_set.binary_search(m).is_ok()) {
            return Err(Error::AttributeOverlap(m));
        }
        let mut target: Vec<usize> = self.attr_set.iter().chain(added).copied().collect();
        target.sort_unstable();
        target.dedup();
        if target.len() != self.attr_set.len() + added.len() {
            return Err(Error::InvalidInput("duplicate attributes in expansion".into()));
        }
        if let Some(&m) = target.last() {
            if m >= self.space.dim() {
                return Err(Error::InvalidInput(format!("attribute {m} outside the space")));
            }
        }
        Ok(self.expand_to_unchecked(target))
    }

    /// Expands to `target`, which must contain the current attribute set.
    pub fn expand_to(&self, target: &[usize]) -> Result<Spectrum> {
        let added: Vec<usize> = target
            .iter()
            .copied()
            .filter(|m| self.attr_set.binary_search(m).is_err())
            .collect();
        if target.len() != self.attr_set.len() + added.len() {
            return Err(Error::AttributeSetMismatch);
        }
        self.expand(&added)
    }

    fn expand_to_unchecked(&self, target: Vec<usize>) -> Spectrum {
        if target == self.attr_set {
            return self.clone();
        }
        // position of each old local attribute inside the new set
        let slots: Vec<usize> = self
            .attr_set
            .iter()
            .map(|m| target.binary_search(m).expect("superset"))
            .collect();
        let coeffs = self
            .coeffs
            .iter()
            .map(|(j, w)| {
                let mut digits = vec![0; target.len()];
                for (&slot, &d) in slots.iter().zip(j.digits()) {
                    digits[slot] = d;
                }
                (Partition::new(digits), *w)
            })
            .collect();
        Self::from_map(self.space.clone(), target, coeffs, self.energy_threshold)
    }

    /// `self + weight · addition`, coefficient-wise. Both spectra must share
    /// the attribute space and attribute set.
    pub fn aggregate(&self, addition: &Spectrum, weight: f64) -> Result<Spectrum> {
        if !Arc::ptr_eq(&self.space, &addition.space) && self.space != addition.space {
            return Err(Error::SpaceMismatch);
        }
        if self.attr_set != addition.attr_set {
            return Err(Error::AttributeSetMismatch);
        }
        if !(weight >= 0.0) {
            return Err(Error::InvalidInput(format!("negative aggregation weight {weight}")));
        }
        if weight == 0.0 {
            return Ok(self.clone());
        }
        let mut coeffs = self.coeffs.clone();
        for (j, w) in &addition.coeffs {
            let slot = coeffs.entry(j.clone()).or_default();
            *slot += w * weight;
            if slot.norm() < ZERO_TOLERANCE {
                coeffs.remove(j);
            }
        }
        Ok(Self::from_map(
            self.space.clone(),
            self.attr_set.clone(),
            coeffs,
            self.energy_threshold,
        ))
    }

    /// Every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Spectrum {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(j, w)| (j.clone(), w * factor))
            .filter(|(_, w)| w.norm_sqr() != 0.0)
            .collect();
        Self::from_map(
            self.space.clone(),
            self.attr_set.clone(),
            coeffs,
            self.energy_threshold,
        )
    }

    /// Hash of the attribute set and exact coefficient bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.attr_set.hash(&mut h);
        for (j, w) in &self.coeffs {
            j.hash(&mut h);
            w.re.to_bits().hash(&mut h);
            w.im.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

impl PartialEq for Spectrum {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.space, &other.space) || self.space == other.space)
            && self.attr_set == other.attr_set
            && self.coeffs == other.coeffs
    }
}

/// Free-function form of [`Spectrum::threshold`].
pub fn energy_threshold(spectrum: &Spectrum, e_t: f64) -> Result<Spectrum> {
    spectrum.threshold(e_t)
}

pub(crate) fn energy_reached(cum: f64, total: f64, e_t: f64) -> bool {
    cum + ENERGY_SLACK * total >= e_t * total
}

/// Decision rule for {0,1} scores; a tie at 0.5 goes to class 1.
pub fn classify_score(score: f64) -> u8 {
    u8::from(score >= 0.5)
}
