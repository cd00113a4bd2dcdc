use crate::error::{Error, Result};

/// Largest input space that exhaustive routines (oracles, truth tables)
/// will walk.
pub const MAX_ENUMERABLE: u64 = 1 << 20;

/// The attribute universe: an ordered list of named discrete attributes,
/// each with a cardinality of at least two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSpace {
    names: Vec<String>,
    cardinalities: Vec<u32>,
}

impl AttributeSpace {
    pub fn new<S: Into<String>>(attrs: impl IntoIterator<Item = (S, u32)>) -> Result<Self> {
        let (names, cardinalities): (Vec<String>, Vec<u32>) =
            attrs.into_iter().map(|(n, c)| (n.into(), c)).unzip();
        if let Some(m) = cardinalities.iter().position(|&c| c < 2) {
            return Err(Error::InvalidSpace(format!(
                "attribute {} ({}) has cardinality {} < 2",
                m, names[m], cardinalities[m]
            )));
        }
        Ok(Self {
            names,
            cardinalities,
        })
    }

    /// `dim` attributes named `a0, a1, ...`, all with the same cardinality.
    pub fn uniform(dim: usize, cardinality: u32) -> Result<Self> {
        Self::new((0..dim).map(|m| (format!("a{m}"), cardinality)))
    }

    pub fn from_cardinalities(cardinalities: &[u32]) -> Result<Self> {
        Self::new(
            cardinalities
                .iter()
                .enumerate()
                .map(|(m, &c)| (format!("a{m}"), c)),
        )
    }

    pub fn binary(dim: usize) -> Self {
        Self::uniform(dim, 2).expect("cardinality 2 is valid")
    }

    pub fn dim(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinality(&self, attr: usize) -> u32 {
        self.cardinalities[attr]
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cardinalities
    }

    pub fn name(&self, attr: usize) -> &str {
        &self.names[attr]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_binary(&self) -> bool {
        self.cardinalities.iter().all(|&c| c == 2)
    }

    /// Number of points in the input space, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        self.cardinalities
            .iter()
            .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128))
            .unwrap_or(u128::MAX)
    }

    pub fn check(&self, x: &[u32]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (attr, (&value, &cardinality)) in x.iter().zip(&self.cardinalities).enumerate() {
            if value >= cardinality {
                return Err(Error::ValueOutOfRange {
                    attr,
                    value,
                    cardinality,
                });
            }
        }
        Ok(())
    }

    /// Iterates every full assignment in mixed-radix order (last attribute
    /// varies fastest). Refuses spaces larger than [`MAX_ENUMERABLE`].
    pub fn assignments(&self) -> Result<Assignments<'_>> {
        let size = self.size();
        if size > MAX_ENUMERABLE as u128 {
            return Err(Error::SpaceTooLarge {
                size,
                limit: MAX_ENUMERABLE,
            });
        }
        Ok(Assignments {
            cards: &self.cardinalities,
            next: Some(vec![0; self.dim()]),
        })
    }
}

pub struct Assignments<'a> {
    cards: &'a [u32],
    next: Option<Vec<u32>>,
}

impl Iterator for Assignments<'_> {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut m = succ.len();
        loop {
            if m == 0 {
                break;
            }
            m -= 1;
            succ[m] += 1;
            if succ[m] < self.cards[m] {
                self.next = Some(succ);
                break;
            }
            succ[m] = 0;
        }
        Some(current)
    }
}
