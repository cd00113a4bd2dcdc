//! Forest of incrementally grown Hoeffding trees over discrete attributes,
//! one tree rooted on each attribute, sharing a global split-node budget.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::drift::{Detector, DetectorConfig};
use crate::error::{Error, Result};
use crate::fourier::{AttributeSpace, DecisionTree, Schema};
use crate::stream::StreamRecord;

pub const DEFAULT_NODE_BUDGET: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// δ in the Hoeffding bound.
    pub split_confidence: f64,
    /// Instances a leaf accumulates between split evaluations.
    pub grace_period: u64,
    /// Split anyway once the bound falls below this.
    pub tie_threshold: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            split_confidence: 1e-7,
            grace_period: 200,
            tie_threshold: 0.05,
        }
    }
}

/// Split nodes available to a whole forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeBudget {
    pub limit: usize,
    pub used: usize,
}

impl NodeBudget {
    pub fn exhausted(&self) -> bool {
        self.used >= self.limit
    }
}

#[derive(Debug, Clone)]
enum Node {
    Split { attr: usize, children: Vec<usize> },
    Leaf(Leaf),
}

#[derive(Debug, Clone)]
struct Leaf {
    counts: [u64; 2],
    /// Prediction while the leaf has seen nothing.
    fallback: u8,
    since_eval: u64,
    /// Attributes not yet used on the path to this leaf.
    candidates: Vec<usize>,
    /// `stats[offsets[c] + v]` = class counts for candidate `c` taking value `v`.
    offsets: Vec<usize>,
    stats: Vec<[u64; 2]>,
}

impl Leaf {
    fn new(candidates: Vec<usize>, cards: &[u32], fallback: u8) -> Self {
        let mut offsets = Vec::with_capacity(candidates.len());
        let mut total = 0;
        for &m in &candidates {
            offsets.push(total);
            total += cards[m] as usize;
        }
        Self {
            counts: [0, 0],
            fallback,
            since_eval: 0,
            candidates,
            offsets,
            stats: vec![[0, 0]; total],
        }
    }

    fn majority(&self) -> u8 {
        match self.counts {
            [0, 0] => self.fallback,
            [n0, n1] => u8::from(n1 > n0),
        }
    }
}

fn entropy(counts: [u64; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct HoeffdingTree {
    root_attr: usize,
    cards: Arc<[u32]>,
    params: TreeParams,
    nodes: Vec<Node>,
    splits: usize,
}

impl HoeffdingTree {
    /// A single split on `root_attr` with one empty leaf per value.
    pub fn new(space: &AttributeSpace, root_attr: usize, params: TreeParams) -> Self {
        let cards: Arc<[u32]> = space.cardinalities().into();
        let mut tree = Self {
            root_attr,
            cards,
            params,
            nodes: vec![Node::Leaf(Leaf::new(Vec::new(), &[], 0))],
            splits: 0,
        };
        let candidates: Vec<usize> = (0..space.dim()).filter(|&m| m != root_attr).collect();
        tree.nodes[0] = Node::Leaf(Leaf::new(candidates, &tree.cards, 0));
        tree.split_leaf(0, root_attr);
        tree
    }

    pub fn root_attr(&self) -> usize {
        self.root_attr
    }

    /// Number of internal (split) nodes.
    pub fn split_count(&self) -> usize {
        self.splits
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf(_)))
            .count()
    }

    fn leaf_index(&self, x: &[u32]) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(_) => return idx,
                Node::Split { attr, children } => idx = children[x[*attr] as usize],
            }
        }
    }

    pub fn classify(&self, x: &[u32]) -> u8 {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf(leaf) => leaf.majority(),
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Routes the record to its leaf and updates statistics; may split the
    /// leaf if `budget` allows. `values` must already be validated.
    fn learn(&mut self, values: &[u32], label: u8, budget: &mut NodeBudget) {
        let idx = self.leaf_index(values);
        let Node::Leaf(leaf) = &mut self.nodes[idx] else {
            unreachable!()
        };
        let class = label as usize;
        leaf.counts[class] += 1;
        for (c, &m) in leaf.candidates.iter().enumerate() {
            leaf.stats[leaf.offsets[c] + values[m] as usize][class] += 1;
        }
        leaf.since_eval += 1;
        if leaf.since_eval < self.params.grace_period || budget.exhausted() {
            return;
        }
        leaf.since_eval = 0;
        let Node::Leaf(leaf) = &self.nodes[idx] else {
            unreachable!()
        };
        if let Some(attr) = self.choose_split(leaf) {
            self.split_leaf(idx, attr);
            budget.used += 1;
        }
    }

    fn choose_split(&self, leaf: &Leaf) -> Option<usize> {
        let [n0, n1] = leaf.counts;
        if n0 == 0 || n1 == 0 || leaf.candidates.is_empty() {
            return None;
        }
        let n = (n0 + n1) as f64;
        let parent = entropy(leaf.counts);
        let mut best: Option<(usize, f64)> = None;
        let mut second = 0.0;
        for (c, &m) in leaf.candidates.iter().enumerate() {
            let card = self.cards[m] as usize;
            let children: f64 = leaf.stats[leaf.offsets[c]..leaf.offsets[c] + card]
                .iter()
                .map(|&counts| (counts[0] + counts[1]) as f64 / n * entropy(counts))
                .sum();
            let gain = parent - children;
            match best {
                Some((_, g)) if gain <= g => second = f64::max(second, gain),
                _ => {
                    if let Some((_, g)) = best {
                        second = f64::max(second, g);
                    }
                    best = Some((m, gain));
                }
            }
        }
        let (attr, gain) = best?;
        let bound = ((1.0 / self.params.split_confidence).ln() / (2.0 * n)).sqrt();
        (gain > 0.0 && (gain - second > bound || bound < self.params.tie_threshold)).then_some(attr)
    }

    fn split_leaf(&mut self, idx: usize, attr: usize) {
        let Node::Leaf(leaf) = &self.nodes[idx] else {
            unreachable!()
        };
        let fallback = leaf.majority();
        let candidates: Vec<usize> = leaf.candidates.iter().copied().filter(|&m| m != attr).collect();
        let card = self.cards[attr] as usize;
        let first = self.nodes.len();
        for _ in 0..card {
            self.nodes
                .push(Node::Leaf(Leaf::new(candidates.clone(), &self.cards, fallback)));
        }
        self.nodes[idx] = Node::Split {
            attr,
            children: (first..first + card).collect(),
        };
        self.splits += 1;
    }

    /// One schema per leaf, labeled with the leaf's prediction.
    pub fn paths(&self) -> Vec<Schema> {
        let mut out = Vec::with_capacity(self.leaf_count());
        let mut symbols = vec![None; self.cards.len()];
        self.collect(0, &mut symbols, &mut out);
        out
    }

    fn collect(&self, idx: usize, symbols: &mut Vec<Option<u32>>, out: &mut Vec<Schema>) {
        match &self.nodes[idx] {
            Node::Leaf(leaf) => out.push(Schema::new(symbols.clone(), leaf.majority() as f64)),
            Node::Split { attr, children } => {
                for (v, &child) in children.iter().enumerate() {
                    symbols[*attr] = Some(v as u32);
                    self.collect(child, symbols, out);
                }
                symbols[*attr] = None;
            }
        }
    }

    /// Indented debugging dump; not a stable format.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(0, 0, &mut out);
        out
    }

    fn dump_node(&self, idx: usize, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        match &self.nodes[idx] {
            Node::Leaf(leaf) => {
                let _ = writeln!(out, "{pad}leaf {:?} -> {}", leaf.counts, leaf.majority());
            }
            Node::Split { attr, children } => {
                let _ = writeln!(out, "{pad}split a{attr}");
                for &child in children {
                    self.dump_node(child, depth + 1, out);
                }
            }
        }
    }

    #[cfg(test)]
    fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            Node::Split { .. } => None,
        })
    }
}

impl DecisionTree for HoeffdingTree {
    fn schemata(&self, _space: &AttributeSpace) -> Vec<Schema> {
        self.paths()
    }

    fn leaf_value(&self, x: &[u32]) -> f64 {
        self.classify(x) as f64
    }
}

/// One Hoeffding tree per attribute, each with its own drift detector.
#[derive(Debug, Clone)]
pub struct Forest {
    space: Arc<AttributeSpace>,
    params: TreeParams,
    trees: Vec<HoeffdingTree>,
    detectors: Vec<Detector>,
    detector_config: DetectorConfig,
    budget: NodeBudget,
    rejected: u64,
}

impl Forest {
    pub fn new(
        space: Arc<AttributeSpace>,
        node_budget: usize,
        params: TreeParams,
        detector: DetectorConfig,
    ) -> Result<Self> {
        if space.dim() == 0 {
            return Err(Error::Config("a forest needs at least one attribute".into()));
        }
        if node_budget < space.dim() {
            return Err(Error::Config(format!(
                "node budget {node_budget} is smaller than the {} root splits",
                space.dim()
            )));
        }
        let trees: Vec<_> = (0..space.dim())
            .map(|m| HoeffdingTree::new(&space, m, params))
            .collect();
        let detectors = (0..space.dim()).map(|_| detector.build()).collect();
        let used = trees.iter().map(HoeffdingTree::split_count).sum();
        Ok(Self {
            space,
            params,
            trees,
            detectors,
            detector_config: detector,
            budget: NodeBudget {
                limit: node_budget,
                used,
            },
            rejected: 0,
        })
    }

    pub fn space(&self) -> &Arc<AttributeSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn tree(&self, i: usize) -> &HoeffdingTree {
        &self.trees[i]
    }

    pub fn trees(&self) -> &[HoeffdingTree] {
        &self.trees
    }

    pub fn detector(&self, i: usize) -> &Detector {
        &self.detectors[i]
    }

    pub fn detector_mut(&mut self, i: usize) -> &mut Detector {
        &mut self.detectors[i]
    }

    pub fn budget(&self) -> NodeBudget {
        self.budget
    }

    pub fn node_count(&self) -> usize {
        self.budget.used
    }

    /// Records rejected because a value fell outside the attribute space.
    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn classify_into(&self, x: &[u32], out: &mut Vec<u8>) {
        out.clear();
        out.extend(self.trees.iter().map(|t| t.classify(x)));
    }

    /// Trains every tree on the record.
    pub fn learn(&mut self, record: &StreamRecord) -> Result<()> {
        if let Err(e) = self.validate(record) {
            self.rejected += 1;
            return Err(e);
        }
        for tree in &mut self.trees {
            tree.learn(&record.values, record.label, &mut self.budget);
        }
        debug_assert!(self.budget.used <= self.budget.limit);
        Ok(())
    }

    fn validate(&self, record: &StreamRecord) -> Result<()> {
        self.space.check(&record.values)?;
        if record.label > 1 {
            return Err(Error::InvalidInput(format!(
                "label {} is not binary",
                record.label
            )));
        }
        Ok(())
    }

    /// Replants tree `i` as a fresh single split on its root attribute. The
    /// tree's detector is kept.
    pub fn reset_tree(&mut self, i: usize) {
        self.budget.used -= self.trees[i].split_count();
        self.trees[i] = HoeffdingTree::new(&self.space, i, self.params);
        self.budget.used += self.trees[i].split_count();
    }

    pub fn detector_config(&self) -> DetectorConfig {
        self.detector_config
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn forest(d: usize, budget: usize) -> Forest {
        Forest::new(
            Arc::new(AttributeSpace::binary(d)),
            budget,
            TreeParams::default(),
            DetectorConfig::default(),
        )
        .unwrap()
    }

    fn record(values: Vec<u32>, label: u8) -> StreamRecord {
        StreamRecord { values, label }
    }

    #[test]
    fn init_plants_one_tree_per_attribute() {
        let f = forest(3, 5000);
        assert_eq!(f.len(), 3);
        for (i, t) in f.trees().iter().enumerate() {
            assert_eq!(t.root_attr(), i);
            assert_eq!(t.split_count(), 1);
            assert_eq!(t.leaf_count(), 2);
            assert_eq!(t.paths()[0].symbols[i], Some(0));
        }
        assert_eq!(forest(1, 1).len(), 1);
    }

    #[test]
    fn init_rejects_small_budget() {
        let space = Arc::new(AttributeSpace::binary(3));
        for budget in [0, 2] {
            assert!(Forest::new(space.clone(), budget, TreeParams::default(), DetectorConfig::default()).is_err());
        }
    }

    #[test]
    fn empty_leaf_uses_parent_majority() {
        let space = AttributeSpace::binary(2);
        let t = HoeffdingTree::new(&space, 0, TreeParams::default());
        assert_eq!(t.classify(&[0, 0]), 0);
        assert_eq!(t.classify(&[1, 1]), 0);
    }

    #[test]
    fn learns_single_attribute_concept() {
        let mut f = forest(4, 5000);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut correct = 0;
        let n = 10_000;
        for _ in 0..n {
            let values: Vec<u32> = (0..4).map(|_| rng.gen_range(0..2)).collect();
            let label = values[0] as u8;
            if f.tree(0).classify(&values) == label {
                correct += 1;
            }
            f.learn(&record(values, label)).unwrap();
        }
        assert!(correct as f64 / n as f64 > 0.95);
    }

    #[test]
    fn constant_class_never_splits() {
        let mut f = forest(5, 5000);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20_000 {
            let values: Vec<u32> = (0..5).map(|_| rng.gen_range(0..2)).collect();
            f.learn(&record(values, 1)).unwrap();
        }
        assert!(f.trees().iter().all(|t| t.split_count() == 1));
    }

    #[test]
    fn grows_on_xor_and_respects_budget() {
        let mut f = forest(6, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30_000 {
            let values: Vec<u32> = (0..6).map(|_| rng.gen_range(0..2)).collect();
            let label = (values[0] ^ values[1]) as u8;
            f.learn(&record(values, label)).unwrap();
            assert!(f.node_count() <= 9);
        }
        assert_eq!(f.node_count(), 9);
        let total: usize = f.trees().iter().map(HoeffdingTree::split_count).sum();
        assert_eq!(total, f.node_count());
    }

    #[test]
    fn leaf_counts_match_routed_instances() {
        let mut f = forest(3, 5000);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..150 {
            let values: Vec<u32> = (0..3).map(|_| rng.gen_range(0..2)).collect();
            f.learn(&record(values, rng.gen_range(0..2))).unwrap();
        }
        // grace period not reached: no splits, every record sits in one leaf per tree
        for t in f.trees() {
            let seen: u64 = t.leaves().map(|l| l.counts[0] + l.counts[1]).sum();
            assert_eq!(seen, 150);
        }
    }

    #[test]
    fn rejects_out_of_range_records() {
        let mut f = forest(2, 5000);
        assert!(f.learn(&record(vec![0, 2], 1)).is_err());
        assert!(f.learn(&record(vec![0], 1)).is_err());
        assert!(f.learn(&record(vec![0, 1], 3)).is_err());
        assert_eq!(f.rejected(), 3);
    }

    #[test]
    fn reset_restores_single_split() {
        let mut f = forest(4, 5000);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20_000 {
            let values: Vec<u32> = (0..4).map(|_| rng.gen_range(0..2)).collect();
            let label = (values[1] & values[2]) as u8;
            f.learn(&record(values, label)).unwrap();
        }
        assert!(f.tree(1).split_count() > 1);
        let before = f.node_count();
        let freed = f.tree(1).split_count() - 1;
        f.reset_tree(1);
        assert_eq!(f.tree(1).split_count(), 1);
        assert_eq!(f.node_count(), before - freed);
    }

    #[test]
    fn dump_lists_nodes() {
        let space = AttributeSpace::binary(2);
        let t = HoeffdingTree::new(&space, 1, TreeParams::default());
        assert_eq!(t.dump(), "split a1\n  leaf [0, 0] -> 0\n  leaf [0, 0] -> 0\n");
    }
}
