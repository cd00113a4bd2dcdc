use super::{AttributeSpace, Schema};

/// Anything that can be viewed as a discrete decision tree: a set of leaf
/// schemata that partition the input space, plus direct traversal.
pub trait DecisionTree {
    /// One schema per leaf.
    fn schemata(&self, space: &AttributeSpace) -> Vec<Schema>;

    /// Label of the leaf reached by `x`.
    fn leaf_value(&self, x: &[u32]) -> f64;
}

/// A fixed tree, useful for hand-built examples and tests.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf(f64),
    /// `children[v]` handles attribute value `v`.
    Split { attr: usize, children: Vec<TreeNode> },
}

impl TreeNode {
    pub fn leaf(label: f64) -> Self {
        TreeNode::Leaf(label)
    }

    pub fn split(attr: usize, children: Vec<TreeNode>) -> Self {
        TreeNode::Split { attr, children }
    }

    fn collect(&self, symbols: &mut Vec<Option<u32>>, out: &mut Vec<Schema>) {
        match self {
            TreeNode::Leaf(label) => out.push(Schema::new(symbols.clone(), *label)),
            TreeNode::Split { attr, children } => {
                for (v, child) in children.iter().enumerate() {
                    symbols[*attr] = Some(v as u32);
                    child.collect(symbols, out);
                }
                symbols[*attr] = None;
            }
        }
    }
}

impl DecisionTree for TreeNode {
    fn schemata(&self, space: &AttributeSpace) -> Vec<Schema> {
        let mut out = Vec::new();
        self.collect(&mut vec![None; space.dim()], &mut out);
        out
    }

    fn leaf_value(&self, x: &[u32]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf(label) => return *label,
                TreeNode::Split { attr, children } => node = &children[x[*attr] as usize],
            }
        }
    }
}
