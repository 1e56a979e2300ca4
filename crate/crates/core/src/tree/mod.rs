//! Flat-array decision trees: storage, prediction and builders.

mod builder;
pub(crate) mod serialize;

pub use builder::{build, build_best_first, BuildConfig, BuildOrder};
pub(crate) use builder::grow;
pub use serialize::{load_tree, save_tree, TREE_FORMAT, TREE_VERSION};

use crate::criteria::Criterion;
use crate::dataset::{Dataset, Schema, Task};
use crate::error::{Error, Result};

/// Child / feature marker of a leaf.
pub const SENTINEL: i64 = -1;

/// Node arrays. Node 0 is the root. Binary nodes use `left_child` and
/// `right_child`; multiway nodes additionally list every child in
/// `children` (first and last child mirrored in the two columns).
#[derive(Debug, Clone, Default)]
pub struct TreeArrays {
    pub left_child: Vec<i64>,
    pub right_child: Vec<i64>,
    pub children: Vec<Vec<usize>>,
    pub feature: Vec<i64>,
    /// NaN for leaves and multiway nodes.
    pub threshold: Vec<f64>,
    pub impurity: Vec<f64>,
    /// Weighted sample count.
    pub n_node_samples: Vec<f64>,
    /// Weighted class counts, or the mean output.
    pub value: Vec<Vec<f64>>,
}

impl PartialEq for TreeArrays {
    fn eq(&self, other: &Self) -> bool {
        let same_threshold = self.threshold.len() == other.threshold.len()
            && self
                .threshold
                .iter()
                .zip(&other.threshold)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        same_threshold
            && self.left_child == other.left_child
            && self.right_child == other.right_child
            && self.children == other.children
            && self.feature == other.feature
            && self.impurity == other.impurity
            && self.n_node_samples == other.n_node_samples
            && self.value == other.value
    }
}

impl TreeArrays {
    pub fn node_count(&self) -> usize {
        self.feature.len()
    }

    pub(crate) fn push(&mut self, impurity: f64, n_node_samples: f64, value: Vec<f64>) -> usize {
        self.left_child.push(SENTINEL);
        self.right_child.push(SENTINEL);
        self.children.push(Vec::new());
        self.feature.push(SENTINEL);
        self.threshold.push(f64::NAN);
        self.impurity.push(impurity);
        self.n_node_samples.push(n_node_samples);
        self.value.push(value);
        self.feature.len() - 1
    }

    #[inline]
    pub fn is_leaf(&self, t: usize) -> bool {
        self.feature[t] == SENTINEL
    }

    pub fn is_multiway(&self, t: usize) -> bool {
        !self.children[t].is_empty()
    }

    /// Children of node `t` in order; empty for leaves.
    pub fn children_of(&self, t: usize) -> Vec<usize> {
        if self.is_leaf(t) {
            Vec::new()
        } else if self.is_multiway(t) {
            self.children[t].clone()
        } else {
            vec![self.left_child[t] as usize, self.right_child[t] as usize]
        }
    }
}

/// Output of a single prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Class { class: usize, probabilities: Vec<f64> },
    Value(f64),
}

impl Prediction {
    /// Class index or predicted value as a real.
    pub fn as_f64(&self) -> f64 {
        match self {
            Prediction::Class { class, .. } => *class as f64,
            Prediction::Value(v) => *v,
        }
    }
}

/// Index of the largest entry; lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub task: Task,
    pub criterion: Criterion,
    pub n_features: usize,
    pub schema: Option<Schema>,
    pub nodes: TreeArrays,
}

impl Tree {
    /// A single-leaf tree.
    pub fn leaf(task: Task, criterion: Criterion, n_features: usize, value: Vec<f64>, n: f64) -> Self {
        let mut nodes = TreeArrays::default();
        nodes.push(0.0, n, value);
        Self {
            task,
            criterion,
            n_features,
            schema: None,
            nodes,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.node_count()
    }

    pub fn n_leaves(&self) -> usize {
        (0..self.node_count()).filter(|&t| self.nodes.is_leaf(t)).count()
    }

    /// Depth of every node, root at 0.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.node_count()];
        let mut stack = vec![0];
        while let Some(t) = stack.pop() {
            for c in self.nodes.children_of(t) {
                depth[c] = depth[t] + 1;
                stack.push(c);
            }
        }
        depth
    }

    /// Leaf depth averaged over training weight (root at depth 0).
    pub fn mean_leaf_depth(&self) -> f64 {
        let depths = self.depths();
        let n = &self.nodes;
        let root = n.n_node_samples[0];
        (0..self.node_count())
            .filter(|&t| n.is_leaf(t))
            .map(|t| n.n_node_samples[t] / root * depths[t] as f64)
            .sum()
    }

    pub fn max_depth(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// Terminal node reached by `x`.
    pub fn apply(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let n = &self.nodes;
        let mut t = 0;
        while !n.is_leaf(t) {
            let f = n.feature[t] as usize;
            let v = x[f];
            t = if n.is_multiway(t) {
                let arity = n.children[t].len();
                if !(v >= 0.0) || v.fract() != 0.0 || v as usize >= arity {
                    return Err(Error::CategoryOutOfRange {
                        feature: f,
                        code: v,
                        cardinality: arity,
                    });
                }
                n.children[t][v as usize]
            } else if v <= n.threshold[t] {
                n.left_child[t] as usize
            } else {
                n.right_child[t] as usize
            };
        }
        Ok(t)
    }

    /// Class probabilities (classification) or `[mean]` (regression).
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = self.apply(x)?;
        Ok(self.leaf_output(t))
    }

    pub(crate) fn leaf_output(&self, t: usize) -> Vec<f64> {
        let value = &self.nodes.value[t];
        if self.task.is_classification() {
            let total: f64 = value.iter().sum();
            if total > 0.0 {
                value.iter().map(|v| v / total).collect()
            } else {
                vec![1.0 / value.len() as f64; value.len()]
            }
        } else {
            value.clone()
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let out = self.predict_proba(x)?;
        Ok(if self.task.is_classification() {
            Prediction::Class {
                class: argmax(&out),
                probabilities: out,
            }
        } else {
            Prediction::Value(out[0])
        })
    }

    /// Weighted 0-1 loss or weighted squared error of the tree on `ds`.
    pub fn resubstitution_error(&self, ds: &Dataset) -> Result<f64> {
        if ds.task() != self.task {
            return Err(Error::InvalidDataset("dataset task differs from the tree's".into()));
        }
        let mut loss = 0.0;
        let mut total = 0.0;
        for i in 0..ds.n_samples() {
            let w = ds.weights()[i];
            let pred = self.predict(&ds.row(i))?.as_f64();
            let y = ds.target(i);
            loss += w * if self.task.is_classification() {
                (pred != y) as u8 as f64
            } else {
                (y - pred).powi(2)
            };
            total += w;
        }
        if !(total > 0.0) {
            return Err(Error::ZeroTotal);
        }
        Ok(loss / total)
    }

    /// Structural checks run when a tree is loaded.
    pub fn validate(&self) -> Result<()> {
        let n = &self.nodes;
        let count = n.node_count();
        let bad = |msg: String| Err(Error::Format(msg));
        if count == 0 {
            return bad("tree has no nodes".into());
        }
        let lens = [
            n.left_child.len(),
            n.right_child.len(),
            n.children.len(),
            n.threshold.len(),
            n.impurity.len(),
            n.n_node_samples.len(),
            n.value.len(),
        ];
        if lens.iter().any(|&l| l != count) {
            return bad("node arrays have different lengths".into());
        }
        let width = self.task.n_classes().unwrap_or(1);
        let mut parents = vec![0usize; count];
        for t in 0..count {
            if n.value[t].len() != width {
                return bad(format!("node {t}: value has {} entries, expected {width}", n.value[t].len()));
            }
            if !(n.impurity[t] >= 0.0) {
                return bad(format!("node {t}: negative impurity"));
            }
            if !(n.n_node_samples[t] >= 0.0) {
                return bad(format!("node {t}: negative sample count"));
            }
            let leaf_children = n.left_child[t] == SENTINEL && n.right_child[t] == SENTINEL;
            if n.feature[t] == SENTINEL {
                if !leaf_children || !n.children[t].is_empty() {
                    return bad(format!("node {t}: leaf with children"));
                }
                continue;
            }
            if leaf_children {
                return bad(format!("node {t}: leaf with feature set"));
            }
            if n.feature[t] < 0 || n.feature[t] as usize >= self.n_features {
                return bad(format!("node {t}: feature {} out of range", n.feature[t]));
            }
            let kids = if n.children[t].is_empty() {
                if !n.threshold[t].is_finite() {
                    return bad(format!("node {t}: binary node without threshold"));
                }
                let (l, r) = (n.left_child[t], n.right_child[t]);
                if l < 0 || r < 0 || l as usize >= count || r as usize >= count {
                    return bad(format!("node {t}: dangling child index"));
                }
                vec![l as usize, r as usize]
            } else {
                if n.children[t].iter().any(|&c| c >= count) {
                    return bad(format!("node {t}: dangling child index"));
                }
                n.children[t].clone()
            };
            for &c in &kids {
                if c == 0 {
                    return bad(format!("node {t}: root listed as a child"));
                }
                parents[c] += 1;
            }
            let sum: f64 = kids.iter().map(|&c| n.n_node_samples[c]).sum();
            if (sum - n.n_node_samples[t]).abs() > 1e-6 * n.n_node_samples[t].max(1.0) {
                return bad(format!("node {t}: children hold {sum} samples, parent {}", n.n_node_samples[t]));
            }
        }
        if let Some(t) = (1..count).find(|&t| parents[t] != 1) {
            return bad(format!("node {t} has {} parents", parents[t]));
        }
        // reachability also rules out cycles
        let mut seen = vec![false; count];
        let mut stack = vec![0];
        while let Some(t) = stack.pop() {
            if std::mem::replace(&mut seen[t], true) {
                return bad("cycle in node links".into());
            }
            stack.extend(n.children_of(t));
        }
        if seen.iter().any(|s| !s) {
            return bad("unreachable nodes".into());
        }
        Ok(())
    }
}
