//! Split search: exhaustive best threshold, random-K feature subsets,
//! random thresholds, PERT cuts, and multiway categorical splits.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::criteria::{decrease_unchecked, Criterion, NodeStats};
use crate::dataset::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Attempts PERT makes before giving up on a node.
pub const PERT_ATTEMPTS: usize = 32;
const TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitterKind {
    /// Best threshold over every feature.
    Best,
    /// Best threshold over K random features.
    RandomK,
    /// One uniform random threshold per each of K random features.
    Ets,
    Pert,
    /// Multiway categorical splits, best of K unused variables.
    TrtMultiway,
}

impl FromStr for SplitterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(Self::Best),
            "random-k" => Ok(Self::RandomK),
            "ets" => Ok(Self::Ets),
            "pert" => Ok(Self::Pert),
            "trt-multiway" => Ok(Self::TrtMultiway),
            other => Err(Error::InvalidConfig(format!("unknown splitter {other:?}"))),
        }
    }
}

impl fmt::Display for SplitterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Best => "best",
            Self::RandomK => "random-k",
            Self::Ets => "ets",
            Self::Pert => "pert",
            Self::TrtMultiway => "trt-multiway",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinarySplit {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
    pub n_left: f64,
    pub n_right: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiwaySplit {
    pub feature: usize,
    pub arity: usize,
    pub decrease: f64,
    pub child_weights: Vec<f64>,
}

/// Small dense set of feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureSet {
    words: Vec<u64>,
}

impl FeatureSet {
    pub fn with_capacity(p: usize) -> Self {
        Self {
            words: vec![0; p.div_ceil(64)],
        }
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        self.words.get(j / 64).is_some_and(|w| w >> (j % 64) & 1 == 1)
    }

    pub fn insert(&mut self, j: usize) {
        if j / 64 >= self.words.len() {
            self.words.resize(j / 64 + 1, 0);
        }
        self.words[j / 64] |= 1 << (j % 64);
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_subset(&self, other: &FeatureSet) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }
}

/// A node under construction: the range `samples[start..end]` of the shared
/// index buffer plus what the branch has learned so far.
#[derive(Debug, Clone)]
pub struct NodeView {
    pub start: usize,
    pub end: usize,
    /// Features known to be constant on this branch.
    pub constant: FeatureSet,
    pub stats: NodeStats,
    pub impurity: f64,
}

impl NodeView {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Read-only inputs of a split search plus reusable scratch space.
pub struct SplitContext<'a> {
    pub data: &'a Dataset,
    /// Per-row training weight of the tree being grown.
    pub weights: &'a [f64],
    pub criterion: Criterion,
    pub min_samples_leaf: usize,
    scratch: Vec<(f64, usize)>,
}

impl<'a> SplitContext<'a> {
    pub fn new(data: &'a Dataset, weights: &'a [f64], criterion: Criterion, min_samples_leaf: usize) -> Self {
        Self {
            data,
            weights,
            criterion,
            min_samples_leaf: min_samples_leaf.max(1),
            scratch: Vec::new(),
        }
    }

    /// Statistics of the given rows from scratch.
    pub fn stats_of(&self, samples: &[usize]) -> NodeStats {
        let mut s = NodeStats::for_task(self.data.task());
        for &i in samples {
            s.add(self.data.target(i), self.weights[i]);
        }
        s
    }

    fn is_better(candidate: &BinarySplit, best: &Option<BinarySplit>) -> bool {
        match best {
            None => true,
            Some(b) => {
                candidate.decrease > b.decrease + TIE
                    || (candidate.decrease >= b.decrease - TIE && candidate.feature < b.feature)
            }
        }
    }

    /// Exact best threshold on ordered feature `j`. Records `j` as constant
    /// on the node when all its values coincide.
    pub fn find_best_split_feature(
        &mut self,
        samples: &[usize],
        node: &mut NodeView,
        j: usize,
    ) -> Option<BinarySplit> {
        let col = self.data.column(j);
        let mut sorted = std::mem::take(&mut self.scratch);
        sorted.clear();
        sorted.extend(samples.iter().map(|&i| (col[i], i)));
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = sorted.len();
        if n == 0 || sorted[0].0 == sorted[n - 1].0 {
            node.constant.insert(j);
            self.scratch = sorted;
            return None;
        }
        let mut left = node.stats.empty_like();
        let mut right = node.stats.clone();
        let parent_total = node.stats.total();
        let mut best: Option<BinarySplit> = None;
        for k in 0..n - 1 {
            let (v, i) = sorted[k];
            let y = self.data.target(i);
            let w = self.weights[i];
            left.add(y, w);
            right.remove(y, w);
            let next = sorted[k + 1].0;
            if v == next {
                continue;
            }
            let n_left = k + 1;
            if n_left < self.min_samples_leaf || n - n_left < self.min_samples_leaf {
                continue;
            }
            let d = decrease_unchecked(node.impurity, parent_total, &left, &right, self.criterion);
            if best.is_none_or(|b| d > b.decrease + TIE) {
                let mut threshold = v / 2.0 + next / 2.0;
                if threshold >= next || threshold < v {
                    threshold = v;
                }
                best = Some(BinarySplit {
                    feature: j,
                    threshold,
                    decrease: d.max(0.0),
                    n_left: left.total(),
                    n_right: right.total(),
                });
            }
        }
        self.scratch = sorted;
        best
    }

    /// Partition `samples` by `x_j <= threshold` and report the split.
    fn evaluate_threshold(&self, samples: &[usize], node: &NodeView, j: usize, threshold: f64) -> Option<BinarySplit> {
        let col = self.data.column(j);
        let mut left = node.stats.empty_like();
        let mut n_left = 0;
        for &i in samples {
            if col[i] <= threshold {
                left.add(self.data.target(i), self.weights[i]);
                n_left += 1;
            }
        }
        let n_right = samples.len() - n_left;
        if n_left < self.min_samples_leaf || n_right < self.min_samples_leaf {
            return None;
        }
        let mut right = node.stats.clone();
        match (&mut right, &left) {
            (NodeStats::Class(r), NodeStats::Class(l)) => {
                for (c, &v) in l.counts().iter().enumerate() {
                    r.remove(c, v);
                }
            }
            (NodeStats::Regression(r), NodeStats::Regression(l)) => {
                r.sum -= l.sum;
                r.sum_sq -= l.sum_sq;
                r.total -= l.total;
            }
            _ => unreachable!("stats of one node share a task"),
        }
        if !(left.total() > 0.0) || !(right.total() > 0.0) {
            return None;
        }
        let d = decrease_unchecked(node.impurity, node.stats.total(), &left, &right, self.criterion);
        Some(BinarySplit {
            feature: j,
            threshold,
            decrease: d.max(0.0),
            n_left: left.total(),
            n_right: right.total(),
        })
    }

    /// Extremely randomized cut: `threshold ~ U[min, max)` of the node's
    /// values of `X_j`.
    pub fn draw_random_split_ets(
        &mut self,
        samples: &[usize],
        node: &mut NodeView,
        j: usize,
        rng: &mut Rng,
    ) -> Option<BinarySplit> {
        let col = self.data.column(j);
        let (lo, hi) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(col[i]), hi.max(col[i])));
        if !(lo < hi) {
            node.constant.insert(j);
            return None;
        }
        let u: f64 = rng.random();
        let mut threshold = lo + u * (hi - lo);
        if threshold >= hi {
            threshold = lo;
        }
        self.evaluate_threshold(samples, node, j, threshold)
    }

    /// Best split among `k` features drawn without replacement from `pool`.
    /// Known-constant features still consume a draw.
    pub fn find_best_split_k(
        &mut self,
        samples: &[usize],
        node: &mut NodeView,
        pool: &[usize],
        k: usize,
        random_thresholds: bool,
        rng: &mut Rng,
    ) -> Option<BinarySplit> {
        let k = k.clamp(1, pool.len().max(1));
        let drawn: Vec<usize> = if k >= pool.len() {
            pool.to_vec()
        } else {
            sample_indices(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
        };
        let mut best = None;
        for j in drawn {
            if node.constant.contains(j) {
                continue;
            }
            let candidate = if random_thresholds {
                self.draw_random_split_ets(samples, node, j, rng)
            } else {
                self.find_best_split_feature(samples, node, j)
            };
            if let Some(c) = candidate {
                if Self::is_better(&c, &best) {
                    best = Some(c);
                }
            }
        }
        best
    }

    /// Perfect-random-tree cut between two samples of different classes.
    pub fn draw_random_split_pert(
        &mut self,
        samples: &[usize],
        node: &mut NodeView,
        pool: &[usize],
        rng: &mut Rng,
    ) -> Option<BinarySplit> {
        let n_classes = self.data.task().n_classes()?;
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for &i in samples {
            by_class[self.data.class(i)].push(i);
        }
        let n = samples.len();
        // ordered pairs (a, b) with different classes, grouped by a's class
        let pair_weights: Vec<f64> = by_class
            .iter()
            .map(|c| (c.len() * (n - c.len())) as f64)
            .collect();
        let total: f64 = pair_weights.iter().sum();
        if total <= 0.0 || pool.is_empty() {
            return None;
        }
        for _ in 0..PERT_ATTEMPTS {
            let mut r = rng.random::<f64>() * total;
            let mut ca = 0;
            while ca + 1 < n_classes && (r >= pair_weights[ca] || pair_weights[ca] == 0.0) {
                r -= pair_weights[ca];
                ca += 1;
            }
            let a = by_class[ca][rng.random_range(0..by_class[ca].len())];
            let mut rb = rng.random_range(0..n - by_class[ca].len());
            let mut b = usize::MAX;
            for (c, members) in by_class.iter().enumerate() {
                if c == ca {
                    continue;
                }
                if rb < members.len() {
                    b = members[rb];
                    break;
                }
                rb -= members.len();
            }
            let j = pool[rng.random_range(0..pool.len())];
            let (xa, xb) = (self.data.value(a, j), self.data.value(b, j));
            if xa == xb {
                continue;
            }
            let alpha: f64 = rng.random();
            let threshold = alpha * xa + (1.0 - alpha) * xb;
            if let Some(s) = self.evaluate_threshold(samples, node, j, threshold) {
                return Some(s);
            }
        }
        None
    }

    /// One child per value of categorical `X_j`.
    pub fn multiway_split(
        &self,
        samples: &[usize],
        node: &NodeView,
        j: usize,
        used: &FeatureSet,
    ) -> Result<MultiwaySplit> {
        let arity = match self.data.kind(j) {
            FeatureKind::Categorical { cardinality } => cardinality,
            FeatureKind::Ordered => return Err(Error::OrderedFeature(j)),
        };
        if used.contains(j) {
            return Err(Error::FeatureAlreadyUsed(j));
        }
        let children = self.multiway_children(samples, j, arity);
        let parent_total = node.stats.total();
        let mut decrease = node.impurity;
        for c in children.iter().filter(|c| c.total() > 0.0) {
            decrease -= c.total() / parent_total * c.impurity_unchecked(self.criterion);
        }
        Ok(MultiwaySplit {
            feature: j,
            arity,
            decrease: if decrease < crate::criteria::DECREASE_EPSILON { decrease.max(0.0) } else { decrease },
            child_weights: children.iter().map(NodeStats::total).collect(),
        })
    }

    pub(crate) fn multiway_children(&self, samples: &[usize], j: usize, arity: usize) -> Vec<NodeStats> {
        let col = self.data.column(j);
        let mut children = vec![NodeStats::for_task(self.data.task()); arity];
        for &i in samples {
            children[col[i] as usize].add(self.data.target(i), self.weights[i]);
        }
        children
    }

    /// Candidate multiway split variables: unused on the branch and not
    /// constant on the node. Constant ones are added to `node.constant`.
    pub(crate) fn multiway_candidates(&self, samples: &[usize], node: &mut NodeView, used: &FeatureSet, pool: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for &j in pool {
            if used.contains(j) || node.constant.contains(j) || !self.data.kind(j).is_categorical() {
                continue;
            }
            let col = self.data.column(j);
            let first = col[samples[0]];
            if samples.iter().all(|&i| col[i] == first) {
                node.constant.insert(j);
            } else {
                out.push(j);
            }
        }
        out
    }
}

/// Reorders `samples` so rows with `x_j <= threshold` come first; returns
/// the number of such rows.
pub fn partition(samples: &mut [usize], column: &[f64], threshold: f64) -> usize {
    let mut pos = 0;
    for k in 0..samples.len() {
        if column[samples[k]] <= threshold {
            samples.swap(pos, k);
            pos += 1;
        }
    }
    pos
}

/// Groups `samples` by categorical code; returns the `arity + 1` group
/// boundaries.
pub fn partition_multiway(samples: &mut [usize], column: &[f64], arity: usize) -> Vec<usize> {
    samples.sort_by_key(|&i| column[i] as usize);
    let mut bounds = vec![0; arity + 1];
    for &i in samples.iter() {
        bounds[column[i] as usize + 1] += 1;
    }
    for v in 0..arity {
        bounds[v + 1] += bounds[v];
    }
    bounds
}
