use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Tree, TreeArrays};
use crate::criteria::{Criterion, DECREASE_EPSILON};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose, Rng};
use crate::splitter::{
    partition, partition_multiway, BinarySplit, FeatureSet, MultiwaySplit, NodeView, SplitContext, SplitterKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildOrder {
    #[default]
    DepthFirst,
    BestFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub criterion: Criterion,
    pub splitter: SplitterKind,
    /// K. Unset means p for `best`, 1 for `trt-multiway`, ⌊√p⌋ otherwise.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    /// Root is depth 0.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_weighted_decrease: f64,
    pub max_leaf_nodes: Option<usize>,
    pub order: BuildOrder,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            splitter: SplitterKind::Best,
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
            min_samples_leaf: 1,
            min_weighted_decrease: 0.0,
            max_leaf_nodes: None,
            order: BuildOrder::DepthFirst,
            seed: 0,
        }
    }
}

impl BuildConfig {
    pub fn resolved_k(&self, p: usize) -> usize {
        match (self.max_features, self.splitter) {
            (Some(k), _) => k,
            (None, SplitterKind::Best) => p,
            (None, SplitterKind::TrtMultiway) => 1,
            (None, _) => ((p as f64).sqrt().floor() as usize).max(1),
        }
    }

    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidConfig(m));
        if self.min_samples_split < 2 {
            return invalid(format!("min_samples_split must be at least 2, got {}", self.min_samples_split));
        }
        if self.min_samples_leaf < 1 {
            return invalid("min_samples_leaf must be at least 1".into());
        }
        if !(self.min_weighted_decrease >= 0.0) || !self.min_weighted_decrease.is_finite() {
            return invalid(format!("min_weighted_decrease must be a finite value >= 0, got {}", self.min_weighted_decrease));
        }
        if self.max_leaf_nodes.is_some_and(|m| m < 2) {
            return invalid("max_leaf_nodes must be at least 2".into());
        }
        let p = ds.n_features();
        let k = self.resolved_k(p);
        if k < 1 || k > p {
            return invalid(format!("max_features must lie in [1, {p}], got {k}"));
        }
        if self.criterion.for_classification() != ds.task().is_classification() {
            return invalid(format!("criterion {} does not match the task", self.criterion));
        }
        if self.splitter == SplitterKind::Pert && !ds.task().is_classification() {
            return invalid("pert requires a classification task".into());
        }
        if self.splitter == SplitterKind::TrtMultiway && !ds.kinds().iter().any(|k| k.is_categorical()) {
            return invalid("trt-multiway requires categorical features".into());
        }
        Ok(())
    }
}

/// Grows a tree on the full dataset with its own weights.
pub fn build(ds: &Dataset, cfg: &BuildConfig) -> Result<Tree> {
    cfg.validate(ds)?;
    let pool: Vec<usize> = (0..ds.n_features()).collect();
    let mut rng = rng::stream(cfg.seed, 0, Purpose::Build);
    grow(ds, ds.weights(), &pool, cfg, &mut rng)
}

/// Best-first growth; `cfg.max_leaf_nodes` must be set.
pub fn build_best_first(ds: &Dataset, cfg: &BuildConfig) -> Result<Tree> {
    if cfg.max_leaf_nodes.is_none() {
        return Err(Error::InvalidConfig("best-first growth needs max_leaf_nodes".into()));
    }
    let cfg = BuildConfig {
        order: BuildOrder::BestFirst,
        ..cfg.clone()
    };
    build(ds, &cfg)
}

/// Grows a tree on rows with positive `weights`, splitting only on
/// features in `pool`. The config is assumed validated.
pub(crate) fn grow(ds: &Dataset, weights: &[f64], pool: &[usize], cfg: &BuildConfig, rng: &mut Rng) -> Result<Tree> {
    if ds.n_samples() == 0 {
        return Err(Error::NoRows);
    }
    let samples: Vec<usize> = (0..ds.n_samples()).filter(|&i| weights[i] > 0.0).collect();
    if samples.is_empty() {
        return Err(Error::ZeroTotal);
    }
    let ctx = SplitContext::new(ds, weights, cfg.criterion, cfg.min_samples_leaf);
    let stats = ctx.stats_of(&samples);
    let impurity = stats.impurity(cfg.criterion)?;
    let root_total = stats.total();
    let mut nodes = TreeArrays::default();
    nodes.push(impurity, root_total, stats.value());
    let root = Pending {
        id: 0,
        depth: 0,
        node: NodeView {
            start: 0,
            end: samples.len(),
            constant: FeatureSet::with_capacity(ds.n_features()),
            stats,
            impurity,
        },
        used: FeatureSet::with_capacity(ds.n_features()),
    };
    let mut grower = Grower {
        ctx,
        cfg,
        pool,
        k: cfg.resolved_k(ds.n_features()).min(pool.len()).max(1),
        root_total,
        samples,
        nodes,
    };
    match (cfg.order, cfg.max_leaf_nodes) {
        (BuildOrder::DepthFirst, None) => grower.depth_first(root, rng),
        (_, limit) => grower.best_first(root, limit.unwrap_or(usize::MAX), rng),
    }
    Ok(Tree {
        task: ds.task(),
        criterion: cfg.criterion,
        n_features: ds.n_features(),
        schema: Some(ds.schema().clone()),
        nodes: grower.nodes,
    })
}

struct Pending {
    id: usize,
    depth: usize,
    node: NodeView,
    /// Categorical features already split on along the branch.
    used: FeatureSet,
}

enum Split {
    Binary(BinarySplit),
    Multiway(MultiwaySplit),
}

impl Split {
    fn decrease(&self) -> f64 {
        match self {
            Split::Binary(s) => s.decrease,
            Split::Multiway(s) => s.decrease,
        }
    }

    fn extra_leaves(&self) -> usize {
        match self {
            Split::Binary(_) => 1,
            Split::Multiway(s) => s.arity - 1,
        }
    }
}

struct Grower<'a> {
    ctx: SplitContext<'a>,
    cfg: &'a BuildConfig,
    pool: &'a [usize],
    k: usize,
    root_total: f64,
    samples: Vec<usize>,
    nodes: TreeArrays,
}

impl Grower<'_> {
    fn depth_first(&mut self, root: Pending, rng: &mut Rng) {
        let mut stack = vec![root];
        while let Some(mut pending) = stack.pop() {
            let Some(split) = self.find_split(&mut pending, rng) else {
                continue;
            };
            let children = self.apply_split(&pending, &split);
            // reversed so the first child is expanded next
            stack.extend(children.into_iter().rev());
        }
    }

    fn best_first(&mut self, root: Pending, max_leaves: usize, rng: &mut Rng) {
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        let mut leaves = 1;
        let mut enqueue = |g: &mut Self, mut p: Pending, heap: &mut BinaryHeap<Frontier>, rng: &mut Rng| {
            if let Some(split) = g.find_split(&mut p, rng) {
                let priority = p.node.stats.total() / g.root_total * split.decrease();
                heap.push(Frontier { priority, seq, pending: p, split });
                seq += 1;
            }
        };
        enqueue(self, root, &mut heap, rng);
        while let Some(f) = heap.pop() {
            if leaves + f.split.extra_leaves() > max_leaves {
                continue;
            }
            leaves += f.split.extra_leaves();
            for child in self.apply_split(&f.pending, &f.split) {
                enqueue(self, child, &mut heap, rng);
            }
        }
    }

    /// Applies stopping rules (a)-(f) and searches for a split.
    fn find_split(&mut self, p: &mut Pending, rng: &mut Rng) -> Option<Split> {
        let cfg = self.cfg;
        let node = &mut p.node;
        if node.len() < cfg.min_samples_split
            || cfg.max_depth.is_some_and(|d| p.depth >= d)
            || node.stats.is_pure()
            || self.pool.iter().all(|&j| node.constant.contains(j))
        {
            return None;
        }
        let samples = &self.samples[node.start..node.end];
        let split = match cfg.splitter {
            SplitterKind::Best => self
                .ctx
                .find_best_split_k(samples, node, self.pool, self.pool.len(), false, rng)
                .map(Split::Binary),
            SplitterKind::RandomK => self
                .ctx
                .find_best_split_k(samples, node, self.pool, self.k, false, rng)
                .map(Split::Binary),
            SplitterKind::Ets => self
                .ctx
                .find_best_split_k(samples, node, self.pool, self.k, true, rng)
                .map(Split::Binary),
            SplitterKind::Pert => self.ctx.draw_random_split_pert(samples, node, self.pool, rng).map(Split::Binary),
            SplitterKind::TrtMultiway => {
                let candidates = self.ctx.multiway_candidates(samples, node, &p.used, self.pool);
                self.pick_multiway(samples, node, &p.used, candidates, rng).map(Split::Multiway)
            }
        }?;
        let mut decrease = split.decrease();
        if decrease < DECREASE_EPSILON {
            decrease = 0.0;
        }
        if cfg.min_weighted_decrease > 0.0
            && node.stats.total() / self.root_total * decrease < cfg.min_weighted_decrease
        {
            return None;
        }
        Some(split)
    }

    /// Best of K multiway candidates drawn uniformly; random tie-break.
    fn pick_multiway(
        &self,
        samples: &[usize],
        node: &NodeView,
        used: &FeatureSet,
        candidates: Vec<usize>,
        rng: &mut Rng,
    ) -> Option<MultiwaySplit> {
        if candidates.is_empty() {
            return None;
        }
        let drawn: Vec<usize> = if self.k >= candidates.len() {
            candidates
        } else {
            sample_indices(rng, candidates.len(), self.k)
                .into_iter()
                .map(|i| candidates[i])
                .collect()
        };
        let splits: Vec<MultiwaySplit> = drawn
            .into_iter()
            .filter_map(|j| self.ctx.multiway_split(samples, node, j, used).ok())
            .collect();
        let best = splits.iter().map(|s| s.decrease).fold(f64::NEG_INFINITY, f64::max);
        let mut ties: Vec<MultiwaySplit> = splits.into_iter().filter(|s| s.decrease >= best - 1e-12).collect();
        ties.sort_by_key(|s| s.feature);
        let pick = if ties.len() > 1 { rng.random_range(0..ties.len()) } else { 0 };
        ties.into_iter().nth(pick)
    }

    /// Turns `p` into an internal node and returns its children.
    fn apply_split(&mut self, p: &Pending, split: &Split) -> Vec<Pending> {
        let ds = self.ctx.data;
        let crit = self.cfg.criterion;
        let (start, end) = (p.node.start, p.node.end);
        match split {
            Split::Binary(s) => {
                let pos = start + partition(&mut self.samples[start..end], ds.column(s.feature), s.threshold);
                let mut ids = Vec::with_capacity(2);
                let mut out = Vec::with_capacity(2);
                for (a, b) in [(start, pos), (pos, end)] {
                    let stats = self.ctx.stats_of(&self.samples[a..b]);
                    let impurity = stats.impurity_unchecked(crit);
                    let id = self.nodes.push(impurity, stats.total(), stats.value());
                    ids.push(id);
                    out.push(Pending {
                        id,
                        depth: p.depth + 1,
                        node: NodeView {
                            start: a,
                            end: b,
                            constant: p.node.constant.clone(),
                            stats,
                            impurity,
                        },
                        used: p.used.clone(),
                    });
                }
                let t = p.id;
                self.nodes.feature[t] = s.feature as i64;
                self.nodes.threshold[t] = s.threshold;
                self.nodes.left_child[t] = ids[0] as i64;
                self.nodes.right_child[t] = ids[1] as i64;
                out
            }
            Split::Multiway(s) => {
                let bounds = partition_multiway(&mut self.samples[start..end], ds.column(s.feature), s.arity);
                let mut used = p.used.clone();
                used.insert(s.feature);
                let mut ids = Vec::with_capacity(s.arity);
                let mut out = Vec::new();
                for v in 0..s.arity {
                    let (a, b) = (start + bounds[v], start + bounds[v + 1]);
                    if a == b {
                        // unobserved value: empty leaf carrying the parent's value
                        let value = self.nodes.value[p.id].clone();
                        ids.push(self.nodes.push(0.0, 0.0, value));
                        continue;
                    }
                    let stats = self.ctx.stats_of(&self.samples[a..b]);
                    let impurity = stats.impurity_unchecked(crit);
                    let id = self.nodes.push(impurity, stats.total(), stats.value());
                    ids.push(id);
                    out.push(Pending {
                        id,
                        depth: p.depth + 1,
                        node: NodeView {
                            start: a,
                            end: b,
                            constant: p.node.constant.clone(),
                            stats,
                            impurity,
                        },
                        used: used.clone(),
                    });
                }
                let t = p.id;
                self.nodes.feature[t] = s.feature as i64;
                self.nodes.left_child[t] = ids[0] as i64;
                self.nodes.right_child[t] = ids[ids.len() - 1] as i64;
                self.nodes.children[t] = ids;
                out
            }
        }
    }
}

struct Frontier {
    priority: f64,
    seq: u64,
    pending: Pending,
    split: Split,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
