//! Ensembles of randomized trees: bagging, pasting, random subspaces and
//! random patches, with out-of-bag estimates and proximities.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Schema, Task};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose, Rng};
use crate::tree::serialize::{check_header, TreeBody};
use crate::tree::{argmax, grow, BuildConfig, Prediction, Tree};

pub const FOREST_FORMAT: &str = "patchwood-forest";
pub const FOREST_VERSION: u32 = 1;

/// How each tree sees the learning set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sampling {
    #[default]
    None,
    /// N draws with replacement, kept as multiplicity weights.
    Bootstrap,
    /// ⌈α_s·N⌉ rows without replacement.
    Pasting { alpha_s: f64 },
    /// ⌈α_f·p⌉ features without replacement.
    Subspace { alpha_f: f64 },
    Patch { alpha_s: f64, alpha_f: f64 },
}

impl Sampling {
    /// Builds a sampling scheme from a CLI-style token.
    pub fn from_token(token: &str, alpha_s: f64, alpha_f: f64) -> Result<Self> {
        Ok(match token {
            "none" => Sampling::None,
            "bootstrap" => Sampling::Bootstrap,
            "pasting" => Sampling::Pasting { alpha_s },
            "subspace" => Sampling::Subspace { alpha_f },
            "patch" => Sampling::Patch { alpha_s, alpha_f },
            other => return Err(Error::InvalidConfig(format!("unknown sampling {other:?}"))),
        })
    }

    fn alphas(self) -> (f64, f64) {
        match self {
            Sampling::None | Sampling::Bootstrap => (1.0, 1.0),
            Sampling::Pasting { alpha_s } => (alpha_s, 1.0),
            Sampling::Subspace { alpha_f } => (1.0, alpha_f),
            Sampling::Patch { alpha_s, alpha_f } => (alpha_s, alpha_f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean of tree outputs; class probabilities for classification.
    #[default]
    Average,
    SoftVote,
    Majority,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Self::Average),
            "soft_vote" | "soft-vote" => Ok(Self::SoftVote),
            "majority" => Ok(Self::Majority),
            other => Err(Error::InvalidConfig(format!("unknown aggregation {other:?}"))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Average => "average",
            Self::SoftVote => "soft_vote",
            Self::Majority => "majority",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub sampling: Sampling,
    pub base: BuildConfig,
    pub aggregation: Aggregation,
    pub seed: u64,
    /// Worker threads: 0 runs on the ambient rayon pool, 1 fits serially.
    /// Does not affect the result.
    #[serde(skip_serializing)]
    pub n_threads: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            sampling: Sampling::None,
            base: BuildConfig::default(),
            aggregation: Aggregation::Average,
            seed: 0,
            n_threads: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidConfig("a forest needs at least one tree".into()));
        }
        let (a_s, a_f) = self.sampling.alphas();
        for (name, a) in [("alpha_s", a_s), ("alpha_f", a_f)] {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {a}")));
            }
        }
        if !ds.task().is_classification() && self.aggregation != Aggregation::Average {
            return Err(Error::InvalidConfig(format!(
                "aggregation {} needs a classification task",
                self.aggregation
            )));
        }
        self.base.validate(ds)
    }
}

/// ⌈α·n⌉ clamped to [1, n]; tolerant of products like 0.3·10.
pub fn subset_size(n: usize, alpha: f64) -> usize {
    ((alpha * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Draws a random patch. A full set is returned without touching `rng`, so
/// `α_s = 1` and `α_f = 1` reduce exactly to subspace and pasting draws.
pub fn draw_patch(n: usize, p: usize, alpha_s: f64, alpha_f: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    let mut draw = |total: usize, alpha: f64| -> Vec<usize> {
        let k = subset_size(total, alpha);
        if k >= total {
            return (0..total).collect();
        }
        let mut idx = sample_indices(rng, total, k).into_vec();
        idx.sort_unstable();
        idx
    };
    let samples = draw(n, alpha_s);
    let features = draw(p, alpha_f);
    (samples, features)
}

/// One fitted tree and the view of the data it was grown on.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub tree: Tree,
    /// Features the tree could split on (sorted, global indices).
    pub features: Vec<usize>,
    /// Multiplicity of each training row; `None` when every row was used once.
    pub in_bag: Option<Vec<u32>>,
}

impl Member {
    pub fn is_in_bag(&self, i: usize) -> bool {
        self.in_bag.as_ref().is_none_or(|b| b[i] > 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub config: ForestConfig,
    pub task: Task,
    pub n_features: usize,
    pub n_samples: usize,
    pub schema: Option<Schema>,
    pub members: Vec<Member>,
}

/// Out-of-bag estimate with per-row coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct OobReport {
    pub error: f64,
    /// Number of trees for which each row was out of bag.
    pub coverage: Vec<usize>,
    /// Rows with zero coverage, excluded from `error`.
    pub n_excluded: usize,
}

fn thread_pool(n_threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n_threads)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))
}

fn fit_member(ds: &Dataset, cfg: &ForestConfig, m: usize) -> Result<Member> {
    let n = ds.n_samples();
    let p = ds.n_features();
    let mut rows_rng = rng::stream(cfg.seed, m as u64, Purpose::Rows);
    let (in_bag, features) = match cfg.sampling {
        Sampling::Bootstrap => {
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rows_rng.random_range(0..n)] += 1;
            }
            (Some(counts), (0..p).collect())
        }
        s => {
            let (a_s, a_f) = s.alphas();
            let (rows, features) = draw_patch(n, p, a_s, a_f, &mut rows_rng);
            let in_bag = (rows.len() < n).then(|| {
                let mut counts = vec![0u32; n];
                for i in rows {
                    counts[i] = 1;
                }
                counts
            });
            (in_bag, features)
        }
    };
    let weights: Vec<f64> = match &in_bag {
        Some(c) => ds.weights().iter().zip(c).map(|(w, &c)| w * c as f64).collect(),
        None => ds.weights().to_vec(),
    };
    let mut build_rng = rng::stream(cfg.seed, m as u64, Purpose::Build);
    let mut tree = grow(ds, &weights, &features, &cfg.base, &mut build_rng)?;
    tree.schema = None;
    Ok(Member { tree, features, in_bag })
}

impl Forest {
    /// Grows `cfg.n_trees` trees in parallel. Tree `m` draws from its own
    /// random streams, so the output does not depend on the thread count.
    pub fn fit(ds: &Dataset, cfg: &ForestConfig) -> Result<Forest> {
        cfg.validate(ds)?;
        let fit_all = || {
            (0..cfg.n_trees)
                .into_par_iter()
                .map(|m| fit_member(ds, cfg, m))
                .collect::<Result<Vec<_>>>()
        };
        let members = match cfg.n_threads {
            0 => fit_all()?,
            1 => (0..cfg.n_trees).map(|m| fit_member(ds, cfg, m)).collect::<Result<Vec<_>>>()?,
            n => thread_pool(n)?.install(fit_all)?,
        };
        Ok(Forest {
            config: cfg.clone(),
            task: ds.task(),
            n_features: ds.n_features(),
            n_samples: ds.n_samples(),
            schema: Some(ds.schema().clone()),
            members,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.members.len()
    }

    pub fn trees(&self) -> impl Iterator<Item = &Tree> {
        self.members.iter().map(|m| &m.tree)
    }

    /// Leaf output of every tree at `x`.
    pub fn tree_outputs(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.trees().map(|t| t.predict_proba(x)).collect()
    }

    /// Aggregated output: class probabilities (vote shares under majority)
    /// or `[mean]`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.aggregate(self.trees().map(|t| t.predict_proba(x)).collect::<Result<Vec<_>>>()?.iter())
    }

    fn aggregate<'a>(&self, outputs: impl Iterator<Item = &'a Vec<f64>>) -> Result<Vec<f64>> {
        let width = self.task.n_classes().unwrap_or(1);
        let mut acc = vec![0.0; width];
        let mut count = 0usize;
        for out in outputs {
            if self.config.aggregation == Aggregation::Majority {
                acc[argmax(out)] += 1.0;
            } else {
                for (a, v) in acc.iter_mut().zip(out) {
                    *a += v;
                }
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidConfig("empty forest".into()));
        }
        for a in &mut acc {
            *a /= count as f64;
        }
        Ok(acc)
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

    /// Predictions for many rows, in parallel over rows.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        rows.par_iter().map(|x| self.predict(x)).collect()
    }

    /// Weighted 0-1 loss or squared error of the ensemble on `ds`.
    pub fn error(&self, ds: &Dataset) -> Result<f64> {
        let rows: Vec<Vec<f64>> = ds.rows().collect();
        let preds = self.predict_rows(&rows)?;
        weighted_loss(ds, preds.iter().map(|p| Some(p.as_f64())))
    }

    /// Out-of-bag error on the training set `ds`.
    pub fn oob_error(&self, ds: &Dataset) -> Result<OobReport> {
        if ds.n_samples() != self.n_samples {
            return Err(Error::DimensionMismatch {
                expected: self.n_samples,
                found: ds.n_samples(),
            });
        }
        if self.members.iter().all(|m| m.in_bag.is_none()) {
            return Err(Error::OobUndefined);
        }
        let results: Vec<(usize, Option<f64>)> = (0..ds.n_samples())
            .into_par_iter()
            .map(|i| -> Result<(usize, Option<f64>)> {
                let x = ds.row(i);
                let mut acc: Option<Vec<f64>> = None;
                let mut covered = 0;
                for m in self.members.iter().filter(|m| !m.is_in_bag(i)) {
                    let out = m.tree.predict_proba(&x)?;
                    let acc = acc.get_or_insert_with(|| vec![0.0; out.len()]);
                    for (a, v) in acc.iter_mut().zip(&out) {
                        *a += v;
                    }
                    covered += 1;
                }
                let pred = acc.map(|a| {
                    if self.task.is_classification() {
                        argmax(&a) as f64
                    } else {
                        a[0] / covered as f64
                    }
                });
                Ok((covered, pred))
            })
            .collect::<Result<_>>()?;
        let coverage: Vec<usize> = results.iter().map(|r| r.0).collect();
        let n_excluded = coverage.iter().filter(|&&c| c == 0).count();
        if n_excluded == ds.n_samples() {
            return Err(Error::NoOobCoverage);
        }
        let error = weighted_loss(ds, results.iter().map(|r| r.1))?;
        Ok(OobReport {
            error,
            coverage,
            n_excluded,
        })
    }

    /// Leaf index reached by `x` in every tree.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.trees().map(|t| t.apply(x)).collect()
    }

    /// Fraction of trees in which `x1` and `x2` share a leaf.
    pub fn proximity(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        let a = self.apply(x1)?;
        let b = self.apply(x2)?;
        Ok(shared_leaves(&a, &b, self.n_trees()))
    }

    pub fn proximity_matrix(&self, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
        let leaves: Vec<Vec<usize>> = (0..ds.n_samples())
            .into_par_iter()
            .map(|i| self.apply(&ds.row(i)))
            .collect::<Result<_>>()?;
        let m = self.n_trees();
        Ok(leaves
            .par_iter()
            .map(|a| leaves.iter().map(|b| shared_leaves(a, b, m)).collect())
            .collect())
    }
}

fn shared_leaves(a: &[usize], b: &[usize], m: usize) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / m as f64
}

/// Weighted loss over rows with a prediction; `None` rows are skipped.
fn weighted_loss(ds: &Dataset, preds: impl Iterator<Item = Option<f64>>) -> Result<f64> {
    let classification = ds.task().is_classification();
    let mut loss = 0.0;
    let mut total = 0.0;
    for (i, pred) in preds.enumerate() {
        let Some(pred) = pred else { continue };
        let w = ds.weights()[i];
        let y = ds.target(i);
        loss += w * if classification {
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

#[derive(Serialize, Deserialize)]
struct MemberDocument {
    features: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_bag: Option<Vec<u32>>,
    tree: TreeBody,
}

#[derive(Serialize, Deserialize)]
struct ForestDocument {
    format: String,
    version: u32,
    config: ForestConfig,
    task: Task,
    n_features: usize,
    n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<Schema>,
    trees: Vec<MemberDocument>,
}

impl Forest {
    pub fn to_json(&self) -> Result<String> {
        let doc = ForestDocument {
            format: FOREST_FORMAT.into(),
            version: FOREST_VERSION,
            config: self.config.clone(),
            task: self.task,
            n_features: self.n_features,
            n_samples: self.n_samples,
            schema: self.schema.clone(),
            trees: self
                .members
                .iter()
                .map(|m| MemberDocument {
                    features: m.features.clone(),
                    in_bag: m.in_bag.clone(),
                    tree: (&m.tree).into(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        let doc: ForestDocument = serde_json::from_str(text)?;
        check_header(&doc.format, doc.version, FOREST_FORMAT, FOREST_VERSION)?;
        if doc.trees.is_empty() {
            return Err(Error::Format("forest has no trees".into()));
        }
        let mut members = Vec::with_capacity(doc.trees.len());
        for (m, t) in doc.trees.into_iter().enumerate() {
            let tree = t.tree.into_tree(None)?;
            if tree.task != doc.task || tree.n_features != doc.n_features {
                return Err(Error::Format(format!("tree {m} disagrees with the forest's task")));
            }
            if t.features.iter().any(|&j| j >= doc.n_features) {
                return Err(Error::Format(format!("tree {m}: feature subset out of range")));
            }
            if t.in_bag.as_ref().is_some_and(|b| b.len() != doc.n_samples) {
                return Err(Error::Format(format!("tree {m}: in-bag record has the wrong length")));
            }
            members.push(Member {
                tree,
                features: t.features,
                in_bag: t.in_bag,
            });
        }
        Ok(Forest {
            config: doc.config,
            task: doc.task,
            n_features: doc.n_features,
            n_samples: doc.n_samples,
            schema: doc.schema,
            members,
        })
    }

    /// Serialized trees and in-bag records only; two runs that grew the
    /// same trees from the same rows compare equal here.
    pub fn members_json(&self) -> Result<String> {
        let docs: Vec<MemberDocument> = self
            .members
            .iter()
            .map(|m| MemberDocument {
                features: m.features.clone(),
                in_bag: m.in_bag.clone(),
                tree: (&m.tree).into(),
            })
            .collect();
        Ok(serde_json::to_string(&docs)?)
    }
}

pub fn save_forest(forest: &Forest, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, forest.to_json()?)?;
    Ok(())
}

pub fn load_forest(path: impl AsRef<Path>) -> Result<Forest> {
    Forest::from_json(&std::fs::read_to_string(path)?)
}
