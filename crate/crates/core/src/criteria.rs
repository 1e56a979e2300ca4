//! Impurity functions and the running node statistics behind linear-time
//! split evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    /// Shannon entropy in bits.
    Entropy,
    Mse,
}

impl Criterion {
    pub fn for_classification(self) -> bool {
        !matches!(self, Criterion::Mse)
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            "mse" => Ok(Criterion::Mse),
            other => Err(Error::InvalidConfig(format!("unknown criterion {other:?}"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
            Criterion::Mse => "mse",
        })
    }
}

/// Decreases below this are treated as exactly zero.
pub const DECREASE_EPSILON: f64 = 1e-12;
const COUNT_TOLERANCE: f64 = 1e-9;

/// Weighted class counts of a node.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    counts: Vec<f64>,
    total: f64,
}

impl ClassStats {
    pub fn new(n_classes: usize) -> Self {
        Self {
            counts: vec![0.0; n_classes],
            total: 0.0,
        }
    }

    pub fn from_counts(counts: Vec<f64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    #[inline]
    pub fn add(&mut self, class: usize, weight: f64) {
        self.counts[class] += weight;
        self.total += weight;
    }

    #[inline]
    pub fn remove(&mut self, class: usize, weight: f64) {
        self.counts[class] -= weight;
        self.total -= weight;
    }

    pub fn clear(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0.0);
        self.total = 0.0;
    }

    /// Number of classes carrying positive weight.
    pub fn n_present(&self) -> usize {
        self.counts.iter().filter(|&&c| c > COUNT_TOLERANCE).count()
    }
}

/// Weighted first and second moments of the outputs of a node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegressionStats {
    pub sum: f64,
    pub sum_sq: f64,
    pub total: f64,
}

impl RegressionStats {
    pub fn from_samples(samples: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut s = Self::default();
        for (y, w) in samples {
            s.add(y, w);
        }
        s
    }

    #[inline]
    pub fn add(&mut self, y: f64, w: f64) {
        self.sum += w * y;
        self.sum_sq += w * y * y;
        self.total += w;
    }

    #[inline]
    pub fn remove(&mut self, y: f64, w: f64) {
        self.sum -= w * y;
        self.sum_sq -= w * y * y;
        self.total -= w;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.total
    }
}

#[inline]
fn gini_raw(s: &ClassStats) -> f64 {
    let t = s.total;
    let sq: f64 = s.counts.iter().map(|&c| (c / t) * (c / t)).sum();
    (1.0 - sq).max(0.0)
}

#[inline]
fn entropy_raw(s: &ClassStats) -> f64 {
    let t = s.total;
    let h: f64 = s
        .counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / t;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

#[inline]
fn mse_raw(s: &RegressionStats) -> f64 {
    let mean = s.sum / s.total;
    (s.sum_sq / s.total - mean * mean).max(0.0)
}

pub fn gini(stats: &ClassStats) -> Result<f64> {
    if !(stats.total > 0.0) {
        return Err(Error::ZeroTotal);
    }
    Ok(gini_raw(stats))
}

pub fn entropy(stats: &ClassStats) -> Result<f64> {
    if !(stats.total > 0.0) {
        return Err(Error::ZeroTotal);
    }
    Ok(entropy_raw(stats))
}

pub fn mse(stats: &RegressionStats) -> Result<f64> {
    if !(stats.total > 0.0) {
        return Err(Error::ZeroTotal);
    }
    Ok(mse_raw(stats))
}

/// Statistics of either kind of task.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeStats {
    Class(ClassStats),
    Regression(RegressionStats),
}

impl NodeStats {
    pub fn empty_like(&self) -> Self {
        match self {
            NodeStats::Class(c) => NodeStats::Class(ClassStats::new(c.counts.len())),
            NodeStats::Regression(_) => NodeStats::Regression(RegressionStats::default()),
        }
    }

    pub fn for_task(task: crate::dataset::Task) -> Self {
        match task.n_classes() {
            Some(j) => NodeStats::Class(ClassStats::new(j)),
            None => NodeStats::Regression(RegressionStats::default()),
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            NodeStats::Class(c) => c.total,
            NodeStats::Regression(r) => r.total,
        }
    }

    /// `y` is a class index for classification stats.
    #[inline]
    pub fn add(&mut self, y: f64, w: f64) {
        match self {
            NodeStats::Class(c) => c.add(y as usize, w),
            NodeStats::Regression(r) => r.add(y, w),
        }
    }

    #[inline]
    pub fn remove(&mut self, y: f64, w: f64) {
        match self {
            NodeStats::Class(c) => c.remove(y as usize, w),
            NodeStats::Regression(r) => r.remove(y, w),
        }
    }

    pub fn clear(&mut self) {
        match self {
            NodeStats::Class(c) => c.clear(),
            NodeStats::Regression(r) => *r = RegressionStats::default(),
        }
    }

    pub fn impurity(&self, criterion: Criterion) -> Result<f64> {
        if !(self.total() > 0.0) {
            return Err(Error::ZeroTotal);
        }
        self.check(criterion)?;
        Ok(self.impurity_unchecked(criterion))
    }

    pub(crate) fn check(&self, criterion: Criterion) -> Result<()> {
        match (self, criterion) {
            (NodeStats::Class(_), Criterion::Gini | Criterion::Entropy)
            | (NodeStats::Regression(_), Criterion::Mse) => Ok(()),
            _ => Err(Error::InvalidConfig(format!(
                "criterion {criterion} does not match the task"
            ))),
        }
    }

    /// Caller guarantees a positive total and a matching criterion.
    #[inline]
    pub(crate) fn impurity_unchecked(&self, criterion: Criterion) -> f64 {
        match (self, criterion) {
            (NodeStats::Class(c), Criterion::Gini) => gini_raw(c),
            (NodeStats::Class(c), Criterion::Entropy) => entropy_raw(c),
            (NodeStats::Regression(r), _) => mse_raw(r),
            (NodeStats::Class(c), Criterion::Mse) => gini_raw(c) / 2.0,
        }
    }

    /// Leaf value: weighted class counts, or the mean output.
    pub fn value(&self) -> Vec<f64> {
        match self {
            NodeStats::Class(c) => c.counts.clone(),
            NodeStats::Regression(r) => vec![if r.total > 0.0 { r.mean() } else { 0.0 }],
        }
    }

    /// Output homogeneous: one class present, or zero output variance.
    pub fn is_pure(&self) -> bool {
        match self {
            NodeStats::Class(c) => c.n_present() <= 1,
            NodeStats::Regression(r) => r.total <= 0.0 || mse_raw(r) <= DECREASE_EPSILON,
        }
    }
}

/// `i(t) - p_L i(t_L) - p_R i(t_R)`.
pub fn impurity_decrease(
    parent_impurity: f64,
    parent_total: f64,
    left: &NodeStats,
    right: &NodeStats,
    criterion: Criterion,
) -> Result<f64> {
    if !(left.total() > 0.0) || !(right.total() > 0.0) {
        return Err(Error::EmptyChild);
    }
    left.check(criterion)?;
    right.check(criterion)?;
    Ok(decrease_unchecked(parent_impurity, parent_total, left, right, criterion))
}

#[inline]
pub(crate) fn decrease_unchecked(
    parent_impurity: f64,
    parent_total: f64,
    left: &NodeStats,
    right: &NodeStats,
    criterion: Criterion,
) -> f64 {
    let pl = left.total() / parent_total;
    let pr = right.total() / parent_total;
    parent_impurity - pl * left.impurity_unchecked(criterion) - pr * right.impurity_unchecked(criterion)
}

/// Transfers `moved` `(y, weight)` samples from `right` to `left`.
/// On error both stats are left untouched.
pub fn shift_left(left: &mut NodeStats, right: &mut NodeStats, moved: &[(f64, f64)]) -> Result<()> {
    let mut new_left = left.clone();
    let mut new_right = right.clone();
    for &(y, w) in moved {
        new_left.add(y, w);
        new_right.remove(y, w);
    }
    let negative = match &new_right {
        NodeStats::Class(c) => c.counts.iter().any(|&v| v < -COUNT_TOLERANCE) || c.total < -COUNT_TOLERANCE,
        NodeStats::Regression(r) => r.total < -COUNT_TOLERANCE,
    };
    if negative {
        return Err(Error::NegativeTransfer);
    }
    *left = new_left;
    *right = new_right;
    Ok(())
}
