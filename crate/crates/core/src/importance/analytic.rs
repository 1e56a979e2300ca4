use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImportanceMethod, ImportanceReport};
use crate::dataset::DiscreteJoint;
use crate::error::{Error, Result};

/// Largest number of input variables the exact engine accepts by default.
pub const MAX_ANALYTIC_VARIABLES: usize = 16;

/// C(n, k) as a real; 0 outside `0 <= k <= n`.
fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact MDI importances of infinite ensembles of fully developed totally
/// randomized trees, from the entropy of every marginal of the joint.
pub struct AnalyticEngine {
    p: usize,
    /// `h[mask]` = H(X_mask), `hy[mask]` = H(X_mask, Y).
    h: Vec<f64>,
    hy: Vec<f64>,
}

impl AnalyticEngine {
    pub fn new(joint: &DiscreteJoint) -> Result<Self> {
        Self::with_limit(joint, MAX_ANALYTIC_VARIABLES)
    }

    pub fn with_limit(joint: &DiscreteJoint, limit: usize) -> Result<Self> {
        let p = joint.n_vars();
        if p > limit || p > 30 {
            return Err(Error::TooManyVariables { p, limit: limit.min(30) });
        }
        let (h, hy) = (0..1u64 << p)
            .into_par_iter()
            .map(|m| (joint.marginal_entropy(m, false), joint.marginal_entropy(m, true)))
            .unzip();
        Ok(Self { p, h, hy })
    }

    pub fn n_vars(&self) -> usize {
        self.p
    }

    /// `I(X_j; Y | X_B)` for the conditioning set given as a bit mask.
    pub fn cmi_mask(&self, j: usize, b: usize) -> f64 {
        let xb = b | 1 << j;
        (self.h[xb] + self.hy[b] - self.hy[xb] - self.h[b]).max(0.0)
    }

    pub fn output_entropy(&self) -> f64 {
        self.hy[0]
    }

    /// `sums[j][k]` = Σ over |B| = k, B ⊆ V∖{j}, of I(X_j; Y | B).
    fn degree_sums(&self) -> Vec<Vec<f64>> {
        let p = self.p;
        (0..p)
            .into_par_iter()
            .map(|j| {
                let mut sums = vec![0.0; p];
                for b in 0..1usize << p {
                    if b >> j & 1 == 0 {
                        sums[b.count_ones() as usize] += self.cmi_mask(j, b);
                    }
                }
                sums
            })
            .collect()
    }

    fn weighted(&self, method: ImportanceMethod, weight: impl Fn(usize) -> f64) -> ImportanceReport {
        let by_degree = self
            .degree_sums()
            .into_iter()
            .map(|row| row.into_iter().enumerate().map(|(k, s)| weight(k) * s).collect())
            .collect();
        ImportanceReport::from_degrees(method, by_degree)
    }

    /// Σ_k 1/(C(p,k)(p-k)) Σ_{|B|=k} I(X_j; Y | B).
    pub fn trt(&self) -> ImportanceReport {
        let p = self.p;
        self.weighted(ImportanceMethod::AnalyticTrt, |k| 1.0 / (binom(p, k) * (p - k) as f64))
    }

    fn check_depth(&self, q: usize) -> Result<()> {
        if q < 1 || q > self.p {
            return Err(Error::DepthOutOfRange { q, p: self.p });
        }
        Ok(())
    }

    /// Trees pruned at depth `q`: the sum over k stops at `q - 1`.
    pub fn pruned(&self, q: usize) -> Result<ImportanceReport> {
        self.check_depth(q)?;
        let p = self.p;
        Ok(self.weighted(ImportanceMethod::AnalyticPruned { depth: q }, |k| {
            if k < q {
                1.0 / (binom(p, k) * (p - k) as f64)
            } else {
                0.0
            }
        }))
    }

    /// Fully developed trees on random subspaces of `q` variables, weighted
    /// by the probability of each subspace containing `X_j` and `B`.
    pub fn subspace(&self, q: usize) -> Result<ImportanceReport> {
        self.check_depth(q)?;
        let p = self.p;
        Ok(self.weighted(ImportanceMethod::AnalyticSubspace { size: q }, |k| {
            if k < q {
                binom(p - k - 1, q - k - 1) / binom(p, q) / binom(q, k) / (q - k) as f64
            } else {
                0.0
            }
        }))
    }
}

pub fn analytic_mdi_trt(joint: &DiscreteJoint) -> Result<ImportanceReport> {
    Ok(AnalyticEngine::new(joint)?.trt())
}

pub fn analytic_mdi_pruned(joint: &DiscreteJoint, q: usize) -> Result<ImportanceReport> {
    AnalyticEngine::new(joint)?.pruned(q)
}

pub fn analytic_mdi_subspace(joint: &DiscreteJoint, q: usize) -> Result<ImportanceReport> {
    AnalyticEngine::new(joint)?.subspace(q)
}

/// Effect of appending exact copies of `X_j` to the inputs, checked
/// against the closed forms for redundant variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyReport {
    pub feature: usize,
    pub n_copies: usize,
    pub before: ImportanceReport,
    /// Importances on the augmented inputs (copies last).
    pub after: ImportanceReport,
    /// Closed-form importances of the original variables after duplication.
    pub predicted: Vec<f64>,
    /// Largest |after - predicted| over the degree terms of `X_j`.
    pub max_term_deviation: f64,
    /// Largest |after - predicted| over the totals of the original variables.
    pub max_total_deviation: f64,
}

pub fn redundancy_factor_check(joint: &DiscreteJoint, j: usize, n_copies: usize) -> Result<RedundancyReport> {
    let p = joint.n_vars();
    if j >= p {
        return Err(Error::FeatureOutOfRange { index: j, n_features: p });
    }
    if n_copies == 0 {
        return Err(Error::InvalidConfig("at least one copy is needed".into()));
    }
    let base = AnalyticEngine::new(joint)?;
    let before = base.trt();
    let mut augmented = joint.clone();
    for _ in 0..n_copies {
        augmented = augmented.append_copy(j)?;
    }
    let after = AnalyticEngine::new(&augmented)?.trt();

    let nc = n_copies;
    let shrink = |k: usize| binom(p, k) * (p - k) as f64 / (binom(p + nc, k) * (p + nc - k) as f64);
    let w = |k: usize| 1.0 / (binom(p, k) * (p - k) as f64);
    let gain = |k: usize| -> f64 {
        (1..=nc + 1)
            .map(|kk| binom(nc + 1, kk) / binom(p + nc, k + kk) / (p + nc - k - kk) as f64)
            .sum()
    };

    let mut max_term_deviation: f64 = 0.0;
    for k in 0..p + nc {
        let expected = if k < p { shrink(k) * before.by_degree[j][k] } else { 0.0 };
        max_term_deviation = max_term_deviation.max((after.by_degree[j][k] - expected).abs());
    }

    let mut predicted = vec![0.0; p];
    predicted[j] = (0..p).map(|k| shrink(k) * before.by_degree[j][k]).sum();
    for (l, pred) in predicted.iter_mut().enumerate() {
        if l == j {
            continue;
        }
        // B ranges over subsets of V minus {l, j}
        for b in 0..1usize << p {
            if b >> l & 1 == 1 || b >> j & 1 == 1 {
                continue;
            }
            let k = b.count_ones() as usize;
            *pred += shrink(k) * w(k) * base.cmi_mask(l, b) + gain(k) * base.cmi_mask(l, b | 1 << j);
        }
    }
    let max_total_deviation = (0..p)
        .map(|l| (after.totals[l] - predicted[l]).abs())
        .fold(0.0, f64::max);
    Ok(RedundancyReport {
        feature: j,
        n_copies,
        before,
        after,
        predicted,
        max_term_deviation,
        max_total_deviation,
    })
}
