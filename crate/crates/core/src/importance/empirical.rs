use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{ImportanceMethod, ImportanceReport};
use crate::criteria::Criterion;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestConfig, Sampling};
use crate::rng::Rng;
use crate::splitter::SplitterKind;
use crate::tree::{BuildConfig, Tree};

/// Permutations averaged per variable unless told otherwise.
pub const DEFAULT_REPEATS: usize = 5;

/// `p(t)·Δi(t)` of every internal node of `tree`, by feature and depth.
/// `p(t)` is relative to the tree's own root weight.
pub fn tree_mdi(tree: &Tree, width: usize) -> Vec<Vec<f64>> {
    let n = &tree.nodes;
    let mut out = vec![vec![0.0; width]; tree.n_features];
    let root = n.n_node_samples[0];
    if !(root > 0.0) {
        return out;
    }
    let depths = tree.depths();
    for t in 0..n.node_count() {
        if n.is_leaf(t) {
            continue;
        }
        let nt = n.n_node_samples[t];
        let mut decrease = n.impurity[t];
        for c in n.children_of(t) {
            decrease -= n.n_node_samples[c] / nt * n.impurity[c];
        }
        out[n.feature[t] as usize][depths[t]] += nt / root * decrease;
    }
    out
}

/// Mean decrease of impurity, averaged over the trees of `forest`.
pub fn mdi(forest: &Forest) -> ImportanceReport {
    let width = forest
        .trees()
        .map(|t| t.max_depth() + 1)
        .max()
        .unwrap_or(1)
        .max(forest.n_features);
    let p = forest.n_features;
    let m = forest.n_trees() as f64;
    let sum = forest
        .members
        .par_iter()
        .map(|member| tree_mdi(&member.tree, width))
        .reduce(
            || vec![vec![0.0; width]; p],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        *x += y;
                    }
                }
                a
            },
        );
    let by_degree = sum.into_iter().map(|row| row.into_iter().map(|v| v / m).collect()).collect();
    ImportanceReport::from_degrees(ImportanceMethod::Mdi, by_degree)
}

/// Mean increase of the out-of-bag error when column `j` is shuffled.
pub fn permutation_importance(forest: &Forest, ds: &Dataset, repeats: usize, rng: &mut Rng) -> Result<ImportanceReport> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("at least one permutation is needed".into()));
    }
    if ds.n_features() != forest.n_features {
        return Err(Error::DimensionMismatch {
            expected: forest.n_features,
            found: ds.n_features(),
        });
    }
    let baseline = forest.oob_error(ds)?.error;
    let mut totals = vec![0.0; ds.n_features()];
    for (j, total) in totals.iter_mut().enumerate() {
        for _ in 0..repeats {
            let mut column = ds.column(j).to_vec();
            column.shuffle(rng);
            let shuffled = ds.with_column(j, column)?;
            *total += forest.oob_error(&shuffled)?.error - baseline;
        }
        *total /= repeats as f64;
    }
    Ok(ImportanceReport {
        method: ImportanceMethod::Permutation { repeats },
        totals,
        by_degree: Vec::new(),
        normalized: false,
    })
}

/// `n_trees` fully developed multiway trees, each node splitting on the
/// best of `k` random unused variables (entropy criterion). `k = 1` gives
/// totally randomized trees.
pub fn empirical_trt_forest(ds: &Dataset, k: usize, n_trees: usize, seed: u64) -> Result<Forest> {
    if let Some(j) = (0..ds.n_features()).find(|&j| !ds.kind(j).is_categorical()) {
        return Err(Error::OrderedFeature(j));
    }
    let cfg = ForestConfig {
        n_trees,
        sampling: Sampling::None,
        base: BuildConfig {
            criterion: Criterion::Entropy,
            splitter: SplitterKind::TrtMultiway,
            max_features: Some(k),
            ..BuildConfig::default()
        },
        seed,
        ..ForestConfig::default()
    };
    Forest::fit(ds, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_friedman1, gen_led};
    use crate::rng;

    #[test]
    fn stumps_put_everything_on_their_feature() {
        let ds = gen_friedman1(200, 6, 0.5, 1).unwrap();
        let forest = Forest::fit(
            &ds,
            &ForestConfig {
                n_trees: 5,
                sampling: Sampling::Subspace { alpha_f: 1.0 / 6.0 },
                base: BuildConfig {
                    criterion: Criterion::Mse,
                    max_depth: Some(1),
                    ..BuildConfig::default()
                },
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let report = mdi(&forest);
        for member in &forest.members {
            assert_eq!(member.features.len(), 1);
        }
        let used: Vec<usize> = forest.members.iter().map(|m| m.features[0]).collect();
        for j in 0..6 {
            assert_eq!(report.totals[j] > 0.0, used.contains(&j));
        }
    }

    #[test]
    fn trt_importances_telescope_to_output_entropy() {
        let ds = gen_led(10, 0).unwrap();
        for k in [1, 4, 7] {
            let forest = empirical_trt_forest(&ds, k, 50, 9).unwrap();
            assert!((mdi(&forest).sum() - 10f64.log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_column_has_zero_permutation_importance() {
        let ds = gen_friedman1(100, 6, 1.0, 2).unwrap();
        let ds = ds.with_column(5, vec![0.5; 100]).unwrap();
        let forest = Forest::fit(
            &ds,
            &ForestConfig {
                n_trees: 20,
                sampling: Sampling::Bootstrap,
                base: BuildConfig {
                    criterion: Criterion::Mse,
                    splitter: SplitterKind::RandomK,
                    max_features: Some(2),
                    ..BuildConfig::default()
                },
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let mut r = rng::seeded(0);
        let report = permutation_importance(&forest, &ds, 2, &mut r).unwrap();
        assert_eq!(report.totals[5], 0.0);
        assert!(report.totals[3] > 0.0);
    }

    #[test]
    fn ordered_features_are_rejected() {
        let ds = gen_friedman1(10, 5, 1.0, 2).unwrap();
        assert!(matches!(empirical_trt_forest(&ds, 1, 2, 0), Err(Error::OrderedFeature(0))));
    }
}
