use std::io::Write;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::Criterion;
use crate::dataset::{gen_friedman1, Dataset, FeatureKind, Schema, Task};
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestConfig, Sampling};
use crate::rng::{self, mix, Purpose};
use crate::splitter::SplitterKind;
use crate::tree::BuildConfig;

/// Mean leaf depth of fully developed random-threshold trees, root counted
/// at depth 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub mean_leaf_depth: f64,
    pub std_err: f64,
    pub n_trees: usize,
    pub n: usize,
}

/// `2 H_n - 1`, the expected depth under equiprobable partition sizes.
pub fn harmonic_depth(n: usize) -> f64 {
    2.0 * (1..=n).map(|k| 1.0 / k as f64).sum::<f64>() - 1.0
}

/// Grows `n_trees` single-feature trees on `n` distinct, equally spaced
/// values with uniform random thresholds until every leaf holds one row.
pub fn depth_experiment(n: usize, n_trees: usize, seed: u64) -> Result<DepthReport> {
    if n == 0 || n_trees == 0 {
        return Err(Error::InvalidConfig("need at least one row and one tree".into()));
    }
    let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let ds = Dataset::new(
        vec![x.clone()],
        x,
        None,
        Schema::generic(&[FeatureKind::Ordered], Task::Regression),
    )?;
    let cfg = ForestConfig {
        n_trees,
        sampling: Sampling::None,
        base: BuildConfig {
            criterion: Criterion::Mse,
            splitter: SplitterKind::Ets,
            max_features: Some(1),
            ..BuildConfig::default()
        },
        seed,
        ..ForestConfig::default()
    };
    let forest = Forest::fit(&ds, &cfg)?;
    let depths: Vec<f64> = forest.trees().map(|t| t.mean_leaf_depth() + 1.0).collect();
    let mean = depths.iter().sum::<f64>() / n_trees as f64;
    let var = if n_trees > 1 {
        depths.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n_trees - 1) as f64
    } else {
        0.0
    };
    Ok(DepthReport {
        mean_leaf_depth: mean,
        std_err: (var / n_trees as f64).sqrt(),
        n_trees,
        n,
    })
}

/// Expected plug-in mutual information (bits) between independent
/// variables, to first order.
pub fn mi_bias_expected(card_x: usize, card_y: usize, n: usize) -> f64 {
    ((card_x - 1) * (card_y - 1)) as f64 / (2.0 * n as f64 * std::f64::consts::LN_2)
}

fn entropy_of_counts(counts: &[usize], n: usize) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

/// Mean plug-in estimate of I(X; Y) over `n_trials` samples of size `n`
/// drawn with X and Y independent and uniform.
pub fn mi_bias_check(card_x: usize, card_y: usize, n: usize, n_trials: usize, seed: u64) -> Result<f64> {
    if card_x == 0 || card_y == 0 || n == 0 || n_trials == 0 {
        return Err(Error::InvalidConfig("cardinalities, sample size and trials must be positive".into()));
    }
    let total: f64 = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64, Purpose::Data);
            let mut joint = vec![0usize; card_x * card_y];
            let mut cx = vec![0usize; card_x];
            let mut cy = vec![0usize; card_y];
            for _ in 0..n {
                let (x, y) = (r.random_range(0..card_x), r.random_range(0..card_y));
                joint[x * card_y + y] += 1;
                cx[x] += 1;
                cy[y] += 1;
            }
            (entropy_of_counts(&cx, n) + entropy_of_counts(&cy, n) - entropy_of_counts(&joint, n)).max(0.0)
        })
        .sum();
    Ok(total / n_trials as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Training set size.
    N,
    /// Number of input variables.
    P,
    /// Features drawn per node.
    K,
    /// Number of trees.
    M,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" => Ok(Self::N),
            "p" | "P" => Ok(Self::P),
            "K" | "k" => Ok(Self::K),
            "M" | "m" => Ok(Self::M),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    pub base: ForestConfig,
    pub n_train: usize,
    pub p_total: usize,
    pub n_test: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            base: ForestConfig {
                n_trees: 250,
                base: BuildConfig {
                    criterion: Criterion::Mse,
                    splitter: SplitterKind::Ets,
                    max_features: Some(3),
                    ..BuildConfig::default()
                },
                ..ForestConfig::default()
            },
            n_train: 1000,
            p_total: 10,
            n_test: 1000,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: usize,
    pub n_train: usize,
    pub p: usize,
    pub k: usize,
    pub m: usize,
    pub fit_seconds: f64,
    /// Mean over trees of the weighted leaf depth, root at 0.
    pub mean_depth: f64,
    pub test_mse: f64,
}

/// Fit time, depth and held-out error on Friedman #1 along one axis.
pub fn scaling_sweep(axis: SweepAxis, grid: &[usize], opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut cfg = opts.base.clone();
        let (mut n_train, mut p) = (opts.n_train, opts.p_total);
        match axis {
            SweepAxis::N => n_train = value,
            SweepAxis::P => p = value,
            SweepAxis::K => cfg.base.max_features = Some(value),
            SweepAxis::M => cfg.n_trees = value,
        }
        if let Some(k) = cfg.base.max_features {
            cfg.base.max_features = Some(k.min(p));
        }
        let train = gen_friedman1(n_train, p, opts.noise_sd, mix(opts.seed, 1))?;
        let test = gen_friedman1(opts.n_test, p, opts.noise_sd, mix(opts.seed, 2))?;
        let start = Instant::now();
        let forest = Forest::fit(&train, &cfg)?;
        let fit_seconds = start.elapsed().as_secs_f64();
        let mean_depth = forest.trees().map(|t| t.mean_leaf_depth()).sum::<f64>() / forest.n_trees() as f64;
        rows.push(SweepRow {
            axis,
            value,
            n_train,
            p,
            k: cfg.base.resolved_k(p),
            m: cfg.n_trees,
            fit_seconds,
            mean_depth,
            test_mse: forest.error(&test)?,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
