use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Learner, Problem};
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestConfig};
use crate::rng::mix;

const TEST_STREAM: u64 = 0x7e57;
const MODEL_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasVarianceOptions {
    /// Independent learning sets.
    pub n_sets: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Models trained per learning set with different seeds; at least 2
    /// for a correlation estimate.
    pub models_per_set: usize,
    pub seed: u64,
}

impl Default for BiasVarianceOptions {
    fn default() -> Self {
        Self {
            n_sets: 50,
            n_train: 300,
            n_test: 200,
            models_per_set: 1,
            seed: 0,
        }
    }
}

impl BiasVarianceOptions {
    fn validate(&self) -> Result<()> {
        if self.n_sets < 2 || self.n_train < 1 || self.n_test < 1 || self.models_per_set < 1 {
            return Err(Error::InvalidConfig(
                "need at least 2 sets, 1 training row, 1 test row and 1 model per set".into(),
            ));
        }
        Ok(())
    }
}

/// Expected squared error of a learner split into noise, squared bias and
/// variance, averaged over test points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceReport {
    pub noise: f64,
    pub bias_sq: f64,
    pub variance: f64,
    /// `noise + bias_sq + variance`.
    pub total: f64,
    /// Mean squared error against noisy test outputs, measured directly.
    pub measured_error: f64,
    /// Standard errors over test points.
    pub bias_sq_se: f64,
    pub variance_se: f64,
    pub measured_error_se: f64,
    /// Correlation of same-set predictions; set when `models_per_set >= 2`.
    pub rho: Option<f64>,
    pub n_trees: usize,
    pub n_sets: usize,
    pub models_per_set: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance (n - 1 denominator); 0 for fewer than two values.
fn sample_var(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn std_err(v: &[f64]) -> f64 {
    (sample_var(v) / v.len() as f64).sqrt()
}

struct Grid {
    /// `preds[s][r][i]`: set, model, test point.
    preds: Vec<Vec<Vec<f64>>>,
    test_x: Vec<Vec<f64>>,
    test_y: Vec<f64>,
}

fn prediction_grid(problem: &dyn Problem, learner: &dyn Learner, opts: &BiasVarianceOptions) -> Result<Grid> {
    opts.validate()?;
    let test = problem.sample(opts.n_test, mix(opts.seed, TEST_STREAM))?;
    let test_x: Vec<Vec<f64>> = test.rows().collect();
    let preds = (0..opts.n_sets)
        .into_par_iter()
        .map(|s| -> Result<Vec<Vec<f64>>> {
            let set_seed = mix(opts.seed, s as u64);
            let ds = problem.sample(opts.n_train, set_seed)?;
            (0..opts.models_per_set)
                .map(|r| {
                    let model = learner.fit(&ds, mix(set_seed, MODEL_STREAM + r as u64))?;
                    test_x.iter().map(|x| model.predict_value(x)).collect()
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid {
        preds,
        test_x,
        test_y: test.targets().to_vec(),
    })
}

/// Variance ratio `V_L(E_θ φ) / (V_L(E_θ φ) + E_L V_θ φ)` summed over test
/// points. The between-set variance is corrected for the within-set noise
/// carried by each set mean and clamped at 0.
fn rho_from_grid(preds: &[Vec<Vec<f64>>]) -> f64 {
    let n_test = preds[0][0].len();
    let r = preds[0].len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n_test {
        let mut set_means = Vec::with_capacity(preds.len());
        let mut within = Vec::with_capacity(preds.len());
        for set in preds {
            let v: Vec<f64> = set.iter().map(|m| m[i]).collect();
            set_means.push(mean(&v));
            within.push(sample_var(&v));
        }
        let e_within = mean(&within);
        let v_between = (sample_var(&set_means) - e_within / r).max(0.0);
        num += v_between;
        den += v_between + e_within;
    }
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

pub fn bias_variance(problem: &dyn Problem, learner: &dyn Learner, opts: &BiasVarianceOptions) -> Result<BiasVarianceReport> {
    let grid = prediction_grid(problem, learner, opts)?;
    let n_test = grid.test_x.len();
    let mut bias = Vec::with_capacity(n_test);
    let mut var = Vec::with_capacity(n_test);
    let mut measured = Vec::with_capacity(n_test);
    for i in 0..n_test {
        let f = problem
            .bayes(&grid.test_x[i])
            .ok_or_else(|| Error::InvalidConfig("problem has no known regression function".into()))?;
        let all: Vec<f64> = grid.preds.iter().flat_map(|set| set.iter().map(|m| m[i])).collect();
        let m = mean(&all);
        bias.push((f - m).powi(2));
        var.push(all.iter().map(|p| (p - m).powi(2)).sum::<f64>() / all.len() as f64);
        measured.push(all.iter().map(|p| (grid.test_y[i] - p).powi(2)).sum::<f64>() / all.len() as f64);
    }
    let noise = problem.noise_variance();
    let (bias_sq, variance) = (mean(&bias), mean(&var));
    Ok(BiasVarianceReport {
        noise,
        bias_sq,
        variance,
        total: noise + bias_sq + variance,
        measured_error: mean(&measured),
        bias_sq_se: std_err(&bias),
        variance_se: std_err(&var),
        measured_error_se: std_err(&measured),
        rho: (opts.models_per_set >= 2).then(|| rho_from_grid(&grid.preds)),
        n_trees: learner.ensemble_size(),
        n_sets: opts.n_sets,
        models_per_set: opts.models_per_set,
    })
}

/// Correlation between predictions of models fit on the same learning set
/// with different seeds; `opts.models_per_set` seeds per set (at least 2).
pub fn rho_estimate(problem: &dyn Problem, learner: &dyn Learner, opts: &BiasVarianceOptions) -> Result<f64> {
    if opts.models_per_set < 2 {
        return Err(Error::InvalidConfig("rho needs at least two models per learning set".into()));
    }
    Ok(rho_from_grid(&prediction_grid(problem, learner, opts)?.preds))
}

/// Least-squares fit of `a + b / M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

impl InverseFit {
    /// `a / (a + b)`: the correlation implied by the fit.
    pub fn implied_rho(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

pub fn fit_inverse_m(ms: &[usize], values: &[f64]) -> Result<InverseFit> {
    if ms.len() != values.len() || ms.len() < 2 || ms.contains(&0) {
        return Err(Error::InvalidConfig("need at least two positive ensemble sizes".into()));
    }
    let x: Vec<f64> = ms.iter().map(|&m| 1.0 / m as f64).collect();
    let (mx, my) = (mean(&x), mean(values));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("ensemble sizes must differ".into()));
    }
    let sxy: f64 = x.iter().zip(values).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let residuals: Vec<f64> = x.iter().zip(values).map(|(xi, yi)| yi - (a + b * xi)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = values.iter().map(|v| (v - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(InverseFit {
        a,
        b,
        r_squared,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceCurve {
    pub ms: Vec<usize>,
    /// Variance of the M-tree prediction over learning sets and seeds,
    /// averaged over test points.
    pub variance: Vec<f64>,
    pub variance_se: Vec<f64>,
    pub fit: InverseFit,
}

/// Ensemble variance as a function of the number of trees. Each learning
/// set gets one forest of `max(ms)` trees; because tree `m` depends only on
/// (seed, m), its first M trees are exactly the M-tree forest.
pub fn variance_vs_m(
    problem: &dyn Problem,
    cfg: &ForestConfig,
    ms: &[usize],
    opts: &BiasVarianceOptions,
) -> Result<VarianceCurve> {
    opts.validate()?;
    let max_m = ms.iter().copied().max().unwrap_or(0);
    if max_m == 0 || ms.contains(&0) {
        return Err(Error::InvalidConfig("ensemble sizes must be positive".into()));
    }
    let test = problem.sample(opts.n_test, mix(opts.seed, TEST_STREAM))?;
    let test_x: Vec<Vec<f64>> = test.rows().collect();
    // prefix[s][k][i]: mean of the first ms[k] trees of set s at test point i
    let prefix = (0..opts.n_sets)
        .into_par_iter()
        .map(|s| -> Result<Vec<Vec<f64>>> {
            let set_seed = mix(opts.seed, s as u64);
            let ds = problem.sample(opts.n_train, set_seed)?;
            if ds.task().is_classification() {
                return Err(Error::InvalidConfig("variance curves need a regression problem".into()));
            }
            let forest = Forest::fit(
                &ds,
                &ForestConfig {
                    n_trees: max_m,
                    seed: mix(set_seed, MODEL_STREAM),
                    n_threads: 1,
                    ..cfg.clone()
                },
            )?;
            let mut out = vec![vec![0.0; test_x.len()]; ms.len()];
            for (i, x) in test_x.iter().enumerate() {
                let outputs = forest.tree_outputs(x)?;
                let mut running = vec![0.0; max_m + 1];
                for (m, o) in outputs.iter().enumerate() {
                    running[m + 1] = running[m] + o[0];
                }
                for (k, &m) in ms.iter().enumerate() {
                    out[k][i] = running[m] / m as f64;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut variance = Vec::with_capacity(ms.len());
    let mut variance_se = Vec::with_capacity(ms.len());
    for k in 0..ms.len() {
        let per_point: Vec<f64> = (0..test_x.len())
            .map(|i| sample_var(&prefix.iter().map(|set| set[k][i]).collect::<Vec<_>>()))
            .collect();
        variance.push(mean(&per_point));
        variance_se.push(std_err(&per_point));
    }
    let fit = fit_inverse_m(ms, &variance)?;
    Ok(VarianceCurve {
        ms: ms.to_vec(),
        variance,
        variance_se,
        fit,
    })
}
