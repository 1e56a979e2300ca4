//! Monte-Carlo experiments: bias-variance decomposition, prediction
//! correlation, variance versus ensemble size, tree depth, plug-in mutual
//! information bias and scaling sweeps.

mod decomposition;
mod experiments;

pub use decomposition::{
    bias_variance, fit_inverse_m, rho_estimate, variance_vs_m, BiasVarianceOptions, BiasVarianceReport, InverseFit,
    VarianceCurve,
};
pub use experiments::{
    depth_experiment, harmonic_depth, loglog_slope, mi_bias_check, mi_bias_expected, scaling_sweep, write_sweep_csv,
    DepthReport, SweepAxis, SweepOptions, SweepRow,
};

use crate::dataset::{gen_friedman1, gen_linear_gaussian, friedman1_target, Dataset};
use crate::error::Result;
use crate::forest::{Forest, ForestConfig};
use crate::tree::Tree;

/// A synthetic regression problem with a known regression function.
pub trait Problem: Sync {
    fn sample(&self, n: usize, seed: u64) -> Result<Dataset>;
    /// Noiseless target `f(x)`; `None` when the problem does not know it.
    fn bayes(&self, x: &[f64]) -> Option<f64>;
    fn noise_variance(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Friedman1 {
    pub p_total: usize,
    pub noise_sd: f64,
}

impl Default for Friedman1 {
    fn default() -> Self {
        Self {
            p_total: 10,
            noise_sd: 1.0,
        }
    }
}

impl Problem for Friedman1 {
    fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        gen_friedman1(n, self.p_total, self.noise_sd, seed)
    }

    fn bayes(&self, x: &[f64]) -> Option<f64> {
        Some(friedman1_target(x))
    }

    fn noise_variance(&self) -> f64 {
        self.noise_sd * self.noise_sd
    }
}

/// `Y = X1 + .. + X5`, noiseless, with `p_noise` irrelevant inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussian {
    pub p_noise: usize,
}

impl Problem for LinearGaussian {
    fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        gen_linear_gaussian(n, self.p_noise, seed)
    }

    fn bayes(&self, x: &[f64]) -> Option<f64> {
        Some(x[..5].iter().sum())
    }

    fn noise_variance(&self) -> f64 {
        0.0
    }
}

/// A fitted regression model.
pub trait Predictor: Send + Sync {
    fn predict_value(&self, x: &[f64]) -> Result<f64>;
}

impl Predictor for Forest {
    fn predict_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict(x)?.as_f64())
    }
}

impl Predictor for Tree {
    fn predict_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict(x)?.as_f64())
    }
}

/// Something that turns a learning set and a seed into a model.
pub trait Learner: Sync {
    fn fit(&self, ds: &Dataset, seed: u64) -> Result<Box<dyn Predictor>>;

    /// Number of averaged models (trees) in each fit.
    fn ensemble_size(&self) -> usize {
        1
    }
}

impl Learner for ForestConfig {
    fn fit(&self, ds: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        let cfg = ForestConfig {
            seed,
            n_threads: 1,
            ..self.clone()
        };
        Ok(Box::new(Forest::fit(ds, &cfg)?))
    }

    fn ensemble_size(&self) -> usize {
        self.n_trees
    }
}

/// Predicts a fixed value everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantLearner(pub f64);

struct Constant(f64);

impl Predictor for Constant {
    fn predict_value(&self, _: &[f64]) -> Result<f64> {
        Ok(self.0)
    }
}

impl Learner for ConstantLearner {
    fn fit(&self, _: &Dataset, _: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(Constant(self.0)))
    }
}
