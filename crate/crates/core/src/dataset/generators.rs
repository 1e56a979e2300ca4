use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{ColumnSpec, Dataset, FeatureKind, Schema, Task};
use crate::error::{Error, Result};
use crate::rng;

/// Seven-segment encodings of the digits 0..9 (segments X1..X7).
pub const LED_DIGITS: [[u8; 7]; 10] = [
    [1, 1, 1, 0, 1, 1, 1],
    [0, 0, 1, 0, 0, 1, 0],
    [1, 0, 1, 1, 1, 0, 1],
    [1, 0, 1, 1, 0, 1, 1],
    [0, 1, 1, 1, 0, 1, 0],
    [1, 1, 0, 1, 0, 1, 1],
    [1, 1, 0, 1, 1, 1, 1],
    [1, 0, 1, 0, 0, 1, 0],
    [1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, 0, 1, 1],
];

fn led_schema() -> Schema {
    Schema::generic(
        &[FeatureKind::Categorical { cardinality: 2 }; 7],
        Task::Classification { n_classes: 10 },
    )
}

/// Seven-segment digits with uniform labels. `n == 10` is the exhaustive
/// table: one row per digit in order, seed ignored.
pub fn gen_led(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let digits: Vec<usize> = if n == 10 {
        (0..10).collect()
    } else {
        let mut r = rng::seeded(seed);
        (0..n).map(|_| r.random_range(0..10)).collect()
    };
    let columns = (0..7)
        .map(|j| digits.iter().map(|&d| LED_DIGITS[d][j] as f64).collect())
        .collect();
    let targets = digits.iter().map(|&d| d as f64).collect();
    Dataset::new(columns, targets, None, led_schema())
}

/// Noiseless Friedman #1 response (uses the constant 0.48).
pub fn friedman1_target(x: &[f64]) -> f64 {
    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
        + 20.0 * (x[2] - 0.48).powi(2)
        + 10.0 * x[3]
        + 5.0 * x[4]
}

pub fn gen_friedman1(n: usize, p_total: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if p_total < 5 {
        return Err(Error::InvalidConfig("Friedman #1 needs at least 5 features".into()));
    }
    let mut r = rng::seeded(seed);
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p_total).map(|_| r.random::<f64>()).collect();
        let eps: f64 = StandardNormal.sample(&mut r);
        targets.push(friedman1_target(&x) + noise_sd * eps);
        rows.push(x);
    }
    let columns = (0..p_total)
        .map(|j| rows.iter().map(|x| x[j]).collect())
        .collect();
    Dataset::new(
        columns,
        targets,
        None,
        Schema::generic(&vec![FeatureKind::Ordered; p_total], Task::Regression),
    )
}

/// `Y = X1 + .. + X5` with standard normal inputs and `p_noise` extra
/// irrelevant standard normal inputs.
pub fn gen_linear_gaussian(n: usize, p_noise: usize, seed: u64) -> Result<Dataset> {
    let p = 5 + p_noise;
    let mut r = rng::seeded(seed);
    let mut columns = vec![Vec::with_capacity(n); p];
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let mut y = 0.0;
        for (j, col) in columns.iter_mut().enumerate() {
            let v: f64 = StandardNormal.sample(&mut r);
            if j < 5 {
                y += v;
            }
            col.push(v);
        }
        targets.push(y);
    }
    Dataset::new(
        columns,
        targets,
        None,
        Schema::generic(&vec![FeatureKind::Ordered; p], Task::Regression),
    )
}

/// Appends `n_copies` exact copies of column `j`.
pub fn duplicate_feature(ds: &Dataset, j: usize, n_copies: usize) -> Result<Dataset> {
    if j >= ds.n_features() {
        return Err(Error::FeatureOutOfRange {
            index: j,
            n_features: ds.n_features(),
        });
    }
    let mut columns = ds.columns().to_vec();
    let mut schema = ds.schema().clone();
    let spec = schema.features[j].clone();
    for c in 0..n_copies {
        columns.push(ds.column(j).to_vec());
        schema.features.push(ColumnSpec {
            name: format!("{}_copy{}", spec.name, c + 1),
            kind: spec.kind.clone(),
        });
    }
    Dataset::new(
        columns,
        ds.targets().to_vec(),
        Some(ds.weights().to_vec()),
        schema,
    )
}
