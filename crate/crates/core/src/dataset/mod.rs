//! Column-oriented learning sets, CSV ingestion and synthetic problems.

mod csv_io;
mod generators;
mod joint;

pub use csv_io::{load_csv, load_csv_with_schema, load_feature_rows, save_csv, CsvOptions};
pub use generators::{
    duplicate_feature, friedman1_target, gen_friedman1, gen_led, gen_linear_gaussian, LED_DIGITS,
};
pub use joint::{joint_from_dataset, DiscreteJoint};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value domain of one input variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Ordered,
    /// Values are integer codes in `[0, cardinality)`.
    Categorical { cardinality: usize },
}

impl FeatureKind {
    pub fn is_categorical(self) -> bool {
        matches!(self, FeatureKind::Categorical { .. })
    }

    pub fn cardinality(self) -> Option<usize> {
        match self {
            FeatureKind::Categorical { cardinality } => Some(cardinality),
            FeatureKind::Ordered => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification { n_classes: usize },
    Regression,
}

impl Task {
    pub fn n_classes(self) -> Option<usize> {
        match self {
            Task::Classification { n_classes } => Some(n_classes),
            Task::Regression => None,
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self, Task::Classification { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Ordered,
    /// Level `i` is encoded as code `i`.
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn ordered(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Ordered,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical { levels },
        }
    }

    pub fn feature_kind(&self) -> FeatureKind {
        match &self.kind {
            ColumnKind::Ordered => FeatureKind::Ordered,
            ColumnKind::Categorical { levels } => FeatureKind::Categorical {
                cardinality: levels.len(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Class code `i` stands for `labels[i]`.
    Classification { labels: Vec<String> },
    Regression,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    pub kind: TargetKind,
}

/// Names, kinds and code maps of every column. Serialized with models so
/// prediction inputs are decoded exactly like the training set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<ColumnSpec>,
    pub target: TargetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_column: Option<String>,
}

impl Schema {
    pub fn task(&self) -> Task {
        match &self.target.kind {
            TargetKind::Classification { labels } => Task::Classification {
                n_classes: labels.len(),
            },
            TargetKind::Regression => Task::Regression,
        }
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        self.features.iter().map(ColumnSpec::feature_kind).collect()
    }

    pub fn class_labels(&self) -> Option<&[String]> {
        match &self.target.kind {
            TargetKind::Classification { labels } => Some(labels),
            TargetKind::Regression => None,
        }
    }

    /// Generic names `x1..xp` and `y`, with categorical levels `"0".."c-1"`.
    pub fn generic(kinds: &[FeatureKind], task: Task) -> Self {
        let features = kinds
            .iter()
            .enumerate()
            .map(|(j, kind)| match kind {
                FeatureKind::Ordered => ColumnSpec::ordered(format!("x{}", j + 1)),
                FeatureKind::Categorical { cardinality } => {
                    ColumnSpec::categorical(format!("x{}", j + 1), numeric_levels(*cardinality))
                }
            })
            .collect();
        let kind = match task {
            Task::Classification { n_classes } => TargetKind::Classification {
                labels: numeric_levels(n_classes),
            },
            Task::Regression => TargetKind::Regression,
        };
        Self {
            features,
            target: TargetSpec {
                name: "y".into(),
                kind,
            },
            weight_column: None,
        }
    }
}

pub(crate) fn numeric_levels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// A learning set stored column by column.
///
/// Categorical values and class indices are stored as exact small integers in
/// `f64`, which keeps every column homogeneous for the split search.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    targets: Vec<f64>,
    weights: Vec<f64>,
    kinds: Vec<FeatureKind>,
    task: Task,
    schema: Schema,
}

impl Dataset {
    pub fn new(
        columns: Vec<Vec<f64>>,
        targets: Vec<f64>,
        weights: Option<Vec<f64>>,
        schema: Schema,
    ) -> Result<Self> {
        let n = targets.len();
        let weights = weights.unwrap_or_else(|| vec![1.0; n]);
        if columns.len() != schema.features.len() {
            return Err(Error::InvalidDataset(format!(
                "{} columns but schema declares {} features",
                columns.len(),
                schema.features.len()
            )));
        }
        if weights.len() != n {
            return Err(Error::InvalidDataset("weights length differs from N".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDataset(format!("invalid weight {w}")));
        }
        let kinds = schema.feature_kinds();
        for (j, (col, kind)) in columns.iter().zip(&kinds).enumerate() {
            if col.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "column {j} has {} values, expected {n}",
                    col.len()
                )));
            }
            if let FeatureKind::Categorical { cardinality } = kind {
                if let Some(&v) = col
                    .iter()
                    .find(|v| !(v.fract() == 0.0 && **v >= 0.0 && (**v as usize) < *cardinality))
                {
                    return Err(Error::CategoryOutOfRange {
                        feature: j,
                        code: v,
                        cardinality: *cardinality,
                    });
                }
            }
        }
        let task = schema.task();
        match task {
            Task::Classification { n_classes } => {
                if let Some(y) = targets
                    .iter()
                    .find(|y| !(y.fract() == 0.0 && **y >= 0.0 && (**y as usize) < n_classes))
                {
                    return Err(Error::InvalidDataset(format!(
                        "class target {y} outside [0, {n_classes})"
                    )));
                }
            }
            Task::Regression => {
                if targets.iter().any(|y| !y.is_finite()) {
                    return Err(Error::InvalidDataset("non-finite regression target".into()));
                }
            }
        }
        Ok(Self {
            columns,
            targets,
            weights,
            kinds,
            task,
            schema,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn kind(&self, j: usize) -> FeatureKind {
        self.kinds[j]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    #[inline]
    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    #[inline]
    pub fn class(&self, i: usize) -> usize {
        self.targets[i] as usize
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.n_samples()).map(|i| self.row(i))
    }

    /// Same dataset with column `j` replaced.
    pub fn with_column(&self, j: usize, values: Vec<f64>) -> Result<Self> {
        if j >= self.n_features() {
            return Err(Error::FeatureOutOfRange {
                index: j,
                n_features: self.n_features(),
            });
        }
        let mut columns = self.columns.clone();
        columns[j] = values;
        Dataset::new(
            columns,
            self.targets.clone(),
            Some(self.weights.clone()),
            self.schema.clone(),
        )
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Dataset::new(
            self.columns.clone(),
            self.targets.clone(),
            Some(weights),
            self.schema.clone(),
        )
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}
