//! Variable importances: empirical MDI and permutation scores of fitted
//! forests, and exact MDI of totally randomized trees on discrete joints.

mod analytic;
mod empirical;
mod info;

pub use analytic::{
    analytic_mdi_pruned, analytic_mdi_subspace, analytic_mdi_trt, redundancy_factor_check, AnalyticEngine,
    RedundancyReport, MAX_ANALYTIC_VARIABLES,
};
pub use empirical::{empirical_trt_forest, mdi, permutation_importance, tree_mdi, DEFAULT_REPEATS};
pub use info::{cmi, CmiQuery};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum ImportanceMethod {
    Mdi,
    Permutation { repeats: usize },
    AnalyticTrt,
    AnalyticPruned { depth: usize },
    AnalyticSubspace { size: usize },
}

impl fmt::Display for ImportanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mdi => f.write_str("mdi"),
            Self::Permutation { .. } => f.write_str("permutation"),
            Self::AnalyticTrt => f.write_str("analytic-trt"),
            Self::AnalyticPruned { .. } => f.write_str("analytic-pruned"),
            Self::AnalyticSubspace { .. } => f.write_str("analytic-subspace"),
        }
    }
}

/// Importance of every input variable. `by_degree[j][k]` is the share of
/// `totals[j]` collected at conditioning depth `k`; it is empty for
/// methods without such a decomposition (permutation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub totals: Vec<f64>,
    pub by_degree: Vec<Vec<f64>>,
    pub normalized: bool,
}

impl ImportanceReport {
    pub(crate) fn from_degrees(method: ImportanceMethod, by_degree: Vec<Vec<f64>>) -> Self {
        let totals = by_degree.iter().map(|row| row.iter().sum()).collect();
        Self {
            method,
            totals,
            by_degree,
            normalized: false,
        }
    }

    pub fn sum(&self) -> f64 {
        self.totals.iter().sum()
    }

    /// Rescales so the totals add up to one.
    pub fn normalize(&self) -> Result<Self> {
        let s = self.sum();
        if !(s > 0.0) {
            return Err(Error::ZeroTotal);
        }
        Ok(Self {
            method: self.method,
            totals: self.totals.iter().map(|v| v / s).collect(),
            by_degree: self
                .by_degree
                .iter()
                .map(|row| row.iter().map(|v| v / s).collect())
                .collect(),
            normalized: true,
        })
    }
}
