//! Randomized tree ensembles with exact and empirical MDI importances.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN.

pub mod analysis;
pub mod criteria;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod importance;
pub mod rng;
pub mod splitter;
pub mod tree;

pub use criteria::{Criterion, NodeStats};
pub use dataset::{Dataset, DiscreteJoint, FeatureKind, Schema, Task};
pub use error::{Error, Result};
pub use forest::{Aggregation, Forest, ForestConfig, Member, OobReport, Sampling};
pub use importance::{ImportanceMethod, ImportanceReport};
pub use splitter::SplitterKind;
pub use tree::{build, build_best_first, BuildConfig, BuildOrder, Prediction, Tree, TreeArrays};

/// Library version recorded in model and run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
