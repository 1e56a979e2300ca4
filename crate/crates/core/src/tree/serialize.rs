//! Versioned JSON documents for single trees (`.pwtree`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Tree, TreeArrays};
use crate::criteria::Criterion;
use crate::dataset::{Schema, Task};
use crate::error::{Error, Result};

pub const TREE_FORMAT: &str = "patchwood-tree";
pub const TREE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct NodesDocument {
    left_child: Vec<i64>,
    right_child: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<Vec<usize>>>,
    feature: Vec<i64>,
    /// `null` where the array holds NaN.
    threshold: Vec<Option<f64>>,
    impurity: Vec<f64>,
    n_node_samples: Vec<f64>,
    value: Vec<Vec<f64>>,
}

/// Tree body shared by tree and forest documents.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct TreeBody {
    task: Task,
    criterion: Criterion,
    n_features: usize,
    nodes: NodesDocument,
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: TreeBody,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<Schema>,
}

impl From<&Tree> for TreeBody {
    fn from(tree: &Tree) -> Self {
        let n = &tree.nodes;
        let multiway = n.children.iter().any(|c| !c.is_empty());
        TreeBody {
            task: tree.task,
            criterion: tree.criterion,
            n_features: tree.n_features,
            nodes: NodesDocument {
                left_child: n.left_child.clone(),
                right_child: n.right_child.clone(),
                children: multiway.then(|| n.children.clone()),
                feature: n.feature.clone(),
                threshold: n.threshold.iter().map(|t| (!t.is_nan()).then_some(*t)).collect(),
                impurity: n.impurity.clone(),
                n_node_samples: n.n_node_samples.clone(),
                value: n.value.clone(),
            },
        }
    }
}

impl TreeBody {
    pub(crate) fn into_tree(self, schema: Option<Schema>) -> Result<Tree> {
        let d = self.nodes;
        let count = d.feature.len();
        let children = match d.children {
            Some(c) => c,
            None => vec![Vec::new(); count],
        };
        let tree = Tree {
            task: self.task,
            criterion: self.criterion,
            n_features: self.n_features,
            schema,
            nodes: TreeArrays {
                left_child: d.left_child,
                right_child: d.right_child,
                children,
                feature: d.feature,
                threshold: d.threshold.into_iter().map(|t| t.unwrap_or(f64::NAN)).collect(),
                impurity: d.impurity,
                n_node_samples: d.n_node_samples,
                value: d.value,
            },
        };
        tree.validate()?;
        Ok(tree)
    }
}

pub(crate) fn check_header(format: &str, version: u32, expected: &str, current: u32) -> Result<()> {
    if format != expected {
        return Err(Error::Format(format!("expected a {expected} document, found {format:?}")));
    }
    if version != current {
        return Err(Error::Format(format!("unsupported {expected} version {version} (this build reads {current})")));
    }
    Ok(())
}

impl Tree {
    pub fn to_json(&self) -> Result<String> {
        let doc = TreeDocument {
            format: TREE_FORMAT.into(),
            version: TREE_VERSION,
            body: self.into(),
            schema: self.schema.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Tree> {
        let doc: TreeDocument = serde_json::from_str(text)?;
        check_header(&doc.format, doc.version, TREE_FORMAT, TREE_VERSION)?;
        doc.body.into_tree(doc.schema)
    }
}

pub fn save_tree(tree: &Tree, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, tree.to_json()?)?;
    Ok(())
}

pub fn load_tree(path: impl AsRef<Path>) -> Result<Tree> {
    Tree::from_json(&std::fs::read_to_string(path)?)
}
