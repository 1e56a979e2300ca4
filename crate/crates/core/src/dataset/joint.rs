use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind, Task};
use crate::error::{Error, Result};

/// Dense probability table `P(x_1, .., x_p, y)` over categorical inputs and
/// a categorical output.
///
/// Cells are laid out row-major with the output index last:
/// `((x_1 * c_2 + x_2) * c_3 + ..) * J + y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointDocument", into = "JointDocument")]
pub struct DiscreteJoint {
    cardinalities: Vec<usize>,
    n_classes: usize,
    prob: Vec<f64>,
    #[serde(skip)]
    support: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    x: Vec<usize>,
    y: usize,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct JointDocument {
    cardinalities: Vec<usize>,
    n_classes: usize,
    prob: Vec<f64>,
}

impl TryFrom<JointDocument> for DiscreteJoint {
    type Error = Error;

    fn try_from(doc: JointDocument) -> Result<Self> {
        DiscreteJoint::new(doc.cardinalities, doc.n_classes, doc.prob)
    }
}

impl From<DiscreteJoint> for JointDocument {
    fn from(j: DiscreteJoint) -> Self {
        JointDocument {
            cardinalities: j.cardinalities,
            n_classes: j.n_classes,
            prob: j.prob,
        }
    }
}

const SUM_TOLERANCE: f64 = 1e-9;

impl DiscreteJoint {
    pub fn new(cardinalities: Vec<usize>, n_classes: usize, prob: Vec<f64>) -> Result<Self> {
        if cardinalities.contains(&0) || n_classes == 0 {
            return Err(Error::InvalidDataset("cardinalities must be positive".into()));
        }
        let size = cardinalities.iter().product::<usize>() * n_classes;
        if prob.len() != size {
            return Err(Error::InvalidDataset(format!(
                "table has {} cells, expected {size}",
                prob.len()
            )));
        }
        if prob.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDataset("negative or non-finite probability".into()));
        }
        let total: f64 = prob.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDataset(format!("probabilities sum to {total}")));
        }
        let mut joint = Self {
            cardinalities,
            n_classes,
            prob,
            support: Vec::new(),
        };
        joint.support = joint.collect_support();
        Ok(joint)
    }

    fn collect_support(&self) -> Vec<Cell> {
        let p = self.cardinalities.len();
        let mut x = vec![0usize; p];
        let mut cells = Vec::new();
        for chunk in self.prob.chunks(self.n_classes) {
            for (y, &mass) in chunk.iter().enumerate() {
                if mass > 0.0 {
                    cells.push(Cell {
                        x: x.clone(),
                        y,
                        p: mass,
                    });
                }
            }
            for d in (0..p).rev() {
                x[d] += 1;
                if x[d] < self.cardinalities[d] {
                    break;
                }
                x[d] = 0;
            }
        }
        cells
    }

    /// Random table with i.i.d. exponential cell masses, normalized.
    pub fn random(cardinalities: Vec<usize>, n_classes: usize, rng: &mut impl rand::Rng) -> Self {
        let size = cardinalities.iter().product::<usize>() * n_classes;
        let mut prob: Vec<f64> = (0..size)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = prob.iter().sum();
        prob.iter_mut().for_each(|p| *p /= total);
        Self::new(cardinalities, n_classes, prob).expect("normalized random table")
    }

    pub fn n_vars(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn cell_index(&self, x: &[usize], y: usize) -> usize {
        let mut idx = 0;
        for (&v, &c) in x.iter().zip(&self.cardinalities) {
            idx = idx * c + v;
        }
        idx * self.n_classes + y
    }

    pub fn get(&self, x: &[usize], y: usize) -> f64 {
        self.prob[self.cell_index(x, y)]
    }

    /// Marginal `P(Y)`.
    pub fn class_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for c in &self.support {
            out[c.y] += c.p;
        }
        out
    }

    /// Shannon entropy in bits of the marginal over the input variables in
    /// `mask` (bit `j` selects `X_j`), jointly with `Y` when `with_output`.
    pub fn marginal_entropy(&self, mask: u64, with_output: bool) -> f64 {
        let vars: Vec<usize> = (0..self.n_vars()).filter(|j| mask >> j & 1 == 1).collect();
        let mut size: usize = vars.iter().map(|&j| self.cardinalities[j]).product();
        if with_output {
            size *= self.n_classes;
        }
        let mut table = vec![0.0; size];
        for cell in &self.support {
            let mut idx = 0;
            for &j in &vars {
                idx = idx * self.cardinalities[j] + cell.x[j];
            }
            if with_output {
                idx = idx * self.n_classes + cell.y;
            }
            table[idx] += cell.p;
        }
        entropy_bits(&table)
    }

    /// Joint with an extra input variable independent of everything else,
    /// distributed as `dist`.
    pub fn append_independent(&self, dist: &[f64]) -> Result<Self> {
        let c = dist.len();
        let mut prob = Vec::with_capacity(self.prob.len() * c);
        for chunk in self.prob.chunks(self.n_classes) {
            for &q in dist {
                prob.extend(chunk.iter().map(|&p| p * q));
            }
        }
        let mut cards = self.cardinalities.clone();
        cards.push(c);
        Self::new(cards, self.n_classes, prob)
    }

    /// Joint with an extra input variable that is an exact copy of `X_j`.
    pub fn append_copy(&self, j: usize) -> Result<Self> {
        if j >= self.n_vars() {
            return Err(Error::FeatureOutOfRange {
                index: j,
                n_features: self.n_vars(),
            });
        }
        let c = self.cardinalities[j];
        let mut cards = self.cardinalities.clone();
        cards.push(c);
        let size = self.prob.len() * c;
        let mut prob = vec![0.0; size];
        let mut out = Self {
            cardinalities: cards,
            n_classes: self.n_classes,
            prob: Vec::new(),
            support: Vec::new(),
        };
        for cell in &self.support {
            let mut x = cell.x.clone();
            x.push(cell.x[j]);
            prob[out.cell_index(&x, cell.y)] += cell.p;
        }
        out.prob = prob;
        out.support = out.collect_support();
        Ok(out)
    }

    /// Reorders the input variables: new variable `i` is old `order[i]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let p = self.n_vars();
        let mut seen = vec![false; p];
        if order.len() != p || order.iter().any(|&o| o >= p || std::mem::replace(&mut seen[o], true)) {
            return Err(Error::InvalidConfig("not a permutation".into()));
        }
        let cards: Vec<usize> = order.iter().map(|&o| self.cardinalities[o]).collect();
        let mut out = Self {
            cardinalities: cards,
            n_classes: self.n_classes,
            prob: vec![0.0; self.prob.len()],
            support: Vec::new(),
        };
        for cell in &self.support {
            let x: Vec<usize> = order.iter().map(|&o| cell.x[o]).collect();
            let idx = out.cell_index(&x, cell.y);
            out.prob[idx] += cell.p;
        }
        out.support = out.collect_support();
        Ok(out)
    }
}

pub(crate) fn entropy_bits(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// Weighted empirical distribution of an all-categorical classification set.
pub fn joint_from_dataset(ds: &Dataset) -> Result<DiscreteJoint> {
    let n_classes = match ds.task() {
        Task::Classification { n_classes } => n_classes,
        Task::Regression => {
            return Err(Error::InvalidDataset("joint needs a classification task".into()))
        }
    };
    let cards = ds
        .kinds()
        .iter()
        .enumerate()
        .map(|(j, k)| match k {
            FeatureKind::Categorical { cardinality } => Ok(*cardinality),
            FeatureKind::Ordered => Err(Error::OrderedFeature(j)),
        })
        .collect::<Result<Vec<_>>>()?;
    let total = ds.total_weight();
    if !(total > 0.0) {
        return Err(Error::ZeroTotal);
    }
    let size = cards.iter().product::<usize>() * n_classes;
    let mut prob = vec![0.0; size];
    let mut shell = DiscreteJoint {
        cardinalities: cards,
        n_classes,
        prob: Vec::new(),
        support: Vec::new(),
    };
    let mut x = vec![0usize; ds.n_features()];
    for i in 0..ds.n_samples() {
        for (j, v) in x.iter_mut().enumerate() {
            *v = ds.value(i, j) as usize;
        }
        prob[shell.cell_index(&x, ds.class(i))] += ds.weights()[i];
    }
    prob.iter_mut().for_each(|p| *p /= total);
    shell.prob = prob;
    DiscreteJoint::new(shell.cardinalities, shell.n_classes, shell.prob)
}
