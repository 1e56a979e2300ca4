use serde::{Deserialize, Serialize};

use crate::dataset::DiscreteJoint;
use crate::error::{Error, Result};

/// `I(X_target; Y | X_given)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmiQuery {
    pub target: usize,
    pub given: Vec<usize>,
}

impl CmiQuery {
    pub fn new(target: usize, given: impl Into<Vec<usize>>) -> Self {
        Self {
            target,
            given: given.into(),
        }
    }

    fn mask(&self, p: usize) -> Result<u64> {
        let mut mask = 0u64;
        for &j in self.given.iter().chain(std::iter::once(&self.target)) {
            if j >= p {
                return Err(Error::FeatureOutOfRange { index: j, n_features: p });
            }
        }
        if p > 63 {
            return Err(Error::TooManyVariables { p, limit: 63 });
        }
        for &b in &self.given {
            if b == self.target {
                return Err(Error::InvalidConfig(format!("X{} cannot condition on itself", b + 1)));
            }
            mask |= 1 << b;
        }
        Ok(mask)
    }
}

/// Conditional mutual information in bits,
/// `H(X,B) + H(Y,B) - H(X,Y,B) - H(B)`.
pub fn cmi(joint: &DiscreteJoint, q: &CmiQuery) -> Result<f64> {
    let b = q.mask(joint.n_vars())?;
    let xb = b | 1 << q.target;
    let value = joint.marginal_entropy(xb, false) + joint.marginal_entropy(b, true)
        - joint.marginal_entropy(xb, true)
        - joint.marginal_entropy(b, false);
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_led, joint_from_dataset};
    use crate::rng;

    #[test]
    fn independent_variable_carries_nothing() {
        let mut r = rng::seeded(3);
        let base = DiscreteJoint::random(vec![2, 3], 2, &mut r);
        let joint = base.append_independent(&[0.3, 0.7]).unwrap();
        for given in [vec![], vec![0], vec![1], vec![0, 1]] {
            assert!(cmi(&joint, &CmiQuery::new(2, given)).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn led_inputs_determine_the_digit() {
        let joint = joint_from_dataset(&gen_led(10, 0).unwrap()).unwrap();
        let all = joint.marginal_entropy(0x7f, false) + joint.marginal_entropy(0, true) - joint.marginal_entropy(0x7f, true);
        assert!((all - 10f64.log2()).abs() < 1e-12);
        // chain rule over the seven segments in order
        let total: f64 = (0..7).map(|j| cmi(&joint, &CmiQuery::new(j, (0..j).collect::<Vec<_>>())).unwrap()).sum();
        assert!((total - 10f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn chain_rule_on_random_joints() {
        let mut r = rng::seeded(17);
        for _ in 0..20 {
            let joint = DiscreteJoint::random(vec![2, 3, 2, 2], 3, &mut r);
            // I(X0, X1; Y | X3) written through entropies
            let b = 1 << 3;
            let pair = b | 0b11;
            let lhs = joint.marginal_entropy(pair, false) + joint.marginal_entropy(b, true)
                - joint.marginal_entropy(pair, true)
                - joint.marginal_entropy(b, false);
            let rhs = cmi(&joint, &CmiQuery::new(0, vec![3])).unwrap() + cmi(&joint, &CmiQuery::new(1, vec![3, 0])).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_queries() {
        let joint = joint_from_dataset(&gen_led(10, 0).unwrap()).unwrap();
        assert!(cmi(&joint, &CmiQuery::new(7, vec![])).is_err());
        assert!(cmi(&joint, &CmiQuery::new(2, vec![2])).is_err());
    }
}
