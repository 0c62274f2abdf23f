//! Small hand-checkable instances.

use crate::model::{Mmdp, Model};

/// Two states, two actions, two models, `T = 2`, `mu = (1, 0)`,
/// `lambda = (0.5, 0.5)`. In both models action 0 keeps state 0 and action 1
/// moves to the absorbing state 1. Model 0 pays 1 for action 0 in state 0;
/// model 1 pays 1.8 for action 1 in state 0. Nothing else pays.
///
/// Best Markov return 1.4 (stay, then leave); oracle 1.9.
pub fn e1() -> Mmdp {
    let transition = vec![
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.0, 1.0], vec![0.0, 1.0]],
    ];
    let model0 = Model::from_dense(&transition, &[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
    let model1 = Model::from_dense(&transition, &[vec![0.0, 1.8], vec![0.0, 0.0]]).unwrap();
    Mmdp::new(2, vec![model0, model1], vec![1.0, 0.0], vec![0.5, 0.5], 1.0).unwrap()
}
