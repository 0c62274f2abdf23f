use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Mmdp, Model};

fn normalized_positives<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    // 1 - U(0,1) lies in (0, 1]
    let raw: Vec<f64> = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

/// Seeded random instance with `states` states, `actions` actions, `models`
/// models and the given horizon.
///
/// Each transition row keeps every successor with probability `sparsity`
/// (at least one is always kept) and spreads normalized uniform weights over
/// them. Rewards are uniform in `[-1, 1]`; `mu` and `lambda` are normalized
/// uniform positives. Discount is 1.
///
/// # Panics
///
/// If a dimension is zero or `sparsity` is outside `(0, 1]`.
pub fn random_instance(states: usize, actions: usize, models: usize, horizon: usize, seed: u64, sparsity: f64) -> Mmdp {
    assert!(
        states > 0 && actions > 0 && models > 0 && horizon > 0,
        "dimensions must be positive"
    );
    assert!(sparsity > 0.0 && sparsity <= 1.0, "sparsity must lie in (0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let model_set: Vec<Model> = (0..models)
        .map(|_| {
            let mut rows = Vec::with_capacity(states * actions);
            let mut reward = Vec::with_capacity(states * actions);
            for _ in 0..states * actions {
                let mut support: Vec<usize> = (0..states)
                    .filter(|_| sparsity >= 1.0 || rng.gen_bool(sparsity))
                    .collect();
                if support.is_empty() {
                    support.push(rng.gen_range(0..states));
                }
                let probs = normalized_positives(support.len(), &mut rng);
                rows.push(support.into_iter().zip(probs).collect());
                reward.push(rng.gen_range(-1.0..=1.0));
            }
            Model::from_rows(states, actions, rows, reward).expect("generated rows are well formed")
        })
        .collect();
    let initial = normalized_positives(states, &mut rng);
    let weights = normalized_positives(models, &mut rng);
    Mmdp::new(horizon, model_set, initial, weights, 1.0).expect("generated shapes agree")
}
