//! Policy evaluation: exact return, Monte-Carlo simulation, the oracle upper
//! bound, brute-force enumeration, and random instances.

mod compare;
pub mod fixtures;
mod instance;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{model_optimal_policies, q_layer};
use crate::error::MmdpError;
use crate::model::Mmdp;
use crate::policy::{DeterministicPolicy, MarkovPolicy};

pub use compare::{compare, Algorithm, CompareConfig, ComparisonRow, ComparisonTable, TableFormat};
pub use instance::random_instance;

/// Upper bound on the number of deterministic policies `brute_force_best`
/// will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = (1u64 << 24) as f64;

/// Return of `policy` in each model alone, `sum_s mu(s) v_{0,m}(s)`.
pub fn model_returns<P: MarkovPolicy>(mmdp: &Mmdp, policy: &P) -> Result<Vec<f64>, MmdpError> {
    policy.check_dims(mmdp)?;
    let (nm, ns, na) = (mmdp.n_models(), mmdp.n_states(), mmdp.n_actions());
    let mut v_next = vec![0.0; nm * ns];
    let mut v_now = vec![0.0; nm * ns];
    let mut q = vec![0.0; nm * ns * na];
    for t in (0..mmdp.horizon()).rev() {
        q_layer(mmdp, t, &v_next, &mut q);
        for m in 0..nm {
            for s in 0..ns {
                let row = &q[(m * ns + s) * na..(m * ns + s + 1) * na];
                let mut value = 0.0;
                policy.for_each_action(t, s, |a, p| value += p * row[a]);
                v_now[m * ns + s] = value;
            }
        }
        std::mem::swap(&mut v_now, &mut v_next);
    }
    Ok((0..nm)
        .map(|m| {
            mmdp.initial()
                .iter()
                .zip(&v_next[m * ns..(m + 1) * ns])
                .map(|(mu, v)| mu * v)
                .sum()
        })
        .collect())
}

/// Mean return across models, `rho(pi) = sum_m lambda_m sum_s mu(s) v_{0,m}(s)`.
pub fn exact_return<P: MarkovPolicy>(mmdp: &Mmdp, policy: &P) -> Result<f64, MmdpError> {
    Ok(model_returns(mmdp, policy)?
        .iter()
        .zip(mmdp.weights())
        .map(|(r, lambda)| lambda * r)
        .sum())
}

/// `sum_m lambda_m max_pi rho^m(pi)`: what a decision maker who knows the true
/// model would earn on average. Upper bound on any Markov or history-dependent
/// policy's return.
pub fn solve_oracle(mmdp: &Mmdp) -> Result<f64, MmdpError> {
    Ok(oracle_model_values(mmdp)?
        .iter()
        .zip(mmdp.weights())
        .map(|(v, lambda)| lambda * v)
        .sum())
}

/// Optimal return of each model on its own.
pub fn oracle_model_values(mmdp: &Mmdp) -> Result<Vec<f64>, MmdpError> {
    model_optimal_policies(mmdp)
        .iter()
        .enumerate()
        .map(|(m, policy)| Ok(model_returns(&mmdp.single_model(m), policy)?[0]))
        .collect()
}

/// Enumerates every deterministic Markov policy. Ties go to the policy that
/// comes first in enumeration order.
pub fn brute_force_best(mmdp: &Mmdp) -> Result<(DeterministicPolicy, f64), MmdpError> {
    brute_force_within(mmdp, BRUTE_FORCE_LIMIT)
}

pub(crate) fn brute_force_within(mmdp: &Mmdp, limit: f64) -> Result<(DeterministicPolicy, f64), MmdpError> {
    let (horizon, ns, na) = (mmdp.horizon(), mmdp.n_states(), mmdp.n_actions());
    let slots = horizon * ns;
    let candidates = (na as f64).powi(slots as i32);
    if candidates > limit {
        return Err(MmdpError::Intractable { candidates, limit });
    }
    let decode = |mut index: u64| {
        let mut actions = vec![0; slots];
        for slot in actions.iter_mut() {
            *slot = (index % na as u64) as usize;
            index /= na as u64;
        }
        DeterministicPolicy::new(horizon, ns, na, actions).expect("decoded policy has the right shape")
    };
    let (value, index) = (0..candidates as u64)
        .into_par_iter()
        .map(|i| (exact_return(mmdp, &decode(i)).expect("shape checked"), i))
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x },
        );
    Ok((decode(index), value))
}

/// Exact and Monte-Carlo evaluation of one policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean_return: f64,
    pub mc_mean: f64,
    /// Sample standard deviation of episode returns.
    pub mc_std: f64,
    pub episodes: usize,
    pub seed: u64,
}

/// Independent random stream for episode `index` under `seed`.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws an index from a discrete distribution given as `(index, weight)`
/// pairs. Falls back to the last positive entry when roundoff leaves `u`
/// past the cumulative total.
pub(crate) fn sample_discrete<I>(items: I, u: f64) -> usize
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in items {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub model: usize,
    /// `states[t]` is the state at epoch `t`.
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub total: f64,
}

/// Rolls `policy` out for the full horizon. The model is drawn from
/// `lambda` unless given.
pub fn simulate_episode<P: MarkovPolicy, R: Rng + ?Sized>(
    mmdp: &Mmdp,
    policy: &P,
    model: Option<usize>,
    rng: &mut R,
) -> Episode {
    let model = model.unwrap_or_else(|| sample_discrete(mmdp.weights().iter().copied().enumerate(), rng.gen()));
    let mut state = sample_discrete(mmdp.initial().iter().copied().enumerate(), rng.gen());
    let horizon = mmdp.horizon();
    let mut episode = Episode {
        model,
        states: Vec::with_capacity(horizon),
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        total: 0.0,
    };
    for t in 0..horizon {
        let u: f64 = rng.gen();
        let mut choices = Vec::with_capacity(mmdp.n_actions());
        policy.for_each_action(t, state, |a, p| choices.push((a, p)));
        let action = sample_discrete(choices, u);
        let reward = mmdp.reward(t, model, state, action);
        episode.states.push(state);
        episode.actions.push(action);
        episode.rewards.push(reward);
        episode.total += reward;
        let (succ, prob) = mmdp.model(model).row(state, action);
        let k = sample_discrete(prob.iter().copied().enumerate(), rng.gen());
        state = succ[k];
    }
    episode
}

/// Mean and sample standard deviation.
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Exact return plus a seeded Monte-Carlo estimate over `episodes` rollouts.
/// Each episode draws the model from `lambda` and the start from `mu`.
pub fn monte_carlo_eval<P: MarkovPolicy>(
    mmdp: &Mmdp,
    policy: &P,
    episodes: usize,
    seed: u64,
) -> Result<EvalResult, MmdpError> {
    if episodes == 0 {
        return Err(MmdpError::InvalidArgument("episodes must be at least 1".into()));
    }
    let mean_return = exact_return(mmdp, policy)?;
    let totals: Vec<f64> = (0..episodes as u64)
        .into_par_iter()
        .map(|i| simulate_episode(mmdp, policy, None, &mut episode_rng(seed, i)).total)
        .collect();
    let (mc_mean, mc_std) = mean_std(&totals);
    Ok(EvalResult {
        mean_return,
        mc_mean,
        mc_std,
        episodes,
        seed,
    })
}

/// Monte-Carlo statistics of the oracle: each episode follows the optimal
/// policy of the model it was drawn from.
pub fn monte_carlo_oracle(mmdp: &Mmdp, episodes: usize, seed: u64) -> Result<EvalResult, MmdpError> {
    if episodes == 0 {
        return Err(MmdpError::InvalidArgument("episodes must be at least 1".into()));
    }
    let policies = model_optimal_policies(mmdp);
    let mean_return = solve_oracle(mmdp)?;
    let totals: Vec<f64> = (0..episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = episode_rng(seed, i);
            let m = sample_discrete(mmdp.weights().iter().copied().enumerate(), rng.gen());
            simulate_episode(mmdp, &policies[m], Some(m), &mut rng).total
        })
        .collect();
    let (mc_mean, mc_std) = mean_std(&totals);
    Ok(EvalResult {
        mean_return,
        mc_mean,
        mc_std,
        episodes,
        seed,
    })
}
