//! Thompson sampling over the model set, the two-model instance on which every
//! Markov policy has linear regret, and a harness that measures regret across
//! horizons.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{model_optimal_policies, solve_cadp, solve_mvp, solve_wsu, CadpConfig};
use crate::error::MmdpError;
use crate::eval::{
    brute_force_within, episode_rng, exact_return, model_returns, sample_discrete, simulate_episode, solve_oracle,
};
use crate::model::{Mmdp, Model};
use crate::policy::DeterministicPolicy;

/// Enumeration limit for the Markov-best search on general instances.
pub const REGRET_SEARCH_LIMIT: f64 = (1u64 << 20) as f64;

/// Rewards within this distance count as equal in the likelihood.
const REWARD_MATCH: f64 = 1e-9;

/// Four states, two actions, two models. From `s0`, action 0 reaches `s1`
/// (reward 2 in both models) and action 1 reaches `s2` in the first model
/// (reward 0) or `s3` in the second (reward 3). `s1`, `s2`, `s3` lead back to
/// `s0` in the models where they are reachable and self-loop otherwise.
/// Weights are `(lambda, 1 - lambda)` and the start is `s0`.
pub fn counterexample_mmdp(lambda: f64, horizon: usize) -> Result<Mmdp, MmdpError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(MmdpError::InvalidArgument(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )));
    }
    if horizon < 2 {
        return Err(MmdpError::InvalidArgument(format!(
            "horizon must be at least 2, got {horizon}"
        )));
    }
    let build = |risky: usize, loop_state: usize, risky_reward: f64| {
        let mut rows = Vec::with_capacity(8);
        let mut reward = vec![0.0; 8];
        for s in 0..4 {
            for a in 0..2 {
                let next = match s {
                    0 if a == 0 => 1,
                    0 => risky,
                    s if s == loop_state => s,
                    _ => 0,
                };
                rows.push(vec![(next, 1.0)]);
            }
        }
        reward[0] = 2.0;
        reward[1] = risky_reward;
        Model::from_rows(4, 2, rows, reward)
    };
    let m1 = build(2, 3, 0.0)?;
    let m2 = build(3, 2, 3.0)?;
    Ok(Mmdp::new(
        horizon,
        vec![m1, m2],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![lambda, 1.0 - lambda],
        1.0,
    )?)
}

/// Evidence used by the posterior update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LikelihoodModel {
    #[serde(rename = "rewards")]
    Rewards,
    #[serde(rename = "rewards+transitions")]
    RewardsAndTransitions,
}

impl fmt::Display for LikelihoodModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rewards => "rewards",
            Self::RewardsAndTransitions => "rewards+transitions",
        })
    }
}

impl FromStr for LikelihoodModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rewards" => Ok(Self::Rewards),
            "rewards+transitions" => Ok(Self::RewardsAndTransitions),
            other => Err(format!(
                "unknown likelihood '{other}', expected rewards or rewards+transitions"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtsConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Mixed into every per-step likelihood so a single mismatch cannot
    /// eliminate a model.
    pub likelihood_floor: f64,
    pub likelihood: LikelihoodModel,
    /// Fixes the true model instead of drawing it from the weights.
    pub true_model: Option<usize>,
}

impl Default for MixtsConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            seed: 0,
            likelihood_floor: 1e-6,
            likelihood: LikelihoodModel::Rewards,
            true_model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub probs: Vec<f64>,
    /// Number of episodes folded in.
    pub updates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub true_model: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub sampled_model: usize,
    pub true_model: usize,
    pub steps: Vec<StepRecord>,
    /// Realized return of the rollout.
    pub total: f64,
    /// Exact return of the episode's policy in the true model.
    pub expected_return: f64,
    /// Optimal return of the true model minus `expected_return`.
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtsRun {
    pub true_model: usize,
    pub episodes: Vec<EpisodeLog>,
    /// `posteriors[i]` is the posterior before episode `i`; the last entry
    /// follows the final episode.
    pub posteriors: Vec<Posterior>,
    /// Mean realized return per episode.
    pub mean_return: f64,
}

/// Thompson sampling where the prior and the truth are the same instance.
pub fn mixts_run(mmdp: &Mmdp, config: &MixtsConfig) -> Result<MixtsRun, MmdpError> {
    mixts_run_with_prior(mmdp, mmdp, config)
}

/// Thompson sampling with `prior`'s models as hypotheses while rollouts
/// happen in one model of `truth`.
///
/// Each episode samples a hypothesis from the posterior, follows its optimal
/// policy in the true model, then reweights every hypothesis by the
/// likelihood of what was observed.
pub fn mixts_run_with_prior(prior: &Mmdp, truth: &Mmdp, config: &MixtsConfig) -> Result<MixtsRun, MmdpError> {
    if config.episodes == 0 {
        return Err(MmdpError::InvalidArgument("episodes must be at least 1".into()));
    }
    let floor = config.likelihood_floor;
    if !(0.0..1.0).contains(&floor) {
        return Err(MmdpError::InvalidArgument(format!(
            "likelihood floor must lie in [0, 1), got {floor}"
        )));
    }
    for (what, expected, found) in [
        ("horizon", prior.horizon(), truth.horizon()),
        ("states", prior.n_states(), truth.n_states()),
        ("actions", prior.n_actions(), truth.n_actions()),
    ] {
        if expected != found {
            return Err(MmdpError::DimensionMismatch { what, expected, found });
        }
    }
    let true_model = match config.true_model {
        Some(m) if m >= truth.n_models() => {
            return Err(MmdpError::InvalidArgument(format!(
                "true model {m} out of range for {} models",
                truth.n_models()
            )))
        }
        Some(m) => m,
        None => {
            let u = episode_rng(config.seed, u64::MAX).gen();
            sample_discrete(truth.weights().iter().copied().enumerate(), u)
        }
    };

    let policies = model_optimal_policies(prior);
    let world = truth.single_model(true_model);
    let best = solve_oracle(&world)?;
    let policy_returns = policies
        .iter()
        .map(|p| Ok(model_returns(&world, p)?[0]))
        .collect::<Result<Vec<f64>, MmdpError>>()?;

    let nm = prior.n_models();
    let mut log_weights: Vec<f64> = prior.weights().iter().map(|w| w.ln()).collect();
    let mut posterior = Posterior {
        probs: prior.weights().to_vec(),
        updates: 0,
    };
    let mut posteriors = vec![posterior.clone()];
    let mut episodes = Vec::with_capacity(config.episodes);

    for i in 0..config.episodes {
        let mut rng = episode_rng(config.seed, i as u64);
        let sampled = sample_discrete(posterior.probs.iter().copied().enumerate(), rng.gen());
        let episode = simulate_episode(truth, &policies[sampled], Some(true_model), &mut rng);

        for (m, lw) in log_weights.iter_mut().enumerate() {
            for t in 0..prior.horizon() {
                let (s, a) = (episode.states[t], episode.actions[t]);
                let matches = (prior.reward(t, m, s, a) - episode.rewards[t]).abs() <= REWARD_MATCH;
                let mut evidence = if matches { 1.0 } else { 0.0 };
                if config.likelihood == LikelihoodModel::RewardsAndTransitions && t + 1 < prior.horizon() {
                    evidence *= prior.prob(m, s, a, episode.states[t + 1]);
                }
                *lw += ((1.0 - floor) * evidence + floor).ln();
            }
        }
        posterior = normalize(&mut log_weights, floor > 0.0)?;
        posterior.updates = i + 1;
        posteriors.push(posterior.clone());

        let steps = (0..prior.horizon())
            .map(|t| StepRecord {
                t,
                state: episode.states[t],
                action: episode.actions[t],
                reward: episode.rewards[t],
                true_model,
            })
            .collect();
        episodes.push(EpisodeLog {
            sampled_model: sampled,
            true_model,
            steps,
            total: episode.total,
            expected_return: policy_returns[sampled],
            regret: best - policy_returns[sampled],
        });
    }
    debug_assert_eq!(posterior.probs.len(), nm);
    let mean_return = episodes.iter().map(|e| e.total).sum::<f64>() / episodes.len() as f64;
    Ok(MixtsRun {
        true_model,
        episodes,
        posteriors,
        mean_return,
    })
}

/// Shifts the log weights so they sum to one in probability space and
/// returns the probabilities. With `keep_positive`, underflow is clamped to
/// the smallest positive double.
fn normalize(log_weights: &mut [f64], keep_positive: bool) -> Result<Posterior, MmdpError> {
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(MmdpError::DegeneratePosterior);
    }
    let total: f64 = log_weights.iter().map(|lw| (lw - top).exp()).sum();
    let shift = top + total.ln();
    let probs = log_weights
        .iter_mut()
        .map(|lw| {
            *lw -= shift;
            let p = lw.exp();
            if keep_positive {
                p.max(f64::MIN_POSITIVE)
            } else {
                p
            }
        })
        .collect();
    Ok(Posterior { probs, updates: 0 })
}

#[derive(Debug, Clone)]
pub enum RegretInstance {
    Counterexample {
        lambda: f64,
    },
    /// Any instance; the horizon is overridden per row.
    General(Mmdp),
}

impl RegretInstance {
    fn at(&self, horizon: usize) -> Result<Mmdp, MmdpError> {
        match self {
            Self::Counterexample { lambda } => counterexample_mmdp(*lambda, horizon),
            Self::General(mmdp) => Ok(mmdp.with_horizon(horizon)?),
        }
    }
}

/// Policy whose regret is measured.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySource {
    BestMarkov,
    Mvp,
    Wsu,
    Cadp,
    /// Expected return of the second half of a Thompson-sampling run,
    /// averaged over the true model.
    Mixts {
        episodes: usize,
        seed: u64,
    },
}

impl fmt::Display for PolicySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BestMarkov => "markov",
            Self::Mvp => "mvp",
            Self::Wsu => "wsu",
            Self::Cadp => "cadp",
            Self::Mixts { .. } => "mixts",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub horizon: usize,
    pub achieved: f64,
    pub markov_best: f64,
    /// Oracle bound: the weighted mean of the per-model optima.
    pub history_best: f64,
    /// Return of exploring once with action 1 and then committing, on the
    /// counterexample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explore_exploit: Option<f64>,
    pub regret: f64,
    /// `c * T` with `c = min(2 lambda, 1 - lambda) / 2`, on the counterexample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub source: String,
    pub rows: Vec<RegretRow>,
    /// Least-squares slope of regret against `T` over the later half of the
    /// rows.
    pub slope: Option<f64>,
}

impl RegretReport {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["T", "markov_best", "history_best", "regret", "bound"])?;
        for row in &self.rows {
            out.write_record([
                row.horizon.to_string(),
                row.markov_best.to_string(),
                row.history_best.to_string(),
                row.regret.to_string(),
                row.bound.map(|b| b.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Slope constant of the linear lower bound on the counterexample.
pub fn counterexample_bound_slope(lambda: f64) -> f64 {
    (2.0 * lambda).min(1.0 - lambda) / 2.0
}

/// Return of a deterministic policy on an instance whose rows each have a
/// single successor and whose start is a point mass.
fn path_return(mmdp: &Mmdp, start: usize, action: impl Fn(usize, usize) -> usize) -> f64 {
    let mut total = 0.0;
    for (m, lambda) in mmdp.weights().iter().enumerate() {
        let model = mmdp.model(m);
        let mut s = start;
        let mut value = 0.0;
        for t in 0..mmdp.horizon() {
            let a = action(t, s);
            value += mmdp.reward(t, m, s, a);
            s = model.row(s, a).0[0];
        }
        total += lambda * value;
    }
    total
}

/// Only the action in `s0` at even epochs matters on the counterexample: every
/// other epoch is spent in a state whose actions coincide. Bit `k` of the
/// index is the action at epoch `2k`.
fn counterexample_action(bits: u64) -> impl Fn(usize, usize) -> usize {
    move |t, s| {
        if s == 0 && t % 2 == 0 {
            ((bits >> (t / 2)) & 1) as usize
        } else {
            0
        }
    }
}

fn counterexample_markov_best(mmdp: &Mmdp) -> Result<(DeterministicPolicy, f64), MmdpError> {
    let decisions = mmdp.horizon().div_ceil(2);
    let candidates = 2f64.powi(decisions as i32);
    if candidates > REGRET_SEARCH_LIMIT {
        return Err(MmdpError::Intractable {
            candidates,
            limit: REGRET_SEARCH_LIMIT,
        });
    }
    let (value, bits) = (0..1u64 << decisions)
        .into_par_iter()
        .map(|bits| (path_return(mmdp, 0, counterexample_action(bits)), bits))
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x },
        );
    let act = counterexample_action(bits);
    let mut policy = DeterministicPolicy::for_mmdp(mmdp);
    for t in 0..mmdp.horizon() {
        for s in 0..mmdp.n_states() {
            policy.set_action(t, s, act(t, s));
        }
    }
    Ok((policy, value))
}

fn mixts_exploit_return(mmdp: &Mmdp, episodes: usize, seed: u64) -> Result<f64, MmdpError> {
    let mut total = 0.0;
    for (m, lambda) in mmdp.weights().iter().enumerate() {
        let config = MixtsConfig {
            episodes,
            seed,
            true_model: Some(m),
            ..MixtsConfig::default()
        };
        let run = mixts_run(mmdp, &config)?;
        let tail = &run.episodes[episodes / 2..];
        total += lambda * tail.iter().map(|e| e.expected_return).sum::<f64>() / tail.len() as f64;
    }
    Ok(total)
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Regret of `source` against the oracle bound at every horizon.
pub fn regret_scan(
    instance: &RegretInstance,
    source: &PolicySource,
    horizons: &[usize],
) -> Result<RegretReport, MmdpError> {
    if horizons.is_empty() {
        return Err(MmdpError::InvalidArgument("no horizons given".into()));
    }
    let mut rows = Vec::with_capacity(horizons.len());
    for &horizon in horizons {
        let mmdp = instance.at(horizon)?;
        let (markov_policy, markov_best) = match instance {
            RegretInstance::Counterexample { .. } => counterexample_markov_best(&mmdp)?,
            RegretInstance::General(_) => brute_force_within(&mmdp, REGRET_SEARCH_LIMIT)?,
        };
        let achieved = match source {
            PolicySource::BestMarkov => exact_return(&mmdp, &markov_policy)?,
            PolicySource::Mvp => solve_mvp(&mmdp)?.return_value,
            PolicySource::Wsu => solve_wsu(&mmdp)?.return_value,
            PolicySource::Cadp => solve_cadp(&mmdp, &CadpConfig::default())?.return_value,
            PolicySource::Mixts { episodes, seed } => mixts_exploit_return(&mmdp, *episodes, *seed)?,
        };
        let history_best = solve_oracle(&mmdp)?;
        let (explore_exploit, bound) = match instance {
            RegretInstance::Counterexample { lambda } => {
                let t = horizon as f64;
                let committed = lambda * (t - 2.0) + 1.5 * (1.0 - lambda) * t;
                (Some(committed.max(t)), Some(counterexample_bound_slope(*lambda) * t))
            }
            RegretInstance::General(_) => (None, None),
        };
        log::debug!("regret scan T={horizon}: achieved {achieved}, markov {markov_best}, oracle {history_best}");
        rows.push(RegretRow {
            horizon,
            achieved,
            markov_best,
            history_best,
            explore_exploit,
            regret: history_best - achieved,
            bound,
        });
    }
    let tail: Vec<(f64, f64)> = rows[rows.len() / 2..]
        .iter()
        .map(|r| (r.horizon as f64, r.regret))
        .collect();
    Ok(RegretReport {
        source: source.to_string(),
        slope: least_squares_slope(&tail),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::random_instance;

    #[test]
    fn counterexample_is_valid_and_deterministic() {
        let mmdp = counterexample_mmdp(0.5, 4).unwrap();
        assert!(mmdp.validate().is_empty());
        for model in mmdp.models() {
            for s in 0..4 {
                for a in 0..2 {
                    assert_eq!(model.row(s, a).1, &[1.0]);
                }
            }
        }
        assert!(counterexample_mmdp(1.0, 4).is_err());
        assert!(counterexample_mmdp(0.5, 1).is_err());
    }

    #[test]
    fn counterexample_single_model_returns() {
        let mmdp = counterexample_mmdp(0.5, 4).unwrap();
        let safe = DeterministicPolicy::constant(4, 4, 2, 0);
        let risky = DeterministicPolicy::constant(4, 4, 2, 1);
        assert_eq!(model_returns(&mmdp.single_model(0), &safe).unwrap(), vec![4.0]);
        assert_eq!(model_returns(&mmdp.single_model(1), &risky).unwrap(), vec![6.0]);
    }

    #[test]
    fn path_return_matches_exact_return() {
        let mmdp = counterexample_mmdp(0.3, 9).unwrap();
        for bits in 0..32 {
            let act = counterexample_action(bits);
            let mut policy = DeterministicPolicy::for_mmdp(&mmdp);
            for t in 0..9 {
                for s in 0..4 {
                    policy.set_action(t, s, act(t, s));
                }
            }
            let exact = exact_return(&mmdp, &policy).unwrap();
            assert!((exact - path_return(&mmdp, 0, &act)).abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_search_agrees_with_full_enumeration() {
        let mmdp = counterexample_mmdp(0.3, 4).unwrap();
        let (_, reduced) = counterexample_markov_best(&mmdp).unwrap();
        let (_, full) = crate::eval::brute_force_best(&mmdp).unwrap();
        assert!((reduced - full).abs() < 1e-12);
    }

    #[test]
    fn best_markov_regret_is_linear() {
        for lambda in [0.1, 0.5, 0.9] {
            let horizons: Vec<usize> = (2..=10).map(|k| 2 * k).collect();
            let report = regret_scan(
                &RegretInstance::Counterexample { lambda },
                &PolicySource::BestMarkov,
                &horizons,
            )
            .unwrap();
            for row in &report.rows {
                let t = row.horizon as f64;
                assert!((row.markov_best - t / 2.0 * 2f64.max(3.0 * (1.0 - lambda))).abs() < 1e-9);
                assert!(row.regret >= row.bound.unwrap() - 1e-9);
            }
        }
    }

    #[test]
    fn near_single_model_slope() {
        let report = regret_scan(
            &RegretInstance::Counterexample { lambda: 0.999 },
            &PolicySource::BestMarkov,
            &[4, 8, 12, 16],
        )
        .unwrap();
        assert!((report.slope.unwrap() - 0.0005).abs() < 1e-9);
    }

    #[test]
    fn intractable_general_search() {
        let mmdp = random_instance(5, 2, 2, 2, 0, 1.0);
        let err = regret_scan(&RegretInstance::General(mmdp), &PolicySource::Wsu, &[6]).unwrap_err();
        assert!(matches!(err, MmdpError::Intractable { .. }));
    }

    #[test]
    fn single_model_posterior_is_fixed() {
        let mmdp = random_instance(3, 2, 1, 3, 5, 1.0);
        let run = mixts_run(
            &mmdp,
            &MixtsConfig {
                episodes: 5,
                ..MixtsConfig::default()
            },
        )
        .unwrap();
        for posterior in &run.posteriors {
            assert_eq!(posterior.probs, vec![1.0]);
        }
        for episode in &run.episodes {
            assert_eq!(episode.sampled_model, 0);
            assert!(episode.regret.abs() < 1e-12);
            assert_eq!(episode.steps.len(), 3);
        }
    }

    #[test]
    fn distinct_initial_rewards_identify_the_model() {
        // both models pay differently for the only action in the start state
        let a = Model::from_dense(&[vec![vec![1.0]]], &[vec![1.0]]).unwrap();
        let b = Model::from_dense(&[vec![vec![1.0]]], &[vec![0.0]]).unwrap();
        let mmdp = Mmdp::new(2, vec![a, b], vec![1.0], vec![0.5, 0.5], 1.0).unwrap();
        let config = MixtsConfig {
            episodes: 1,
            likelihood_floor: 0.0,
            true_model: Some(1),
            ..MixtsConfig::default()
        };
        let run = mixts_run(&mmdp, &config).unwrap();
        assert!(run.posteriors[1].probs[1] >= 0.99);
    }

    #[test]
    fn degenerate_posterior() {
        let a = Model::from_dense(&[vec![vec![1.0]]], &[vec![1.0]]).unwrap();
        let b = Model::from_dense(&[vec![vec![1.0]]], &[vec![5.0]]).unwrap();
        let prior = Mmdp::new(1, vec![a], vec![1.0], vec![1.0], 1.0).unwrap();
        let truth = Mmdp::new(1, vec![b], vec![1.0], vec![1.0], 1.0).unwrap();
        let config = MixtsConfig {
            episodes: 1,
            likelihood_floor: 0.0,
            ..MixtsConfig::default()
        };
        assert!(matches!(
            mixts_run_with_prior(&prior, &truth, &config),
            Err(MmdpError::DegeneratePosterior)
        ));
    }

    #[test]
    fn mixts_is_deterministic_and_normalized() {
        let mmdp = random_instance(4, 3, 3, 4, 8, 0.7);
        let config = MixtsConfig {
            episodes: 30,
            seed: 17,
            likelihood: LikelihoodModel::RewardsAndTransitions,
            ..MixtsConfig::default()
        };
        let first = mixts_run(&mmdp, &config).unwrap();
        assert_eq!(first, mixts_run(&mmdp, &config).unwrap());
        for posterior in &first.posteriors {
            assert!((posterior.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(posterior.probs[first.true_model] > 0.0);
        }
    }

    #[test]
    fn mixts_stops_paying_regret_on_the_counterexample() {
        let mmdp = counterexample_mmdp(0.5, 10).unwrap();
        for true_model in 0..2 {
            let config = MixtsConfig {
                episodes: 100,
                seed: 3,
                true_model: Some(true_model),
                ..MixtsConfig::default()
            };
            let run = mixts_run(&mmdp, &config).unwrap();
            let concentrated: Vec<&EpisodeLog> = run
                .episodes
                .iter()
                .zip(&run.posteriors)
                .filter(|(_, p)| p.probs[true_model] >= 0.99)
                .map(|(e, _)| e)
                .collect();
            assert!(concentrated.len() >= 50);
            assert!(concentrated.iter().all(|e| e.regret.abs() < 1e-9));
        }
    }

    #[test]
    fn likelihood_names_round_trip() {
        for l in [LikelihoodModel::Rewards, LikelihoodModel::RewardsAndTransitions] {
            assert_eq!(l.to_string().parse::<LikelihoodModel>().unwrap(), l);
        }
        assert!("beliefs".parse::<LikelihoodModel>().is_err());
    }
}
