//! MVP, WSU and CADP.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::values::{forward_weights, q_layer, WeightTable};
use crate::error::MmdpError;
use crate::eval::exact_return;
use crate::model::{Mmdp, Model};
use crate::policy::{DeterministicPolicy, MarkovPolicy};

/// Drop below the previous iterate's return that trips the monotonicity guard.
pub const MONOTONE_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Single-pass algorithm.
    Completed,
    /// The iteration returned the policy it was given.
    PolicyFixedPoint,
    /// Return improved by less than the tolerance.
    NoImprovement,
    MaxIterations,
}

/// Output of every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub algorithm: String,
    pub policy: DeterministicPolicy,
    /// Exact MMDP return of `policy`.
    pub return_value: f64,
    /// Return of the randomized iterate, for first-order methods.
    pub randomized_return: Option<f64>,
    /// Return of the starting policy, for iterative methods.
    pub initial_return: Option<f64>,
    /// One entry per iteration.
    pub iterate_returns: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub wall_time: Duration,
}

#[derive(Serialize)]
struct SolveReportJson<'a> {
    algorithm: &'a str,
    return_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    randomized_return: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_return: Option<f64>,
    iterate_returns: &'a [f64],
    iterations: usize,
    stop_reason: StopReason,
    wall_time_s: f64,
    policy: Vec<Vec<usize>>,
}

impl SolveReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SolveReportJson {
            algorithm: &self.algorithm,
            return_value: self.return_value,
            randomized_return: self.randomized_return,
            initial_return: self.initial_return,
            iterate_returns: &self.iterate_returns,
            iterations: self.iterations,
            stop_reason: self.stop_reason,
            wall_time_s: self.wall_time.as_secs_f64(),
            policy: self.policy.to_matrix(),
        })
        .expect("report serializes")
    }

    /// Rows `iteration,return` for plotting convergence. Row 0 is the
    /// starting policy when known.
    pub fn write_trace_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["iteration", "return"])?;
        if let Some(initial) = self.initial_return {
            out.serialize((0, initial))?;
        }
        for (n, r) in self.iterate_returns.iter().enumerate() {
            out.serialize((n + 1, r))?;
        }
        out.flush()?;
        Ok(())
    }

    fn single_pass(
        algorithm: &str,
        mmdp: &Mmdp,
        policy: DeterministicPolicy,
        started: Instant,
    ) -> Result<Self, MmdpError> {
        let wall_time = started.elapsed();
        let return_value = exact_return(mmdp, &policy)?;
        Ok(Self {
            algorithm: algorithm.to_string(),
            policy,
            return_value,
            randomized_return: None,
            initial_return: None,
            iterate_returns: vec![return_value],
            iterations: 1,
            stop_reason: StopReason::Completed,
            wall_time,
        })
    }
}

/// Backward pass that picks, at each `(t, s)`, an action maximizing
/// `sum_m weight(t, m, s) q_{t,m}(s, a)` with `q` evaluated under the suffix
/// policy already chosen for later epochs.
///
/// Ties go to the lowest action index; an incumbent action, when given,
/// keeps its place unless another action is strictly better.
fn weighted_backward_pass<W>(mmdp: &Mmdp, weight: W, incumbent: Option<&DeterministicPolicy>) -> DeterministicPolicy
where
    W: Fn(usize, usize, usize) -> f64,
{
    let (horizon, nm, ns, na) = (mmdp.horizon(), mmdp.n_models(), mmdp.n_states(), mmdp.n_actions());
    let mut policy = incumbent
        .cloned()
        .unwrap_or_else(|| DeterministicPolicy::for_mmdp(mmdp));
    let mut v_next = vec![0.0; nm * ns];
    let mut v_now = vec![0.0; nm * ns];
    let mut q = vec![0.0; nm * ns * na];
    let mut score = vec![0.0; na];

    for t in (0..horizon).rev() {
        q_layer(mmdp, t, &v_next, &mut q);
        for s in 0..ns {
            score.iter_mut().for_each(|x| *x = 0.0);
            for m in 0..nm {
                let w = weight(t, m, s);
                let row = &q[(m * ns + s) * na..(m * ns + s + 1) * na];
                for (acc, &qa) in score.iter_mut().zip(row) {
                    *acc += w * qa;
                }
            }
            let mut best = incumbent.map_or(0, |p| p.action(t, s));
            for a in 0..na {
                if score[a] > score[best] {
                    best = a;
                }
            }
            policy.set_action(t, s, best);
            for m in 0..nm {
                v_now[m * ns + s] = q[(m * ns + s) * na + best];
            }
        }
        std::mem::swap(&mut v_now, &mut v_next);
    }
    policy
}

/// Mean value problem: solve the lambda-averaged MDP by backward induction.
pub fn solve_mvp(mmdp: &Mmdp) -> Result<SolveReport, MmdpError> {
    let started = Instant::now();
    let average = average_model(mmdp)?;
    let policy = weighted_backward_pass(&average, |_, _, _| 1.0, None);
    SolveReport::single_pass("mvp", mmdp, policy, started)
}

/// The single-model instance with `p = sum_m lambda_m p^m` and
/// `r = sum_m lambda_m r^m`.
pub fn average_model(mmdp: &Mmdp) -> Result<Mmdp, MmdpError> {
    let (ns, na) = (mmdp.n_states(), mmdp.n_actions());
    let mut rows = Vec::with_capacity(ns * na);
    let mut reward = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let mut row = Vec::new();
            let mut r = 0.0;
            for (model, &lambda) in mmdp.models().iter().zip(mmdp.weights()) {
                let (succ, prob) = model.row(s, a);
                row.extend(succ.iter().zip(prob).map(|(&next, &p)| (next, lambda * p)));
                r += lambda * model.reward(s, a);
            }
            rows.push(row);
            reward.push(r);
        }
    }
    let model = Model::from_rows(ns, na, rows, reward)?;
    Ok(mmdp.with_models(vec![model], vec![1.0]))
}

/// Weight-select-update: backward pass with the prior weights `lambda`.
pub fn solve_wsu(mmdp: &Mmdp) -> Result<SolveReport, MmdpError> {
    let started = Instant::now();
    let lambda = mmdp.weights();
    let policy = weighted_backward_pass(mmdp, |_, m, _| lambda[m], None);
    SolveReport::single_pass("wsu", mmdp, policy, started)
}

/// One coordinate-ascent sweep: a backward pass maximizing
/// `sum_m b[t][m][s] q_{t,m}(s, a)` with `b` computed under `warm_start`
/// and `q` under the policy being built. `warm_start` wins exact ties.
pub fn optimize_policy(
    mmdp: &Mmdp,
    weights: &WeightTable,
    warm_start: &DeterministicPolicy,
) -> Result<DeterministicPolicy, MmdpError> {
    warm_start.check_dims(mmdp)?;
    if weights.horizon() != mmdp.horizon()
        || weights.n_models() != mmdp.n_models()
        || weights.n_states() != mmdp.n_states()
    {
        return Err(MmdpError::StaleWeights(format!(
            "weights are {}x{}x{} (T x M x S), instance is {}x{}x{}",
            weights.horizon(),
            weights.n_models(),
            weights.n_states(),
            mmdp.horizon(),
            mmdp.n_models(),
            mmdp.n_states()
        )));
    }
    Ok(weighted_backward_pass(
        mmdp,
        |t, m, s| weights.b(t, m, s),
        Some(warm_start),
    ))
}

/// Starting policy for CADP.
#[derive(Debug, Clone, PartialEq)]
pub enum CadpInit {
    Mvp,
    Wsu,
    /// Uniformly random deterministic policy from the given seed.
    Random(u64),
    Policy(DeterministicPolicy),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadpConfig {
    pub init: CadpInit,
    pub max_iters: usize,
    /// Stop once an iteration improves the return by less than this.
    pub tol: f64,
    /// Fail with [`MmdpError::NonMonotone`] if an iterate loses more than
    /// [`MONOTONE_SLACK`].
    pub check_monotone: bool,
}

impl Default for CadpConfig {
    fn default() -> Self {
        Self {
            init: CadpInit::Wsu,
            max_iters: 100,
            tol: 1e-9,
            check_monotone: cfg!(debug_assertions),
        }
    }
}

impl CadpConfig {
    pub fn with_init(init: CadpInit) -> Self {
        Self {
            init,
            ..Self::default()
        }
    }
}

/// Optimal policy of each model on its own, by backward induction.
pub fn model_optimal_policies(mmdp: &Mmdp) -> Vec<DeterministicPolicy> {
    (0..mmdp.n_models())
        .map(|m| weighted_backward_pass(&mmdp.single_model(m), |_, _, _| 1.0, None))
        .collect()
}

/// Coordinate ascent dynamic programming.
pub fn solve_cadp(mmdp: &Mmdp, config: &CadpConfig) -> Result<SolveReport, MmdpError> {
    if config.max_iters == 0 {
        return Err(MmdpError::InvalidArgument("max_iters must be at least 1".into()));
    }
    let started = Instant::now();
    let mut policy = match &config.init {
        CadpInit::Mvp => solve_mvp(mmdp)?.policy,
        CadpInit::Wsu => solve_wsu(mmdp)?.policy,
        CadpInit::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            DeterministicPolicy::random(mmdp.horizon(), mmdp.n_states(), mmdp.n_actions(), &mut rng)
        }
        CadpInit::Policy(p) => {
            p.check_dims(mmdp)?;
            p.clone()
        }
    };
    let initial_return = exact_return(mmdp, &policy)?;
    let mut current = initial_return;
    let mut trace = Vec::new();
    let mut stop_reason = StopReason::MaxIterations;

    for iteration in 1..=config.max_iters {
        let weights = forward_weights(mmdp, &policy)?;
        let next = optimize_policy(mmdp, &weights, &policy)?;
        let next_return = exact_return(mmdp, &next)?;
        if config.check_monotone && next_return < current - MONOTONE_SLACK {
            return Err(MmdpError::NonMonotone {
                iteration,
                previous: current,
                current: next_return,
            });
        }
        trace.push(next_return);
        log::debug!("cadp iteration {iteration}: return {next_return}");

        if next == policy {
            stop_reason = StopReason::PolicyFixedPoint;
            break;
        }
        let improvement = next_return - current;
        policy = next;
        current = next_return;
        if improvement < config.tol {
            stop_reason = StopReason::NoImprovement;
            break;
        }
    }

    Ok(SolveReport {
        algorithm: "cadp".into(),
        policy,
        return_value: current,
        randomized_return: None,
        initial_return: Some(initial_return),
        iterations: trace.len(),
        iterate_returns: trace,
        stop_reason,
        wall_time: started.elapsed(),
    })
}
