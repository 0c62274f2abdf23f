//! Multi-model MDP data model.
//!
//! An [`Mmdp`] holds `M` candidate models over a shared state and action
//! space. Transitions are stationary per model and stored as compressed
//! sparse rows, one row per `(s, a)`. Rewards are expected immediate rewards
//! `r^m(s, a)`; the time-indexed reward seen by solvers is
//! `r^m_t(s, a) = scale[t] * r^m(s, a)` where `scale` is all ones until
//! [`Mmdp::fold_discount`] moves the discount factor into it.

use std::fmt;

use thiserror::Error;

/// Tolerance used by [`Mmdp::validate`] for every sum-to-one check.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{0} must be at least 1")]
    EmptyDimension(&'static str),
    #[error("{what}: expected length {expected}, found {found}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("model {model}: transition ({state}, {action}) -> {next} is out of range")]
    StateOutOfRange {
        model: usize,
        state: usize,
        action: usize,
        next: usize,
    },
    #[error("model {model}: no transition row for state {state}, action {action}")]
    MissingRow { model: usize, state: usize, action: usize },
    #[error("model {model} has {found_states} states and {found_actions} actions, expected {states} and {actions}")]
    ShapeMismatch {
        model: usize,
        states: usize,
        actions: usize,
        found_states: usize,
        found_actions: usize,
    },
}

/// One MDP model: sparse stationary transitions plus expected rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    n_states: usize,
    n_actions: usize,
    row_start: Vec<usize>,
    next_state: Vec<usize>,
    prob: Vec<f64>,
    reward: Vec<f64>,
}

impl Model {
    /// Builds a model from one sparse row per `(s, a)`, indexed `s * A + a`.
    ///
    /// Entries with the same successor are merged by summing probabilities.
    /// Every row must be non-empty.
    pub fn from_rows(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Vec<(usize, f64)>>,
        reward: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if n_states == 0 {
            return Err(ModelError::EmptyDimension("number of states"));
        }
        if n_actions == 0 {
            return Err(ModelError::EmptyDimension("number of actions"));
        }
        let pairs = n_states * n_actions;
        if rows.len() != pairs {
            return Err(ModelError::Length {
                what: "transition rows",
                expected: pairs,
                found: rows.len(),
            });
        }
        if reward.len() != pairs {
            return Err(ModelError::Length {
                what: "rewards",
                expected: pairs,
                found: reward.len(),
            });
        }

        let mut row_start = Vec::with_capacity(pairs + 1);
        let mut next_state = Vec::new();
        let mut prob = Vec::new();
        row_start.push(0);
        for (k, mut row) in rows.into_iter().enumerate() {
            let (state, action) = (k / n_actions, k % n_actions);
            if row.is_empty() {
                return Err(ModelError::MissingRow {
                    model: 0,
                    state,
                    action,
                });
            }
            row.sort_by_key(|&(next, _)| next);
            let begin = next_state.len();
            for (next, p) in row {
                if next >= n_states {
                    return Err(ModelError::StateOutOfRange {
                        model: 0,
                        state,
                        action,
                        next,
                    });
                }
                if next_state.len() > begin && *next_state.last().unwrap() == next {
                    *prob.last_mut().unwrap() += p;
                } else {
                    next_state.push(next);
                    prob.push(p);
                }
            }
            row_start.push(next_state.len());
        }

        Ok(Self {
            n_states,
            n_actions,
            row_start,
            next_state,
            prob,
            reward,
        })
    }

    /// Dense constructor, `transition[s][a][s']` and `reward[s][a]`. Zero
    /// probabilities are dropped from the sparse storage.
    pub fn from_dense(transition: &[Vec<Vec<f64>>], reward: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n_states = transition.len();
        let n_actions = transition.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(n_states * n_actions);
        let mut flat_reward = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            if transition[s].len() != n_actions {
                return Err(ModelError::Length {
                    what: "actions per state",
                    expected: n_actions,
                    found: transition[s].len(),
                });
            }
            for a in 0..n_actions {
                if transition[s][a].len() != n_states {
                    return Err(ModelError::Length {
                        what: "transition row",
                        expected: n_states,
                        found: transition[s][a].len(),
                    });
                }
                rows.push(
                    transition[s][a]
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p != 0.0)
                        .map(|(next, &p)| (next, p))
                        .collect(),
                );
                let r = reward
                    .get(s)
                    .and_then(|row| row.get(a))
                    .copied()
                    .ok_or(ModelError::Length {
                        what: "rewards",
                        expected: n_states * n_actions,
                        found: reward.iter().map(Vec::len).sum(),
                    })?;
                flat_reward.push(r);
            }
        }
        Self::from_rows(n_states, n_actions, rows, flat_reward)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Successor states and probabilities of `(s, a)`.
    #[inline]
    pub fn row(&self, s: usize, a: usize) -> (&[usize], &[f64]) {
        let k = s * self.n_actions + a;
        let (lo, hi) = (self.row_start[k], self.row_start[k + 1]);
        (&self.next_state[lo..hi], &self.prob[lo..hi])
    }

    /// Dense lookup of `p(s' | s, a)`.
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        let (succ, prob) = self.row(s, a);
        succ.binary_search(&next).map_or(0.0, |i| prob[i])
    }

    /// Stationary expected immediate reward `r(s, a)`.
    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Number of stored (non-zero) transition entries.
    pub fn nnz(&self) -> usize {
        self.next_state.len()
    }
}

/// A finite-horizon multi-model MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Mmdp {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    models: Vec<Model>,
    initial: Vec<f64>,
    weights: Vec<f64>,
    discount: f64,
    folded: f64,
    scale: Vec<f64>,
}

impl Mmdp {
    /// Assembles an instance, checking shapes only. Probabilistic invariants
    /// are reported by [`Mmdp::validate`].
    pub fn new(
        horizon: usize,
        models: Vec<Model>,
        initial: Vec<f64>,
        weights: Vec<f64>,
        discount: f64,
    ) -> Result<Self, ModelError> {
        if horizon == 0 {
            return Err(ModelError::EmptyDimension("horizon"));
        }
        let first = models.first().ok_or(ModelError::EmptyDimension("number of models"))?;
        let (n_states, n_actions) = (first.n_states, first.n_actions);
        for (m, model) in models.iter().enumerate() {
            if model.n_states != n_states || model.n_actions != n_actions {
                return Err(ModelError::ShapeMismatch {
                    model: m,
                    states: n_states,
                    actions: n_actions,
                    found_states: model.n_states,
                    found_actions: model.n_actions,
                });
            }
        }
        if initial.len() != n_states {
            return Err(ModelError::Length {
                what: "initial distribution",
                expected: n_states,
                found: initial.len(),
            });
        }
        if weights.len() != models.len() {
            return Err(ModelError::Length {
                what: "model weights",
                expected: models.len(),
                found: weights.len(),
            });
        }
        Ok(Self {
            horizon,
            n_states,
            n_actions,
            models,
            initial,
            weights,
            discount,
            folded: 1.0,
            scale: vec![1.0; horizon],
        })
    }

    /// Same instance with uniform model weights `1 / M`.
    pub fn with_uniform_weights(
        horizon: usize,
        models: Vec<Model>,
        initial: Vec<f64>,
        discount: f64,
    ) -> Result<Self, ModelError> {
        let n = models.len().max(1);
        Self::new(horizon, models, initial, vec![1.0 / n as f64; n], discount)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn model(&self, m: usize) -> &Model {
        &self.models[m]
    }

    /// Initial state distribution `mu`.
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Model weights `lambda`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Multiplier applied to the stationary rewards at decision epoch `t`
    /// (0-based).
    pub fn reward_scale(&self, t: usize) -> f64 {
        self.scale[t]
    }

    /// Time-indexed reward `r^m_t(s, a)`; `t` is 0-based.
    #[inline]
    pub fn reward(&self, t: usize, m: usize, s: usize, a: usize) -> f64 {
        self.scale[t] * self.models[m].reward(s, a)
    }

    /// Dense lookup of `p^m(s' | s, a)`.
    pub fn prob(&self, m: usize, s: usize, a: usize, next: usize) -> f64 {
        self.models[m].prob(s, a, next)
    }

    /// Returns an instance whose reward at epoch `t` is `gamma^t * r` (0-based
    /// `t`, i.e. `gamma^{t-1}` for 1-based epochs) and whose discount is 1.
    /// Transitions are untouched.
    pub fn fold_discount(&self) -> Mmdp {
        let gamma = self.discount;
        let mut out = self.clone();
        if gamma != 1.0 {
            out.folded = self.folded * gamma;
            for (t, scale) in out.scale.iter_mut().enumerate() {
                *scale *= gamma.powi(t as i32);
            }
        }
        out.discount = 1.0;
        out
    }

    /// Same models with a different horizon. Folded discounting carries over.
    pub fn with_horizon(&self, horizon: usize) -> Result<Mmdp, ModelError> {
        if horizon == 0 {
            return Err(ModelError::EmptyDimension("horizon"));
        }
        let mut out = self.clone();
        out.horizon = horizon;
        out.scale = (0..horizon).map(|t| self.folded.powi(t as i32)).collect();
        Ok(out)
    }

    /// Same models with new weights. Shape is checked; values are not.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Mmdp, ModelError> {
        if weights.len() != self.models.len() {
            return Err(ModelError::Length {
                what: "model weights",
                expected: self.models.len(),
                found: weights.len(),
            });
        }
        let mut out = self.clone();
        out.weights = weights;
        Ok(out)
    }

    /// Same models with a new initial distribution.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Mmdp, ModelError> {
        if initial.len() != self.n_states {
            return Err(ModelError::Length {
                what: "initial distribution",
                expected: self.n_states,
                found: initial.len(),
            });
        }
        let mut out = self.clone();
        out.initial = initial;
        Ok(out)
    }

    /// Replaces the model set, keeping horizon, reward scale, `mu` and discount.
    pub(crate) fn with_models(&self, models: Vec<Model>, weights: Vec<f64>) -> Mmdp {
        debug_assert_eq!(models.len(), weights.len());
        let mut out = self.clone();
        out.models = models;
        out.weights = weights;
        out
    }

    /// A single-model instance holding only model `m`, with weight 1.
    pub fn single_model(&self, m: usize) -> Mmdp {
        let mut out = self.clone();
        out.models = vec![self.models[m].clone()];
        out.weights = vec![1.0];
        out
    }

    /// Lists every violated invariant. Empty iff the instance is well formed.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        for (m, model) in self.models.iter().enumerate() {
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    let (succ, prob) = model.row(s, a);
                    let mut sum = 0.0;
                    for (&next, &p) in succ.iter().zip(prob) {
                        if !(p >= 0.0) {
                            issues.push(ValidationIssue::NegativeProbability {
                                model: m,
                                state: s,
                                action: a,
                                next,
                                value: p,
                            });
                        }
                        sum += p;
                    }
                    if !((sum - 1.0).abs() <= PROBABILITY_TOLERANCE) {
                        issues.push(ValidationIssue::TransitionSum {
                            model: m,
                            state: s,
                            action: a,
                            sum,
                        });
                    }
                    if !model.reward(s, a).is_finite() {
                        issues.push(ValidationIssue::NonFiniteReward {
                            model: m,
                            state: s,
                            action: a,
                        });
                    }
                }
            }
        }

        for (s, &p) in self.initial.iter().enumerate() {
            if !(p >= 0.0) {
                issues.push(ValidationIssue::NegativeInitial { state: s, value: p });
            }
        }
        let mu_sum: f64 = self.initial.iter().sum();
        if !((mu_sum - 1.0).abs() <= PROBABILITY_TOLERANCE) {
            issues.push(ValidationIssue::InitialSum { sum: mu_sum });
        }

        for (m, &w) in self.weights.iter().enumerate() {
            if !(w > 0.0 && w <= 1.0) {
                issues.push(ValidationIssue::WeightRange { model: m, value: w });
            }
        }
        let w_sum: f64 = self.weights.iter().sum();
        if !((w_sum - 1.0).abs() <= PROBABILITY_TOLERANCE) {
            issues.push(ValidationIssue::WeightSum { sum: w_sum });
        }

        if !(0.0..=1.0).contains(&self.discount) {
            issues.push(ValidationIssue::Discount { value: self.discount });
        }
        ValidationReport { issues }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    TransitionSum {
        model: usize,
        state: usize,
        action: usize,
        sum: f64,
    },
    NegativeProbability {
        model: usize,
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    NonFiniteReward {
        model: usize,
        state: usize,
        action: usize,
    },
    NegativeInitial {
        state: usize,
        value: f64,
    },
    InitialSum {
        sum: f64,
    },
    WeightRange {
        model: usize,
        value: f64,
    },
    WeightSum {
        sum: f64,
    },
    Discount {
        value: f64,
    },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TransitionSum {
                model,
                state,
                action,
                sum,
            } => write!(
                f,
                "transition probabilities of (model {model}, state {state}, action {action}) sum {sum}"
            ),
            Self::NegativeProbability {
                model,
                state,
                action,
                next,
                value,
            } => write!(
                f,
                "negative probability {value} for (model {model}, state {state}, action {action}) -> state {next}"
            ),
            Self::NonFiniteReward { model, state, action } => {
                write!(
                    f,
                    "non-finite reward for (model {model}, state {state}, action {action})"
                )
            }
            Self::NegativeInitial { state, value } => {
                write!(f, "initial probability of state {state} is negative ({value})")
            }
            Self::InitialSum { sum } => write!(f, "initial distribution sums {sum}"),
            Self::WeightRange { model, value } => write!(f, "model weight of model {model} is outside (0, 1]: {value}"),
            Self::WeightSum { sum } => write!(f, "model weights sum {sum}"),
            Self::Discount { value } => write!(f, "discount {value} is outside [0, 1]"),
        }
    }
}

/// Result of [`Mmdp::validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}
