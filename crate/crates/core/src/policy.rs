//! Markov policies indexed by `(t, s)`, with `t` a 0-based decision epoch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::MmdpError;
use crate::model::{Mmdp, PROBABILITY_TOLERANCE};

/// Read access shared by deterministic and randomized policies.
pub trait MarkovPolicy: Sync {
    fn horizon(&self) -> usize;
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;

    /// Calls `f(a, pi_t(s, a))` for every action with non-zero probability.
    fn for_each_action<F: FnMut(usize, f64)>(&self, t: usize, s: usize, f: F);

    fn check_dims(&self, mmdp: &Mmdp) -> Result<(), MmdpError> {
        let pairs = [
            ("horizon", mmdp.horizon(), self.horizon()),
            ("states", mmdp.n_states(), self.n_states()),
            ("actions", mmdp.n_actions(), self.n_actions()),
        ];
        for (what, expected, found) in pairs {
            if expected != found {
                return Err(MmdpError::DimensionMismatch { what, expected, found });
            }
        }
        Ok(())
    }
}

/// `d[t][s]` action table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicPolicy {
    n_actions: usize,
    n_states: usize,
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(horizon: usize, n_states: usize, n_actions: usize, actions: Vec<usize>) -> Result<Self, MmdpError> {
        if actions.len() != horizon * n_states {
            return Err(MmdpError::DimensionMismatch {
                what: "policy entries",
                expected: horizon * n_states,
                found: actions.len(),
            });
        }
        if let Some(&bad) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(MmdpError::InvalidArgument(format!(
                "action {bad} out of range for {n_actions} actions"
            )));
        }
        Ok(Self {
            n_actions,
            n_states,
            actions,
        })
    }

    /// Every `(t, s)` takes action `a`.
    pub fn constant(horizon: usize, n_states: usize, n_actions: usize, a: usize) -> Self {
        assert!(a < n_actions);
        Self {
            n_actions,
            n_states,
            actions: vec![a; horizon * n_states],
        }
    }

    /// Same shape as `mmdp`, all zeros.
    pub fn for_mmdp(mmdp: &Mmdp) -> Self {
        Self::constant(mmdp.horizon(), mmdp.n_states(), mmdp.n_actions(), 0)
    }

    /// Uniformly random action per `(t, s)`.
    pub fn random<R: Rng + ?Sized>(horizon: usize, n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        Self {
            n_actions,
            n_states,
            actions: (0..horizon * n_states).map(|_| rng.gen_range(0..n_actions)).collect(),
        }
    }

    /// From rows indexed `[t][s]`.
    pub fn from_matrix(matrix: &[Vec<usize>], n_actions: usize) -> Result<Self, MmdpError> {
        let n_states = matrix.first().map_or(0, Vec::len);
        if matrix.iter().any(|row| row.len() != n_states) {
            return Err(MmdpError::InvalidArgument("ragged policy matrix".into()));
        }
        Self::new(matrix.len(), n_states, n_actions, matrix.concat())
    }

    #[inline]
    pub fn action(&self, t: usize, s: usize) -> usize {
        self.actions[t * self.n_states + s]
    }

    pub fn set_action(&mut self, t: usize, s: usize, a: usize) {
        assert!(a < self.n_actions);
        self.actions[t * self.n_states + s] = a;
    }

    /// Rows indexed `[t][s]`.
    pub fn to_matrix(&self) -> Vec<Vec<usize>> {
        self.actions.chunks(self.n_states).map(<[usize]>::to_vec).collect()
    }

    /// One-hot randomized equivalent.
    pub fn to_randomized(&self) -> RandomizedPolicy {
        let mut probs = vec![0.0; self.actions.len() * self.n_actions];
        for (k, &a) in self.actions.iter().enumerate() {
            probs[k * self.n_actions + a] = 1.0;
        }
        RandomizedPolicy {
            horizon: self.horizon(),
            n_states: self.n_states,
            n_actions: self.n_actions,
            probs,
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.actions
    }

    /// Rows `idtime,idstate,idaction` (all 0-based).
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["idtime", "idstate", "idaction"])?;
        for t in 0..self.horizon() {
            for s in 0..self.n_states {
                out.serialize((t, s, self.action(t, s)))?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

impl MarkovPolicy for DeterministicPolicy {
    fn horizon(&self) -> usize {
        self.actions.len() / self.n_states
    }

    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    fn for_each_action<F: FnMut(usize, f64)>(&self, t: usize, s: usize, mut f: F) {
        f(self.action(t, s), 1.0);
    }
}

/// `pi[t][s][a]` probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedPolicy {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl RandomizedPolicy {
    /// Checks that every row lies on the simplex.
    pub fn new(horizon: usize, n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self, MmdpError> {
        let policy = Self::from_raw(horizon, n_states, n_actions, probs)?;
        for t in 0..horizon {
            for s in 0..n_states {
                let row = policy.row(t, s);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                    return Err(MmdpError::InvalidArgument(format!(
                        "policy row (t={t}, s={s}) is not a distribution: {row:?}"
                    )));
                }
            }
        }
        Ok(policy)
    }

    /// No simplex check; rows may be arbitrary reals. Used for perturbations.
    pub(crate) fn from_raw(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self, MmdpError> {
        if n_states == 0 || n_actions == 0 {
            return Err(MmdpError::InvalidArgument("empty policy".into()));
        }
        let expected = horizon * n_states * n_actions;
        if probs.len() != expected {
            return Err(MmdpError::DimensionMismatch {
                what: "policy entries",
                expected,
                found: probs.len(),
            });
        }
        Ok(Self {
            horizon,
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            horizon,
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; horizon * n_states * n_actions],
        }
    }

    /// Rows drawn from normalized uniform positives, bounded away from the
    /// simplex boundary.
    pub fn random_interior<R: Rng + ?Sized>(horizon: usize, n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut probs = Vec::with_capacity(horizon * n_states * n_actions);
        for _ in 0..horizon * n_states {
            let row: Vec<f64> = (0..n_actions).map(|_| rng.gen_range(0.1..1.0)).collect();
            let sum: f64 = row.iter().sum();
            probs.extend(row.iter().map(|p| p / sum));
        }
        Self {
            horizon,
            n_states,
            n_actions,
            probs,
        }
    }

    #[inline]
    pub fn row(&self, t: usize, s: usize) -> &[f64] {
        let k = (t * self.n_states + s) * self.n_actions;
        &self.probs[k..k + self.n_actions]
    }

    #[inline]
    pub fn row_mut(&mut self, t: usize, s: usize) -> &mut [f64] {
        let k = (t * self.n_states + s) * self.n_actions;
        &mut self.probs[k..k + self.n_actions]
    }

    pub fn prob(&self, t: usize, s: usize, a: usize) -> f64 {
        self.row(t, s)[a]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Most probable action per row; ties go to the lowest index.
    pub fn argmax(&self) -> DeterministicPolicy {
        let actions = self
            .probs
            .chunks(self.n_actions)
            .map(|row| {
                let mut best = 0;
                for (a, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect();
        DeterministicPolicy {
            n_actions: self.n_actions,
            n_states: self.n_states,
            actions,
        }
    }
}

impl MarkovPolicy for RandomizedPolicy {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    fn for_each_action<F: FnMut(usize, f64)>(&self, t: usize, s: usize, mut f: F) {
        for (a, &p) in self.row(t, s).iter().enumerate() {
            if p != 0.0 {
                f(a, p);
            }
        }
    }
}

/// Either kind of Markov policy.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Deterministic(DeterministicPolicy),
    Randomized(RandomizedPolicy),
}

impl Policy {
    pub fn to_randomized(&self) -> RandomizedPolicy {
        match self {
            Policy::Deterministic(d) => d.to_randomized(),
            Policy::Randomized(r) => r.clone(),
        }
    }
}

impl From<DeterministicPolicy> for Policy {
    fn from(p: DeterministicPolicy) -> Self {
        Policy::Deterministic(p)
    }
}

impl From<RandomizedPolicy> for Policy {
    fn from(p: RandomizedPolicy) -> Self {
        Policy::Randomized(p)
    }
}

impl MarkovPolicy for Policy {
    fn horizon(&self) -> usize {
        match self {
            Policy::Deterministic(p) => p.horizon(),
            Policy::Randomized(p) => p.horizon(),
        }
    }

    fn n_states(&self) -> usize {
        match self {
            Policy::Deterministic(p) => p.n_states(),
            Policy::Randomized(p) => p.n_states(),
        }
    }

    fn n_actions(&self) -> usize {
        match self {
            Policy::Deterministic(p) => p.n_actions(),
            Policy::Randomized(p) => p.n_actions(),
        }
    }

    fn for_each_action<F: FnMut(usize, f64)>(&self, t: usize, s: usize, f: F) {
        match self {
            Policy::Deterministic(p) => p.for_each_action(t, s, f),
            Policy::Randomized(p) => p.for_each_action(t, s, f),
        }
    }
}

/// Serialized form of a deterministic policy: an integer matrix `[t][s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMatrix(pub Vec<Vec<usize>>);

impl From<&DeterministicPolicy> for PolicyMatrix {
    fn from(p: &DeterministicPolicy) -> Self {
        PolicyMatrix(p.to_matrix())
    }
}
