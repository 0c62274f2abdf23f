//! Backward value recursion and forward model-weight recursion.

use rayon::prelude::*;

use crate::error::MmdpError;
use crate::model::Mmdp;
use crate::policy::MarkovPolicy;

/// Above this many transition entries per layer the per-model loops run on
/// the rayon pool. Each model writes its own slice, so results do not depend
/// on the schedule.
const PARALLEL_NNZ: usize = 1 << 16;

fn parallel(mmdp: &Mmdp) -> bool {
    mmdp.n_models() > 1 && mmdp.models().iter().map(|m| m.nnz()).sum::<usize>() >= PARALLEL_NNZ
}

/// Fills `q[m][s][a] = r^m_t(s, a) + sum_s' p^m(s'|s,a) v_next[m][s']`.
pub(crate) fn q_layer(mmdp: &Mmdp, t: usize, v_next: &[f64], q: &mut [f64]) {
    let (ns, na) = (mmdp.n_states(), mmdp.n_actions());
    let fill = |m: usize, q_m: &mut [f64]| {
        let model = mmdp.model(m);
        let v_m = &v_next[m * ns..(m + 1) * ns];
        for s in 0..ns {
            for a in 0..na {
                let (succ, prob) = model.row(s, a);
                let mut future = 0.0;
                for (&next, &p) in succ.iter().zip(prob) {
                    future += p * v_m[next];
                }
                q_m[s * na + a] = mmdp.reward(t, m, s, a) + future;
            }
        }
    };
    if parallel(mmdp) {
        q.par_chunks_mut(ns * na).enumerate().for_each(|(m, q_m)| fill(m, q_m));
    } else {
        q.chunks_mut(ns * na).enumerate().for_each(|(m, q_m)| fill(m, q_m));
    }
}

/// Per-model value functions `v[t][m][s]` for `t = 0..=T` and q-values
/// `q[t][m][s][a]` for `t = 0..T` of a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    horizon: usize,
    n_models: usize,
    n_states: usize,
    n_actions: usize,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn v(&self, t: usize, m: usize, s: usize) -> f64 {
        self.v[(t * self.n_models + m) * self.n_states + s]
    }

    #[inline]
    pub fn q(&self, t: usize, m: usize, s: usize, a: usize) -> f64 {
        self.q[((t * self.n_models + m) * self.n_states + s) * self.n_actions + a]
    }

    /// `v[t]` flattened as `[m][s]`.
    pub fn v_layer(&self, t: usize) -> &[f64] {
        let width = self.n_models * self.n_states;
        &self.v[t * width..(t + 1) * width]
    }

    /// `q[t]` flattened as `[m][s][a]`.
    pub fn q_layer(&self, t: usize) -> &[f64] {
        let width = self.n_models * self.n_states * self.n_actions;
        &self.q[t * width..(t + 1) * width]
    }
}

/// Evaluates `policy` in every model by backward induction.
pub fn backward_values<P: MarkovPolicy>(mmdp: &Mmdp, policy: &P) -> Result<ValueTable, MmdpError> {
    policy.check_dims(mmdp)?;
    let (horizon, nm, ns, na) = (mmdp.horizon(), mmdp.n_models(), mmdp.n_states(), mmdp.n_actions());
    let v_width = nm * ns;
    let q_width = v_width * na;
    let mut v = vec![0.0; (horizon + 1) * v_width];
    let mut q = vec![0.0; horizon * q_width];

    for t in (0..horizon).rev() {
        let (v_now, v_next) = v[t * v_width..(t + 2) * v_width].split_at_mut(v_width);
        let q_t = &mut q[t * q_width..(t + 1) * q_width];
        q_layer(mmdp, t, v_next, q_t);
        for m in 0..nm {
            for s in 0..ns {
                let row = &q_t[(m * ns + s) * na..(m * ns + s + 1) * na];
                let mut value = 0.0;
                policy.for_each_action(t, s, |a, p| value += p * row[a]);
                v_now[m * ns + s] = value;
            }
        }
    }

    Ok(ValueTable {
        horizon,
        n_models: nm,
        n_states: ns,
        n_actions: na,
        v,
        q,
    })
}

/// Adjustable model weights `b[t][m][s]`: the joint probability that `m` is
/// the true model and the state at epoch `t` is `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    horizon: usize,
    n_models: usize,
    n_states: usize,
    b: Vec<f64>,
}

impl WeightTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_models(&self) -> usize {
        self.n_models
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn b(&self, t: usize, m: usize, s: usize) -> f64 {
        self.b[(t * self.n_models + m) * self.n_states + s]
    }

    /// `b[t]` flattened as `[m][s]`.
    pub fn layer(&self, t: usize) -> &[f64] {
        let width = self.n_models * self.n_states;
        &self.b[t * width..(t + 1) * width]
    }
}

/// Propagates `b[0][m][s] = lambda_m mu(s)` forward through the policy.
pub fn forward_weights<P: MarkovPolicy>(mmdp: &Mmdp, policy: &P) -> Result<WeightTable, MmdpError> {
    policy.check_dims(mmdp)?;
    let (horizon, nm, ns) = (mmdp.horizon(), mmdp.n_models(), mmdp.n_states());
    let width = nm * ns;
    let mut b = vec![0.0; horizon * width];
    for m in 0..nm {
        let lambda = mmdp.weights()[m];
        for (s, &mu) in mmdp.initial().iter().enumerate() {
            b[m * ns + s] = lambda * mu;
        }
    }

    let push = |t: usize, m: usize, b_now: &[f64], b_next: &mut [f64]| {
        let model = mmdp.model(m);
        for s in 0..ns {
            let mass = b_now[s];
            if mass == 0.0 {
                continue;
            }
            policy.for_each_action(t, s, |a, p| {
                let flow = p * mass;
                let (succ, prob) = model.row(s, a);
                for (&next, &q) in succ.iter().zip(prob) {
                    b_next[next] += q * flow;
                }
            });
        }
    };

    for t in 0..horizon.saturating_sub(1) {
        let (done, rest) = b.split_at_mut((t + 1) * width);
        let b_now = &done[t * width..];
        let b_next = &mut rest[..width];
        if parallel(mmdp) {
            b_next
                .par_chunks_mut(ns)
                .enumerate()
                .for_each(|(m, out)| push(t, m, &b_now[m * ns..(m + 1) * ns], out));
        } else {
            for (m, out) in b_next.chunks_mut(ns).enumerate() {
                push(t, m, &b_now[m * ns..(m + 1) * ns], out);
            }
        }
    }

    Ok(WeightTable {
        horizon,
        n_models: nm,
        n_states: ns,
        b,
    })
}
