//! Exact policy gradient of the MMDP return over randomized Markov policies,
//! a finite-difference checker, and two first-order baselines built on it.
//!
//! The gradient with respect to `pi_t(s, a)` is
//!
//! ```text
//! d rho / d pi_t(s, a) = sum_m b_{t,m}(s) q_{t,m}(s, a)
//! ```
//!
//! where `b` comes from the forward weight recursion and `q` from backward
//! evaluation of the same policy. Holding every other epoch fixed, the return
//! is affine in `pi_t`, so a central difference along a single-epoch
//! direction is exact up to roundoff.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dp::{backward_values, forward_weights, SolveReport, StopReason};
use crate::error::MmdpError;
use crate::eval::exact_return;
use crate::model::Mmdp;
use crate::policy::{MarkovPolicy, RandomizedPolicy};

/// `g[t][s][a]`, the partial derivatives of the return.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTable {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    g: Vec<f64>,
}

impl GradientTable {
    #[inline]
    pub fn get(&self, t: usize, s: usize, a: usize) -> f64 {
        self.g[(t * self.n_states + s) * self.n_actions + a]
    }

    pub fn row(&self, t: usize, s: usize) -> &[f64] {
        let k = (t * self.n_states + s) * self.n_actions;
        &self.g[k..k + self.n_actions]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.g
    }
}

/// One forward and one backward pass.
pub fn policy_gradient(mmdp: &Mmdp, policy: &RandomizedPolicy) -> Result<GradientTable, MmdpError> {
    let values = backward_values(mmdp, policy)?;
    let weights = forward_weights(mmdp, policy)?;
    let (horizon, nm, ns, na) = (mmdp.horizon(), mmdp.n_models(), mmdp.n_states(), mmdp.n_actions());
    let mut g = vec![0.0; horizon * ns * na];
    for t in 0..horizon {
        for s in 0..ns {
            let out = &mut g[(t * ns + s) * na..(t * ns + s + 1) * na];
            // fixed model order so the reduction is reproducible
            for m in 0..nm {
                let b = weights.b(t, m, s);
                if b == 0.0 {
                    continue;
                }
                for (a, slot) in out.iter_mut().enumerate() {
                    *slot += b * values.q(t, m, s, a);
                }
            }
        }
    }
    Ok(GradientTable {
        horizon,
        n_states: ns,
        n_actions: na,
        g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub h: f64,
}

/// `|x - y| / max(|x|, |y|)`, zero when both are zero.
pub fn relative_error(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if scale == 0.0 {
        0.0
    } else {
        (x - y).abs() / scale
    }
}

/// Tangent direction that raises `pi_t(s, a)` by 1 and lowers every other
/// action of the same row by `1 / (A - 1)`.
fn tangent_step(policy: &RandomizedPolicy, t: usize, s: usize, a: usize, h: f64) -> RandomizedPolicy {
    let mut out = policy.clone();
    let na = policy.n_actions();
    let row = out.row_mut(t, s);
    for (b, p) in row.iter_mut().enumerate() {
        if b == a {
            *p += h;
        } else {
            *p -= h / (na - 1) as f64;
        }
    }
    out
}

/// Compares analytic and central-difference directional derivatives along
/// the simplex tangent of every `(t, s, a)`.
pub fn grad_check(mmdp: &Mmdp, policy: &RandomizedPolicy, h: f64) -> Result<GradCheckReport, MmdpError> {
    if !(h > 0.0) {
        return Err(MmdpError::InvalidArgument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let gradient = policy_gradient(mmdp, policy)?;
    let (horizon, ns, na) = (mmdp.horizon(), mmdp.n_states(), mmdp.n_actions());
    if na < 2 {
        return Ok(GradCheckReport {
            max_rel_err: 0.0,
            mean_rel_err: 0.0,
            h,
        });
    }
    let mut errors = Vec::with_capacity(horizon * ns * na);
    for t in 0..horizon {
        for s in 0..ns {
            let row = gradient.row(t, s);
            let total: f64 = row.iter().sum();
            for a in 0..na {
                let analytic = row[a] - (total - row[a]) / (na - 1) as f64;
                let plus = exact_return(mmdp, &tangent_step(policy, t, s, a, h))?;
                let minus = exact_return(mmdp, &tangent_step(policy, t, s, a, -h))?;
                let numeric = (plus - minus) / (2.0 * h);
                errors.push(relative_error(analytic, numeric));
            }
        }
    }
    let max_rel_err = errors.iter().copied().fold(0.0, f64::max);
    let mean_rel_err = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(GradCheckReport {
        max_rel_err,
        mean_rel_err,
        h,
    })
}

/// Euclidean projection of `v` onto the probability simplex, in place.
pub fn project_to_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// `pi <- pi * exp(step * g)`, renormalized. Shifted by the row maximum to
/// keep the exponentials finite.
pub fn mirror_step(row: &mut [f64], gradient: &[f64], step: f64) {
    let top = gradient.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, &g) in row.iter_mut().zip(gradient) {
        *p *= (step * (g - top)).exp();
        sum += *p;
    }
    for p in row.iter_mut() {
        *p /= sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstOrderVariant {
    /// Exponentiated-gradient (mirror ascent with the entropy mirror map).
    Mirror,
    /// Projected gradient ascent.
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub variant: FirstOrderVariant,
}

impl FirstOrderConfig {
    pub fn mirror() -> Self {
        Self {
            step_size: 0.1,
            iterations: 200,
            variant: FirstOrderVariant::Mirror,
        }
    }

    pub fn projected() -> Self {
        Self {
            step_size: 0.01,
            iterations: 200,
            variant: FirstOrderVariant::Projected,
        }
    }
}

/// Runs the chosen first-order method from the uniform policy.
///
/// The report's policy is the argmax rounding of the final randomized
/// iterate and `return_value` is its return; `randomized_return` and
/// `iterate_returns` track the randomized iterates.
pub fn solve_first_order(mmdp: &Mmdp, config: &FirstOrderConfig) -> Result<SolveReport, MmdpError> {
    first_order_with(mmdp, config, |_| {}).map(|(report, _)| report)
}

/// [`solve_first_order`] that also calls `observe` on every iterate and
/// hands back the final randomized policy.
pub fn first_order_with<F>(
    mmdp: &Mmdp,
    config: &FirstOrderConfig,
    mut observe: F,
) -> Result<(SolveReport, RandomizedPolicy), MmdpError>
where
    F: FnMut(&RandomizedPolicy),
{
    if !(config.step_size > 0.0) {
        return Err(MmdpError::StepSize(config.step_size));
    }
    let started = Instant::now();
    let (horizon, ns, na) = (mmdp.horizon(), mmdp.n_states(), mmdp.n_actions());
    let mut policy = RandomizedPolicy::uniform(horizon, ns, na);
    let initial_return = exact_return(mmdp, &policy)?;
    let mut trace = Vec::with_capacity(config.iterations);

    for _ in 0..config.iterations {
        let gradient = policy_gradient(mmdp, &policy)?;
        for t in 0..horizon {
            for s in 0..ns {
                let g = gradient.row(t, s);
                let row = policy.row_mut(t, s);
                match config.variant {
                    FirstOrderVariant::Mirror => mirror_step(row, g, config.step_size),
                    FirstOrderVariant::Projected => {
                        for (p, &d) in row.iter_mut().zip(g) {
                            *p += config.step_size * d;
                        }
                        project_to_simplex(row);
                    }
                }
            }
        }
        observe(&policy);
        trace.push(exact_return(mmdp, &policy)?);
    }

    let rounded = policy.argmax();
    let wall_time = started.elapsed();
    let return_value = exact_return(mmdp, &rounded)?;
    let algorithm = match config.variant {
        FirstOrderVariant::Mirror => "mirror",
        FirstOrderVariant::Projected => "gradient",
    };
    let report = SolveReport {
        algorithm: algorithm.into(),
        policy: rounded,
        return_value,
        randomized_return: Some(trace.last().copied().unwrap_or(initial_return)),
        initial_return: Some(initial_return),
        iterations: trace.len(),
        iterate_returns: trace,
        stop_reason: StopReason::MaxIterations,
        wall_time,
    };
    Ok((report, policy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{fixtures::e1, random_instance, solve_oracle};
    use crate::policy::DeterministicPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn horizon_one_gradient_is_weighted_reward() {
        let mmdp = random_instance(3, 2, 2, 1, 5, 1.0);
        let gradient = policy_gradient(&mmdp, &RandomizedPolicy::uniform(1, 3, 2)).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                let expected: f64 = (0..2)
                    .map(|m| mmdp.weights()[m] * mmdp.initial()[s] * mmdp.reward(0, m, s, a))
                    .sum();
                assert!((gradient.get(0, s, a) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unreachable_state_has_zero_gradient() {
        // state 1 is never reached in E1 under "always stay"
        let mmdp = e1();
        let stay = DeterministicPolicy::constant(2, 2, 2, 0).to_randomized();
        let gradient = policy_gradient(&mmdp, &stay).unwrap();
        for t in 0..2 {
            assert_eq!(gradient.row(t, 1), &[0.0, 0.0]);
        }
    }

    #[test]
    fn e1_uniform_grad_check() {
        let report = grad_check(&e1(), &RandomizedPolicy::uniform(2, 2, 2), 1e-5).unwrap();
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }

    #[test]
    fn one_hot_policy_grad_check() {
        let mmdp = random_instance(3, 3, 2, 4, 8, 1.0);
        let policy = DeterministicPolicy::constant(4, 3, 3, 1).to_randomized();
        let report = grad_check(&mmdp, &policy, 1e-5).unwrap();
        assert!(report.max_rel_err < 1e-5, "{report:?}");
    }

    #[test]
    fn simplex_projection_known_values() {
        let mut v = [0.5, 0.5, 0.5];
        project_to_simplex(&mut v);
        for x in v {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let mut w = [2.0, 0.0, -1.0];
        project_to_simplex(&mut w);
        assert_eq!(w, [1.0, 0.0, 0.0]);
        let mut u = [0.6, 0.6, 0.0];
        project_to_simplex(&mut u);
        assert!((u[0] - 0.5).abs() < 1e-15 && (u[1] - 0.5).abs() < 1e-15 && u[2] == 0.0);
    }

    #[test]
    fn mirror_step_zero_gradient_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let policy = RandomizedPolicy::random_interior(1, 1, 4, &mut rng);
        let mut row = policy.row(0, 0).to_vec();
        mirror_step(&mut row, &[0.0; 4], 0.7);
        for (x, y) in row.iter().zip(policy.row(0, 0)) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn tiny_step_keeps_uniform_return() {
        let mmdp = random_instance(4, 3, 3, 5, 12, 0.6);
        let uniform = exact_return(&mmdp, &RandomizedPolicy::uniform(5, 4, 3)).unwrap();
        for config in [FirstOrderConfig::mirror(), FirstOrderConfig::projected()] {
            let config = FirstOrderConfig {
                step_size: 1e-12,
                iterations: 1,
                ..config
            };
            let report = solve_first_order(&mmdp, &config).unwrap();
            assert!((report.randomized_return.unwrap() - uniform).abs() < 1e-9);
        }
    }

    #[test]
    fn single_model_first_order_reaches_optimum() {
        let mmdp = random_instance(3, 2, 1, 3, 21, 1.0);
        let optimum = solve_oracle(&mmdp).unwrap();
        let mirror = FirstOrderConfig {
            step_size: 50.0,
            iterations: 400,
            variant: FirstOrderVariant::Mirror,
        };
        let projected = FirstOrderConfig {
            step_size: 5.0,
            iterations: 400,
            variant: FirstOrderVariant::Projected,
        };
        for config in [mirror, projected] {
            let report = solve_first_order(&mmdp, &config).unwrap();
            assert!(
                (report.randomized_return.unwrap() - optimum).abs() < 1e-3,
                "{config:?}: {report:?}"
            );
        }
    }

    #[test]
    fn non_positive_step_rejected() {
        let config = FirstOrderConfig {
            step_size: 0.0,
            ..FirstOrderConfig::mirror()
        };
        assert!(matches!(solve_first_order(&e1(), &config), Err(MmdpError::StepSize(_))));
    }

    #[test]
    fn iterates_stay_on_simplex() {
        let mmdp = random_instance(4, 3, 2, 4, 3, 0.5);
        for config in [FirstOrderConfig::mirror(), FirstOrderConfig::projected()] {
            let config = FirstOrderConfig {
                iterations: 25,
                step_size: config.step_size * 20.0,
                ..config
            };
            let mut checked = 0;
            first_order_with(&mmdp, &config, |policy| {
                for t in 0..4 {
                    for s in 0..4 {
                        let row = policy.row(t, s);
                        assert!(row.iter().all(|&p| p >= 0.0));
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    }
                }
                checked += 1;
            })
            .unwrap();
            assert_eq!(checked, 25);
        }
    }
}
