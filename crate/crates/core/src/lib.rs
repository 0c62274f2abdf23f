//! Finite-horizon multi-model Markov decision processes.
//!
//! An [`Mmdp`] is a finite set of MDPs over shared states and actions, each
//! with a prior weight. A single Markov policy is chosen to maximize the
//! weighted mean of its returns across models. The crate provides the
//! averaged-model (MVP) and weighted (WSU) heuristics, coordinate ascent
//! dynamic programming (CADP), exact policy gradients with two first-order
//! baselines, Thompson sampling over the model set, and evaluation tools.

pub mod bandit;
pub mod domain;
pub mod dp;
pub mod error;
pub mod eval;
pub mod gradient;
pub mod model;
pub mod policy;

pub use domain::{load_domain, write_domain, DomainBundle, LoadError};
pub use dp::{solve_cadp, solve_mvp, solve_wsu, CadpConfig, CadpInit, SolveReport, StopReason};
pub use error::MmdpError;
pub use eval::{exact_return, monte_carlo_eval, solve_oracle, EvalResult};
pub use model::{Mmdp, Model, ModelError, ValidationIssue, ValidationReport};
pub use policy::{DeterministicPolicy, MarkovPolicy, Policy, RandomizedPolicy};
