//! Dynamic programming machinery and the MVP, WSU and CADP solvers.

mod solvers;
mod values;

pub use solvers::{
    average_model, model_optimal_policies, optimize_policy, solve_cadp, solve_mvp, solve_wsu, CadpConfig, CadpInit,
    SolveReport, StopReason, MONOTONE_SLACK,
};
pub(crate) use values::q_layer;
pub use values::{backward_values, forward_weights, ValueTable, WeightTable};
