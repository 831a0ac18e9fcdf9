//! Conditioned gradient descent and the two-stage fitting schedule.

mod descent;
mod stages;

pub use descent::{conditioned_gradient_step, minimize, Descent, DescentConfig, Evaluation, StepOutcome, TraceRow};
pub use stages::{capture_center, initial_poses, solve, solve_stage1, solve_stage2, FitResult, Phase, SolverConfig};
