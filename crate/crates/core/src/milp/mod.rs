//! Mathematical-program container and the reference solvers behind it.

mod branch;
mod circle;
mod mps;
mod program;
mod simplex;

pub use branch::{solve_milp, solve_milp_with, MilpOptions};
pub use circle::{add_circle_constraint, polygon_overshoot};
pub use mps::{export_mps, format_number, parse_mps, MpsError};
pub use program::{
    Constraint, ConstraintId, MathProgram, ProgramError, Sense, SolveResult, SolveStatus, VarId, VarKind, Variable,
    FEASIBILITY_TOL, INTEGRALITY_TOL,
};
pub use simplex::{solve_lp, solve_lp_with, LpOptions};
