//! Newton solver stack: the MINRES linear solver, the backtracking line
//! search with its mesh-validity rules, and the outer loops for quality
//! optimization ([`newton_quality`]) and interface fitting
//! ([`newton_fit`]).

pub mod line_search;
pub mod minres;
pub mod newton;

pub use line_search::{backtrack, StepCriteria, StepEval};
pub use minres::{minres_jacobi, MinresOutcome};
pub use newton::{
    newton_fit, newton_quality, IterationRow, SolverConfig, SolverReport, Termination,
};
