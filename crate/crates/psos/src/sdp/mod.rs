//! Degree-4 partial sum-of-squares relaxation with low-rank coordinate
//! ascent.
//!
//! The relaxation keeps one unit vector per vertex, per covered pair, and
//! for the origin; region-local moment-consistency equalities tie their
//! inner products together. [`compile_constraints`] derives those
//! equalities from a covering, [`partial_sos`] maximizes the relaxed
//! objective by sweeping exact single-vector updates (each a sphere
//! subproblem solved through its secular equation) — first in a soft
//! penalty-only stage, then optionally under multiplier ascent that
//! drives the state to feasibility (see [`SolveMode`]) — and
//! [`moment_matrix`] extracts second-order moments for rounding and for
//! certification against the metric polytope.

mod catalog;
mod index;
mod state;
mod subproblem;
mod solver;

pub use catalog::{
    compile_constraints, ConstraintCatalog, ConstraintFamily, Equality, EqualitySlots, LocalRow,
};
pub use index::{GramIndex, IndexSet};
pub use solver::{
    assemble_local, partial_sos, PartialSosOutcome, ReliableSet, RunOutcome, SolveMode, Solver,
    SolverConfig, SolverError, SweepStats, SweepTrace,
};
pub use state::{
    init_state, moment_matrix, residual_norm, sdp_objective, GramState, MomentMatrix,
};
pub use subproblem::{solve_subproblem, LocalSystem};
