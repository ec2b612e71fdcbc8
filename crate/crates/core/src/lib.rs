//! PageRank with time-dependent teleportation.
//!
//! The PageRank vector is the steady state of the linear dynamical system
//! `x'(t) = (1 - alpha) v(t) - (I - alpha P) x(t)`. Letting the teleportation
//! `v(t)` vary in time yields a trajectory of rankings instead of a single
//! vector. This crate builds the random-walk operator from an edge list,
//! evolves the system with forward Euler or adaptive Runge-Kutta, solves the
//! (complex) linear systems that describe its steady states, reduces
//! trajectories to rank vectors, and provides a lagged-regression harness for
//! one-step-ahead activity prediction.
//!
//! Data-parallel loops run on rayon when the `parallel` feature (on by
//! default) is enabled; results are bit-identical to sequential execution.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graph;
pub mod integrate;
pub mod par;
pub mod predict;
pub mod ranks;
pub mod solvers;
pub mod synth;
pub mod teleport;

pub use error::{Error, Result};
pub use graph::{build_transition, load_edge_list, AdjacencyStructure, TransitionOperator};
pub use integrate::{
    derivative, evolve, evolve_euler, evolve_rk, initial_state, EvolutionConfig, Initial, Method, Trajectory,
};
pub use par::Execution;
pub use solvers::{
    complex_pagerank, eval_steady, oscillatory_steady_state, static_pagerank, ComplexSolution, PageRankSolution,
    SolveConfig,
};
pub use teleport::{eval_oscillatory, normalize_activity, ActivityMatrix, Forcing, TeleportSchedule};
