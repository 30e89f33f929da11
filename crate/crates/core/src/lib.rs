//! Adaptive random-subspace cubic regularization.
//!
//! The solver minimizes a smooth function by repeatedly restricting the step to
//! a random low-dimensional subspace `span(Sₖᵀ)`, minimizing a sketched cubic
//! model there, and growing the subspace dimension whenever the sketched
//! Hessian turns out to be full rank. Plain ARC (identity sketch) and
//! fixed-dimension random-subspace ARC are configurations of the same loop.
//!
//! The crate is organized as:
//!
//! - [`problems`]: the objective interface, closed-form test functions and the
//!   low-rank augmentation `g(x) = f(Qᵀx)`.
//! - [`sketch`]: sketching matrices, sketched derivatives, numerical rank and
//!   an empirical subspace-embedding checker.
//! - [`subproblem`]: the sketched cubic model and its exact minimizer.
//! - [`solver`]: the outer loop, sketch-size rule and iteration traces.
//! - [`bench`]: benchmark grids and data profiles.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases at the crate root fix the scalar to `f64`.

pub mod bench;
pub mod error;
pub mod problems;
pub mod scalar;
pub mod sketch;
pub mod solver;
pub mod subproblem;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use bench::{BenchmarkRun, BudgetMetric, DataProfile};
pub use problems::{ObjectiveProblem, ProblemSelector};
pub use sketch::{RankReport, SketchDistribution, SketchMatrix};
pub use solver::{IterationTrace, RedrawPolicy, SolveResult, SolveStatus, SolverConfig, SolverMode};
pub use subproblem::{SketchedCubicModel, SubproblemOptions, SubproblemSolution};

pub type ObjectiveProblem64 = ObjectiveProblem<f64>;
pub type ObjectiveProblem32 = ObjectiveProblem<f32>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type SolveResult64 = SolveResult<f64>;
pub type SolveResult32 = SolveResult<f32>;
pub type SketchMatrix64 = SketchMatrix<f64>;
pub type SketchedCubicModel64 = SketchedCubicModel<f64>;
