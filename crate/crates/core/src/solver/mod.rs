//! The outer loop: sketch, model, subproblem, acceptance test, updates.

mod config;
mod trace;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub use config::{RedrawPolicy, SolverConfig, SolverMode};
pub use trace::{read_trace_csv, write_trace_csv, IterationTrace, TRACE_HEADER};

use crate::error::{Error, Result};
use crate::problems::ObjectiveProblem;
use crate::scalar::{lit, to_f64, Scalar};
use crate::sketch::{numerical_rank, rank_from_eigenvalues, sketch_gradient, sketch_hessian, SketchMatrix};
use crate::subproblem::{SketchedCubicModel, SubproblemOptions};

/// Consecutive singular-Gram redraws tolerated before giving up.
const MAX_GRAM_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    GradientTolReached,
    MaxIter,
    InnerFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::GradientTolReached => "GradientTolReached",
            SolveStatus::MaxIter => "MaxIter",
            SolveStatus::InnerFailure => "InnerFailure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult<T: Scalar> {
    pub x_final: DVector<T>,
    pub f_final: T,
    pub grad_norm_final: T,
    pub status: SolveStatus,
    /// Iteration rows followed by one terminal row.
    pub trace: Vec<IterationTrace>,
}

impl<T: Scalar> SolveResult<T> {
    /// Number of iterations performed (excludes the terminal row).
    pub fn iterations(&self) -> usize {
        self.trace.iter().filter(|t| !t.terminal).count()
    }

    /// Sketch dimension in force at the end of the run.
    pub fn final_sketch_size(&self) -> usize {
        self.trace.last().map_or(0, |t| t.l_k)
    }

    pub fn max_sketch_size(&self) -> usize {
        self.trace.iter().map(|t| t.l_k).max().unwrap_or(0)
    }

    /// JSON summary with a configuration echo.
    pub fn summary_json(&self, problem: &ObjectiveProblem<T>, config: &SolverConfig<T>) -> serde_json::Value {
        let last = self.trace.last();
        json!({
            "problem": problem.name(),
            "dim": problem.dim(),
            "known_rank": problem.known_rank(),
            "f_star": problem.f_star().map(to_f64),
            "status": self.status.as_str(),
            "iterations": self.iterations(),
            "f0": self.trace.first().map(|t| t.f),
            "f_final": to_f64(self.f_final),
            "grad_norm_final": to_f64(self.grad_norm_final),
            "final_l": self.final_sketch_size(),
            "final_R_hat": last.map(|t| t.rank_max_k),
            "cum_rel_hessians": last.map(|t| t.cum_rel_hessians),
            "seeds": { "solver": config.seed },
            "config": config.to_json(),
        })
    }
}

/// Sketch-size rule: grow to `max(C·R̂ₖ + 1, lₖ)` when the running maximum of
/// observed sketched-Hessian ranks increases, capped at `d`.
pub fn update_sketch_size(l_k: usize, rank_max: usize, rank_max_prev: usize, c: usize, d: usize) -> usize {
    let next = if rank_max > rank_max_prev { (c * rank_max + 1).max(l_k) } else { l_k };
    next.min(d)
}

/// Default guard for [`decrease_ratio`]: `1e-16·(1 + |f(xₖ)|)`.
pub fn default_ratio_guard<T: Scalar>(f_x: T) -> T {
    lit::<T>(1e-16) * (T::one() + f_x.abs())
}

/// `ρ = (f(xₖ) − f(xₖ + sₖ)) / (f(xₖ) − q̂ₖ(ŝₖ))`, or `None` when the model
/// decrease does not exceed `guard`.
pub fn decrease_ratio<T: Scalar>(f_x: T, f_trial: T, q_decrease: T, guard: T) -> Option<T> {
    if q_decrease > guard {
        Some((f_x - f_trial) / q_decrease)
    } else {
        None
    }
}

struct Derivatives<T: Scalar> {
    f: T,
    grad: DVector<T>,
    hess: DMatrix<T>,
}

impl<T: Scalar> Derivatives<T> {
    fn at(problem: &ObjectiveProblem<T>, x: &DVector<T>, f: T) -> Self {
        Self { f, grad: problem.gradient(x), hess: problem.hessian(x) }
    }
}

/// Sketch and model built for the current iterate; kept across unsuccessful
/// iterations when the redraw policy allows.
struct SketchedState<T: Scalar> {
    sketch: SketchMatrix<T>,
    model: SketchedCubicModel<T>,
    r_hat: usize,
}

/// Runs the solver on `problem`.
///
/// Configuration errors are returned as `Err`; numerical breakdowns during
/// the run end it with [`SolveStatus::InnerFailure`].
pub fn run<T: Scalar>(problem: &ObjectiveProblem<T>, config: &SolverConfig<T>) -> Result<SolveResult<T>> {
    let d = problem.dim();
    config.validate(d)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let distribution = config.effective_distribution();
    let sub_opts = SubproblemOptions {
        inner_tol: config.inner_tol,
        max_inner: config.max_inner,
        kappa_t: config.kappa_t,
        kappa_s: config.kappa_s,
    };
    let d_f = d as f64;

    let mut x = problem.x0().clone();
    let f0 = problem.value(&x);
    let mut deriv = Derivatives::at(problem, &x, f0);
    let mut sigma = config.sigma0;
    let mut l_k = config.initial_sketch_size(d);
    let mut rank_max_prev = 0usize;
    let mut cum = 0.0f64;
    let mut trace = Vec::new();
    let mut state: Option<SketchedState<T>> = None;

    let status = loop {
        let k = trace.len();
        let grad_norm = deriv.grad.norm();
        if grad_norm <= config.epsilon {
            break SolveStatus::GradientTolReached;
        }
        if k >= config.max_iter {
            break SolveStatus::MaxIter;
        }
        if !sigma.is_finite() {
            break SolveStatus::InnerFailure;
        }

        let needs_draw = match &state {
            None => true,
            Some(s) => config.redraw_policy == RedrawPolicy::EveryIteration || s.sketch.rows() != l_k,
        };
        if needs_draw {
            match build_state(&deriv, sigma, l_k, d, distribution, config.rank_tol, &mut rng) {
                Ok(s) => state = Some(s),
                Err(_) => break SolveStatus::InnerFailure,
            }
        }
        let st = state.as_mut().expect("sketched state present");
        if st.model.sigma() != sigma {
            st.model = st.model.with_sigma(sigma)?;
        }

        let r_hat = st.r_hat;
        let rank_max = rank_max_prev.max(r_hat);
        cum += (l_k as f64 / d_f).powi(2);

        let sol = match st.model.solve(&sub_opts) {
            Ok(sol) => sol,
            Err(_) => break SolveStatus::InnerFailure,
        };
        let q_decrease = st.model.quadratic_decrease(&sol.s_hat);
        debug_assert!(
            !(sol.termination.decrease)
                || q_decrease >= sigma / lit::<T>(3.0) * sol.cubic_norm.powi(3) * (T::one() - lit::<T>(1e-8))
                    - lit::<T>(1e-12) * (T::one() + deriv.f.abs())
        );
        let step = st.sketch.lift(&sol.s_hat);
        let x_trial = &x + &step;
        let f_trial = problem.value(&x_trial);
        let rho = decrease_ratio(deriv.f, f_trial, q_decrease, default_ratio_guard(deriv.f));
        let success = matches!(rho, Some(r) if r >= config.theta);

        trace.push(IterationTrace {
            k,
            f: to_f64(deriv.f),
            grad_norm: to_f64(grad_norm),
            l_k,
            r_hat_k: r_hat,
            rank_max_k: rank_max,
            sigma_k: to_f64(sigma),
            rho_k: rho.map_or(f64::NAN, to_f64),
            success,
            cum_rel_hessians: cum,
            wall_time_s: start.elapsed().as_secs_f64(),
            terminal: false,
        });

        if success {
            x = x_trial;
            deriv = Derivatives::at(problem, &x, f_trial);
            sigma = (config.gamma_dec * sigma).max(config.sigma_min);
            state = None;
        } else {
            sigma *= config.gamma_inc;
        }
        if config.mode == SolverMode::RarcD {
            l_k = update_sketch_size(l_k, rank_max, rank_max_prev, config.c, d);
        }
        rank_max_prev = rank_max;
    };

    let grad_norm_final = deriv.grad.norm();
    trace.push(IterationTrace {
        k: trace.len(),
        f: to_f64(deriv.f),
        grad_norm: to_f64(grad_norm_final),
        l_k,
        r_hat_k: 0,
        rank_max_k: rank_max_prev,
        sigma_k: to_f64(sigma),
        rho_k: f64::NAN,
        success: false,
        cum_rel_hessians: cum,
        wall_time_s: start.elapsed().as_secs_f64(),
        terminal: true,
    });

    Ok(SolveResult { x_final: x, f_final: deriv.f, grad_norm_final, status, trace })
}

fn build_state<T: Scalar>(
    deriv: &Derivatives<T>,
    sigma: T,
    l: usize,
    d: usize,
    distribution: crate::sketch::SketchDistribution,
    rank_tol: T,
    rng: &mut ChaCha8Rng,
) -> Result<SketchedState<T>> {
    let mut last_err = Error::SingularGram;
    for _ in 0..=MAX_GRAM_REDRAWS {
        let sketch = SketchMatrix::draw(distribution, l, d, rng.next_u64())?;
        let g_hat = sketch_gradient(&sketch, &deriv.grad)?;
        let h_hat = sketch_hessian(&sketch, &deriv.hess)?;
        // With an identity sketch the model's eigendecomposition already
        // holds the spectrum of Ĥ.
        let r_hat = if sketch.is_identity() { None } else { Some(numerical_rank(&h_hat, rank_tol)?.numerical_rank) };
        match SketchedCubicModel::from_sketch(deriv.f, g_hat, h_hat, sigma, &sketch) {
            Ok(model) => {
                let r_hat = r_hat.unwrap_or_else(|| {
                    rank_from_eigenvalues(model.reduced_eigenvalues().iter().copied(), rank_tol).numerical_rank
                });
                return Ok(SketchedState { sketch, model, r_hat });
            }
            Err(Error::SingularGram) => last_err = Error::SingularGram,
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}
