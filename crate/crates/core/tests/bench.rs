use std::fs;

use proptest::prelude::*;

use rarcd::bench::{
    self, data_profile, default_alpha_grid, profile_from_budgets, read_runs_csv, run_grid, solved_budget, GridOptions, SolverSpec,
};
use rarcd::solver;
use rarcd::{BudgetMetric, ProblemSelector, SolverConfig};

fn small_suite() -> Vec<ProblemSelector> {
    vec![
        ProblemSelector::low_rank("ARWHEAD", 4, 12, 0),
        ProblemSelector::low_rank("POWER", 4, 12, 0),
        ProblemSelector::low_rank("ENGVAL1", 4, 12, 0),
    ]
}

fn solvers() -> Vec<SolverSpec<f64>> {
    vec![SolverSpec::arc(), SolverSpec::rarc_d(2)]
}

#[test]
fn grid_cardinality_and_seeds() {
    let opts = GridOptions { taus: vec![1e-2, 1e-5], ..GridOptions::default() };
    let runs = run_grid(&small_suite(), &solvers(), 5, 100, &opts).unwrap();
    assert_eq!(runs.len(), 30);
    for r in &runs {
        assert_eq!(r.problem_seed, 100 + r.repeat as u64);
        assert!(r.problem_id.ends_with(&format!(":seed={}", r.problem_seed)), "{}", r.problem_id);
        assert_eq!(r.budgets.len(), 2);
    }
    let mut seeds: Vec<u64> = runs.iter().map(|r| r.solver_seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 30);
    assert!(run_grid(&small_suite(), &solvers(), 0, 100, &opts).is_err());
}

#[test]
fn grid_is_deterministic_and_runs_are_reproducible() {
    let opts = GridOptions { taus: vec![1e-2, 1e-5], threads: Some(2), trace_dir: None };
    let a = run_grid(&small_suite(), &solvers(), 2, 7, &opts).unwrap();
    let b = run_grid(&small_suite(), &solvers(), 2, 7, &GridOptions { threads: Some(1), ..opts.clone() }).unwrap();
    let budgets = |runs: &[bench::BenchmarkRun]| runs.iter().map(|r| r.budgets.clone()).collect::<Vec<_>>();
    assert_eq!(budgets(&a), budgets(&b));

    // A single run is reproducible from its recorded seeds alone.
    let run = &a[5];
    let problem = run.problem_id.parse::<ProblemSelector>().unwrap().build::<f64>().unwrap();
    let spec = solvers().into_iter().find(|s| s.id == run.solver_id).unwrap();
    let cfg = SolverConfig { seed: run.solver_seed, ..spec.resolve(problem.dim()) };
    let again = solver::run(&problem, &cfg).unwrap();
    let n_p = solved_budget(&again.trace, run.f0, run.f_star, 1e-2, BudgetMetric::RelHessians).unwrap();
    assert_eq!(Some(n_p), run.budget(1e-2, BudgetMetric::RelHessians));
}

#[test]
fn arc_on_quadratic_has_finite_budget() {
    let sel = vec!["QUADRANK:d=10:rank=10".parse::<ProblemSelector>().unwrap()];
    let runs = run_grid(&sel, &[SolverSpec::<f64>::arc()], 1, 0, &GridOptions { taus: vec![1e-2], ..Default::default() }).unwrap();
    let n_p = runs[0].budget(1e-2, BudgetMetric::RelHessians).unwrap();
    assert!(n_p.is_finite());
    assert_eq!(n_p.fract(), 0.0, "ARC charges one Hessian per iteration");
}

#[test]
fn budgets_match_traces_and_tolerances_are_ordered() {
    let opts = GridOptions { taus: vec![1e-1, 1e-2, 1e-5], ..GridOptions::default() };
    let runs = run_grid(&small_suite(), &solvers(), 2, 3, &opts).unwrap();
    for r in &runs {
        let b: Vec<f64> = r.budgets.iter().map(|(_, b)| *b).collect();
        assert!(b[0] <= b[1] && b[1] <= b[2], "{b:?}");
        for &(tau, n_p) in &r.budgets {
            if n_p.is_finite() {
                let bar = r.f_star + tau * (r.f0 - r.f_star);
                let row = r.trace.iter().find(|t| t.f <= bar).unwrap();
                assert_eq!(row.cum_rel_hessians, n_p);
            }
        }
    }
    let grid = default_alpha_grid();
    for solver in ["arc", "rarc-d-l0_2"] {
        let mine: Vec<_> = runs.iter().filter(|r| r.solver_id == solver).cloned().collect();
        let loose = data_profile(&mine, 1e-2, &grid).unwrap();
        let tight = data_profile(&mine, 1e-5, &grid).unwrap();
        assert!(loose.pi.iter().zip(&tight.pi).all(|(a, b)| a >= b));
    }
}

#[test]
fn failed_cells_are_recorded_as_unsolved() {
    // A sketch larger than the problem is invalid; the grid records the cell and moves on.
    let runs = run_grid(
        &[ProblemSelector::builtin("POWER", 3)],
        &[SolverSpec::<f64>::rarc(5), SolverSpec::arc()],
        1,
        0,
        &GridOptions { taus: vec![1e-2], ..Default::default() },
    )
    .unwrap();
    assert!(runs[0].status.starts_with("Error"));
    assert_eq!(runs[0].budget(1e-2, BudgetMetric::RelHessians), Some(f64::INFINITY));
    assert!(runs[1].budget(1e-2, BudgetMetric::RelHessians).unwrap().is_finite());
}

#[test]
fn outputs_roundtrip_and_traces_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let opts = GridOptions { taus: vec![1e-2, 1e-5], threads: None, trace_dir: Some(dir.path().join("traces")) };
    let runs = run_grid(&small_suite(), &solvers(), 1, 0, &opts).unwrap();
    assert!(runs.iter().all(|r| r.trace_path.as_ref().is_some_and(|p| p.exists())));
    let out = bench::write_grid_outputs(dir.path(), &runs, &opts.taus, &default_alpha_grid()).unwrap();
    assert_eq!(out.profiles.len(), 4);
    let records = read_runs_csv(fs::File::open(&out.runs_csv).unwrap()).unwrap();
    assert_eq!(records.len(), runs.len() * 2);
    let first = fs::read_to_string(&out.profiles[0]).unwrap();
    assert!(first.starts_with("alpha,pi\n0,"));
    assert_eq!(first.lines().count(), 402);
}

#[test]
fn data_profile_errors() {
    assert!(data_profile(&[], 1e-2, &default_alpha_grid()).is_err());
    assert!(profile_from_budgets("s", 1e-2, &[1.0], &[0.0, 2.0, 1.0]).is_err());
}

proptest! {
    #[test]
    fn profiles_are_monotone_fractions(budgets in prop::collection::vec(prop_oneof![0.0f64..120.0, Just(f64::INFINITY)], 1..40)) {
        let p = profile_from_budgets("s", 1e-2, &budgets, &default_alpha_grid()).unwrap();
        prop_assert!(p.pi.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(p.pi.iter().all(|v| (0.0..=1.0).contains(v)));
        let solved = budgets.iter().filter(|b| **b <= 100.0).count() as f64 / budgets.len() as f64;
        prop_assert_eq!(*p.pi.last().unwrap(), solved);
    }

    #[test]
    fn budget_is_monotone_in_tau(fs in prop::collection::vec(0.0f64..100.0, 1..60), t1 in 0.001f64..0.999, t2 in 0.001f64..0.999) {
        let trace: Vec<_> = fs.iter().enumerate().map(|(k, &f)| rarcd::IterationTrace {
            k, f, grad_norm: 1.0, l_k: 1, r_hat_k: 1, rank_max_k: 1, sigma_k: 1.0, rho_k: 1.0,
            success: true, cum_rel_hessians: (k + 1) as f64 * 0.01, wall_time_s: 0.0, terminal: false,
        }).collect();
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let b_hi = solved_budget(&trace, 100.0, 0.0, hi, BudgetMetric::RelHessians).unwrap();
        let b_lo = solved_budget(&trace, 100.0, 0.0, lo, BudgetMetric::RelHessians).unwrap();
        prop_assert!(b_hi <= b_lo);
    }
}
