//! The four matheuristics. Each one builds reference customer
//! sequences with the tour engine and prices them through the exact
//! order-constrained offload solver; they differ in how the reference
//! sequence evolves.
//!
//! All of them run single-threaded and deterministically under node
//! budgets; wall-clock termination exists for benchmark-style runs.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{Instance, Solution};
use crate::report::RunReport;
use crate::split::{OffloadMode, OffloadSolver, OrderConstrainedProblem};
use crate::tsp::{three_opt_moves, two_opt_moves, LocalSearchEngine, MoveSet, Sequence, TourOptimizer};
use crate::tsp::{apply_three_opt, apply_two_opt, perturb_matrix};
use crate::{Scalar, SolveCap};

/// Default node budget for one inner offload solve; the deterministic
/// stand-in for the reference method's wall-clock cap.
pub const DEFAULT_BETA_NODES: u64 = 200_000;
/// Node budget for the single solve of `fast`.
pub const FAST_NODE_CAP: u64 = 20_000_000;

/// RRLS parameters. Exactly one of `time_limit` and
/// `deterministic_budget` must be set; the node-based budget replays
/// byte-identically, the wall clock mirrors benchmark runs.
#[derive(Clone, Debug)]
pub struct RrlsParams<T> {
    pub time_limit: Option<Duration>,
    /// Outer iterations to run when set.
    pub deterministic_budget: Option<u64>,
    /// Wall-clock cap per inner offload solve (timed mode).
    pub beta: Duration,
    /// Node cap per inner offload solve (deterministic mode).
    pub beta_nodes: u64,
    /// Window width for the order-window rules on large instances.
    pub delta: usize,
    /// Maximum arc inflation (percent) for restart perturbation.
    pub gamma_pct: T,
    /// Customer count above which the large-instance strategy applies.
    pub large_threshold: usize,
    pub seed: u64,
    pub moves: MoveSet,
}

impl<T: Scalar> RrlsParams<T> {
    pub fn deterministic(seed: u64, iterations: u64) -> Self {
        Self {
            time_limit: None,
            deterministic_budget: Some(iterations),
            beta: Duration::from_secs(10),
            beta_nodes: DEFAULT_BETA_NODES,
            delta: 20,
            gamma_pct: T::from_f64_lossy(80.0),
            large_threshold: 20,
            seed,
            moves: MoveSet::all(),
        }
    }

    pub fn timed(seed: u64, limit: Duration) -> Self {
        Self {
            time_limit: Some(limit),
            deterministic_budget: None,
            ..Self::deterministic(seed, 0)
        }
    }

    fn assert_valid(&self) {
        assert!(
            self.time_limit.is_some() != self.deterministic_budget.is_some(),
            "exactly one of time_limit and deterministic_budget must govern termination"
        );
    }
}

fn giant_tour<T: Scalar>(instance: &Instance<T>, moves: MoveSet) -> Sequence {
    let engine = LocalSearchEngine {
        moves,
        budget: None,
    };
    let subset: BTreeSet<usize> = instance.customers().collect();
    engine.construct(instance.truck_matrix(), &subset)
}

fn order_only_cost<'a, T: Scalar>(
    solver: &mut OffloadSolver<'a, T>,
    instance: &'a Instance<T>,
    s: &Sequence,
    cap: SolveCap,
    incumbent: Option<&Solution>,
) -> (Solution, T) {
    let problem = OrderConstrainedProblem {
        cap,
        incumbent: incumbent.cloned(),
        ..OrderConstrainedProblem::new(instance, s.clone(), OffloadMode::OrderOnly)
    };
    let out = solver
        .solve(&problem)
        .expect("full-cover order-only solve cannot fail");
    (out.solution, out.cost)
}

/// One giant tour, one order-constrained solve: the offload selection
/// is fully delegated to the exact restriction solver.
pub fn fast<T: Scalar>(instance: &Instance<T>) -> (Solution, RunReport<T>) {
    fast_with(instance, SolveCap::Nodes(FAST_NODE_CAP), MoveSet::all())
}

pub fn fast_with<T: Scalar>(
    instance: &Instance<T>,
    cap: SolveCap,
    moves: MoveSet,
) -> (Solution, RunReport<T>) {
    let s = giant_tour(instance, moves);
    let mut solver = OffloadSolver::new(instance);
    let (solution, cost) = order_only_cost(&mut solver, instance, &s, cap, None);
    let mut report = RunReport::new(instance.name(), "fast", 0, cost);
    report.iterations = 1;
    report
        .params
        .insert("moves".into(), format!("{moves:?}"));
    (solution, report)
}

/// Iterative variant of `fast`: the reference sequence evolves through
/// 2-opt exchanges, every neighbor priced by the restriction solver;
/// an improving neighbor becomes the reference and scanning continues
/// in place. Stops after a complete scan without improvement or once
/// `budget` neighbor evaluations are spent.
pub fn fast2<T: Scalar>(instance: &Instance<T>, budget: Option<u64>) -> (Solution, RunReport<T>) {
    sequence_search(instance, budget, "fast2", NeighborKind::TwoOpt)
}

/// As `fast2` with the classic 3-opt neighborhood.
pub fn fast3<T: Scalar>(instance: &Instance<T>, budget: Option<u64>) -> (Solution, RunReport<T>) {
    sequence_search(instance, budget, "fast3", NeighborKind::ThreeOpt)
}

enum NeighborKind {
    TwoOpt,
    ThreeOpt,
}

fn sequence_search<T: Scalar>(
    instance: &Instance<T>,
    budget: Option<u64>,
    name: &str,
    kind: NeighborKind,
) -> (Solution, RunReport<T>) {
    let tol = T::tol();
    let cap = SolveCap::Nodes(DEFAULT_BETA_NODES);
    let mut solver = OffloadSolver::new(instance);

    let mut reference = giant_tour(instance, MoveSet::all());
    let (mut best_sol, mut best_cost) =
        order_only_cost(&mut solver, instance, &reference, SolveCap::Nodes(FAST_NODE_CAP), None);
    let mut evals: u64 = 1;
    let mut neighbor_evals: u64 = 0;
    let m = reference.len();

    'search: loop {
        let mut improved = false;
        match kind {
            NeighborKind::TwoOpt => {
                for (i, j) in two_opt_moves(m) {
                    if budget.is_some_and(|b| neighbor_evals >= b) {
                        break 'search;
                    }
                    let mut cand = reference.order().to_vec();
                    apply_two_opt(&mut cand, i, j);
                    let cand = Sequence::new(cand).expect("2-opt keeps ids distinct");
                    let (sol, cost) =
                        order_only_cost(&mut solver, instance, &cand, cap, Some(&best_sol));
                    evals += 1;
                    neighbor_evals += 1;
                    if cost < best_cost - tol {
                        reference = cand;
                        best_sol = sol;
                        best_cost = cost;
                        improved = true;
                    }
                }
            }
            NeighborKind::ThreeOpt => {
                for mv in three_opt_moves(m) {
                    if budget.is_some_and(|b| neighbor_evals >= b) {
                        break 'search;
                    }
                    let cand = Sequence::new(apply_three_opt(reference.order(), mv))
                        .expect("3-opt keeps ids distinct");
                    let (sol, cost) =
                        order_only_cost(&mut solver, instance, &cand, cap, Some(&best_sol));
                    evals += 1;
                    neighbor_evals += 1;
                    if cost < best_cost - tol {
                        reference = cand;
                        best_sol = sol;
                        best_cost = cost;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }

    let mut report = RunReport::new(instance.name(), name, 0, best_cost);
    report.iterations = evals;
    if let Some(b) = budget {
        report.params.insert("budget".into(), b.to_string());
    }
    (best_sol, report)
}

/// Random restart local search.
///
/// The loop alternates an order-constrained offload solve on the
/// current reference sequence, re-optimization of the resulting truck
/// subsequence by the tour engine, and, at stagnation, a randomized
/// restart: below the size threshold a uniform subset of `|z|`
/// customers forced to include every ineligible one; above it a random
/// full-cover sequence optimized under an arc-inflated matrix, with
/// order-window rules tightening the inner solves.
pub fn rrls<T: Scalar>(instance: &Instance<T>, params: &RrlsParams<T>) -> (Solution, RunReport<T>) {
    params.assert_valid();
    let start = Instant::now();
    let deterministic = params.deterministic_budget.is_some();
    let tol = T::tol();
    let n = instance.n();
    let large = n > params.large_threshold;
    let engine = LocalSearchEngine {
        moves: params.moves,
        budget: None,
    };
    let matrix = instance.truck_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut solver = OffloadSolver::new(instance);
    let inner_cap = if deterministic {
        SolveCap::Nodes(params.beta_nodes)
    } else {
        SolveCap::Wall(params.beta)
    };

    let mut report = RunReport::new(instance.name(), "rrls", params.seed, T::zero());
    report.params.insert("delta".into(), params.delta.to_string());
    report
        .params
        .insert("gamma_pct".into(), format!("{}", params.gamma_pct));
    report
        .params
        .insert("large".into(), large.to_string());
    if let Some(b) = params.deterministic_budget {
        report.params.insert("budget_iters".into(), b.to_string());
    }
    if let Some(t) = params.time_limit {
        report
            .params
            .insert("time_limit_s".into(), t.as_secs_f64().to_string());
    }

    let mut s = giant_tour(instance, params.moves);

    // With nothing to offload the loop degenerates: the giant tour is
    // the solution.
    if instance.eligible().is_empty() || n == 0 {
        let (solution, cost) = order_only_cost(&mut solver, instance, &s, inner_cap, None);
        report.cost = cost;
        report.iterations = 1;
        if !deterministic {
            report.elapsed = start.elapsed().as_secs_f64();
        }
        return (solution, report);
    }

    let ineligible: Vec<usize> = instance
        .customers()
        .filter(|&c| !instance.is_eligible(c))
        .collect();
    let eligible: Vec<usize> = instance.eligible().iter().copied().collect();

    let mut best: Option<(Solution, T)> = None;
    let mut iterations: u64 = 0;

    loop {
        // Inner solve on the current reference sequence. Customers
        // outside s were drone-served before, hence eligible; the
        // large-instance strategy adds the window rules.
        let problem = OrderConstrainedProblem {
            delta: params.delta,
            cap: inner_cap,
            incumbent: best.as_ref().map(|(sol, _)| sol.clone()),
            use_window_rules: large,
            ..OrderConstrainedProblem::new(
                instance,
                s.clone(),
                OffloadMode::OrderPlusInsertion,
            )
        };
        let out = solver
            .solve(&problem)
            .expect("reference sequences keep every ineligible customer");
        iterations += 1;

        if best.as_ref().is_none_or(|&(_, c)| out.cost < c - tol) {
            debug_assert!(best.as_ref().is_none_or(|&(_, c)| out.cost <= c));
            best = Some((out.solution.clone(), out.cost));
        }

        let z = out.solution.truck_tour.clone();
        let s_new = engine.improve(matrix, Sequence::new(z.clone()).expect("tour has distinct ids"));

        if s_new.order() == z.as_slice() {
            if !large {
                // Restart: |z| customers drawn uniformly, all
                // ineligible ones forced in (the subset is exactly the
                // ineligible set when that is already larger).
                let target = z.len();
                let mut subset = ineligible.clone();
                if subset.len() < target {
                    let mut pool = eligible.clone();
                    let extra = target - subset.len();
                    for i in 0..extra {
                        let j = rng.random_range(i..pool.len());
                        pool.swap(i, j);
                    }
                    subset.extend_from_slice(&pool[..extra]);
                }
                subset.shuffle(&mut rng);
                s = engine.improve(
                    matrix,
                    Sequence::new(subset).expect("restart subset has distinct ids"),
                );
            } else {
                // Large-instance restart: full random sequence
                // optimized on an inflated matrix, keeping the inner
                // solve down to pure offload choices.
                let mut perm: Vec<usize> = instance.customers().collect();
                perm.shuffle(&mut rng);
                let inflated = perturb_matrix(matrix, params.gamma_pct, &mut rng);
                s = engine.improve(
                    &inflated,
                    Sequence::new(perm).expect("permutation has distinct ids"),
                );
            }
            debug_assert!(ineligible.iter().all(|&c| s.contains(c)));
        } else {
            s = s_new;
        }

        let done = match (params.deterministic_budget, params.time_limit) {
            (Some(budget), _) => iterations >= budget,
            (_, Some(limit)) => start.elapsed() >= limit,
            _ => unreachable!("params validated"),
        };
        if done {
            break;
        }
    }

    let (solution, cost) = best.expect("at least one iteration ran");
    report.cost = cost;
    report.iterations = iterations;
    if !deterministic {
        report.elapsed = start.elapsed().as_secs_f64();
    }
    (solution, report)
}
