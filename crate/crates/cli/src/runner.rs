//! Runs one solver on one instance and assembles the run report.

use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;

use pdstsp::heuristics::{self, RrlsParams};
use pdstsp::instance::{evaluate, validate, Solution};
use pdstsp::oracle::{brute_force, OracleLimits};
use pdstsp::{Instance, RunReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Fast,
    Fast2,
    Fast3,
    Rrls,
    Oracle,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Fast => "fast",
            Algo::Fast2 => "fast2",
            Algo::Fast3 => "fast3",
            Algo::Rrls => "rrls",
            Algo::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub seed: u64,
    /// Deterministic budget: outer iterations for RRLS, neighbor
    /// evaluations for the iterated heuristics.
    pub budget_iters: Option<u64>,
    /// Wall-clock RRLS termination; mutually exclusive with the budget.
    pub time_limit: Option<f64>,
    pub beta: f64,
    pub beta_nodes: u64,
    pub delta: usize,
    pub gamma: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            budget_iters: None,
            time_limit: None,
            beta: 10.0,
            beta_nodes: heuristics::DEFAULT_BETA_NODES,
            delta: 20,
            gamma: 80.0,
        }
    }
}

/// Runs the solver; wall time lands in the report only for timed RRLS
/// runs, so reports from deterministic runs replay byte for byte.
pub fn run_algo(
    instance: &Instance,
    algo: Algo,
    opts: &SolveOptions,
) -> Result<(Solution, RunReport, f64)> {
    let start = Instant::now();
    let (solution, report) = match algo {
        Algo::Fast => heuristics::fast(instance),
        Algo::Fast2 => heuristics::fast2(instance, opts.budget_iters),
        Algo::Fast3 => heuristics::fast3(instance, opts.budget_iters),
        Algo::Rrls => {
            if opts.budget_iters.is_some() && opts.time_limit.is_some() {
                bail!("--budget-iters and --time-limit are mutually exclusive");
            }
            let mut params = match (opts.budget_iters, opts.time_limit) {
                (Some(b), None) => RrlsParams::deterministic(opts.seed, b),
                (None, Some(t)) => RrlsParams::timed(opts.seed, Duration::from_secs_f64(t)),
                (None, None) => RrlsParams::deterministic(opts.seed, 500),
                (Some(_), Some(_)) => unreachable!(),
            };
            params.beta = Duration::from_secs_f64(opts.beta);
            params.beta_nodes = opts.beta_nodes;
            params.delta = opts.delta;
            params.gamma_pct = opts.gamma;
            heuristics::rrls(instance, &params)
        }
        Algo::Oracle => {
            let r = brute_force(instance, OracleLimits::default())
                .context("oracle limits exceeded")?;
            let mut report = RunReport::new(instance.name(), "oracle", 0, r.alpha);
            report.proven = r.proven;
            report.iterations = r.subsets_examined;
            (r.solution, report)
        }
    };
    let wall = start.elapsed().as_secs_f64();

    let violations = validate(instance, &solution);
    if !violations.is_empty() {
        bail!(
            "solver returned an infeasible solution: {}",
            violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        );
    }
    let eval = evaluate(instance, &solution).expect("validated");
    anyhow::ensure!(
        (eval.alpha - report.cost).abs() <= 1e-9 * (1.0 + eval.alpha.abs()),
        "reported cost {} disagrees with evaluation {}",
        report.cost,
        eval.alpha
    );
    Ok((solution, report, wall))
}
