//! Identical parallel machine scheduling (`P||Cmax`) for the drone
//! workloads: the LPT list heuristic and an exact branch-and-bound.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::{CapState, Scalar, SolveCap};

/// Jobs (customer id, processing time) to place on `machines` identical
/// machines.
#[derive(Clone, Debug)]
pub struct JobSet<T> {
    jobs: Vec<(usize, T)>,
    machines: usize,
}

#[derive(Debug, Error)]
pub enum SchedError {
    #[error("machine count must be at least 1")]
    NoMachines,
    #[error("job {id} has a negative or non-finite processing time")]
    BadTime { id: usize },
}

impl<T: Scalar> JobSet<T> {
    pub fn new(jobs: Vec<(usize, T)>, machines: usize) -> Result<Self, SchedError> {
        if machines == 0 {
            return Err(SchedError::NoMachines);
        }
        for &(id, t) in &jobs {
            if !t.is_finite() || t < T::zero() {
                return Err(SchedError::BadTime { id });
            }
        }
        Ok(Self { jobs, machines })
    }

    pub fn jobs(&self) -> &[(usize, T)] {
        &self.jobs
    }

    pub fn machines(&self) -> usize {
        self.machines
    }
}

/// Schedule produced by either solver.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule<T> {
    /// Customer id to machine index.
    pub assignment: BTreeMap<usize, usize>,
    pub makespan: T,
}

/// The final makespan is always recomputed this way: per machine, jobs
/// sum in ascending customer id. Keeping one canonical summation order
/// lets independent solvers agree exactly on equal schedules.
fn canonical_makespan<T: Scalar>(
    jobs: &[(usize, T)],
    assignment: &BTreeMap<usize, usize>,
    machines: usize,
) -> T {
    let mut loads = vec![T::zero(); machines];
    let by_id: BTreeMap<usize, T> = jobs.iter().copied().collect();
    for (&id, &m) in assignment {
        loads[m] = loads[m] + by_id[&id];
    }
    loads.into_iter().fold(T::zero(), |a, l| a.max(l))
}

/// Sorts jobs by non-increasing time (ties: lower customer id first) and
/// assigns each to the currently least-loaded machine (ties: lowest
/// machine index).
pub fn lpt<T: Scalar>(jobset: &JobSet<T>) -> Schedule<T> {
    let mut order: Vec<(usize, T)> = jobset.jobs.to_vec();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let mut loads = vec![T::zero(); jobset.machines];
    let mut assignment = BTreeMap::new();
    for (id, t) in order {
        let mut target = 0;
        for m in 1..jobset.machines {
            if loads[m] < loads[target] {
                target = m;
            }
        }
        loads[target] = loads[target] + t;
        assignment.insert(id, target);
    }
    let makespan = canonical_makespan(&jobset.jobs, &assignment, jobset.machines);
    Schedule {
        assignment,
        makespan,
    }
}

/// Exact `P||Cmax` result; `proven` is false only when the node cap was
/// hit, in which case the LPT incumbent (or the best one found) is
/// returned.
#[derive(Clone, Debug)]
pub struct PcmaxResult<T> {
    pub schedule: Schedule<T>,
    pub proven: bool,
    pub nodes: u64,
}

/// Branch-and-bound over jobs in LPT order.
///
/// Lower bounds: `sum/m`, the largest job, and `LPT / (4/3 - 1/(3m))`
/// from Graham's approximation guarantee. Machines are interchangeable,
/// so a job is never placed on more than one empty machine and machines
/// with equal loads are tried only once per level.
pub fn exact_pcmax<T: Scalar>(jobset: &JobSet<T>, cap: SolveCap) -> PcmaxResult<T> {
    let m = jobset.machines;
    let incumbent = lpt(jobset);
    if jobset.jobs.is_empty() {
        return PcmaxResult {
            schedule: incumbent,
            proven: true,
            nodes: 0,
        };
    }

    let mut order: Vec<(usize, T)> = jobset.jobs.to_vec();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let total: T = order.iter().map(|&(_, t)| t).sum();
    let m_t = T::from_f64_lossy(m as f64);
    let graham = T::from_f64_lossy(4.0 / 3.0) - T::one() / (T::from_f64_lossy(3.0) * m_t);
    let lb = (total / m_t)
        .max(order[0].1)
        .max(incumbent.makespan / graham);

    if incumbent.makespan <= lb + T::tol() {
        return PcmaxResult {
            schedule: incumbent,
            proven: true,
            nodes: 0,
        };
    }

    let mut state = cap.start();
    let mut best = incumbent;
    let mut loads = vec![T::zero(); m];
    let mut assign = vec![0usize; order.len()];
    let mut capped = false;
    dfs(
        &order,
        0,
        &mut loads,
        &mut assign,
        &mut best,
        lb,
        &mut state,
        &mut capped,
        jobset,
    );

    PcmaxResult {
        proven: !capped,
        nodes: state.nodes(),
        schedule: best,
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs<T: Scalar>(
    order: &[(usize, T)],
    depth: usize,
    loads: &mut Vec<T>,
    assign: &mut Vec<usize>,
    best: &mut Schedule<T>,
    lb: T,
    state: &mut CapState,
    capped: &mut bool,
    jobset: &JobSet<T>,
) {
    if *capped {
        return;
    }
    if depth == order.len() {
        let assignment: BTreeMap<usize, usize> = order
            .iter()
            .zip(assign.iter())
            .map(|(&(id, _), &m)| (id, m))
            .collect();
        let makespan = canonical_makespan(jobset.jobs(), &assignment, jobset.machines());
        if makespan < best.makespan {
            *best = Schedule {
                assignment,
                makespan,
            };
        }
        return;
    }
    let (_, t) = order[depth];
    let mut seen_empty = false;
    for machine in 0..loads.len() {
        // Symmetry: equal loads behave identically; try only the first.
        if loads[..machine].iter().any(|&l| l == loads[machine]) {
            continue;
        }
        if loads[machine] == T::zero() {
            if seen_empty {
                continue;
            }
            seen_empty = true;
        }
        let new_load = loads[machine] + t;
        if new_load >= best.makespan {
            continue;
        }
        if !state.tick() {
            *capped = true;
            return;
        }
        loads[machine] = new_load;
        assign[depth] = machine;
        dfs(order, depth + 1, loads, assign, best, lb, state, capped, jobset);
        loads[machine] = loads[machine] - t;
        if best.makespan <= lb + T::tol() {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn jobset(times: &[f64], m: usize) -> JobSet<f64> {
        JobSet::new(
            times.iter().copied().enumerate().map(|(i, t)| (i + 1, t)).collect(),
            m,
        )
        .unwrap()
    }

    /// Full m^n assignment enumeration; the independent oracle.
    fn enumerate_optimum(jobs: &JobSet<f64>) -> f64 {
        let n = jobs.jobs().len();
        let m = jobs.machines();
        let mut best = f64::INFINITY;
        let mut assign = vec![0usize; n];
        loop {
            let mut map = BTreeMap::new();
            for (idx, &(id, _)) in jobs.jobs().iter().enumerate() {
                map.insert(id, assign[idx]);
            }
            best = best.min(canonical_makespan(jobs.jobs(), &map, m));
            // Odometer increment.
            let mut pos = 0;
            loop {
                if pos == n {
                    return best;
                }
                assign[pos] += 1;
                if assign[pos] < m {
                    break;
                }
                assign[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn lpt_reference_set() {
        let s = lpt(&jobset(&[5.0, 4.0, 3.0, 3.0, 3.0], 2));
        assert_eq!(s.makespan, 10.0);
    }

    #[test]
    fn lpt_single_machine_sums() {
        let s = lpt(&jobset(&[2.5, 1.5, 4.0], 1));
        assert_eq!(s.makespan, 8.0);
    }

    #[test]
    fn lpt_empty() {
        let s = lpt(&jobset(&[], 3));
        assert_eq!(s.makespan, 0.0);
        assert!(s.assignment.is_empty());
    }

    #[test]
    fn exact_reference_set_is_nine() {
        let r = exact_pcmax(&jobset(&[5.0, 4.0, 3.0, 3.0, 3.0], 2), SolveCap::Unlimited);
        assert!(r.proven);
        assert_eq!(r.schedule.makespan, 9.0);
        assert_eq!(enumerate_optimum(&jobset(&[5.0, 4.0, 3.0, 3.0, 3.0], 2)), 9.0);
    }

    #[test]
    fn exact_one_job_per_machine() {
        let r = exact_pcmax(&jobset(&[3.0, 7.0, 2.0], 5), SolveCap::Unlimited);
        assert!(r.proven);
        assert_eq!(r.schedule.makespan, 7.0);
    }

    #[test]
    fn exact_matches_enumeration_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(1..=12);
            let m = rng.random_range(1..=4);
            // Dyadic times keep all sums exact in f64.
            let times: Vec<f64> = (0..n)
                .map(|_| rng.random_range(1..=64) as f64 / 4.0)
                .collect();
            let js = jobset(&times, m);
            let r = exact_pcmax(&js, SolveCap::Unlimited);
            assert!(r.proven);
            let opt = enumerate_optimum(&js);
            assert_eq!(r.schedule.makespan, opt, "jobs {times:?} machines {m}");

            // Graham bound for LPT, and LPT never below the optimum.
            let l = lpt(&js);
            let factor = 4.0 / 3.0 - 1.0 / (3.0 * m as f64);
            assert!(l.makespan <= factor * opt + 1e-9);
            assert!(l.makespan >= opt - 1e-9);
        }
    }

    #[test]
    fn makespan_invariant_under_job_permutation_and_machine_relabel() {
        let a = jobset(&[4.0, 2.0, 6.0, 1.0], 2);
        let mut shuffled: Vec<(usize, f64)> = a.jobs().to_vec();
        shuffled.reverse();
        let b = JobSet::new(shuffled, 2).unwrap();
        let ra = exact_pcmax(&a, SolveCap::Unlimited);
        let rb = exact_pcmax(&b, SolveCap::Unlimited);
        assert_eq!(ra.schedule.makespan, rb.schedule.makespan);
    }

    #[test]
    fn node_cap_returns_incumbent_unproven() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let times: Vec<f64> = (0..18).map(|_| rng.random_range(10..90) as f64).collect();
        let js = jobset(&times, 3);
        let r = exact_pcmax(&js, SolveCap::Nodes(5));
        assert!(!r.proven);
        // The incumbent is still a feasible schedule.
        assert_eq!(r.schedule.assignment.len(), 18);
        let exact = exact_pcmax(&js, SolveCap::Unlimited);
        assert!(exact.schedule.makespan <= r.schedule.makespan);
    }

    #[test]
    fn rejects_zero_machines() {
        assert!(JobSet::<f64>::new(vec![(1, 1.0)], 0).is_err());
    }
}
