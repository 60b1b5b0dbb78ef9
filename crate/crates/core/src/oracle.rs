//! Exact PDSTSP optimum at desk scale: every drone subset is priced
//! with a shared Held–Karp table on the truck side and exact `P||Cmax`
//! on the drone side. Ground truth for the whole test suite.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::instance::{Instance, Solution};
use crate::sched::{exact_pcmax, JobSet};
use crate::tsp::HeldKarpTable;
use crate::{Scalar, SolveCap};

/// Hard guards: enumeration is `2^|eligible|` subsets against a
/// `2^n * n^2` truck table, so both sides stay desk-sized.
#[derive(Clone, Copy, Debug)]
pub struct OracleLimits {
    pub max_customers: usize,
    pub max_eligible: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_customers: 14,
            max_eligible: 16,
        }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance has {n} customers, above the oracle limit {max}")]
    TooManyCustomers { n: usize, max: usize },
    #[error("instance has {k} eligible customers, above the oracle limit {max}")]
    TooManyEligible { k: usize, max: usize },
}

#[derive(Clone, Debug)]
pub struct OracleResult<T> {
    pub solution: Solution,
    pub alpha: T,
    /// Always true within the limits; the limits are hard guards, not
    /// time caps.
    pub proven: bool,
    pub subsets_examined: u64,
}

/// Enumerates all drone subsets `D` of the eligible set in Gray-code
/// order (one customer flips per step, so the drone-side sums update
/// incrementally). For each subset the truck cost is the Held–Karp
/// optimum over the complement and the drone cost is exact `P||Cmax`;
/// subsets whose drone-side lower bound already meets the incumbent
/// are pruned.
pub fn brute_force<T: Scalar>(
    instance: &Instance<T>,
    limits: OracleLimits,
) -> Result<OracleResult<T>, OracleError> {
    let n = instance.n();
    if n > limits.max_customers {
        return Err(OracleError::TooManyCustomers {
            n,
            max: limits.max_customers,
        });
    }
    let eligible: Vec<usize> = instance.eligible().iter().copied().collect();
    if eligible.len() > limits.max_eligible {
        return Err(OracleError::TooManyEligible {
            k: eligible.len(),
            max: limits.max_eligible,
        });
    }

    let customers: BTreeSet<usize> = instance.customers().collect();
    let table = HeldKarpTable::build(instance.truck_matrix(), &customers)
        .expect("guarded size fits the exact solver");
    // Bit position of each eligible customer in the full customer mask.
    let elig_bit: Vec<usize> = eligible
        .iter()
        .map(|&c| table.ids().iter().position(|&id| id == c).unwrap())
        .collect();
    let full_mask = if n == 0 { 0 } else { (1usize << n) - 1 };
    let m_drones = instance.n_drones();

    let k = eligible.len();
    let drone_subsets = if m_drones == 0 { 1u64 } else { 1u64 << k };

    let mut best_alpha = T::infinity();
    let mut best_drone_mask = 0u64;
    let mut examined = 0u64;

    let mut drone_sum = T::zero();
    let mut drone_max = T::zero();
    let mut gray_prev = 0u64;
    let m_t = T::from_f64_lossy(m_drones.max(1) as f64);

    for i in 0..drone_subsets {
        let gray = i ^ (i >> 1);
        if i > 0 {
            let flipped = gray ^ gray_prev;
            let bit = flipped.trailing_zeros() as usize;
            let t = instance
                .drone_time(eligible[bit])
                .expect("eligible customer has a drone time");
            if gray & flipped != 0 {
                drone_sum = drone_sum + t;
                drone_max = drone_max.max(t);
            } else {
                drone_sum = drone_sum - t;
                if drone_max == t {
                    drone_max = (0..k)
                        .filter(|&b| gray & (1 << b) != 0)
                        .map(|b| instance.drone_time(eligible[b]).unwrap())
                        .fold(T::zero(), |a, v| a.max(v));
                }
            }
        }
        gray_prev = gray;
        examined += 1;

        if m_drones > 0 {
            let lb = (drone_sum / m_t).max(drone_max);
            if lb >= best_alpha {
                continue;
            }
        }

        let mut truck_mask = full_mask;
        for (b, &pos) in elig_bit.iter().enumerate() {
            if gray & (1 << b) != 0 {
                truck_mask &= !(1 << pos);
            }
        }
        let truck = table.best_cost(truck_mask);
        let drone_cost = if gray == 0 {
            T::zero()
        } else {
            let jobs: Vec<(usize, T)> = (0..k)
                .filter(|&b| gray & (1 << b) != 0)
                .map(|b| (eligible[b], instance.drone_time(eligible[b]).unwrap()))
                .collect();
            let jobset = JobSet::new(jobs, m_drones).expect("m_drones > 0 here");
            exact_pcmax(&jobset, SolveCap::Unlimited).schedule.makespan
        };
        let alpha = truck.max(drone_cost).max(T::zero());
        if alpha < best_alpha {
            best_alpha = alpha;
            best_drone_mask = gray;
        }
    }

    // Reconstruct the winning partition.
    let mut truck_mask = full_mask;
    let mut drone_ids = Vec::new();
    for (b, &pos) in elig_bit.iter().enumerate() {
        if best_drone_mask & (1 << b) != 0 {
            truck_mask &= !(1 << pos);
            drone_ids.push(eligible[b]);
        }
    }
    let (tour, _) = table.best_tour(truck_mask);
    let drone_assign = if drone_ids.is_empty() {
        Default::default()
    } else {
        let jobs: Vec<(usize, T)> = drone_ids
            .iter()
            .map(|&c| (c, instance.drone_time(c).unwrap()))
            .collect();
        exact_pcmax(
            &JobSet::new(jobs, m_drones).expect("winning subset implies drones"),
            SolveCap::Unlimited,
        )
        .schedule
        .assignment
    };
    let solution = Solution {
        truck_tour: tour.into_vec(),
        drone_assign,
    };
    debug_assert!(crate::instance::validate(instance, &solution).is_empty());

    Ok(OracleResult {
        solution,
        alpha: best_alpha,
        proven: true,
        subsets_examined: examined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::TimeMatrix;
    use crate::tsp::held_karp;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, drones: usize) -> Instance<f64> {
        let rows: Vec<Vec<f64>> = (0..=n)
            .map(|i| {
                (0..=n)
                    .map(|j| if i == j { 0.0 } else { rng.random_range(4..=80) as f64 / 4.0 })
                    .collect()
            })
            .collect();
        let eligible: Vec<usize> = (1..=n).filter(|_| rng.random_bool(0.7)).collect();
        let dt: BTreeMap<usize, f64> = eligible
            .iter()
            .map(|&c| (c, rng.random_range(4..=60) as f64 / 4.0))
            .collect();
        Instance::new(
            "o",
            None,
            eligible.into_iter().collect(),
            TimeMatrix::from_rows(rows).unwrap(),
            dt,
            drones,
        )
        .unwrap()
    }

    /// Fully independent reference: plain binary-order subset loop,
    /// top-down memoized path DP for the truck, odometer enumeration
    /// for the drones.
    fn independent_enum(inst: &Instance<f64>) -> f64 {
        let ids: Vec<usize> = inst.customers().collect();
        let mut memo: BTreeMap<(u64, usize), f64> = BTreeMap::new();

        fn path(
            mask: u64,
            last: usize,
            ids: &[usize],
            inst: &Instance<f64>,
            memo: &mut BTreeMap<(u64, usize), f64>,
        ) -> f64 {
            if mask == 1 << last {
                return inst.truck_time(0, ids[last]);
            }
            if let Some(&v) = memo.get(&(mask, last)) {
                return v;
            }
            let prev_mask = mask & !(1 << last);
            let mut best = f64::INFINITY;
            for p in 0..ids.len() {
                if prev_mask & (1 << p) != 0 {
                    let v = path(prev_mask, p, ids, inst, memo)
                        + inst.truck_time(ids[p], ids[last]);
                    best = best.min(v);
                }
            }
            memo.insert((mask, last), best);
            best
        }

        let eligible: Vec<usize> = inst.eligible().iter().copied().collect();
        let k = eligible.len();
        let m = inst.n_drones();
        let mut best = f64::INFINITY;
        let subsets: u64 = if m == 0 { 1 } else { 1 << k };
        for mask in 0..subsets {
            let droned: Vec<usize> = (0..k)
                .filter(|&b| mask & (1 << b) != 0)
                .map(|b| eligible[b])
                .collect();
            let mut truck_mask = 0u64;
            for (p, id) in ids.iter().enumerate() {
                if !droned.contains(id) {
                    truck_mask |= 1 << p;
                }
            }
            let truck = if truck_mask == 0 {
                0.0
            } else {
                (0..ids.len())
                    .filter(|&p| truck_mask & (1 << p) != 0)
                    .map(|p| {
                        path(truck_mask, p, &ids, inst, &mut memo) + inst.truck_time(ids[p], 0)
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            // Odometer over machine assignments, canonical load sums.
            let drone = if droned.is_empty() {
                0.0
            } else {
                let mut best_ms = f64::INFINITY;
                let mut assign = vec![0usize; droned.len()];
                'outer: loop {
                    let mut loads = vec![0.0; m];
                    for (idx, &c) in droned.iter().enumerate() {
                        loads[assign[idx]] += inst.drone_time(c).unwrap();
                    }
                    let ms = loads.iter().fold(0.0f64, |a, &l| a.max(l));
                    best_ms = best_ms.min(ms);
                    let mut pos = 0;
                    loop {
                        if pos == assign.len() {
                            break 'outer;
                        }
                        assign[pos] += 1;
                        if assign[pos] < m {
                            break;
                        }
                        assign[pos] = 0;
                        pos += 1;
                    }
                }
                best_ms
            };
            best = best.min(truck.max(drone).max(0.0));
        }
        best
    }

    #[test]
    fn no_eligible_degenerates_to_tsp() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..=6)
            .map(|i| {
                (0..=6)
                    .map(|j| if i == j { 0.0 } else { rng.random_range(1..40) as f64 })
                    .collect()
            })
            .collect();
        let inst: Instance<f64> = Instance::new(
            "tsp",
            None,
            BTreeSet::new(),
            TimeMatrix::from_rows(rows).unwrap(),
            Default::default(),
            2,
        )
        .unwrap();
        let r = brute_force(&inst, OracleLimits::default()).unwrap();
        let subset: BTreeSet<usize> = inst.customers().collect();
        let (_, opt) = held_karp(inst.truck_matrix(), &subset).unwrap();
        assert_eq!(r.alpha, opt);
        assert!(r.solution.drone_assign.is_empty());
    }

    #[test]
    fn single_eligible_two_case_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let n = rng.random_range(2..=7);
            let rows: Vec<Vec<f64>> = (0..=n)
                .map(|i| {
                    (0..=n)
                        .map(|j| if i == j { 0.0 } else { rng.random_range(1..40) as f64 })
                        .collect()
                })
                .collect();
            let t_u = rng.random_range(1..60) as f64;
            let inst = Instance::new(
                "one",
                None,
                [1].into_iter().collect(),
                TimeMatrix::from_rows(rows).unwrap(),
                [(1, t_u)].into_iter().collect(),
                1,
            )
            .unwrap();
            let r = brute_force(&inst, OracleLimits::default()).unwrap();
            let all: BTreeSet<usize> = inst.customers().collect();
            let without: BTreeSet<usize> = inst.customers().filter(|&c| c != 1).collect();
            let (_, full) = held_karp(inst.truck_matrix(), &all).unwrap();
            let (_, rest) = held_karp(inst.truck_matrix(), &without).unwrap();
            let expect = full.min(rest.max(t_u));
            assert_eq!(r.alpha, expect);
        }
    }

    #[test]
    fn matches_independent_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..60 {
            let n = rng.random_range(2..=8);
            let drones = rng.random_range(1..=3);
            let inst = random_instance(&mut rng, n, drones);
            let r = brute_force(&inst, OracleLimits::default()).unwrap();
            assert!(r.proven);
            assert_eq!(r.alpha, independent_enum(&inst), "instance n={n} m={drones}");
            let eval = crate::instance::evaluate(&inst, &r.solution).unwrap();
            assert_eq!(eval.alpha, r.alpha);
        }
    }

    #[test]
    fn relabeling_customers_preserves_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = random_instance(&mut rng, 7, 2);
        let n = inst.n();
        // Reverse relabeling: id c -> n + 1 - c.
        let relabel = |c: usize| n + 1 - c;
        let mut rows = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..=n {
            for j in 0..=n {
                let a = if i == 0 { 0 } else { relabel(i) };
                let b = if j == 0 { 0 } else { relabel(j) };
                rows[i][j] = inst.truck_time(a, b);
            }
        }
        let eligible: BTreeSet<usize> = inst.eligible().iter().map(|&c| relabel(c)).collect();
        let dt: BTreeMap<usize, f64> = inst
            .drone_times()
            .iter()
            .map(|(&c, &t)| (relabel(c), t))
            .collect();
        let relabeled = Instance::new(
            "rel",
            None,
            eligible,
            TimeMatrix::from_rows(rows).unwrap(),
            dt,
            inst.n_drones(),
        )
        .unwrap();
        let a = brute_force(&inst, OracleLimits::default()).unwrap();
        let b = brute_force(&relabeled, OracleLimits::default()).unwrap();
        assert_eq!(a.alpha, b.alpha);
    }

    #[test]
    fn saturated_fleet_is_insensitive_to_more_drones() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = random_instance(&mut rng, 6, 1);
        let k = base.eligible().len().max(1);
        let build = |m: usize| {
            Instance::new(
                "sat",
                None,
                base.eligible().clone(),
                base.truck_matrix().clone(),
                base.drone_times().clone(),
                m,
            )
            .unwrap()
        };
        let at_k = brute_force(&build(k), OracleLimits::default()).unwrap();
        let beyond = brute_force(&build(k + 3), OracleLimits::default()).unwrap();
        assert_eq!(at_k.alpha, beyond.alpha);
    }

    #[test]
    fn limits_are_enforced() {
        let inst: Instance<f64> = Instance::new(
            "big",
            None,
            BTreeSet::new(),
            TimeMatrix::zero(17),
            Default::default(),
            1,
        )
        .unwrap();
        assert!(matches!(
            brute_force(&inst, OracleLimits::default()),
            Err(OracleError::TooManyCustomers { .. })
        ));
    }
}
