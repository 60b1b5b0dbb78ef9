//! Domain types shared by every solver: the problem instance, candidate
//! solutions, and their evaluation.
//!
//! Node ids follow the benchmark convention: the depot is node `0`,
//! customers are `1..=n`. All types are immutable after construction and
//! safe to share across parallel workers; the operations here are pure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Planar point in generator length units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn manhattan(self, other: Self) -> T {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn euclidean(self, other: Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Dense square matrix of travel times, indexed by node id.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeMatrix<T> {
    dim: usize,
    values: Vec<T>,
}

impl<T: Scalar> TimeMatrix<T> {
    /// Builds a matrix from rows, checking shape, finiteness,
    /// non-negativity and a zero diagonal. Asymmetric matrices are
    /// accepted; the triangle inequality is not assumed anywhere.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, InstanceError> {
        let dim = rows.len();
        let mut values = Vec::with_capacity(dim * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(InstanceError::MatrixShape {
                    row: i,
                    len: row.len(),
                    dim,
                });
            }
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() || v < T::zero() {
                    return Err(InstanceError::BadTime {
                        i,
                        j,
                        value: format!("{v}"),
                    });
                }
                if i == j && v != T::zero() {
                    return Err(InstanceError::NonZeroDiagonal { i });
                }
                values.push(v);
            }
        }
        Ok(Self { dim, values })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            values: vec![T::zero(); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.dim + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[i * self.dim + j] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.dim)
            .map(|i| self.values[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect()
    }

    /// True when `m[i][j] == m[j][i]` for all pairs. Local search uses
    /// this to pick constant-time move deltas.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (i + 1..self.dim).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("matrix row {row} has length {len}, expected {dim}")]
    MatrixShape { row: usize, len: usize, dim: usize },
    #[error("travel time [{i}][{j}] = {value} is negative or not finite")]
    BadTime { i: usize, j: usize, value: String },
    #[error("matrix diagonal entry [{i}][{i}] must be zero")]
    NonZeroDiagonal { i: usize },
    #[error("matrix dimension {dim} does not match {n} customers plus depot")]
    DimensionMismatch { dim: usize, n: usize },
    #[error("eligible set contains unknown customer {id}")]
    EligibleUnknown { id: usize },
    #[error("drone time for customer {id} is negative or not finite")]
    BadDroneTime { id: usize },
    #[error("drone time keys must equal the eligible set (mismatch at customer {id})")]
    DroneTimeKeys { id: usize },
    #[error("coordinates cover {len} nodes, expected {expected} (depot plus customers)")]
    CoordsLength { len: usize, expected: usize },
}

/// A PDSTSP instance: depot `0`, customers `1..=n`, truck travel times
/// between all node pairs, drone round-trip times on the eligible set,
/// and the drone fleet size.
#[derive(Clone, Debug)]
pub struct Instance<T> {
    name: String,
    coords: Option<Vec<Point<T>>>,
    eligible: BTreeSet<usize>,
    truck_time: TimeMatrix<T>,
    drone_time: BTreeMap<usize, T>,
    n_drones: usize,
}

impl<T: Scalar> Instance<T> {
    /// Validated constructor. `coords`, when given, hold the depot at
    /// index 0 followed by the customers; when travel matrices and
    /// coordinates are both present the matrices are authoritative.
    pub fn new(
        name: impl Into<String>,
        coords: Option<Vec<Point<T>>>,
        eligible: BTreeSet<usize>,
        truck_time: TimeMatrix<T>,
        drone_time: BTreeMap<usize, T>,
        n_drones: usize,
    ) -> Result<Self, InstanceError> {
        let n = truck_time.dim().saturating_sub(1);
        if truck_time.dim() == 0 {
            return Err(InstanceError::DimensionMismatch { dim: 0, n: 0 });
        }
        if let Some(c) = &coords {
            if c.len() != n + 1 {
                return Err(InstanceError::CoordsLength {
                    len: c.len(),
                    expected: n + 1,
                });
            }
        }
        for &id in &eligible {
            if id == 0 || id > n {
                return Err(InstanceError::EligibleUnknown { id });
            }
        }
        for (&id, &t) in &drone_time {
            if !eligible.contains(&id) {
                return Err(InstanceError::DroneTimeKeys { id });
            }
            if !t.is_finite() || t < T::zero() {
                return Err(InstanceError::BadDroneTime { id });
            }
        }
        if let Some(&id) = eligible.iter().find(|id| !drone_time.contains_key(id)) {
            return Err(InstanceError::DroneTimeKeys { id });
        }
        Ok(Self {
            name: name.into(),
            coords,
            eligible,
            truck_time,
            drone_time,
            n_drones,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of customers.
    pub fn n(&self) -> usize {
        self.truck_time.dim() - 1
    }

    pub fn customers(&self) -> impl Iterator<Item = usize> {
        1..=self.n()
    }

    pub fn is_customer(&self, id: usize) -> bool {
        id >= 1 && id <= self.n()
    }

    pub fn eligible(&self) -> &BTreeSet<usize> {
        &self.eligible
    }

    pub fn is_eligible(&self, id: usize) -> bool {
        self.eligible.contains(&id)
    }

    #[inline]
    pub fn truck_time(&self, i: usize, j: usize) -> T {
        self.truck_time.get(i, j)
    }

    pub fn truck_matrix(&self) -> &TimeMatrix<T> {
        &self.truck_time
    }

    /// Drone round-trip time; `None` for ineligible customers.
    pub fn drone_time(&self, id: usize) -> Option<T> {
        self.drone_time.get(&id).copied()
    }

    pub fn drone_times(&self) -> &BTreeMap<usize, T> {
        &self.drone_time
    }

    pub fn n_drones(&self) -> usize {
        self.n_drones
    }

    pub fn coords(&self) -> Option<&[Point<T>]> {
        self.coords.as_deref()
    }

    /// Closed-walk truck time `depot -> tour -> depot`; the empty tour
    /// costs zero. Summation runs in tour order.
    pub fn tour_time(&self, tour: &[usize]) -> T {
        let mut total = T::zero();
        let mut prev = 0usize;
        for &c in tour {
            total = total + self.truck_time.get(prev, c);
            prev = c;
        }
        if prev != 0 || !tour.is_empty() {
            total = total + self.truck_time.get(prev, 0);
        }
        total
    }
}

/// A candidate solution: the truck tour (depot implicit at both ends)
/// plus a customer-to-drone assignment. The tour customers and the
/// assignment keys must partition the customer set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub truck_tour: Vec<usize>,
    pub drone_assign: BTreeMap<usize, usize>,
}

impl Solution {
    pub fn truck_only(tour: Vec<usize>) -> Self {
        Self {
            truck_tour: tour,
            drone_assign: BTreeMap::new(),
        }
    }

    pub fn empty() -> Self {
        Self::truck_only(Vec::new())
    }
}

/// Evaluated cost of a feasible solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation<T> {
    pub truck_time_total: T,
    /// Per-drone workload, length `n_drones`.
    pub drone_loads: Vec<T>,
    /// `max(truck_time_total, max(drone_loads), 0)`.
    pub alpha: T,
}

/// A single feasibility violation; violations are data, not failures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Customer served more than once (truck/drone overlap or repeats).
    DuplicateService { customer: usize },
    /// Id outside `1..=n` appearing in the tour or the assignment.
    UnknownCustomer { customer: usize },
    /// Customer served by neither the truck nor a drone.
    Unserved { customer: usize },
    /// Drone-assigned customer outside the eligible set.
    NotDroneEligible { customer: usize },
    /// Assigned drone index is `>= n_drones`.
    DroneIndexOutOfRange {
        customer: usize,
        drone: usize,
        n_drones: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateService { customer } => {
                write!(f, "customer {customer}: duplicate service")
            }
            Violation::UnknownCustomer { customer } => {
                write!(f, "customer {customer}: unknown id")
            }
            Violation::Unserved { customer } => write!(f, "customer {customer}: not served"),
            Violation::NotDroneEligible { customer } => {
                write!(f, "customer {customer}: not drone-eligible")
            }
            Violation::DroneIndexOutOfRange {
                customer,
                drone,
                n_drones,
            } => write!(
                f,
                "customer {customer}: drone index {drone} out of range (fleet size {n_drones})"
            ),
        }
    }
}

/// Checks partition, eligibility and drone-index bounds; returns the
/// empty list iff the solution is feasible for the instance.
pub fn validate<T: Scalar>(instance: &Instance<T>, solution: &Solution) -> Vec<Violation> {
    let n = instance.n();
    let mut violations = Vec::new();
    let mut seen = vec![false; n + 1];

    let mut mark = |id: usize, violations: &mut Vec<Violation>| {
        if id == 0 || id > n {
            violations.push(Violation::UnknownCustomer { customer: id });
            return;
        }
        if seen[id] {
            violations.push(Violation::DuplicateService { customer: id });
        }
        seen[id] = true;
    };

    for &c in &solution.truck_tour {
        mark(c, &mut violations);
    }
    for (&c, &k) in &solution.drone_assign {
        mark(c, &mut violations);
        if instance.is_customer(c) && !instance.is_eligible(c) {
            violations.push(Violation::NotDroneEligible { customer: c });
        }
        if k >= instance.n_drones() {
            violations.push(Violation::DroneIndexOutOfRange {
                customer: c,
                drone: k,
                n_drones: instance.n_drones(),
            });
        }
    }
    for id in instance.customers() {
        if !seen[id] {
            violations.push(Violation::Unserved { customer: id });
        }
    }
    violations
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid solution: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Computes truck time, per-drone loads and the makespan `alpha`.
///
/// Rejects infeasible solutions with the full violation report rather
/// than evaluating them. Drone loads sum the round-trip times of the
/// assigned customers in ascending customer id; the truck time sums the
/// closed walk in tour order. Those summation orders are part of the
/// contract so that independent evaluations agree bit-for-bit.
pub fn evaluate<T: Scalar>(
    instance: &Instance<T>,
    solution: &Solution,
) -> Result<Evaluation<T>, EvalError> {
    let violations = validate(instance, solution);
    if !violations.is_empty() {
        return Err(EvalError::Invalid(violations));
    }

    let truck_time_total = instance.tour_time(&solution.truck_tour);
    let mut drone_loads = vec![T::zero(); instance.n_drones()];
    for (&c, &k) in &solution.drone_assign {
        let t = instance
            .drone_time(c)
            .expect("validated assignment is eligible");
        drone_loads[k] = drone_loads[k] + t;
    }

    let mut alpha = truck_time_total.max(T::zero());
    for &load in &drone_loads {
        alpha = alpha.max(load);
    }

    Ok(Evaluation {
        truck_time_total,
        drone_loads,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn line_instance(truck: Vec<Vec<f64>>, eligible: &[usize], drone: &[(usize, f64)], drones: usize) -> Instance<f64> {
        Instance::new(
            "test",
            None,
            eligible.iter().copied().collect(),
            TimeMatrix::from_rows(truck).unwrap(),
            drone.iter().copied().collect(),
            drones,
        )
        .unwrap()
    }

    #[test]
    fn empty_instance_evaluates_to_zero() {
        let inst = line_instance(vec![vec![0.0]], &[], &[], 1);
        let eval = evaluate(&inst, &Solution::empty()).unwrap();
        assert_eq!(eval.alpha, 0.0);
        assert_eq!(eval.truck_time_total, 0.0);
        assert_eq!(eval.drone_loads, vec![0.0]);
    }

    #[test]
    fn single_customer_out_and_back() {
        // Asymmetric single arc pair: 4 out, 6 back.
        let inst = line_instance(vec![vec![0.0, 4.0], vec![6.0, 0.0]], &[], &[], 0);
        let eval = evaluate(&inst, &Solution::truck_only(vec![1])).unwrap();
        assert_eq!(eval.alpha, 10.0);
    }

    #[test]
    fn duplicate_service_detected() {
        let inst = line_instance(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            &[1],
            &[(1, 2.0)],
            1,
        );
        let sol = Solution {
            truck_tour: vec![1],
            drone_assign: [(1, 0)].into_iter().collect(),
        };
        let v = validate(&inst, &sol);
        assert!(v.contains(&Violation::DuplicateService { customer: 1 }));
        assert!(evaluate(&inst, &sol).is_err());
    }

    #[test]
    fn ineligible_drone_assignment_detected() {
        let inst = line_instance(
            vec![
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 1.0],
                vec![2.0, 1.0, 0.0],
            ],
            &[1],
            &[(1, 2.0)],
            1,
        );
        let sol = Solution {
            truck_tour: vec![1],
            drone_assign: [(2, 0)].into_iter().collect(),
        };
        let v = validate(&inst, &sol);
        assert!(v.contains(&Violation::NotDroneEligible { customer: 2 }));
    }

    #[test]
    fn drone_index_bound_checked() {
        let inst = line_instance(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            &[1],
            &[(1, 2.0)],
            1,
        );
        let sol = Solution {
            truck_tour: vec![],
            drone_assign: [(1, 1)].into_iter().collect(),
        };
        assert!(validate(&inst, &sol)
            .iter()
            .any(|v| matches!(v, Violation::DroneIndexOutOfRange { .. })));
    }

    /// Independent naive re-summation used as the evaluation oracle.
    fn naive_alpha(inst: &Instance<f64>, sol: &Solution) -> f64 {
        let mut truck = 0.0;
        if !sol.truck_tour.is_empty() {
            let mut prev = 0;
            for &c in &sol.truck_tour {
                truck += inst.truck_time(prev, c);
                prev = c;
            }
            truck += inst.truck_time(prev, 0);
        }
        let mut loads = vec![0.0; inst.n_drones()];
        for (&c, &k) in &sol.drone_assign {
            loads[k] += inst.drone_time(c).unwrap();
        }
        loads.iter().fold(truck.max(0.0), |a, &l| a.max(l))
    }

    #[test]
    fn random_partition_matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let n = 8;
            let rows: Vec<Vec<f64>> = (0..=n)
                .map(|i| {
                    (0..=n)
                        .map(|j| if i == j { 0.0 } else { rng.random_range(1..100) as f64 })
                        .collect()
                })
                .collect();
            let eligible: Vec<usize> = (1..=n).filter(|_| rng.random_bool(0.6)).collect();
            let drone: Vec<(usize, f64)> = eligible
                .iter()
                .map(|&c| (c, rng.random_range(1..60) as f64))
                .collect();
            let inst = line_instance(rows, &eligible, &drone, 3);

            let mut tour = Vec::new();
            let mut assign = BTreeMap::new();
            for c in 1..=n {
                if inst.is_eligible(c) && rng.random_bool(0.5) {
                    assign.insert(c, rng.random_range(0..3));
                } else {
                    tour.push(c);
                }
            }
            tour.shuffle(&mut rng);
            let sol = Solution {
                truck_tour: tour,
                drone_assign: assign,
            };
            assert!(validate(&inst, &sol).is_empty());
            let eval = evaluate(&inst, &sol).unwrap();
            assert_eq!(eval.alpha, naive_alpha(&inst, &sol));
        }
    }

    #[test]
    fn alpha_monotone_when_adding_drone_job() {
        let inst = line_instance(
            vec![
                vec![0.0, 3.0, 5.0],
                vec![3.0, 0.0, 2.0],
                vec![5.0, 2.0, 0.0],
            ],
            &[1, 2],
            &[(1, 4.0), (2, 7.0)],
            2,
        );
        let base = evaluate(
            &inst,
            &Solution {
                truck_tour: vec![2],
                drone_assign: [(1, 0)].into_iter().collect(),
            },
        )
        .unwrap();
        let more = evaluate(
            &inst,
            &Solution {
                truck_tour: vec![],
                drone_assign: [(1, 0), (2, 0)].into_iter().collect(),
            },
        )
        .unwrap();
        assert!(more.drone_loads[0] >= base.drone_loads[0]);
    }

    #[test]
    fn no_eligible_means_truck_only() {
        let inst = line_instance(
            vec![
                vec![0.0, 1.0, 4.0],
                vec![1.0, 0.0, 2.0],
                vec![4.0, 2.0, 0.0],
            ],
            &[],
            &[],
            2,
        );
        let sol = Solution::truck_only(vec![1, 2]);
        let eval = evaluate(&inst, &sol).unwrap();
        assert_eq!(eval.alpha, eval.truck_time_total);
        // Any drone assignment is infeasible.
        let bad = Solution {
            truck_tour: vec![2],
            drone_assign: [(1, 0)].into_iter().collect(),
        };
        assert!(!validate(&inst, &bad).is_empty());
    }

    #[test]
    fn drone_load_is_permutation_insensitive() {
        // Same jobs on one drone in either assignment-iteration order
        // produce the same load because loads sum in id order.
        let inst = line_instance(
            vec![
                vec![0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0],
            ],
            &[1, 2],
            &[(1, 0.3), (2, 0.7)],
            1,
        );
        let sol = Solution {
            truck_tour: vec![],
            drone_assign: [(1, 0), (2, 0)].into_iter().collect(),
        };
        let eval = evaluate(&inst, &sol).unwrap();
        assert_eq!(eval.drone_loads[0], 0.3 + 0.7);
    }
}
