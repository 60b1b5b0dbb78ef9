//! Solvers and benchmark tooling for the parallel drone scheduling
//! traveling salesman problem (PDSTSP).
//!
//! One truck leaves the depot, serves a subset of the customers and
//! returns, while a fleet of drones flies back-and-forth sorties from
//! the depot to single customers. Every customer must be served, drones
//! may only serve drone-eligible customers, and the objective is to
//! minimize the completion time of the last vehicle returning to the
//! depot (the makespan `alpha`).
//!
//! The crate is organized around that problem:
//!
//! * [`instance`] — domain types ([`instance::Instance`],
//!   [`instance::Solution`]), solution evaluation and validation.
//! * [`instances`] — JSON instance/solution formats, a TSPLIB reader and
//!   the two seeded benchmark-family generators.
//! * [`tsp`] — truck-tour engine (nearest neighbor construction,
//!   2-opt/3-opt/Or-opt local search) and an exact Held–Karp solver for
//!   desk-scale verification.
//! * [`sched`] — identical parallel machine scheduling (`P||Cmax`) for
//!   the drone workloads: LPT and an exact branch-and-bound.
//! * [`split`] — exact solver for the order-constrained offload
//!   restriction: given a reference customer sequence, decide which
//!   customers the truck keeps (in sequence order) and which move to
//!   the drones.
//! * [`milp`] — neutral MILP representation of the full model, MPS
//!   export, warm start and connectivity-cut separation by max flow.
//! * [`heuristics`] — the Fast, Fast-2, Fast-3 and RRLS matheuristics.
//! * [`oracle`] — exact PDSTSP optimum at desk scale by subset
//!   enumeration; the ground truth for the test suite.
//! * [`report`] — run reports and their JSON-lines serialization.
//!
//! All numeric code is generic over the scalar type through [`Scalar`];
//! the crate root exposes `f64` aliases for the common case.

use std::fmt;
use std::iter::Sum;
use std::time::{Duration, Instant};

use num_traits::{Float, FromPrimitive};
use serde::{de::DeserializeOwned, Serialize};

pub mod heuristics;
pub mod instance;
pub mod instances;
pub mod milp;
pub mod oracle;
pub mod report;
pub mod sched;
pub mod split;
pub mod tsp;

/// Scalar type for time and distance values: `f32` or `f64`.
///
/// Times are non-negative finite values; solvers compare them with the
/// absolute tolerance [`Scalar::tol`]. The benchmark formats and the
/// acceptance contracts assume at least 64-bit precision, so `f64` is
/// the default throughout; `f32` is supported for size-constrained
/// embedding.
pub trait Scalar:
    Float
    + FromPrimitive
    + Sum
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance used for every solver comparison.
    fn tol() -> Self {
        Self::from_f64(1e-9).expect("tolerance must be representable")
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 must be representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Termination cap for branch-and-bound solvers.
///
/// `Wall` mirrors the time-boxed solves of the reference method;
/// `Nodes` gives a machine-independent budget so runs replay exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveCap {
    Unlimited,
    /// Stop after this many search nodes.
    Nodes(u64),
    /// Stop after this wall-clock duration.
    Wall(Duration),
}

impl SolveCap {
    pub fn start(self) -> CapState {
        CapState {
            cap: self,
            nodes: 0,
            deadline: match self {
                SolveCap::Wall(d) => Some(Instant::now() + d),
                _ => None,
            },
        }
    }
}

/// Running state of a [`SolveCap`]; call [`CapState::tick`] once per
/// search node.
#[derive(Clone, Debug)]
pub struct CapState {
    cap: SolveCap,
    nodes: u64,
    deadline: Option<Instant>,
}

impl CapState {
    /// Counts one node; returns `true` while the search may continue.
    pub fn tick(&mut self) -> bool {
        self.nodes += 1;
        match self.cap {
            SolveCap::Unlimited => true,
            SolveCap::Nodes(max) => self.nodes <= max,
            SolveCap::Wall(_) => {
                // The clock is only consulted every 4096 nodes.
                if self.nodes & 0xfff != 0 {
                    true
                } else {
                    Instant::now() < self.deadline.expect("wall cap has deadline")
                }
            }
        }
    }

    pub fn nodes(&self) -> u64 {
        self.nodes
    }
}

pub use instance::{evaluate, validate, Violation};

/// `f64` aliases for the generic domain types.
pub type Instance = instance::Instance<f64>;
pub type Evaluation = instance::Evaluation<f64>;
pub type JobSet = sched::JobSet<f64>;
pub type ModelIr = milp::ModelIr<f64>;
pub type FractionalSolution = milp::FractionalSolution<f64>;
pub type CutSet = milp::CutSet<f64>;
pub type RunReport = report::RunReport<f64>;

pub use instance::Solution;
pub use tsp::Sequence;
