//! Neutral MILP representation of the full problem, MPS export for
//! external solvers, the all-truck warm start, and separation of
//! violated connectivity cuts by max flow.
//!
//! No LP relaxation is solved here: the [`RelaxationOracle`] port
//! declares the hook a branch-and-cut driver would implement, while
//! separation and export are complete and testable against synthetic
//! fractional points.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::instance::{Instance, Solution};
use crate::tsp::{LocalSearchEngine, TourOptimizer};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Clone, Debug)]
pub struct Variable<T> {
    pub name: String,
    pub kind: VarKind,
    pub lower: T,
    /// `None` means unbounded above.
    pub upper: Option<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSense {
    Eq,
    Ge,
    Le,
}

#[derive(Clone, Debug)]
pub struct Row<T> {
    pub name: String,
    pub sense: RowSense,
    pub rhs: T,
    /// `(variable index, coefficient)` pairs in construction order.
    pub terms: Vec<(usize, T)>,
}

/// The model: minimize `alpha` subject to the truck-time row, one
/// drone-time row per drone, the assignment rows with their eligibility
/// guards, and flow conservation. Connectivity rows are an exponential
/// family and are never materialized; [`separate_connectivity`] emits
/// the violated ones for a given fractional point.
#[derive(Clone, Debug)]
pub struct ModelIr<T> {
    pub name: String,
    pub variables: Vec<Variable<T>>,
    pub rows: Vec<Row<T>>,
    /// Objective terms (always the single `alpha` entry).
    pub objective: Vec<(usize, T)>,
    n: usize,
    eligible: Vec<usize>,
    n_drones: usize,
}

impl<T: Scalar> ModelIr<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eligible(&self) -> &[usize] {
        &self.eligible
    }

    pub fn n_drones(&self) -> usize {
        self.n_drones
    }

    /// Index of `x[i][j]`; the diagonal variables exist but are fixed
    /// to zero through their bounds.
    pub fn x_index(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    /// Index of `y[c][k]` for eligible customer `c` and drone `k`.
    pub fn y_index(&self, c: usize, k: usize) -> usize {
        let rank = self
            .eligible
            .binary_search(&c)
            .expect("customer is eligible");
        (self.n + 1) * (self.n + 1) + rank * self.n_drones + k
    }

    pub fn alpha_index(&self) -> usize {
        self.variables.len() - 1
    }
}

/// Builds the model IR for an instance.
///
/// Variable count is `(n+1)^2 + |eligible| * n_drones + 1`. Assignment
/// and flow rows skip the diagonal `x[i][i]` terms (those variables are
/// fixed to zero); drone terms appear only on eligible customers.
pub fn build_model<T: Scalar>(instance: &Instance<T>) -> ModelIr<T> {
    let n = instance.n();
    let eligible: Vec<usize> = instance.eligible().iter().copied().collect();
    let n_drones = instance.n_drones();

    let mut variables = Vec::with_capacity((n + 1) * (n + 1) + eligible.len() * n_drones + 1);
    for i in 0..=n {
        for j in 0..=n {
            variables.push(Variable {
                name: format!("X_{i}_{j}"),
                kind: VarKind::Binary,
                lower: T::zero(),
                upper: Some(if i == j { T::zero() } else { T::one() }),
            });
        }
    }
    for &c in &eligible {
        for k in 0..n_drones {
            variables.push(Variable {
                name: format!("Y_{c}_{k}"),
                kind: VarKind::Binary,
                lower: T::zero(),
                upper: Some(T::one()),
            });
        }
    }
    variables.push(Variable {
        name: "ALPHA".to_string(),
        kind: VarKind::Continuous,
        lower: T::zero(),
        upper: None,
    });

    let mut model = ModelIr {
        name: format!("PDS_{}", instance.name()),
        variables,
        rows: Vec::new(),
        objective: Vec::new(),
        n,
        eligible,
        n_drones,
    };
    let alpha = model.alpha_index();
    model.objective.push((alpha, T::one()));

    // Truck working time: alpha - sum t_ij x_ij >= 0.
    let mut terms = vec![(alpha, T::one())];
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                terms.push((model.x_index(i, j), -instance.truck_time(i, j)));
            }
        }
    }
    model.rows.push(Row {
        name: "TRUCK".into(),
        sense: RowSense::Ge,
        rhs: T::zero(),
        terms,
    });

    // Per-drone working time: alpha - sum t_c y_c_k >= 0.
    for k in 0..n_drones {
        let mut terms = vec![(alpha, T::one())];
        for &c in &model.eligible.clone() {
            let t = instance.drone_time(c).expect("eligible has drone time");
            terms.push((model.y_index(c, k), -t));
        }
        model.rows.push(Row {
            name: format!("DRONE_{k}"),
            sense: RowSense::Ge,
            rhs: T::zero(),
            terms,
        });
    }

    // Each customer entered exactly once (drone terms when eligible).
    for j in 1..=n {
        let mut terms = Vec::new();
        for i in 0..=n {
            if i != j {
                terms.push((model.x_index(i, j), T::one()));
            }
        }
        if instance.is_eligible(j) {
            for k in 0..n_drones {
                terms.push((model.y_index(j, k), T::one()));
            }
        }
        model.rows.push(Row {
            name: format!("IN_{j}"),
            sense: RowSense::Eq,
            rhs: T::one(),
            terms,
        });
    }

    // Each customer left exactly once.
    for i in 1..=n {
        let mut terms = Vec::new();
        for j in 0..=n {
            if j != i {
                terms.push((model.x_index(i, j), T::one()));
            }
        }
        if instance.is_eligible(i) {
            for k in 0..n_drones {
                terms.push((model.y_index(i, k), T::one()));
            }
        }
        model.rows.push(Row {
            name: format!("OUT_{i}"),
            sense: RowSense::Eq,
            rhs: T::one(),
            terms,
        });
    }

    // Flow conservation at every node.
    for i in 0..=n {
        let mut terms = Vec::new();
        for j in 0..=n {
            if j != i {
                terms.push((model.x_index(j, i), T::one()));
            }
        }
        for h in 0..=n {
            if h != i {
                terms.push((model.x_index(i, h), -T::one()));
            }
        }
        model.rows.push(Row {
            name: format!("FLOW_{i}"),
            sense: RowSense::Eq,
            rhs: T::zero(),
            terms,
        });
    }

    model
}

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("cannot derive MPS names of at most 8 characters for {count} columns")]
    NameOverflow { count: usize },
}

const MPS_NAME_MAX: usize = 8;

fn mps_value<T: Scalar>(v: T) -> String {
    let s = format!("{v}");
    if s.len() <= 12 {
        s
    } else {
        format!("{v:.6e}")
    }
}

/// Writes the model in fixed MPS format (NAME, ROWS, COLUMNS with
/// integer markers, RHS, BOUNDS, ENDATA), one coefficient per line.
///
/// Names are the model's `X_i_j` / `Y_c_k` / `ALPHA` scheme when every
/// name fits in 8 characters; otherwise a compact numbering `X0000001`,
/// `R0000001` is substituted so fixed-format width is never exceeded.
/// Output is byte-stable across runs.
pub fn export_mps<T: Scalar>(model: &ModelIr<T>) -> Result<String, MpsError> {
    let compact = model
        .variables
        .iter()
        .any(|v| v.name.len() > MPS_NAME_MAX)
        || model.rows.iter().any(|r| r.name.len() > MPS_NAME_MAX);
    if compact && model.variables.len() > 9_999_999 {
        return Err(MpsError::NameOverflow {
            count: model.variables.len(),
        });
    }

    let col_name = |idx: usize| -> String {
        if compact {
            let v = &model.variables[idx];
            if v.name == "ALPHA" {
                "ALPHA".to_string()
            } else {
                format!("{}{idx:07}", &v.name[..1])
            }
        } else {
            model.variables[idx].name.clone()
        }
    };
    let row_name = |idx: usize| -> String {
        if compact {
            format!("R{idx:07}")
        } else {
            model.rows[idx].name.clone()
        }
    };

    let mut out = String::new();
    let name = if model.name.len() > 60 {
        &model.name[..60]
    } else {
        &model.name
    };
    out.push_str(&format!("NAME          {name}\n"));
    out.push_str("ROWS\n N  OBJ\n");
    for (idx, row) in model.rows.iter().enumerate() {
        let s = match row.sense {
            RowSense::Eq => 'E',
            RowSense::Ge => 'G',
            RowSense::Le => 'L',
        };
        out.push_str(&format!(" {s}  {}\n", row_name(idx)));
    }

    // Column-major coefficient lists, variables in declaration order.
    let mut by_col: Vec<Vec<(usize, T)>> = vec![Vec::new(); model.variables.len()];
    for (ridx, row) in model.rows.iter().enumerate() {
        for &(col, coeff) in &row.terms {
            by_col[col].push((ridx, coeff));
        }
    }

    out.push_str("COLUMNS\n");
    let mut integer_open = false;
    for (idx, var) in model.variables.iter().enumerate() {
        if var.kind == VarKind::Binary && !integer_open {
            out.push_str("    MARKER                 'MARKER'                 'INTORG'\n");
            integer_open = true;
        }
        if var.kind == VarKind::Continuous && integer_open {
            out.push_str("    MARKER                 'MARKER'                 'INTEND'\n");
            integer_open = false;
        }
        let cname = col_name(idx);
        let mut wrote = false;
        if let Some(&(_, coeff)) = model.objective.iter().find(|&&(c, _)| c == idx) {
            out.push_str(&format!("    {cname:<10}OBJ       {}\n", mps_value(coeff)));
            wrote = true;
        }
        for &(ridx, coeff) in &by_col[idx] {
            out.push_str(&format!(
                "    {cname:<10}{:<10}{}\n",
                row_name(ridx),
                mps_value(coeff)
            ));
            wrote = true;
        }
        if !wrote {
            // Columns must appear at least once.
            out.push_str(&format!("    {cname:<10}OBJ       0\n"));
        }
    }
    if integer_open {
        out.push_str("    MARKER                 'MARKER'                 'INTEND'\n");
    }

    out.push_str("RHS\n");
    for (idx, row) in model.rows.iter().enumerate() {
        if row.rhs != T::zero() {
            out.push_str(&format!(
                "    RHS       {:<10}{}\n",
                row_name(idx),
                mps_value(row.rhs)
            ));
        }
    }

    out.push_str("BOUNDS\n");
    for (idx, var) in model.variables.iter().enumerate() {
        match (var.kind, var.upper) {
            (VarKind::Binary, Some(u)) if u == T::zero() => {
                out.push_str(&format!(" FX BND       {:<10}0\n", col_name(idx)));
            }
            (VarKind::Binary, Some(u)) => {
                out.push_str(&format!(
                    " UP BND       {:<10}{}\n",
                    col_name(idx),
                    mps_value(u)
                ));
            }
            _ => {}
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

/// Fractional `(x, y)` point, e.g. an LP relaxation solution, used for
/// cut separation.
#[derive(Clone, Debug)]
pub struct FractionalSolution<T> {
    n: usize,
    eligible: Vec<usize>,
    n_drones: usize,
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> FractionalSolution<T> {
    pub fn zeros(instance: &Instance<T>) -> Self {
        let n = instance.n();
        let eligible: Vec<usize> = instance.eligible().iter().copied().collect();
        let n_drones = instance.n_drones();
        Self {
            n,
            x: vec![T::zero(); (n + 1) * (n + 1)],
            y: vec![T::zero(); eligible.len() * n_drones],
            eligible,
            n_drones,
        }
    }

    /// Embeds an integral solution (tour arcs and drone assignments).
    pub fn from_solution(instance: &Instance<T>, solution: &Solution) -> Self {
        let mut f = Self::zeros(instance);
        let tour = &solution.truck_tour;
        if !tour.is_empty() {
            let mut prev = 0;
            for &c in tour {
                f.set_x(prev, c, T::one());
                prev = c;
            }
            f.set_x(prev, 0, T::one());
        }
        for (&c, &k) in &solution.drone_assign {
            f.set_y(c, k, T::one());
        }
        f
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x(&self, i: usize, j: usize) -> T {
        self.x[i * (self.n + 1) + j]
    }

    pub fn set_x(&mut self, i: usize, j: usize, v: T) {
        self.x[i * (self.n + 1) + j] = v;
    }

    fn y_rank(&self, c: usize) -> Option<usize> {
        self.eligible.binary_search(&c).ok()
    }

    pub fn y(&self, c: usize, k: usize) -> T {
        match self.y_rank(c) {
            Some(r) => self.y[r * self.n_drones + k],
            None => T::zero(),
        }
    }

    pub fn set_y(&mut self, c: usize, k: usize, v: T) {
        let r = self.y_rank(c).expect("customer is eligible");
        self.y[r * self.n_drones + k] = v;
    }

    /// Total drone service mass on a customer.
    pub fn y_total(&self, c: usize) -> T {
        (0..self.n_drones).map(|k| self.y(c, k)).sum()
    }

    /// All values within `[-eps, 1 + eps]`.
    pub fn bounds_ok(&self, eps: T) -> bool {
        self.x
            .iter()
            .chain(self.y.iter())
            .all(|&v| v >= -eps && v <= T::one() + eps)
    }
}

/// A depot-side node set whose crossing mass is below one; adding the
/// corresponding inequality cuts the fractional point off.
#[derive(Clone, Debug, PartialEq)]
pub struct CutSet<T> {
    /// Source side of the cut; always contains the depot, never all of
    /// the nodes.
    pub s_side: BTreeSet<usize>,
    pub capacity: T,
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("source and sink must differ")]
    SourceIsSink,
    #[error("node id {id} out of range for {nodes} nodes")]
    NodeOutOfRange { id: usize, nodes: usize },
}

#[derive(Clone, Debug)]
pub struct MaxFlowResult<T> {
    pub value: T,
    /// Source side of a minimum cut.
    pub min_cut: BTreeSet<usize>,
}

/// Edmonds–Karp max flow on a dense capacity matrix built from `arcs`
/// (parallel arcs accumulate). Deterministic: breadth-first search
/// scans nodes in ascending order. Returns the flow value and the
/// source side of a minimum cut; in debug builds strong duality is
/// asserted on every call.
pub fn max_flow<T: Scalar>(
    n_nodes: usize,
    arcs: &[(usize, usize, T)],
    source: usize,
    sink: usize,
) -> Result<MaxFlowResult<T>, FlowError> {
    if source == sink {
        return Err(FlowError::SourceIsSink);
    }
    for &(u, v, _) in arcs {
        if u >= n_nodes || v >= n_nodes {
            return Err(FlowError::NodeOutOfRange {
                id: u.max(v),
                nodes: n_nodes,
            });
        }
    }
    let mut cap = vec![T::zero(); n_nodes * n_nodes];
    for &(u, v, c) in arcs {
        cap[u * n_nodes + v] = cap[u * n_nodes + v] + c;
    }
    let orig = cap.clone();

    let mut value = T::zero();
    let mut parent = vec![usize::MAX; n_nodes];
    loop {
        parent.fill(usize::MAX);
        parent[source] = source;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for v in 0..n_nodes {
                if parent[v] == usize::MAX && cap[u * n_nodes + v] > T::zero() {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            break;
        }
        let mut bottleneck = T::infinity();
        let mut v = sink;
        while v != source {
            let u = parent[v];
            bottleneck = bottleneck.min(cap[u * n_nodes + v]);
            v = u;
        }
        let mut v = sink;
        while v != source {
            let u = parent[v];
            cap[u * n_nodes + v] = cap[u * n_nodes + v] - bottleneck;
            cap[v * n_nodes + u] = cap[v * n_nodes + u] + bottleneck;
            v = u;
        }
        value = value + bottleneck;
    }

    let min_cut: BTreeSet<usize> = (0..n_nodes).filter(|&v| parent[v] != usize::MAX).collect();

    #[cfg(debug_assertions)]
    {
        let mut crossing = T::zero();
        for &u in &min_cut {
            for v in 0..n_nodes {
                if !min_cut.contains(&v) {
                    crossing = crossing + orig[u * n_nodes + v];
                }
            }
        }
        let scale = T::one().max(value.abs());
        debug_assert!(
            (crossing - value).abs() <= T::from_f64_lossy(1e-7) * scale,
            "max-flow value must equal the min-cut capacity"
        );
    }
    #[cfg(not(debug_assertions))]
    let _ = orig;

    Ok(MaxFlowResult { value, min_cut })
}

/// Separates violated connectivity cuts at a fractional point.
///
/// The support graph carries the `x` values as arc capacities, with the
/// drone mass `sum_k y[i][k]` added to the depot arc `(0, i)`. One max
/// flow is solved from the depot to each customer; whenever the minimum
/// cut has capacity below `1 - eps` the depot-side set is emitted. A
/// customer already on the sink side of an emitted cut is skipped, and
/// every emitted violation is re-verified by direct summation over the
/// fractional point.
pub fn separate_connectivity<T: Scalar>(
    instance: &Instance<T>,
    frac: &FractionalSolution<T>,
    eps: T,
) -> Vec<CutSet<T>> {
    debug_assert!(frac.bounds_ok(T::tol()));
    let n = instance.n();
    let nodes = n + 1;
    let mut arcs = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            if i == j {
                continue;
            }
            let mut c = frac.x(i, j);
            if i == 0 && instance.is_eligible(j) {
                c = c + frac.y_total(j);
            }
            if c > T::zero() {
                arcs.push((i, j, c));
            }
        }
    }

    let mut cuts: Vec<CutSet<T>> = Vec::new();
    for sink in 1..=n {
        if cuts.iter().any(|c| !c.s_side.contains(&sink)) {
            // Already separated from the depot by an emitted cut.
            continue;
        }
        let flow = max_flow(nodes, &arcs, 0, sink).expect("distinct source and sink");
        if flow.value < T::one() - eps {
            let s_side = flow.min_cut;
            // Direct re-summation of the violated inequality.
            let mut capacity = T::zero();
            for &u in &s_side {
                for v in 0..=n {
                    if !s_side.contains(&v) {
                        capacity = capacity + frac.x(u, v);
                    }
                }
            }
            for v in 1..=n {
                if !s_side.contains(&v) && instance.is_eligible(v) {
                    capacity = capacity + frac.y_total(v);
                }
            }
            if capacity < T::one() - eps && !cuts.iter().any(|c| c.s_side == s_side) {
                cuts.push(CutSet { s_side, capacity });
            }
        }
    }
    cuts
}

/// Initial all-truck solution: a giant tour over every customer from
/// the tour engine, no drone used.
pub fn warm_start<T: Scalar>(instance: &Instance<T>) -> Solution {
    let engine = LocalSearchEngine::default();
    let subset: BTreeSet<usize> = instance.customers().collect();
    let tour = engine.construct(instance.truck_matrix(), &subset);
    Solution::truck_only(tour.into_vec())
}

/// Port for an LP relaxation engine driving branch and cut: given the
/// model and the current cut pool, produce a fractional point (or
/// `None` when infeasible). No implementation ships with this crate;
/// desk-scale certification goes through the enumeration oracle
/// instead, and the exported MPS serves external solvers.
pub trait RelaxationOracle<T: Scalar> {
    fn solve_relaxation(
        &mut self,
        model: &ModelIr<T>,
        cuts: &[CutSet<T>],
    ) -> Option<FractionalSolution<T>>;
}

#[allow(unused)]
fn _relaxation_oracle_is_object_safe(_: &dyn RelaxationOracle<f64>) {}
