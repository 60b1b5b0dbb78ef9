//! Exact solver for the order-constrained offload restriction.
//!
//! Given a reference sequence `s`, the truck must visit the customers
//! it keeps in the order of `s`; the remaining customers move to the
//! drones, whose side is costed by exact `P||Cmax`. In
//! [`OffloadMode::OrderPlusInsertion`] the customers absent from `s`
//! may additionally be inserted between consecutive kept positions
//! without inverting the order of `s`. The restriction is solved by
//! branch and bound rather than by an external MILP solver; given time,
//! the result is the exact optimum of the restriction.

use std::collections::HashMap;
use std::time::Duration;

use thiserror::Error;

use crate::instance::{Instance, Solution, TimeMatrix};
use crate::sched::{exact_pcmax, JobSet};
use crate::tsp::Sequence;
use crate::{CapState, Scalar, SolveCap};

/// Node budget for each inner `P||Cmax` solve; generous for desk-scale
/// job sets, finite so capped outer solves stay capped.
const PCMAX_NODE_CAP: u64 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OffloadMode {
    /// `s` covers every customer; decisions are keep-vs-offload only.
    OrderOnly,
    /// Customers outside `s` are inserted into slots of `s` or droned.
    OrderPlusInsertion,
}

/// One order-constrained restriction to solve.
#[derive(Clone, Debug)]
pub struct OrderConstrainedProblem<'a, T: Scalar> {
    pub instance: &'a Instance<T>,
    pub s: Sequence,
    pub mode: OffloadMode,
    /// Window width for the skip rules of [`window_dominance_filter`].
    pub delta: usize,
    pub cap: SolveCap,
    /// Optional known solution; used as the starting incumbent when it
    /// is feasible for this restriction, ignored otherwise.
    pub incumbent: Option<Solution>,
    pub use_window_rules: bool,
    /// Largest slot ordered exactly; bigger slots fall back to the
    /// cheapest-insertion order and clear the proven flag.
    pub max_exact_slot: usize,
}

impl<'a, T: Scalar> OrderConstrainedProblem<'a, T> {
    pub fn new(instance: &'a Instance<T>, s: Sequence, mode: OffloadMode) -> Self {
        Self {
            instance,
            s,
            mode,
            delta: 20,
            cap: SolveCap::Wall(Duration::from_secs(10)),
            incumbent: None,
            use_window_rules: false,
            max_exact_slot: 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("sequence id {id} is not a customer of the instance")]
    UnknownSequenceId { id: usize },
    #[error("order-only mode requires the sequence to cover customer {id}")]
    MissingCustomer { id: usize },
    #[error("customer {id} outside the sequence is not drone-eligible")]
    IneligibleOutside { id: usize },
}

/// Truck arc skipping from sequence position `from_pos` to `to_pos`;
/// admissible only when all intermediate positions are drone-assigned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SkipRule {
    pub from_pos: usize,
    pub to_pos: usize,
}

/// Consistency rules generated from the windowed order constraints.
#[derive(Clone, Debug)]
pub struct WindowRules {
    pub delta: usize,
    pub rules: Vec<SkipRule>,
}

impl WindowRules {
    /// True when a kept-to-kept transition `from_pos -> to_pos` with the
    /// given per-position offload flags satisfies every covering rule.
    pub fn admits(&self, from_pos: usize, to_pos: usize, offloaded: &[bool]) -> bool {
        if to_pos <= from_pos + 1 || to_pos - from_pos >= self.delta {
            return true;
        }
        offloaded[from_pos + 1..to_pos].iter().all(|&o| o)
    }
}

/// Emits the skip rules for every in-window pair of sequence positions.
/// A width of `delta <= 2` emits nothing (no pair has an intermediate
/// position inside the window).
pub fn window_dominance_filter<T: Scalar>(problem: &OrderConstrainedProblem<T>) -> WindowRules {
    let m = problem.s.len();
    let mut rules = Vec::new();
    for i in 0..m {
        let mut j = i + 2;
        while j < m && j - i < problem.delta {
            rules.push(SkipRule {
                from_pos: i,
                to_pos: j,
            });
            j += 1;
        }
    }
    WindowRules {
        delta: problem.delta,
        rules,
    }
}

/// Result of one offload solve.
#[derive(Clone, Debug)]
pub struct OffloadOutcome<T> {
    pub solution: Solution,
    pub cost: T,
    /// True iff the search completed with exact slot orderings and
    /// proven drone schedules throughout.
    pub proven: bool,
    pub nodes: u64,
}

/// Reusable solver bound to one instance; caches drone-side `P||Cmax`
/// optima across calls plus the shortest-path closure and insertion
/// bounds derived from the truck matrix.
pub struct OffloadSolver<'a, T: Scalar> {
    instance: &'a Instance<T>,
    pcmax_cache: HashMap<Vec<usize>, (T, bool)>,
    shortest: Option<TimeMatrix<T>>,
    jmin: Option<Vec<T>>,
}

impl<'a, T: Scalar> OffloadSolver<'a, T> {
    pub fn new(instance: &'a Instance<T>) -> Self {
        Self {
            instance,
            pcmax_cache: HashMap::new(),
            shortest: None,
            jmin: None,
        }
    }

    /// Floyd–Warshall closure of the truck matrix. Matrices need not be
    /// metric, so completion bounds go through shortest paths.
    fn shortest(&mut self) -> &TimeMatrix<T> {
        if self.shortest.is_none() {
            let m = self.instance.truck_matrix();
            let dim = m.dim();
            let mut d = m.clone();
            for k in 0..dim {
                for i in 0..dim {
                    let dik = d.get(i, k);
                    for j in 0..dim {
                        let via = dik + d.get(k, j);
                        if via < d.get(i, j) {
                            d.set(i, j, via);
                        }
                    }
                }
            }
            self.shortest = Some(d);
        }
        self.shortest.as_ref().unwrap()
    }

    /// Per-customer lower bound on the truck-time contribution of an
    /// insertion: `min over u, v of t(u,j) + t(j,v) - t(u,v)`. Negative
    /// values are possible because the triangle inequality is not
    /// assumed.
    fn jmin(&mut self) -> &[T] {
        if self.jmin.is_none() {
            let t = self.instance.truck_matrix();
            let dim = t.dim();
            let mut out = vec![T::zero(); dim];
            for j in 1..dim {
                let mut best = T::infinity();
                for u in 0..dim {
                    if u == j {
                        continue;
                    }
                    for v in 0..dim {
                        if v == j {
                            continue;
                        }
                        let d = t.get(u, j) + t.get(j, v) - t.get(u, v);
                        if d < best {
                            best = d;
                        }
                    }
                }
                out[j] = best;
            }
            self.jmin = Some(out);
        }
        self.jmin.as_deref().unwrap()
    }

    pub fn solve(
        &mut self,
        problem: &OrderConstrainedProblem<'a, T>,
    ) -> Result<OffloadOutcome<T>, SplitError> {
        debug_assert!(std::ptr::eq(self.instance, problem.instance));
        let inst = self.instance;
        let n = inst.n();
        let s: Vec<usize> = problem.s.order().to_vec();
        let m = s.len();

        let mut in_s = vec![false; n + 1];
        for &id in &s {
            if !inst.is_customer(id) {
                return Err(SplitError::UnknownSequenceId { id });
            }
            in_s[id] = true;
        }
        let outside: Vec<usize> = inst.customers().filter(|&c| !in_s[c]).collect();
        match problem.mode {
            OffloadMode::OrderOnly => {
                if let Some(&id) = outside.first() {
                    return Err(SplitError::MissingCustomer { id });
                }
            }
            OffloadMode::OrderPlusInsertion => {
                if let Some(&id) = outside.iter().find(|&&c| !inst.is_eligible(c)) {
                    return Err(SplitError::IneligibleOutside { id });
                }
            }
        }

        // Completion bounds through the forced (ineligible) customers.
        let sp = self.shortest().clone();
        let forced: Vec<bool> = s.iter().map(|&c| !inst.is_eligible(c)).collect();
        let mut next_forced = vec![None; m + 1];
        for p in (0..m).rev() {
            next_forced[p] = if forced[p] {
                Some(p)
            } else {
                next_forced[p + 1]
            };
        }
        let mut forced_tail = vec![T::zero(); m];
        for p in (0..m).rev() {
            if forced[p] {
                forced_tail[p] = match next_forced[p + 1] {
                    Some(f) => sp.get(s[p], s[f]) + forced_tail[f],
                    None => sp.get(s[p], 0),
                };
            }
        }

        let jmin: Vec<T> = if outside.is_empty() {
            Vec::new()
        } else {
            self.jmin().to_vec()
        };
        let outside_floor: T = outside
            .iter()
            .map(|&j| jmin[j].min(T::zero()))
            .fold(T::zero(), |a, b| a + b);

        let rules = if problem.use_window_rules {
            Some(window_dominance_filter(problem))
        } else {
            None
        };

        let mut cache = std::mem::take(&mut self.pcmax_cache);
        let mut dfs = Dfs {
            inst,
            sp: &sp,
            s: &s,
            forced: &forced,
            next_forced: &next_forced,
            forced_tail: &forced_tail,
            outside: &outside,
            jmin: &jmin,
            outside_floor,
            m_drones: inst.n_drones(),
            rules: rules.as_ref(),
            max_exact_slot: problem.max_exact_slot,
            cache: &mut cache,
            cap: problem.cap.start(),
            capped: false,
            heuristic_order: false,
            pcmax_unproven: false,
            best_cost: T::infinity(),
            best_tour: Vec::new(),
            best_drones: Vec::new(),

        };

        dfs.seed_trivial();
        if let Some(inc) = &problem.incumbent {
            dfs.try_seed_incumbent(inc, problem.mode);
        }

        let mut kept = Vec::with_capacity(m);
        let mut offloaded = Vec::new();
        let mut pos_offloaded = vec![false; m];
        dfs.phase1(
            0,
            0,
            None,
            T::zero(),
            &mut kept,
            &mut offloaded,
            &mut pos_offloaded,
            T::zero(),
            T::zero(),
        );

        let proven = !dfs.capped && !dfs.heuristic_order && !dfs.pcmax_unproven;
        let cost = dfs.best_cost;
        let nodes = dfs.cap.nodes();
        let tour = dfs.best_tour.clone();
        let drones = dfs.best_drones.clone();
        self.pcmax_cache = cache;

        let drone_assign = if drones.is_empty() {
            Default::default()
        } else {
            let jobs: Vec<(usize, T)> = drones
                .iter()
                .map(|&c| (c, inst.drone_time(c).expect("droned customer is eligible")))
                .collect();
            let jobset = JobSet::new(jobs, inst.n_drones()).expect("fleet is non-empty");
            exact_pcmax(&jobset, SolveCap::Nodes(PCMAX_NODE_CAP))
                .schedule
                .assignment
        };
        let solution = Solution {
            truck_tour: tour,
            drone_assign,
        };
        debug_assert!(crate::instance::validate(inst, &solution).is_empty());

        Ok(OffloadOutcome {
            solution,
            cost,
            proven,
            nodes,
        })
    }
}

/// One-shot solve with a fresh solver.
pub fn solve_offload<T: Scalar>(
    problem: &OrderConstrainedProblem<'_, T>,
) -> Result<OffloadOutcome<T>, SplitError> {
    OffloadSolver::new(problem.instance).solve(problem)
}

struct Dfs<'b, T: Scalar> {
    inst: &'b Instance<T>,
    sp: &'b TimeMatrix<T>,
    s: &'b [usize],
    forced: &'b [bool],
    next_forced: &'b [Option<usize>],
    forced_tail: &'b [T],
    outside: &'b [usize],
    jmin: &'b [T],
    outside_floor: T,
    m_drones: usize,
    rules: Option<&'b WindowRules>,
    max_exact_slot: usize,
    cache: &'b mut HashMap<Vec<usize>, (T, bool)>,
    cap: CapState,
    capped: bool,
    heuristic_order: bool,
    pcmax_unproven: bool,
    best_cost: T,
    best_tour: Vec<usize>,
    best_drones: Vec<usize>,
}

impl<T: Scalar> Dfs<'_, T> {
    fn drone_cost(&mut self, mut ids: Vec<usize>) -> T {
        if ids.is_empty() {
            return T::zero();
        }
        ids.sort_unstable();
        if let Some(&(c, proven)) = self.cache.get(&ids) {
            if !proven {
                self.pcmax_unproven = true;
            }
            return c;
        }
        let jobs: Vec<(usize, T)> = ids
            .iter()
            .map(|&c| (c, self.inst.drone_time(c).expect("droned customer eligible")))
            .collect();
        let jobset = JobSet::new(jobs, self.m_drones).expect("machines checked by caller");
        let r = exact_pcmax(&jobset, SolveCap::Nodes(PCMAX_NODE_CAP));
        if !r.proven {
            self.pcmax_unproven = true;
        }
        self.cache.insert(ids, (r.schedule.makespan, r.proven));
        r.schedule.makespan
    }

    fn drone_lb(&self, sum: T, max: T) -> T {
        if self.m_drones == 0 {
            return T::zero();
        }
        (sum / T::from_f64_lossy(self.m_drones as f64)).max(max)
    }

    fn offer(&mut self, cost: T, tour: Vec<usize>, drones: Vec<usize>) {
        if cost < self.best_cost {
            self.best_cost = cost;
            self.best_tour = tour;
            self.best_drones = drones;
        }
    }

    fn seed_trivial(&mut self) {
        let tour: Vec<usize> = self.s.to_vec();
        let truck = self.inst.tour_time(&tour);
        if self.outside.is_empty() {
            self.offer(truck.max(T::zero()), tour, Vec::new());
            return;
        }
        if self.m_drones >= 1 {
            let drones: Vec<usize> = self.outside.to_vec();
            let dc = self.drone_cost(drones.clone());
            self.offer(truck.max(dc), tour, drones);
        } else {
            // No drones: push every outside customer into the tour at
            // its cheapest position, ascending id.
            let mut full = tour;
            for &j in self.outside {
                let mut best_pos = 0;
                let mut best_delta = T::infinity();
                for pos in 0..=full.len() {
                    let u = if pos == 0 { 0 } else { full[pos - 1] };
                    let v = if pos == full.len() { 0 } else { full[pos] };
                    let d = self.inst.truck_time(u, j) + self.inst.truck_time(j, v)
                        - self.inst.truck_time(u, v);
                    if d < best_delta {
                        best_delta = d;
                        best_pos = pos;
                    }
                }
                full.insert(best_pos, j);
            }
            let cost = self.inst.tour_time(&full).max(T::zero());
            self.offer(cost, full, Vec::new());
        }
    }

    fn try_seed_incumbent(&mut self, inc: &Solution, mode: OffloadMode) {
        if !crate::instance::validate(self.inst, inc).is_empty() {
            return;
        }
        // The tour must be order-consistent with s: its s-members appear
        // in increasing s-position, and in order-only mode every member
        // is from s.
        let mut pos_of = vec![usize::MAX; self.inst.n() + 1];
        for (p, &c) in self.s.iter().enumerate() {
            pos_of[c] = p;
        }
        let mut last = None;
        for &c in &inc.truck_tour {
            let p = pos_of[c];
            if p == usize::MAX {
                if mode == OffloadMode::OrderOnly {
                    return;
                }
                continue;
            }
            if last.is_some_and(|l| p <= l) {
                return;
            }
            last = Some(p);
        }
        let eval = crate::instance::evaluate(self.inst, inc).expect("validated above");
        let drones: Vec<usize> = inc.drone_assign.keys().copied().collect();
        // Cost through the same canonical route as search leaves.
        let dc = self.drone_cost(drones.clone());
        let cost = eval.truck_time_total.max(dc).max(T::zero());
        self.offer(cost, inc.truck_tour.clone(), drones);
    }

    #[allow(clippy::too_many_arguments)]
    fn phase1(
        &mut self,
        p: usize,
        last: usize,
        last_kept_pos: Option<usize>,
        truck_t: T,
        kept: &mut Vec<usize>,
        offloaded: &mut Vec<usize>,
        pos_offloaded: &mut Vec<bool>,
        dsum: T,
        dmax: T,
    ) {
        if self.capped {
            return;
        }
        if !self.cap.tick() {
            self.capped = true;
            return;
        }

        // Shortest-completion truck bound plus the insertion floor.
        let truck_lb = match self.next_forced[p] {
            Some(f) => truck_t + self.sp.get(last, self.s[f]) + self.forced_tail[f],
            None => truck_t + self.sp.get(last, 0),
        } + self.outside_floor;
        if truck_lb.max(self.drone_lb(dsum, dmax)) >= self.best_cost {
            return;
        }

        if p == self.s.len() {
            let truck_total = truck_t + self.inst.truck_time(last, 0);
            let truck_total = if kept.is_empty() { T::zero() } else { truck_total };
            if self.outside.is_empty() {
                let dc = self.drone_cost(offloaded.clone());
                let cost = truck_total.max(dc).max(T::zero());
                self.offer(cost, kept.clone(), offloaded.clone());
            } else {
                let mut slots: Vec<Vec<usize>> = vec![Vec::new(); kept.len() + 1];
                let skeleton = kept.clone();
                let mut drone_adds = Vec::new();
                self.phase2(
                    0,
                    &skeleton,
                    truck_total,
                    &mut slots,
                    T::zero(),
                    self.outside_floor,
                    offloaded,
                    &mut drone_adds,
                    dsum,
                    dmax,
                );
            }
            return;
        }

        let c = self.s[p];
        let keep = |dfs: &mut Self,
                    kept: &mut Vec<usize>,
                    offloaded: &mut Vec<usize>,
                    pos_offloaded: &mut Vec<bool>| {
            if let (Some(rules), Some(from)) = (dfs.rules, last_kept_pos) {
                if !rules.admits(from, p, pos_offloaded) {
                    return;
                }
            }
            kept.push(c);
            dfs.phase1(
                p + 1,
                c,
                Some(p),
                truck_t + dfs.inst.truck_time(last, c),
                kept,
                offloaded,
                pos_offloaded,
                dsum,
                dmax,
            );
            kept.pop();
        };
        let offload = |dfs: &mut Self,
                       kept: &mut Vec<usize>,
                       offloaded: &mut Vec<usize>,
                       pos_offloaded: &mut Vec<bool>| {
            let t_u = dfs.inst.drone_time(c).expect("eligible customer");
            offloaded.push(c);
            pos_offloaded[p] = true;
            dfs.phase1(
                p + 1,
                last,
                last_kept_pos,
                truck_t,
                kept,
                offloaded,
                pos_offloaded,
                dsum + t_u,
                dmax.max(t_u),
            );
            pos_offloaded[p] = false;
            offloaded.pop();
        };

        if self.forced[p] || self.m_drones == 0 {
            keep(self, kept, offloaded, pos_offloaded);
            return;
        }
        // Branch ordering: keep first when the estimated detour saved by
        // offloading is smaller than the drone time, otherwise offload
        // first. Incumbent quality drives the pruning.
        let saving = self.inst.truck_time(last, c) + self.inst.truck_time(c, 0)
            - self.inst.truck_time(last, 0);
        let t_u = self.inst.drone_time(c).expect("eligible customer");
        if saving < t_u {
            keep(self, kept, offloaded, pos_offloaded);
            offload(self, kept, offloaded, pos_offloaded);
        } else {
            offload(self, kept, offloaded, pos_offloaded);
            keep(self, kept, offloaded, pos_offloaded);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn phase2(
        &mut self,
        q: usize,
        skeleton: &[usize],
        skel_cost: T,
        slots: &mut Vec<Vec<usize>>,
        committed_jmin: T,
        pending_floor: T,
        offloaded: &Vec<usize>,
        drone_adds: &mut Vec<usize>,
        dsum: T,
        dmax: T,
    ) {
        if self.capped {
            return;
        }
        if !self.cap.tick() {
            self.capped = true;
            return;
        }
        let truck_lb = skel_cost + committed_jmin + pending_floor;
        if truck_lb.max(self.drone_lb(dsum, dmax)) >= self.best_cost {
            return;
        }

        if q == self.outside.len() {
            self.phase2_leaf(skeleton, slots, offloaded, drone_adds, dsum, dmax);
            return;
        }

        let j = self.outside[q];
        let floor_j = self.jmin[j].min(T::zero());
        let pending_rest = pending_floor - floor_j;
        let t_u = self.inst.drone_time(j).expect("outside customers are eligible");

        let drone_branch = |dfs: &mut Self, slots: &mut Vec<Vec<usize>>, adds: &mut Vec<usize>| {
            if dfs.m_drones == 0 {
                return;
            }
            adds.push(j);
            dfs.phase2(
                q + 1,
                skeleton,
                skel_cost,
                slots,
                committed_jmin,
                pending_rest,
                offloaded,
                adds,
                dsum + t_u,
                dmax.max(t_u),
            );
            adds.pop();
        };
        let insert_branch = |dfs: &mut Self, slots: &mut Vec<Vec<usize>>, adds: &mut Vec<usize>| {
            for g in 0..slots.len() {
                // Within the slot, place j at its cheapest position.
                let a = if g == 0 { 0 } else { skeleton[g - 1] };
                let b = if g == skeleton.len() { 0 } else { skeleton[g] };
                let pos = cheapest_slot_position(dfs.inst, a, b, &slots[g], j);
                slots[g].insert(pos, j);
                dfs.phase2(
                    q + 1,
                    skeleton,
                    skel_cost,
                    slots,
                    committed_jmin + dfs.jmin[j],
                    pending_rest,
                    offloaded,
                    adds,
                    dsum,
                    dmax,
                );
                slots[g].remove(pos);
            }
        };

        if t_u <= self.jmin[j] {
            drone_branch(self, slots, drone_adds);
            insert_branch(self, slots, drone_adds);
        } else {
            insert_branch(self, slots, drone_adds);
            drone_branch(self, slots, drone_adds);
        }
    }

    fn phase2_leaf(
        &mut self,
        skeleton: &[usize],
        slots: &[Vec<usize>],
        offloaded: &[usize],
        drone_adds: &[usize],
        _dsum: T,
        _dmax: T,
    ) {
        let mut tour = Vec::with_capacity(skeleton.len() + self.outside.len());
        for g in 0..slots.len() {
            let a = if g == 0 { 0 } else { skeleton[g - 1] };
            let b = if g == skeleton.len() { 0 } else { skeleton[g] };
            if slots[g].len() > 1 {
                if slots[g].len() <= self.max_exact_slot {
                    tour.extend(best_slot_order(self.inst, a, b, &slots[g]));
                } else {
                    self.heuristic_order = true;
                    tour.extend_from_slice(&slots[g]);
                }
            } else {
                tour.extend_from_slice(&slots[g]);
            }
            if g < skeleton.len() {
                tour.push(skeleton[g]);
            }
        }
        let truck = self.inst.tour_time(&tour).max(T::zero());
        let mut drones: Vec<usize> = offloaded.to_vec();
        drones.extend_from_slice(drone_adds);
        let dc = self.drone_cost(drones.clone());
        self.offer(truck.max(dc), tour, drones);
    }
}

/// Position within `contents` minimizing the immediate insertion delta
/// for `j` on the anchored path `a -> contents -> b`; ties take the
/// earliest position.
fn cheapest_slot_position<T: Scalar>(
    inst: &Instance<T>,
    a: usize,
    b: usize,
    contents: &[usize],
    j: usize,
) -> usize {
    let mut best_pos = 0;
    let mut best = T::infinity();
    for pos in 0..=contents.len() {
        let u = if pos == 0 { a } else { contents[pos - 1] };
        let v = if pos == contents.len() { b } else { contents[pos] };
        let d = inst.truck_time(u, j) + inst.truck_time(j, v) - inst.truck_time(u, v);
        if d < best {
            best = d;
            best_pos = pos;
        }
    }
    best_pos
}

/// Exact minimum-cost order of a small slot: permutations enumerated in
/// lexicographic order of the ascending-id content list, first minimum
/// kept.
fn best_slot_order<T: Scalar>(inst: &Instance<T>, a: usize, b: usize, contents: &[usize]) -> Vec<usize> {
    let mut ids: Vec<usize> = contents.to_vec();
    ids.sort_unstable();
    let mut best: Option<(T, Vec<usize>)> = None;
    permute(&mut ids, 0, &mut |perm| {
        let mut cost = T::zero();
        let mut prev = a;
        for &c in perm.iter() {
            cost = cost + inst.truck_time(prev, c);
            prev = c;
        }
        cost = cost + inst.truck_time(prev, b);
        if best.as_ref().is_none_or(|(bc, _)| cost < *bc) {
            best = Some((cost, perm.to_vec()));
        }
    });
    best.expect("slot is non-empty").1
}

fn permute<F: FnMut(&[usize])>(ids: &mut Vec<usize>, k: usize, f: &mut F) {
    if k == ids.len() {
        f(ids);
        return;
    }
    // Heap-style recursion kept in lexicographic order by rotating.
    for i in k..ids.len() {
        ids[k..=i].rotate_right(1);
        permute(ids, k + 1, f);
        ids[k..=i].rotate_left(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::TimeMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn instance(
        rows: Vec<Vec<f64>>,
        eligible: &[usize],
        drone: &[(usize, f64)],
        drones: usize,
    ) -> Instance<f64> {
        Instance::new(
            "t",
            None,
            eligible.iter().copied().collect(),
            TimeMatrix::from_rows(rows).unwrap(),
            drone.iter().copied().collect(),
            drones,
        )
        .unwrap()
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, drones: usize, elig_frac: f64) -> Instance<f64> {
        let rows: Vec<Vec<f64>> = (0..=n)
            .map(|i| {
                (0..=n)
                    .map(|j| if i == j { 0.0 } else { rng.random_range(4..=64) as f64 / 4.0 })
                    .collect()
            })
            .collect();
        let eligible: Vec<usize> = (1..=n).filter(|_| rng.random_bool(elig_frac)).collect();
        let dt: Vec<(usize, f64)> = eligible
            .iter()
            .map(|&c| (c, rng.random_range(4..=48) as f64 / 4.0))
            .collect();
        instance(rows, &eligible, &dt, drones)
    }

    /// Subset-enumeration oracle for order-only solves: for every
    /// drone subset, kept-order truck path plus exact P||Cmax.
    fn enumeration_optimum(inst: &Instance<f64>, s: &[usize]) -> f64 {
        let elig_pos: Vec<usize> = (0..s.len()).filter(|&p| inst.is_eligible(s[p])).collect();
        let k = elig_pos.len();
        let mut best = f64::INFINITY;
        for mask in 0u64..(1 << k) {
            let mut tour = Vec::new();
            let mut drones = Vec::new();
            for (idx, &c) in s.iter().enumerate() {
                let bit = elig_pos.iter().position(|&p| p == idx);
                if let Some(b) = bit {
                    if mask & (1 << b) != 0 {
                        drones.push(c);
                        continue;
                    }
                }
                tour.push(c);
            }
            let truck = inst.tour_time(&tour);
            let dc = if drones.is_empty() {
                0.0
            } else {
                let jobs = drones.iter().map(|&c| (c, inst.drone_time(c).unwrap())).collect();
                exact_pcmax(&JobSet::new(jobs, inst.n_drones()).unwrap(), SolveCap::Unlimited)
                    .schedule
                    .makespan
            };
            best = best.min(truck.max(dc));
        }
        best
    }

    #[test]
    fn no_eligible_follows_sequence_exactly() {
        let inst = instance(
            vec![
                vec![0.0, 2.0, 5.0, 1.0],
                vec![2.0, 0.0, 3.0, 4.0],
                vec![5.0, 3.0, 0.0, 2.0],
                vec![1.0, 4.0, 2.0, 0.0],
            ],
            &[],
            &[],
            2,
        );
        let s = Sequence::new(vec![2, 1, 3]).unwrap();
        let p = OrderConstrainedProblem::new(&inst, s, OffloadMode::OrderOnly);
        let out = solve_offload(&p).unwrap();
        assert!(out.proven);
        assert_eq!(out.solution.truck_tour, vec![2, 1, 3]);
        assert!(out.solution.drone_assign.is_empty());
        assert_eq!(out.cost, inst.tour_time(&[2, 1, 3]));
    }

    #[test]
    fn order_only_matches_subset_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..25 {
            let n = rng.random_range(4..=10);
            let drones = rng.random_range(1..=3);
            let inst = random_instance(&mut rng, n, drones, 0.8);
            let mut order: Vec<usize> = (1..=n).collect();
            order.shuffle(&mut rng);
            let s = Sequence::new(order.clone()).unwrap();
            let p = OrderConstrainedProblem {
                cap: SolveCap::Unlimited,
                ..OrderConstrainedProblem::new(&inst, s, OffloadMode::OrderOnly)
            };
            let out = solve_offload(&p).unwrap();
            assert!(out.proven);
            let expect = enumeration_optimum(&inst, &order);
            assert_eq!(out.cost, expect);
            let eval = crate::instance::evaluate(&inst, &out.solution).unwrap();
            assert_eq!(eval.alpha, out.cost);
        }
    }

    #[test]
    fn cost_never_exceeds_reference_tour() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(3..=9);
            let inst = random_instance(&mut rng, n, 2, 0.5);
            let order: Vec<usize> = (1..=n).collect();
            let s = Sequence::new(order.clone()).unwrap();
            let p = OrderConstrainedProblem {
                cap: SolveCap::Unlimited,
                ..OrderConstrainedProblem::new(&inst, s, OffloadMode::OrderOnly)
            };
            let out = solve_offload(&p).unwrap();
            assert!(out.cost <= inst.tour_time(&order) + 1e-9);
        }
    }

    #[test]
    fn window_rules_empty_for_width_one() {
        let inst = instance(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            &[1],
            &[(1, 1.0)],
            1,
        );
        let s = Sequence::new(vec![1]).unwrap();
        let mut p = OrderConstrainedProblem::new(&inst, s, OffloadMode::OrderOnly);
        p.delta = 1;
        assert!(window_dominance_filter(&p).rules.is_empty());
    }

    #[test]
    fn window_rule_requires_intermediate_offload() {
        let inst = instance(
            vec![
                vec![0.0, 1.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0, 1.0],
                vec![1.0, 1.0, 0.0, 1.0],
                vec![1.0, 1.0, 1.0, 0.0],
            ],
            &[1, 2, 3],
            &[(1, 1.0), (2, 1.0), (3, 1.0)],
            1,
        );
        let s = Sequence::new(vec![1, 2, 3]).unwrap();
        let p = OrderConstrainedProblem::new(&inst, s, OffloadMode::OrderOnly);
        let rules = window_dominance_filter(&p);
        assert!(rules.rules.contains(&SkipRule {
            from_pos: 0,
            to_pos: 2
        }));
        // Skip arc 1 -> 3 admissible only when position 1 is offloaded.
        assert!(rules.admits(0, 2, &[false, true, false]));
        assert!(!rules.admits(0, 2, &[false, false, false]));
    }

    #[test]
    fn window_rules_never_cut_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..15 {
            let n = rng.random_range(4..=9);
            let inst = random_instance(&mut rng, n, 2, 0.7);
            let mut order: Vec<usize> = (1..=n).collect();
            order.shuffle(&mut rng);
            let s = Sequence::new(order).unwrap();
            let base = OrderConstrainedProblem {
                cap: SolveCap::Unlimited,
                ..OrderConstrainedProblem::new(&inst, s, OffloadMode::OrderOnly)
            };
            let with_rules = OrderConstrainedProblem {
                use_window_rules: true,
                ..base.clone()
            };
            let a = solve_offload(&base).unwrap();
            let b = solve_offload(&with_rules).unwrap();
            assert_eq!(a.cost, b.cost);
        }
    }

    #[test]
    fn insertion_mode_rejects_ineligible_outside() {
        let inst = instance(
            vec![
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 1.0],
                vec![2.0, 1.0, 0.0],
            ],
            &[1],
            &[(1, 1.0)],
            1,
        );
        // Customer 2 is outside s and not eligible.
        let s = Sequence::new(vec![1]).unwrap();
        let p = OrderConstrainedProblem::new(&inst, s, OffloadMode::OrderPlusInsertion);
        assert!(matches!(
            solve_offload(&p),
            Err(SplitError::IneligibleOutside { id: 2 })
        ));
    }

    #[test]
    fn order_only_rejects_partial_cover() {
        let inst = instance(
            vec![
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 1.0],
                vec![2.0, 1.0, 0.0],
            ],
            &[1, 2],
            &[(1, 1.0), (2, 1.0)],
            1,
        );
        let s = Sequence::new(vec![1]).unwrap();
        let p = OrderConstrainedProblem::new(&inst, s, OffloadMode::OrderOnly);
        assert!(matches!(
            solve_offload(&p),
            Err(SplitError::MissingCustomer { id: 2 })
        ));
    }

    #[test]
    fn insertion_equals_order_only_on_full_cover() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let n = rng.random_range(4..=8);
            let inst = random_instance(&mut rng, n, 2, 0.6);
            let order: Vec<usize> = (1..=n).collect();
            let a = solve_offload(&OrderConstrainedProblem {
                cap: SolveCap::Unlimited,
                ..OrderConstrainedProblem::new(
                    &inst,
                    Sequence::new(order.clone()).unwrap(),
                    OffloadMode::OrderOnly,
                )
            })
            .unwrap();
            let b = solve_offload(&OrderConstrainedProblem {
                cap: SolveCap::Unlimited,
                ..OrderConstrainedProblem::new(
                    &inst,
                    Sequence::new(order).unwrap(),
                    OffloadMode::OrderPlusInsertion,
                )
            })
            .unwrap();
            assert_eq!(a.cost, b.cost);
        }
    }

    #[test]
    fn insertion_output_is_supersequence_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..15 {
            let n = rng.random_range(5..=9);
            let inst = random_instance(&mut rng, n, 1, 1.0);
            // Reference sequence covering roughly half the customers.
            let mut order: Vec<usize> = (1..=n).collect();
            order.shuffle(&mut rng);
            let keep = n / 2;
            let s_vec: Vec<usize> = order[..keep].to_vec();
            let s = Sequence::new(s_vec.clone()).unwrap();
            let p = OrderConstrainedProblem {
                cap: SolveCap::Unlimited,
                ..OrderConstrainedProblem::new(&inst, s, OffloadMode::OrderPlusInsertion)
            };
            let out = solve_offload(&p).unwrap();
            let filtered: Vec<usize> = out
                .solution
                .truck_tour
                .iter()
                .copied()
                .filter(|c| s_vec.contains(c))
                .collect();
            // Deleting inserted customers leaves a subsequence of s.
            let mut it = s_vec.iter();
            for c in filtered {
                assert!(it.any(|&x| x == c));
            }
            let eval = crate::instance::evaluate(&inst, &out.solution).unwrap();
            assert_eq!(eval.alpha, out.cost);
        }
    }

    #[test]
    fn zero_drones_gives_pure_truck_solution() {
        let inst = instance(
            vec![
                vec![0.0, 1.0, 2.0, 3.0],
                vec![1.0, 0.0, 1.0, 2.0],
                vec![2.0, 1.0, 0.0, 1.0],
                vec![3.0, 2.0, 1.0, 0.0],
            ],
            &[1, 2, 3],
            &[(1, 1.0), (2, 1.0), (3, 1.0)],
            0,
        );
        let s = Sequence::new(vec![1, 2, 3]).unwrap();
        let p = OrderConstrainedProblem {
            cap: SolveCap::Unlimited,
            ..OrderConstrainedProblem::new(&inst, s, OffloadMode::OrderOnly)
        };
        let out = solve_offload(&p).unwrap();
        assert!(out.solution.drone_assign.is_empty());
        assert_eq!(out.solution.truck_tour, vec![1, 2, 3]);
        assert!(out.proven);
    }

    #[test]
    fn larger_cap_never_worse() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let n = 9;
            let inst = random_instance(&mut rng, n, 2, 0.9);
            let mut order: Vec<usize> = (1..=n).collect();
            order.shuffle(&mut rng);
            let mk = |cap| OrderConstrainedProblem {
                cap,
                ..OrderConstrainedProblem::new(
                    &inst,
                    Sequence::new(order.clone()).unwrap(),
                    OffloadMode::OrderOnly,
                )
            };
            let small = solve_offload(&mk(SolveCap::Nodes(20))).unwrap();
            let big = solve_offload(&mk(SolveCap::Unlimited)).unwrap();
            assert!(big.cost <= small.cost + 1e-9);
        }
    }

    #[test]
    fn reusing_the_solver_cache_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = random_instance(&mut rng, 8, 2, 0.9);
        let mut solver = OffloadSolver::new(&inst);
        let order: Vec<usize> = (1..=8).collect();
        let p = OrderConstrainedProblem {
            cap: SolveCap::Unlimited,
            ..OrderConstrainedProblem::new(
                &inst,
                Sequence::new(order.clone()).unwrap(),
                OffloadMode::OrderOnly,
            )
        };
        let once = solver.solve(&p).unwrap();
        let twice = solver.solve(&p).unwrap();
        assert_eq!(once.cost, twice.cost);
        assert_eq!(once.solution, twice.solution);
    }

    #[test]
    fn incumbent_prunes_but_never_degrades() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let inst = random_instance(&mut rng, 8, 2, 0.8);
        let order: Vec<usize> = (1..=8).collect();
        let base = OrderConstrainedProblem {
            cap: SolveCap::Unlimited,
            ..OrderConstrainedProblem::new(
                &inst,
                Sequence::new(order.clone()).unwrap(),
                OffloadMode::OrderOnly,
            )
        };
        let out = solve_offload(&base).unwrap();
        let seeded = OrderConstrainedProblem {
            incumbent: Some(out.solution.clone()),
            ..base
        };
        let again = solve_offload(&seeded).unwrap();
        assert_eq!(again.cost, out.cost);
        // A bogus incumbent is ignored rather than breaking the solve.
        let bogus = OrderConstrainedProblem {
            incumbent: Some(Solution {
                truck_tour: vec![8, 7, 6, 5, 4, 3, 2, 1],
                drone_assign: BTreeMap::new(),
            }),
            ..solve_base(&inst, &order)
        };
        let c = solve_offload(&bogus).unwrap();
        assert_eq!(c.cost, out.cost);
    }

    fn solve_base<'a>(
        inst: &'a Instance<f64>,
        order: &[usize],
    ) -> OrderConstrainedProblem<'a, f64> {
        OrderConstrainedProblem {
            cap: SolveCap::Unlimited,
            ..OrderConstrainedProblem::new(
                inst,
                Sequence::new(order.to_vec()).unwrap(),
                OffloadMode::OrderOnly,
            )
        }
    }
}
