//! Truck-tour optimization: greedy construction, 2-opt/3-opt/Or-opt
//! local search, an exact Held–Karp solver for desk-scale verification,
//! and the seeded matrix perturbation used by restarts.
//!
//! The local-search engine stands in for a state-of-the-art TSP solver
//! and sits behind the [`TourOptimizer`] port so a stronger engine can
//! be substituted without touching the heuristics.

use std::collections::BTreeSet;

use rand::Rng;
use thiserror::Error;

use crate::instance::TimeMatrix;
use crate::Scalar;

/// Ordered list of distinct customer ids; the depot is implicit at both
/// ends of the induced closed tour.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequence(Vec<usize>);

#[derive(Debug, Error)]
pub enum TspError {
    #[error("sequence contains duplicate id {id}")]
    DuplicateId { id: usize },
    #[error("subset size {len} exceeds the exact-solver guard {max}")]
    SubsetTooLarge { len: usize, max: usize },
}

impl Sequence {
    pub fn new(order: Vec<usize>) -> Result<Self, TspError> {
        let mut seen = BTreeSet::new();
        for &id in &order {
            if !seen.insert(id) {
                return Err(TspError::DuplicateId { id });
            }
        }
        Ok(Self(order))
    }

    /// Construction from ids already known distinct.
    pub(crate) fn from_distinct(order: Vec<usize>) -> Self {
        debug_assert_eq!(order.iter().collect::<BTreeSet<_>>().len(), order.len());
        Self(order)
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.contains(&id)
    }
}

/// Closed-walk cost of `depot -> order -> depot`; empty order costs 0.
pub fn tour_cost<T: Scalar>(times: &TimeMatrix<T>, order: &[usize]) -> T {
    let mut total = T::zero();
    let mut prev = 0usize;
    for &c in order {
        total = total + times.get(prev, c);
        prev = c;
    }
    if !order.is_empty() {
        total = total + times.get(prev, 0);
    }
    total
}

/// Greedy tour over `subset` starting at the depot; ties broken by the
/// lowest customer id. An empty subset yields the empty sequence.
pub fn nearest_neighbor<T: Scalar>(times: &TimeMatrix<T>, subset: &BTreeSet<usize>) -> Sequence {
    let mut remaining: Vec<usize> = subset.iter().copied().collect();
    let mut order = Vec::with_capacity(remaining.len());
    let mut current = 0usize;
    while !remaining.is_empty() {
        // remaining is kept sorted, so the first strict improvement wins
        // ties by lowest id.
        let mut best = 0usize;
        for (idx, &cand) in remaining.iter().enumerate() {
            if times.get(current, cand) < times.get(current, remaining[best]) {
                best = idx;
            }
        }
        current = remaining.remove(best);
        order.push(current);
    }
    Sequence::from_distinct(order)
}

/// Local-search neighborhood selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveSet {
    pub two_opt: bool,
    pub three_opt: bool,
    pub or_opt: bool,
}

impl MoveSet {
    pub fn all() -> Self {
        Self {
            two_opt: true,
            three_opt: true,
            or_opt: true,
        }
    }

    pub fn two_opt_only() -> Self {
        Self {
            two_opt: true,
            three_opt: false,
            or_opt: false,
        }
    }

    /// 2-opt and 3-opt without the Or-opt extension.
    pub fn without_or_opt() -> Self {
        Self {
            two_opt: true,
            three_opt: true,
            or_opt: false,
        }
    }
}

impl Default for MoveSet {
    fn default() -> Self {
        Self::all()
    }
}

/// 2-opt moves over a sequence of length `m` in lexicographic order;
/// `(i, j)` reverses `order[i..=j]`.
pub fn two_opt_moves(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m.saturating_sub(1)).flat_map(move |i| (i + 1..m).map(move |j| (i, j)))
}

pub fn apply_two_opt(order: &mut [usize], i: usize, j: usize) {
    order[i..=j].reverse();
}

/// One 3-opt reconnection: the tour is split as `A = order[..i]`,
/// `B = order[i..j]`, `C = order[j..k]`, `D = order[k..]` and the middle
/// segments are rearranged according to `kind`:
///
/// 1. `A B' C D`   2. `A B C' D`   3. `A B' C' D`   4. `A C B D`
/// 5. `A C B' D`   6. `A C' B D`   7. `A C' B' D`
///
/// (`'` marks a reversed segment). Kinds 1–2 coincide with 2-opt moves
/// and are kept so the neighborhood is the full classic one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ThreeOpt {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub kind: u8,
}

/// All 3-opt moves in lexicographic `(i, j, k, kind)` order.
pub fn three_opt_moves(m: usize) -> impl Iterator<Item = ThreeOpt> {
    (0..m.saturating_sub(1)).flat_map(move |i| {
        (i + 1..m).flat_map(move |j| {
            (j + 1..=m).flat_map(move |k| (1..=7u8).map(move |kind| ThreeOpt { i, j, k, kind }))
        })
    })
}

pub fn apply_three_opt(order: &[usize], mv: ThreeOpt) -> Vec<usize> {
    let ThreeOpt { i, j, k, kind } = mv;
    let (a, rest) = order.split_at(i);
    let (b, rest) = rest.split_at(j - i);
    let (c, d) = rest.split_at(k - j);
    let fwd = |s: &[usize]| s.to_vec();
    let rev = |s: &[usize]| s.iter().rev().copied().collect::<Vec<_>>();
    let (first, second) = match kind {
        1 => (rev(b), fwd(c)),
        2 => (fwd(b), rev(c)),
        3 => (rev(b), rev(c)),
        4 => (fwd(c), fwd(b)),
        5 => (fwd(c), rev(b)),
        6 => (rev(c), fwd(b)),
        7 => (rev(c), rev(b)),
        _ => unreachable!("3-opt kind is 1..=7"),
    };
    let mut out = Vec::with_capacity(order.len());
    out.extend_from_slice(a);
    out.extend(first);
    out.extend(second);
    out.extend_from_slice(d);
    out
}

/// Or-opt move: remove the segment of `len` customers starting at `i`
/// and reinsert it (same orientation) at gap `g` of the remaining
/// sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrOpt {
    pub len: usize,
    pub i: usize,
    pub g: usize,
}

pub fn or_opt_moves(m: usize) -> impl Iterator<Item = OrOpt> {
    (1..=3usize.min(m)).flat_map(move |len| {
        (0..=m - len).flat_map(move |i| {
            (0..=m - len)
                .filter(move |&g| g != i)
                .map(move |g| OrOpt { len, i, g })
        })
    })
}

pub fn apply_or_opt(order: &[usize], mv: OrOpt) -> Vec<usize> {
    let OrOpt { len, i, g } = mv;
    let seg = &order[i..i + len];
    let mut rest = Vec::with_capacity(order.len() - len);
    rest.extend_from_slice(&order[..i]);
    rest.extend_from_slice(&order[i + len..]);
    let mut out = Vec::with_capacity(order.len());
    out.extend_from_slice(&rest[..g]);
    out.extend_from_slice(seg);
    out.extend_from_slice(&rest[g..]);
    out
}

struct Search<'a, T> {
    times: &'a TimeMatrix<T>,
    symmetric: bool,
    evals: u64,
    budget: Option<u64>,
}

impl<'a, T: Scalar> Search<'a, T> {
    fn node(&self, order: &[usize], pos: isize, m: usize) -> usize {
        if pos < 0 || pos as usize >= m {
            0
        } else {
            order[pos as usize]
        }
    }

    fn exhausted(&mut self) -> bool {
        self.evals += 1;
        self.budget.is_some_and(|b| self.evals > b)
    }

    fn two_opt_delta(&self, order: &[usize], i: usize, j: usize) -> T {
        let m = order.len();
        let t = |a: usize, b: usize| self.times.get(a, b);
        let p = self.node(order, i as isize - 1, m);
        let q = self.node(order, j as isize + 1, m);
        let (si, sj) = (order[i], order[j]);
        let mut delta = t(p, sj) + t(si, q) - t(p, si) - t(sj, q);
        if !self.symmetric {
            // Reversing the segment flips every internal arc.
            for w in i..j {
                delta = delta + t(order[w + 1], order[w]) - t(order[w], order[w + 1]);
            }
        }
        delta
    }

    fn or_opt_delta(&self, order: &[usize], mv: OrOpt) -> T {
        let OrOpt { len, i, g } = mv;
        let m = order.len();
        let t = |a: usize, b: usize| self.times.get(a, b);
        let p = self.node(order, i as isize - 1, m);
        let q = self.node(order, (i + len) as isize, m);
        let (s0, s1) = (order[i], order[i + len - 1]);
        // Gap neighbors in the remaining sequence, mapped back to
        // original positions (positions >= i shift by len).
        let left_pos = if g == 0 { -1 } else { map_back(g - 1, i, len) as isize };
        let right_pos = map_back(g, i, len);
        let u = self.node(order, left_pos, m);
        let v = if right_pos >= m { 0 } else { order[right_pos] };
        t(p, q) + t(u, s0) + t(s1, v) - t(p, s0) - t(s1, q) - t(u, v)
    }

    fn three_opt_delta(&self, order: &[usize], mv: ThreeOpt, current: T) -> T {
        if !self.symmetric {
            let cand = apply_three_opt(order, mv);
            return tour_cost(self.times, &cand) - current;
        }
        let ThreeOpt { i, j, k, kind } = mv;
        let m = order.len();
        let t = |a: usize, b: usize| self.times.get(a, b);
        let a = self.node(order, i as isize - 1, m);
        let d = if k >= m { 0 } else { order[k] };
        let (b1, b2) = (order[i], order[j - 1]);
        let (c1, c2) = (order[j], order[k - 1]);
        let old = t(a, b1) + t(b2, c1) + t(c2, d);
        let new = match kind {
            1 => t(a, b2) + t(b1, c1) + t(c2, d),
            2 => t(a, b1) + t(b2, c2) + t(c1, d),
            3 => t(a, b2) + t(b1, c2) + t(c1, d),
            4 => t(a, c1) + t(c2, b1) + t(b2, d),
            5 => t(a, c1) + t(c2, b2) + t(b1, d),
            6 => t(a, c2) + t(c1, b1) + t(b2, d),
            7 => t(a, c2) + t(c1, b2) + t(b1, d),
            _ => unreachable!(),
        };
        new - old
    }
}

fn map_back(rest_pos: usize, i: usize, len: usize) -> usize {
    if rest_pos < i {
        rest_pos
    } else {
        rest_pos + len
    }
}

/// First-improvement local search over the enabled move families,
/// scanned in lexicographic order (2-opt, then Or-opt, then 3-opt).
///
/// Every accepted move strictly decreases the tour cost by more than
/// the tolerance, so termination is guaranteed; the scan restarts from
/// the first family after each acceptance. `budget` caps the number of
/// candidate evaluations. Deterministic for fixed input.
pub fn local_search<T: Scalar>(
    times: &TimeMatrix<T>,
    seq: Sequence,
    moves: MoveSet,
    budget: Option<u64>,
) -> Sequence {
    let mut order = seq.into_vec();
    let m = order.len();
    if m < 2 {
        return Sequence::from_distinct(order);
    }
    let mut search = Search {
        times,
        symmetric: times.is_symmetric(),
        evals: 0,
        budget,
    };
    let tol = T::tol();
    let mut cost = tour_cost(times, &order);

    'outer: loop {
        if moves.two_opt {
            for (i, j) in two_opt_moves(m) {
                if search.exhausted() {
                    break 'outer;
                }
                let delta = search.two_opt_delta(&order, i, j);
                if delta < -tol {
                    apply_two_opt(&mut order, i, j);
                    cost = cost + delta;
                    continue 'outer;
                }
            }
        }
        if moves.or_opt {
            for mv in or_opt_moves(m) {
                if search.exhausted() {
                    break 'outer;
                }
                let delta = search.or_opt_delta(&order, mv);
                if delta < -tol {
                    order = apply_or_opt(&order, mv);
                    cost = cost + delta;
                    continue 'outer;
                }
            }
        }
        if moves.three_opt {
            for mv in three_opt_moves(m) {
                if search.exhausted() {
                    break 'outer;
                }
                let delta = search.three_opt_delta(&order, mv, cost);
                if delta < -tol {
                    order = apply_three_opt(&order, mv);
                    cost = cost + delta;
                    continue 'outer;
                }
            }
        }
        break;
    }
    Sequence::from_distinct(order)
}

/// Hard size guard for the exact solver.
pub const HELD_KARP_MAX: usize = 18;

/// Held–Karp dynamic program over a customer set: optimal depot-rooted
/// paths for every subset, reusable by the enumeration oracle.
///
/// Memory is `O(2^k * k)`; the `k <= 18` guard keeps that under 40 MB.
pub struct HeldKarpTable<T> {
    ids: Vec<usize>,
    dp: Vec<T>,
    parent: Vec<u8>,
    back: Vec<T>,
}

impl<T: Scalar> HeldKarpTable<T> {
    pub fn build(times: &TimeMatrix<T>, subset: &BTreeSet<usize>) -> Result<Self, TspError> {
        let ids: Vec<usize> = subset.iter().copied().collect();
        let k = ids.len();
        if k > HELD_KARP_MAX {
            return Err(TspError::SubsetTooLarge {
                len: k,
                max: HELD_KARP_MAX,
            });
        }
        let size = (1usize << k) * k.max(1);
        let mut dp = vec![T::infinity(); size];
        let mut parent = vec![u8::MAX; size];
        for (idx, &id) in ids.iter().enumerate() {
            dp[(1 << idx) * k + idx] = times.get(0, id);
        }
        for mask in 1usize..(1 << k) {
            for last in 0..k {
                if mask & (1 << last) == 0 {
                    continue;
                }
                let cur = dp[mask * k + last];
                if !cur.is_finite() {
                    continue;
                }
                for next in 0..k {
                    if mask & (1 << next) != 0 {
                        continue;
                    }
                    let nmask = mask | (1 << next);
                    let cand = cur + times.get(ids[last], ids[next]);
                    if cand < dp[nmask * k + next] {
                        dp[nmask * k + next] = cand;
                        parent[nmask * k + next] = last as u8;
                    }
                }
            }
        }
        let back = ids.iter().map(|&id| times.get(id, 0)).collect();
        Ok(Self {
            ids,
            dp,
            parent,
            back,
        })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Optimal closed-tour cost over the customers selected by `mask`
    /// (bit `b` selects `ids()[b]`); the empty mask costs zero.
    pub fn best_cost(&self, mask: usize) -> T {
        if mask == 0 {
            return T::zero();
        }
        let k = self.ids.len();
        let mut best = T::infinity();
        for last in 0..k {
            if mask & (1 << last) == 0 {
                continue;
            }
            let cand = self.dp[mask * k + last] + self.back[last];
            if cand < best {
                best = cand;
            }
        }
        best
    }

    /// Optimal closed tour over `mask`, reconstructed from the DP.
    pub fn best_tour(&self, mask: usize) -> (Sequence, T) {
        if mask == 0 {
            return (Sequence::from_distinct(Vec::new()), T::zero());
        }
        let k = self.ids.len();
        let mut best = T::infinity();
        let mut best_last = usize::MAX;
        for last in 0..k {
            if mask & (1 << last) == 0 {
                continue;
            }
            let cand = self.dp[mask * k + last] + self.back[last];
            if cand < best {
                best = cand;
                best_last = last;
            }
        }
        let mut rev = Vec::new();
        let mut cur = best_last;
        let mut m = mask;
        loop {
            rev.push(self.ids[cur]);
            let p = self.parent[m * k + cur];
            m &= !(1 << cur);
            if p == u8::MAX {
                break;
            }
            cur = p as usize;
        }
        rev.reverse();
        (Sequence::from_distinct(rev), best)
    }
}

/// Optimal closed tour through the depot and `subset` (`|subset| <= 18`).
pub fn held_karp<T: Scalar>(
    times: &TimeMatrix<T>,
    subset: &BTreeSet<usize>,
) -> Result<(Sequence, T), TspError> {
    let table = HeldKarpTable::build(times, subset)?;
    let full = (1usize << subset.len()) - 1;
    Ok(table.best_tour(if subset.is_empty() { 0 } else { full }))
}

/// Scales every arc by an independent uniform factor in
/// `[1, 1 + gamma_pct/100]`; the diagonal stays zero. Arcs are drawn in
/// row-major order from `rng`, so the result is deterministic per seed.
pub fn perturb_matrix<T: Scalar, R: Rng>(
    times: &TimeMatrix<T>,
    gamma_pct: T,
    rng: &mut R,
) -> TimeMatrix<T> {
    let dim = times.dim();
    let hundred = T::from_f64_lossy(100.0);
    let mut out = TimeMatrix::zero(dim);
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                continue;
            }
            let u = T::from_f64_lossy(rng.random::<f64>());
            let factor = T::one() + u * gamma_pct / hundred;
            out.set(i, j, times.get(i, j) * factor);
        }
    }
    out
}

/// Pluggable tour engine; the heuristics only talk to this port.
pub trait TourOptimizer<T: Scalar> {
    /// Improves a tour over exactly the customers of `seq`.
    fn improve(&self, times: &TimeMatrix<T>, seq: Sequence) -> Sequence;

    /// Builds and optimizes a tour over `subset` from scratch.
    fn construct(&self, times: &TimeMatrix<T>, subset: &BTreeSet<usize>) -> Sequence {
        self.improve(times, nearest_neighbor(times, subset))
    }
}

/// Default engine: nearest-neighbor seeding plus first-improvement
/// local search over the configured move families.
#[derive(Clone, Copy, Debug)]
pub struct LocalSearchEngine {
    pub moves: MoveSet,
    pub budget: Option<u64>,
}

impl Default for LocalSearchEngine {
    fn default() -> Self {
        Self {
            moves: MoveSet::all(),
            budget: None,
        }
    }
}

impl<T: Scalar> TourOptimizer<T> for LocalSearchEngine {
    fn improve(&self, times: &TimeMatrix<T>, seq: Sequence) -> Sequence {
        local_search(times, seq, self.moves, self.budget)
    }
}
