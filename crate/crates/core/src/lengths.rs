//! Length tuples, promising-length boxes and the outer search frontier.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stl::Formula;

/// Per-UAV final time indices; UAV `n` flies samples `0..=tuple[n]`.
pub type LengthTuple = Vec<usize>;

/// Per-UAV inclusive length ranges `lo[n]..=hi[n]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PLBox {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl PLBox {
    pub fn new(lo: Vec<usize>, hi: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::Dimension("malformed length box".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Number of tuples, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(1u128, |acc, (l, h)| acc.saturating_mul((h - l + 1) as u128))
    }

    pub fn contains(&self, t: &[usize]) -> bool {
        t.len() == self.dim() && (0..self.dim()).all(|n| self.lo[n] <= t[n] && t[n] <= self.hi[n])
    }

    /// All tuples in lexicographic order.
    pub fn tuples(&self) -> impl Iterator<Item = LengthTuple> + '_ {
        let mut cur = Some(self.lo.clone());
        std::iter::from_fn(move || {
            let out = cur.clone()?;
            let mut next = out.clone();
            let mut n = self.dim();
            loop {
                if n == 0 {
                    cur = None;
                    break;
                }
                n -= 1;
                if next[n] < self.hi[n] {
                    next[n] += 1;
                    cur = Some(next);
                    break;
                }
                next[n] = self.lo[n];
            }
            Some(out)
        })
    }
}

fn mentions(f: &Formula, n: usize) -> bool {
    f.uavs().contains(&n)
}

/// Smallest length UAV `n` needs for `f` (NNF) to be satisfiable at `t = 0`.
fn lo_for(f: &Formula, n: usize) -> usize {
    match f {
        Formula::True | Formula::Atom(_) | Formula::Not(_) => 0,
        Formula::And(a, b) => lo_for(a, n).max(lo_for(b, n)),
        Formula::Or(a, b) => lo_for(a, n).min(lo_for(b, n)),
        Formula::Eventually(i, g) => {
            if mentions(g, n) {
                i.lo + lo_for(g, n)
            } else {
                0
            }
        }
        // a window starting after the last sample is vacuous
        Formula::Always(i, g) => {
            if i.lo == 0 {
                lo_for(g, n)
            } else {
                0
            }
        }
        Formula::Until(i, _, b) => {
            if mentions(b, n) {
                i.lo + lo_for(b, n)
            } else {
                0
            }
        }
        Formula::Release(i, _, b) => {
            if i.lo == 0 {
                lo_for(b, n)
            } else {
                0
            }
        }
    }
}

/// Largest index of UAV `n` that an evaluation of `f` at `t = 0` can touch.
fn hi_for(f: &Formula, n: usize) -> usize {
    if !mentions(f, n) {
        return 0;
    }
    match f {
        Formula::True | Formula::Atom(_) => 0,
        Formula::Not(g) => hi_for(g, n),
        Formula::And(a, b) | Formula::Or(a, b) => hi_for(a, n).max(hi_for(b, n)),
        Formula::Eventually(i, g) | Formula::Always(i, g) => i.hi + hi_for(g, n),
        Formula::Until(i, a, b) | Formula::Release(i, a, b) => i.hi + hi_for(a, n).max(hi_for(b, n)),
    }
}

/// Per-UAV length box containing every tuple for which some state sequence
/// satisfies `f`. Lengths above `hi[n]` are never needed: UAV `n` is not
/// observed past `hi[n]`.
pub fn pl_bounds(f: &Formula, uavs: usize) -> Result<PLBox> {
    if let Some(&u) = f.uavs().iter().find(|&&u| u >= uavs) {
        return Err(Error::UavOutOfRange { uav: u + 1, fleet: uavs });
    }
    let g = f.to_nnf();
    let hi: Vec<usize> = (0..uavs).map(|n| hi_for(&g, n)).collect();
    let lo = (0..uavs).map(|n| lo_for(&g, n).min(hi[n])).collect();
    PLBox::new(lo, hi)
}

/// Position of each length inside its range; 0 for a degenerate range.
pub fn alpha(t: &[usize], b: &PLBox) -> Result<Vec<f64>> {
    if !b.contains(t) {
        return Err(Error::OutsideBox { tuple: t.to_vec() });
    }
    Ok(alpha_unchecked(t, b))
}

/// Like [`alpha`] but extrapolates outside the box (values may leave
/// `[0, 1]`); a degenerate range counts as width 1.
pub fn alpha_unchecked(t: &[usize], b: &PLBox) -> Vec<f64> {
    t.iter()
        .enumerate()
        .map(|(n, &l)| {
            let (lo, hi) = (b.lo[n] as f64, b.hi[n] as f64);
            if hi > lo {
                (l as f64 - lo) / (hi - lo)
            } else if b.contains(t) {
                0.0
            } else {
                l as f64 - lo
            }
        })
        .collect()
}

/// How a recorded infeasible tuple prunes others.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneRule {
    /// Prune tuples that are componentwise no larger.
    #[default]
    Dominance,
    /// Prune tuples that are lexicographically no larger.
    Lexicographic,
}

/// Search state of the outer loop.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SearchFrontier {
    pub rule: PruneRule,
    /// Maximal recorded infeasible tuples (dominated ones are dropped).
    infeasible: Vec<LengthTuple>,
    #[serde(serialize_with = "sorted")]
    visited: HashSet<LengthTuple>,
    best: Option<(LengthTuple, f64)>,
    pub pruned_dominance: usize,
    pub pruned_fairness: usize,
}

fn sorted<S: serde::Serializer>(v: &HashSet<LengthTuple>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut all: Vec<_> = v.iter().collect();
    all.sort();
    serde::Serialize::serialize(&all, s)
}

fn dominated(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

impl SearchFrontier {
    pub fn new(rule: PruneRule) -> Self {
        Self {
            rule,
            ..Self::default()
        }
    }

    pub fn record_infeasible(&mut self, t: &[usize]) {
        self.visited.insert(t.to_vec());
        if self.best.as_ref().is_some_and(|(b, _)| b == t) {
            return;
        }
        match self.rule {
            PruneRule::Dominance => {
                if self.infeasible.iter().any(|r| dominated(t, r)) {
                    return;
                }
                self.infeasible.retain(|r| !dominated(r, t));
                self.infeasible.push(t.to_vec());
            }
            PruneRule::Lexicographic => {
                // only the lexicographic maximum matters
                if self.infeasible.first().is_none_or(|r| t > r.as_slice()) {
                    self.infeasible = vec![t.to_vec()];
                }
            }
        }
    }

    pub fn is_pruned_infeasible(&self, t: &[usize]) -> bool {
        match self.rule {
            PruneRule::Dominance => self.infeasible.iter().any(|r| dominated(t, r)),
            PruneRule::Lexicographic => self.infeasible.iter().any(|r| t <= r.as_slice()),
        }
    }

    /// Keeps `t` as the best feasible tuple if it is fairer than the current one.
    pub fn record_feasible(&mut self, t: &[usize], fairness: f64) {
        self.visited.insert(t.to_vec());
        if self.best.as_ref().is_none_or(|(_, f)| fairness > *f) {
            self.best = Some((t.to_vec(), fairness));
        }
    }

    pub fn is_pruned_unfair(&self, fairness: f64) -> bool {
        self.best.as_ref().is_some_and(|(_, f)| fairness < *f)
    }

    pub fn best(&self) -> Option<(&[usize], f64)> {
        self.best.as_ref().map(|(t, f)| (t.as_slice(), *f))
    }

    pub fn is_visited(&self, t: &[usize]) -> bool {
        self.visited.contains(t)
    }

    pub fn mark_visited(&mut self, t: &[usize]) {
        self.visited.insert(t.to_vec());
    }

    pub fn visited_count(&self) -> usize {
        self.visited.len()
    }

    pub fn infeasible(&self) -> &[LengthTuple] {
        &self.infeasible
    }

    /// Checks both pruning rules and counts the reason.
    fn prune(&mut self, t: &[usize], fairness: f64) -> bool {
        if self.is_pruned_infeasible(t) {
            self.pruned_dominance += 1;
            true
        } else if self.is_pruned_unfair(fairness) {
            self.pruned_fairness += 1;
            true
        } else {
            false
        }
    }
}

/// Fairness values closer than this are treated as ties.
pub const FAIRNESS_TIE: f64 = 1e-12;

fn tie_key(f: f64) -> i64 {
    (f / FAIRNESS_TIE).round() as i64
}

/// Scored tuple ordered fairest-first, ties by total length then lexicographic.
#[derive(Clone, Debug)]
struct Ranked {
    key: i64,
    fairness: f64,
    sum: usize,
    prefer_long: bool,
    tuple: LengthTuple,
}

impl Ranked {
    fn new(tuple: LengthTuple, fairness: f64, prefer_long: bool) -> Self {
        Self {
            key: tie_key(fairness),
            fairness,
            sum: tuple.iter().sum(),
            prefer_long,
            tuple,
        }
    }

    /// `Less` means `self` comes first.
    fn rank(&self, other: &Self) -> Ordering {
        let by_sum = if self.prefer_long {
            other.sum.cmp(&self.sum)
        } else {
            self.sum.cmp(&other.sum)
        };
        other
            .key
            .cmp(&self.key)
            .then(by_sum)
            .then_with(|| self.tuple.cmp(&other.tuple))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    // max-heap pops the tuple that comes first
    fn cmp(&self, other: &Self) -> Ordering {
        other.rank(self)
    }
}

/// Boxes up to this size are fully enumerated and sorted.
pub const ENUMERATION_CAP: u128 = 200_000;

enum Order {
    Sorted { list: Vec<Ranked>, at: usize },
    Expand { heap: BinaryHeap<Ranked>, seen: HashSet<LengthTuple> },
}

/// Yields box tuples fairest-first, skipping visited and pruned ones.
pub struct Candidates<F> {
    bx: PLBox,
    score: F,
    prefer_long: bool,
    order: Order,
}

impl<F: Fn(&[usize]) -> f64> Candidates<F> {
    /// `start` seeds the neighbour expansion used above `cap` tuples.
    pub fn new(bx: PLBox, score: F, prefer_long: bool, start: LengthTuple, cap: u128) -> Self {
        let order = if bx.size() <= cap {
            let mut list: Vec<Ranked> = bx
                .tuples()
                .map(|t| {
                    let f = score(&t);
                    Ranked::new(t, f, prefer_long)
                })
                .collect();
            list.sort_by(|a, b| a.rank(b));
            Order::Sorted { list, at: 0 }
        } else {
            let f = score(&start);
            let mut seen = HashSet::new();
            seen.insert(start.clone());
            let mut heap = BinaryHeap::new();
            heap.push(Ranked::new(start, f, prefer_long));
            Order::Expand { heap, seen }
        };
        Self {
            bx,
            score,
            prefer_long,
            order,
        }
    }

    fn pop(&mut self) -> Option<Ranked> {
        match &mut self.order {
            Order::Sorted { list, at } => {
                let r = list.get(*at)?.clone();
                *at += 1;
                Some(r)
            }
            Order::Expand { heap, seen } => {
                let r = heap.pop()?;
                for n in 0..self.bx.dim() {
                    for up in [false, true] {
                        let mut nb = r.tuple.clone();
                        if up && nb[n] < self.bx.hi[n] {
                            nb[n] += 1;
                        } else if !up && nb[n] > self.bx.lo[n] {
                            nb[n] -= 1;
                        } else {
                            continue;
                        }
                        if seen.insert(nb.clone()) {
                            let f = (self.score)(&nb);
                            heap.push(Ranked::new(nb, f, self.prefer_long));
                        }
                    }
                }
                Some(r)
            }
        }
    }

    /// Next fairest unvisited, unpruned tuple and its fairness; marks it visited.
    pub fn next_fairest(&mut self, frontier: &mut SearchFrontier) -> Option<(LengthTuple, f64)> {
        while let Some(r) = self.pop() {
            if frontier.is_visited(&r.tuple) || frontier.prune(&r.tuple, r.fairness) {
                continue;
            }
            frontier.mark_visited(&r.tuple);
            return Some((r.tuple, r.fairness));
        }
        None
    }

    pub fn score(&self, t: &[usize]) -> f64 {
        (self.score)(t)
    }

    pub fn bounds(&self) -> &PLBox {
        &self.bx
    }
}

/// Uniformly random unvisited, unpruned tuple (rejection sampling, with an
/// exhaustive fallback for boxes up to [`ENUMERATION_CAP`]); marks it visited.
pub fn sample_random<R: Rng>(
    bx: &PLBox,
    frontier: &mut SearchFrontier,
    score: impl Fn(&[usize]) -> f64,
    rng: &mut R,
) -> Option<LengthTuple> {
    let ok = |fr: &SearchFrontier, t: &[usize]| {
        !fr.is_visited(t) && !fr.is_pruned_infeasible(t) && !fr.is_pruned_unfair(score(t))
    };
    for _ in 0..64 {
        let t: LengthTuple = (0..bx.dim()).map(|n| rng.gen_range(bx.lo[n]..=bx.hi[n])).collect();
        if ok(frontier, &t) {
            frontier.mark_visited(&t);
            return Some(t);
        }
    }
    if bx.size() > ENUMERATION_CAP {
        return None;
    }
    let pool: Vec<LengthTuple> = bx.tuples().filter(|t| ok(frontier, t)).collect();
    if pool.is_empty() {
        return None;
    }
    let t = pool[rng.gen_range(0..pool.len())].clone();
    frontier.mark_visited(&t);
    Some(t)
}
