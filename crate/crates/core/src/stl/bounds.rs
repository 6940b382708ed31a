//! Interval bounds on robustness when each sample is only known to lie in a box.

use super::{Formula, Predicate, Region, Trace, BIG};
use crate::error::{Error, Result};

/// Per-UAV, per-sample axis-aligned boxes; the set-valued analogue of [`Trace`].
#[derive(Clone, Debug, PartialEq)]
pub struct BoxTrace {
    dim: usize,
    lo: Vec<Vec<f64>>,
    hi: Vec<Vec<f64>>,
}

impl BoxTrace {
    /// `lo[n]`/`hi[n]` are flattened corner sequences of UAV `n`.
    pub fn new(dim: usize, lo: Vec<Vec<f64>>, hi: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 || lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Trace("malformed box trace".into()));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if l.len() != h.len() || l.is_empty() || l.len() % dim != 0 {
                return Err(Error::Trace("malformed box trace".into()));
            }
            if l.iter().zip(h).any(|(a, b)| !(a <= b)) {
                return Err(Error::Trace("box trace has lo > hi".into()));
            }
        }
        Ok(Self { dim, lo, hi })
    }

    /// Degenerate boxes around the samples of a trace.
    pub fn from_trace(tr: &Trace) -> Self {
        let s: Vec<Vec<f64>> = (0..tr.uav_count()).map(|n| tr.samples(n).to_vec()).collect();
        Self {
            dim: tr.dim(),
            lo: s.clone(),
            hi: s,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn uav_count(&self) -> usize {
        self.lo.len()
    }

    pub fn last(&self, n: usize) -> usize {
        self.lo[n].len() / self.dim - 1
    }

    /// Box of UAV `n` at index `k` (held after the final sample).
    pub fn at(&self, n: usize, k: usize) -> (&[f64], &[f64]) {
        let k = k.min(self.last(n));
        let r = k * self.dim..(k + 1) * self.dim;
        (&self.lo[n][r.clone()], &self.hi[n][r])
    }

    /// Whether the box at `(n, k)` contains `p`.
    pub fn contains(&self, n: usize, k: usize, p: &[f64]) -> bool {
        let (l, h) = self.at(n, k);
        p.iter().zip(l.iter().zip(h)).all(|(x, (a, b))| a <= x && x <= b)
    }

    fn avail(&self, f: &Formula) -> usize {
        f.uavs().into_iter().map(|n| self.last(n)).min().unwrap_or(usize::MAX)
    }
}

fn region_depth_bounds(r: &Region, l: &[f64], h: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..r.dim() {
        lo = lo.min(l[i] - r.lo[i]).min(r.hi[i] - h[i]);
        let mid = (0.5 * (r.lo[i] + r.hi[i])).clamp(l[i], h[i]);
        hi = hi.min((mid - r.lo[i]).min(r.hi[i] - mid));
    }
    (lo, hi)
}

fn atom_bounds(p: &Predicate, bt: &BoxTrace, t: usize) -> (f64, f64) {
    match p {
        Predicate::InBox { uav, region } => {
            let (l, h) = bt.at(*uav, t);
            region_depth_bounds(region, l, h)
        }
        Predicate::OutBox { uav, region } => {
            let (l, h) = bt.at(*uav, t);
            let (a, b) = region_depth_bounds(region, l, h);
            (-b, -a)
        }
        Predicate::HalfSpace { uav, coeffs, offset } => {
            let (l, h) = bt.at(*uav, t);
            let mut lo = -offset;
            let mut hi = -offset;
            for (i, c) in coeffs.iter().enumerate() {
                let (x, y) = (c * l[i], c * h[i]);
                lo += x.min(y);
                hi += x.max(y);
            }
            (lo, hi)
        }
        Predicate::Separation { a, b, dist } => {
            let (la, ha) = bt.at(*a, t);
            let (lb, hb) = bt.at(*b, t);
            let mut near = 0.0;
            let mut far = 0.0;
            for i in 0..bt.dim {
                let gap = (lb[i] - ha[i]).max(la[i] - hb[i]).max(0.0);
                let span = (ha[i] - lb[i]).abs().max((hb[i] - la[i]).abs());
                near += gap * gap;
                far += span * span;
            }
            (near.sqrt() - dist, far.sqrt() - dist)
        }
    }
}

/// Sound lower and upper bounds on the robustness at `t` of every trace whose
/// samples lie in the given boxes.
pub fn robustness_bounds(f: &Formula, bt: &BoxTrace, t: usize) -> (f64, f64) {
    let rb = |g: &Formula, k: usize| robustness_bounds(g, bt, k);
    let max2 = |x: (f64, f64), y: (f64, f64)| (x.0.max(y.0), x.1.max(y.1));
    let min2 = |x: (f64, f64), y: (f64, f64)| (x.0.min(y.0), x.1.min(y.1));
    match f {
        Formula::True => (BIG, BIG),
        Formula::Atom(p) => {
            let (l, h) = atom_bounds(p, bt, t);
            (l.clamp(-BIG, BIG), h.clamp(-BIG, BIG))
        }
        Formula::Not(g) => {
            let (l, h) = rb(g, t);
            (-h, -l)
        }
        Formula::And(a, b) => min2(rb(a, t), rb(b, t)),
        Formula::Or(a, b) => max2(rb(a, t), rb(b, t)),
        Formula::Eventually(i, g) => {
            let end = (t + i.hi).min(bt.avail(g));
            (t + i.lo..=end).map(|k| rb(g, k)).fold((-BIG, -BIG), max2)
        }
        Formula::Always(i, g) => {
            let end = (t + i.hi).min(bt.avail(g));
            (t + i.lo..=end).map(|k| rb(g, k)).fold((BIG, BIG), min2)
        }
        Formula::Until(i, a, b) | Formula::Release(i, a, b) => {
            let until = matches!(f, Formula::Until(..));
            let (av_a, av_b) = (bt.avail(a), bt.avail(b));
            let mut acc = if until { (-BIG, -BIG) } else { (BIG, BIG) };
            for k in t + i.lo..=(t + i.hi).min(av_b) {
                let mut inner = rb(b, k);
                for j in (t + 1)..k.min(av_a.saturating_add(1)) {
                    inner = if until { min2(inner, rb(a, j)) } else { max2(inner, rb(a, j)) };
                }
                acc = if until { max2(acc, inner) } else { min2(acc, inner) };
            }
            acc
        }
    }
}
