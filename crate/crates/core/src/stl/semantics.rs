//! Boolean and quantitative semantics over finite, ragged traces.
//!
//! A temporal operator evaluated at `t` ranges over `(t + I)` intersected with
//! the indices available to its operand, i.e. the indices at which every UAV the
//! operand mentions still has a sample. Eventually/until over an empty range is
//! false (robustness `-BIG`), always/release over an empty range is true
//! (`+BIG`). Atoms evaluated past a UAV's final sample read that final sample.

use super::{Formula, Trace, BIG};

/// Last index available to a sub-formula: the minimum final index over the
/// UAVs it mentions, or `usize::MAX` if it mentions none.
pub fn availability(f: &Formula, trace: &Trace) -> usize {
    f.uavs()
        .into_iter()
        .map(|n| trace.last(n))
        .min()
        .unwrap_or(usize::MAX)
}

fn window(t: usize, lo: usize, hi: usize, avail: usize) -> std::ops::RangeInclusive<usize> {
    let start = t.saturating_add(lo);
    let end = t.saturating_add(hi).min(avail);
    start..=end
}

/// Range of `t''` strictly between `t` and `t'` that are available.
fn between(t: usize, t_prime: usize, avail: usize) -> std::ops::Range<usize> {
    (t + 1)..t_prime.min(avail.saturating_add(1))
}

/// `(trace, t) |= f`.
pub fn satisfies(f: &Formula, trace: &Trace, t: usize) -> bool {
    match f {
        Formula::True => true,
        Formula::Atom(p) => p.value(|n| trace.pos(n, t)) >= 0.0,
        Formula::Not(g) => !satisfies(g, trace, t),
        Formula::And(a, b) => satisfies(a, trace, t) && satisfies(b, trace, t),
        Formula::Or(a, b) => satisfies(a, trace, t) || satisfies(b, trace, t),
        Formula::Eventually(i, g) => {
            let avail = availability(g, trace);
            window(t, i.lo, i.hi, avail).any(|k| satisfies(g, trace, k))
        }
        Formula::Always(i, g) => {
            let avail = availability(g, trace);
            window(t, i.lo, i.hi, avail).all(|k| satisfies(g, trace, k))
        }
        Formula::Until(i, a, b) => {
            let (av_a, av_b) = (availability(a, trace), availability(b, trace));
            window(t, i.lo, i.hi, av_b).any(|k| {
                satisfies(b, trace, k) && between(t, k, av_a).all(|j| satisfies(a, trace, j))
            })
        }
        Formula::Release(i, a, b) => {
            let (av_a, av_b) = (availability(a, trace), availability(b, trace));
            window(t, i.lo, i.hi, av_b).all(|k| {
                satisfies(b, trace, k) || between(t, k, av_a).any(|j| satisfies(a, trace, j))
            })
        }
    }
}

/// Exact robustness with the default sentinel [`BIG`].
pub fn robustness(f: &Formula, trace: &Trace, t: usize) -> f64 {
    robustness_with_sentinel(f, trace, t, BIG)
}

/// Exact robustness where `+-big` stands in for infinite values.
pub fn robustness_with_sentinel(f: &Formula, trace: &Trace, t: usize, big: f64) -> f64 {
    let rho = |g: &Formula, k: usize| robustness_with_sentinel(g, trace, k, big);
    match f {
        Formula::True => big,
        Formula::Atom(p) => p.value(|n| trace.pos(n, t)).clamp(-big, big),
        Formula::Not(g) => -rho(g, t),
        Formula::And(a, b) => rho(a, t).min(rho(b, t)),
        Formula::Or(a, b) => rho(a, t).max(rho(b, t)),
        Formula::Eventually(i, g) => {
            let avail = availability(g, trace);
            window(t, i.lo, i.hi, avail).map(|k| rho(g, k)).fold(-big, f64::max)
        }
        Formula::Always(i, g) => {
            let avail = availability(g, trace);
            window(t, i.lo, i.hi, avail).map(|k| rho(g, k)).fold(big, f64::min)
        }
        Formula::Until(i, a, b) => {
            let (av_a, av_b) = (availability(a, trace), availability(b, trace));
            let w = window(t, i.lo, i.hi, av_b);
            let mut best = -big;
            // running min of lhs over the available indices in (t, t')
            let mut run = between(t, *w.start(), av_a).map(|j| rho(a, j)).fold(big, f64::min);
            for k in w {
                best = best.max(rho(b, k).min(run));
                if k > t && k <= av_a {
                    run = run.min(rho(a, k));
                }
            }
            best
        }
        Formula::Release(i, a, b) => {
            let (av_a, av_b) = (availability(a, trace), availability(b, trace));
            let w = window(t, i.lo, i.hi, av_b);
            let mut worst = big;
            let mut run = between(t, *w.start(), av_a).map(|j| rho(a, j)).fold(-big, f64::max);
            for k in w {
                worst = worst.min(rho(b, k).max(run));
                if k > t && k <= av_a {
                    run = run.max(rho(a, k));
                }
            }
            worst
        }
    }
}
