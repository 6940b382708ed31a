#![allow(dead_code)]

use fairfly::stl::{Formula, Predicate, Region, Trace};
use rand::Rng;

pub fn region(rng: &mut impl Rng, dim: usize, name: &str) -> Region {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for _ in 0..dim {
        let a = rng.gen_range(-3.0..3.0);
        lo.push(a);
        hi.push(a + rng.gen_range(0.5..3.0));
    }
    Region::new(name, lo, hi).unwrap()
}

pub fn predicate(rng: &mut impl Rng, uavs: usize, dim: usize) -> Predicate {
    let uav = rng.gen_range(0..uavs);
    match rng.gen_range(0..4) {
        0 => Predicate::InBox {
            uav,
            region: region(rng, dim, "A"),
        },
        1 => Predicate::OutBox {
            uav,
            region: region(rng, dim, "B"),
        },
        2 => Predicate::HalfSpace {
            uav,
            coeffs: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            offset: rng.gen_range(-1.0..1.0),
        },
        _ if uavs > 1 => {
            let b = (uav + rng.gen_range(1..uavs)) % uavs;
            Predicate::Separation {
                a: uav,
                b,
                dist: rng.gen_range(0.1..3.0),
            }
        }
        _ => Predicate::HalfSpace {
            uav,
            coeffs: vec![1.0; dim],
            offset: 0.0,
        },
    }
}

fn interval(rng: &mut impl Rng) -> (usize, usize) {
    let lo = rng.gen_range(0..4);
    (lo, lo + rng.gen_range(0..4))
}

/// Random formula in negation normal form with at most `depth` nested
/// operators above the literals.
pub fn nnf_formula(rng: &mut impl Rng, depth: usize, uavs: usize, dim: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.2) {
        let a = Formula::atom(predicate(rng, uavs, dim));
        return if rng.gen_bool(0.3) { a.not() } else { a };
    }
    let sub = |rng: &mut _| nnf_formula(rng, depth - 1, uavs, dim);
    match rng.gen_range(0..6) {
        0 => sub(rng).and(sub(rng)),
        1 => sub(rng).or(sub(rng)),
        2 => {
            let (a, b) = interval(rng);
            Formula::eventually(a, b, sub(rng))
        }
        3 => {
            let (a, b) = interval(rng);
            Formula::always(a, b, sub(rng))
        }
        4 => {
            let (a, b) = interval(rng);
            Formula::until(a, b, sub(rng), sub(rng))
        }
        _ => {
            let (a, b) = interval(rng);
            let (l, r) = (sub(rng), sub(rng));
            Formula::Release(fairfly::stl::Interval::new(a as i64, b as i64).unwrap(), Box::new(l), Box::new(r))
        }
    }
}

/// Ragged trace with between 1 and `max_len` samples per UAV.
pub fn ragged_trace(rng: &mut impl Rng, uavs: usize, dim: usize, max_len: usize) -> Trace {
    let samples = (0..uavs)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            (0..len * dim).map(|_| rng.gen_range(-4.0..4.0)).collect()
        })
        .collect();
    Trace::new(1.0, dim, samples).unwrap()
}

fn point(tr: &Trace, n: usize, t: usize) -> Vec<f64> {
    let d = tr.dim();
    let s = tr.samples(n);
    let k = t.min(s.len() / d - 1);
    s[k * d..(k + 1) * d].to_vec()
}

fn atom_holds(p: &Predicate, tr: &Trace, t: usize) -> bool {
    match p {
        Predicate::InBox { uav, region } => {
            let x = point(tr, *uav, t);
            (0..x.len()).all(|i| region.lo[i] <= x[i] && x[i] <= region.hi[i])
        }
        Predicate::OutBox { uav, region } => {
            let x = point(tr, *uav, t);
            (0..x.len()).any(|i| x[i] <= region.lo[i] || x[i] >= region.hi[i])
        }
        Predicate::HalfSpace { uav, coeffs, offset } => {
            let x = point(tr, *uav, t);
            coeffs.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() >= *offset
        }
        Predicate::Separation { a, b, dist } => {
            let (x, y) = (point(tr, *a, t), point(tr, *b, t));
            x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>() >= dist * dist
        }
    }
}

fn mentioned(f: &Formula, out: &mut Vec<usize>) {
    match f {
        Formula::True => {}
        Formula::Atom(p) => match p {
            Predicate::InBox { uav, .. } | Predicate::OutBox { uav, .. } | Predicate::HalfSpace { uav, .. } => {
                out.push(*uav)
            }
            Predicate::Separation { a, b, .. } => out.extend([*a, *b]),
        },
        Formula::Not(g) | Formula::Eventually(_, g) | Formula::Always(_, g) => mentioned(g, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) | Formula::Release(_, a, b) => {
            mentioned(a, out);
            mentioned(b, out);
        }
    }
}

/// Last time index at which every UAV in `f` still has a sample.
fn last_index(f: &Formula, tr: &Trace) -> Option<usize> {
    let mut u = Vec::new();
    mentioned(f, &mut u);
    u.iter().map(|&n| tr.samples(n).len() / tr.dim() - 1).min()
}

fn in_window(k: usize, t: usize, lo: usize, hi: usize, g: &Formula, tr: &Trace) -> bool {
    k >= t + lo && k <= t + hi && last_index(g, tr).is_none_or(|l| k <= l)
}

/// Brute-force boolean satisfaction by quantifying over every index up to
/// `t + horizon`.
pub fn oracle(f: &Formula, tr: &Trace, t: usize) -> bool {
    let span = |hi: usize| t..=t + hi;
    match f {
        Formula::True => true,
        Formula::Atom(p) => atom_holds(p, tr, t),
        Formula::Not(g) => !oracle(g, tr, t),
        Formula::And(a, b) => oracle(a, tr, t) && oracle(b, tr, t),
        Formula::Or(a, b) => oracle(a, tr, t) || oracle(b, tr, t),
        Formula::Eventually(i, g) => span(i.hi).any(|k| in_window(k, t, i.lo, i.hi, g, tr) && oracle(g, tr, k)),
        Formula::Always(i, g) => span(i.hi).all(|k| !in_window(k, t, i.lo, i.hi, g, tr) || oracle(g, tr, k)),
        Formula::Until(i, a, b) => span(i.hi).any(|k| {
            in_window(k, t, i.lo, i.hi, b, tr)
                && oracle(b, tr, k)
                && (t + 1..k).all(|j| !in_window(j, t, 0, usize::MAX / 4, a, tr) || oracle(a, tr, j))
        }),
        Formula::Release(i, a, b) => span(i.hi).all(|k| {
            !in_window(k, t, i.lo, i.hi, b, tr)
                || oracle(b, tr, k)
                || (t + 1..k).any(|j| in_window(j, t, 0, usize::MAX / 4, a, tr) && oracle(a, tr, j))
        }),
    }
}
