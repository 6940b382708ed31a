//! Signal temporal logic over multi-UAV traces.
//!
//! Formulas are built from per-UAV and pairwise atomic predicates and bounded
//! temporal operators. Time is discrete: intervals are in sample indices and a
//! trace holds one position sequence per UAV. UAVs may stop at different
//! indices; a temporal operator only quantifies over indices at which every UAV
//! its operand mentions still has a sample (see [`semantics`]).

mod bounds;
mod parse;
mod semantics;
pub mod smooth;
mod trace;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bounds::{robustness_bounds, BoxTrace};
pub use parse::{parse, ParseContext};
pub use semantics::{availability, robustness, robustness_with_sentinel, satisfies};
pub use smooth::{smooth_robustness, SmoothEvaluator, SmoothValue};
pub use trace::Trace;

/// Stand-in for the infinite robustness of `true` and of empty temporal windows.
pub const BIG: f64 = 1e9;

/// Closed interval of sample offsets `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
}

impl Interval {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo < 0 || hi < lo {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self {
            lo: lo as usize,
            hi: hi as usize,
        })
    }

    pub(crate) fn span(lo: usize, hi: usize) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Named axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(name: impl Into<String>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Dimension(format!("region `{name}` has mismatched corners")));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::Scenario(format!("region `{name}` has lo > hi")));
        }
        Ok(Self { name, lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    /// Signed inf-norm depth: positive inside, negative outside.
    pub fn depth(&self, p: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for (i, x) in p.iter().enumerate() {
            m = m.min(x - self.lo[i]).min(self.hi[i] - x);
        }
        m
    }

    pub fn intersects(&self, other: &Region) -> bool {
        (0..self.dim()).all(|i| self.lo[i] < other.hi[i] && other.lo[i] < self.hi[i])
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }
}

/// Atomic predicate `mu(x) >= 0`. UAV indices are zero-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    /// UAV inside a box; `mu` is the inf-norm depth into the box.
    InBox { uav: usize, region: Region },
    /// UAV outside a box; `mu` is the negated depth.
    OutBox { uav: usize, region: Region },
    /// `coeffs . x - offset >= 0`.
    HalfSpace {
        uav: usize,
        coeffs: Vec<f64>,
        offset: f64,
    },
    /// `||x_a - x_b|| - dist >= 0`.
    Separation { a: usize, b: usize, dist: f64 },
}

impl Predicate {
    pub fn uavs(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match self {
            Predicate::InBox { uav, .. }
            | Predicate::OutBox { uav, .. }
            | Predicate::HalfSpace { uav, .. } => (*uav, None),
            Predicate::Separation { a, b, .. } => (*a, Some(*b)),
        };
        std::iter::once(a).chain(b)
    }

    /// Evaluates `mu` given a position lookup per UAV.
    pub fn value<'a>(&self, pos: impl Fn(usize) -> &'a [f64]) -> f64 {
        match self {
            Predicate::InBox { uav, region } => region.depth(pos(*uav)),
            Predicate::OutBox { uav, region } => -region.depth(pos(*uav)),
            Predicate::HalfSpace { uav, coeffs, offset } => {
                coeffs.iter().zip(pos(*uav)).map(|(a, x)| a * x).sum::<f64>() - offset
            }
            Predicate::Separation { a, b, dist } => {
                let (pa, pb) = (pos(*a), pos(*b));
                let d2: f64 = pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum();
                d2.sqrt() - dist
            }
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let got = match self {
            Predicate::InBox { region, .. } | Predicate::OutBox { region, .. } => region.dim(),
            Predicate::HalfSpace { coeffs, .. } => coeffs.len(),
            Predicate::Separation { .. } => dim,
        };
        if got != dim {
            return Err(Error::Dimension(format!(
                "predicate `{self}` has dimension {got}, expected {dim}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    True,
    Atom(Predicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
    /// `lhs U rhs`: `rhs` at some `t'` in the window, `lhs` strictly between.
    Until(Interval, Box<Formula>, Box<Formula>),
    /// Dual of until: `lhs R rhs == !(!lhs U !rhs)`.
    Release(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(p: Predicate) -> Self {
        Formula::Atom(p)
    }

    pub fn falsum() -> Self {
        Formula::Not(Box::new(Formula::True))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, rhs: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Formula) -> Self {
        Formula::Or(Box::new(self), Box::new(rhs))
    }

    pub fn eventually(lo: usize, hi: usize, f: Formula) -> Self {
        Formula::Eventually(Interval::span(lo, hi), Box::new(f))
    }

    pub fn always(lo: usize, hi: usize, f: Formula) -> Self {
        Formula::Always(Interval::span(lo, hi), Box::new(f))
    }

    pub fn until(lo: usize, hi: usize, lhs: Formula, rhs: Formula) -> Self {
        Formula::Until(Interval::span(lo, hi), Box::new(lhs), Box::new(rhs))
    }

    /// Left-folded conjunction; `true` when empty.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Self {
        parts
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    /// Largest sample index an evaluation at `t = 0` can touch.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(a, b) | Formula::Or(a, b) => a.horizon().max(b.horizon()),
            Formula::Eventually(i, f) | Formula::Always(i, f) => i.hi + f.horizon(),
            Formula::Until(i, a, b) | Formula::Release(i, a, b) => {
                i.hi + a.horizon().max(b.horizon())
            }
        }
    }

    /// UAV indices mentioned anywhere in the formula.
    pub fn uavs(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_uavs(&mut out);
        out
    }

    fn collect_uavs(&self, out: &mut BTreeSet<usize>) {
        match self {
            Formula::True => {}
            Formula::Atom(p) => out.extend(p.uavs()),
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Always(_, f) => {
                f.collect_uavs(out)
            }
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Until(_, a, b)
            | Formula::Release(_, a, b) => {
                a.collect_uavs(out);
                b.collect_uavs(out);
            }
        }
    }

    /// Checks UAV indices against the fleet size and predicate dimensions.
    pub fn validate(&self, fleet: usize, dim: usize) -> Result<()> {
        if let Some(&uav) = self.uavs().iter().find(|&&u| u >= fleet) {
            return Err(Error::UavOutOfRange { uav: uav + 1, fleet });
        }
        self.visit_atoms(&mut |p| p.check_dim(dim))
    }

    fn visit_atoms(&self, f: &mut impl FnMut(&Predicate) -> Result<()>) -> Result<()> {
        match self {
            Formula::True => Ok(()),
            Formula::Atom(p) => f(p),
            Formula::Not(g) | Formula::Eventually(_, g) | Formula::Always(_, g) => g.visit_atoms(f),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Until(_, a, b)
            | Formula::Release(_, a, b) => {
                a.visit_atoms(f)?;
                b.visit_atoms(f)
            }
        }
    }

    /// Negation normal form: `Not` only wraps atoms and `true`.
    pub fn to_nnf(&self) -> Formula {
        self.nnf(false)
    }

    fn nnf(&self, negate: bool) -> Formula {
        let b = |f: Formula| Box::new(f);
        match (self, negate) {
            (Formula::True | Formula::Atom(_), false) => self.clone(),
            (Formula::True | Formula::Atom(_), true) => Formula::Not(b(self.clone())),
            (Formula::Not(f), _) => f.nnf(!negate),
            (Formula::And(x, y), false) => Formula::And(b(x.nnf(false)), b(y.nnf(false))),
            (Formula::And(x, y), true) => Formula::Or(b(x.nnf(true)), b(y.nnf(true))),
            (Formula::Or(x, y), false) => Formula::Or(b(x.nnf(false)), b(y.nnf(false))),
            (Formula::Or(x, y), true) => Formula::And(b(x.nnf(true)), b(y.nnf(true))),
            (Formula::Eventually(i, f), false) => Formula::Eventually(*i, b(f.nnf(false))),
            (Formula::Eventually(i, f), true) => Formula::Always(*i, b(f.nnf(true))),
            (Formula::Always(i, f), false) => Formula::Always(*i, b(f.nnf(false))),
            (Formula::Always(i, f), true) => Formula::Eventually(*i, b(f.nnf(true))),
            (Formula::Until(i, x, y), false) => Formula::Until(*i, b(x.nnf(false)), b(y.nnf(false))),
            (Formula::Until(i, x, y), true) => Formula::Release(*i, b(x.nnf(true)), b(y.nnf(true))),
            (Formula::Release(i, x, y), false) => {
                Formula::Release(*i, b(x.nnf(false)), b(y.nnf(false)))
            }
            (Formula::Release(i, x, y), true) => Formula::Until(*i, b(x.nnf(true)), b(y.nnf(true))),
        }
    }

    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::True | Formula::Atom(_) => true,
            Formula::Not(f) => matches!(**f, Formula::True | Formula::Atom(_)),
            Formula::Eventually(_, f) | Formula::Always(_, f) => f.is_nnf(),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Until(_, a, b)
            | Formula::Release(_, a, b) => a.is_nnf() && b.is_nnf(),
        }
    }

    /// Nesting depth (atoms count as depth 1).
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 1,
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Always(_, f) => 1 + f.depth(),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Until(_, a, b)
            | Formula::Release(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Renders the formula with custom UAV names (index `n` -> `names[n]`).
    pub fn to_text(&self, names: &[String]) -> String {
        let mut s = String::new();
        self.write(&mut s, &|n| names.get(n).cloned().unwrap_or_else(|| format!("u{}", n + 1)))
            .expect("writing to a String cannot fail");
        s
    }

    fn write(&self, w: &mut impl fmt::Write, name: &dyn Fn(usize) -> String) -> fmt::Result {
        match self {
            Formula::True => w.write_str("true"),
            Formula::Atom(p) => write_predicate(p, w, name),
            Formula::Not(f) => {
                w.write_char('!')?;
                f.write(w, name)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let op = if matches!(self, Formula::And(..)) { "&" } else { "|" };
                w.write_char('(')?;
                a.write(w, name)?;
                write!(w, " {op} ")?;
                b.write(w, name)?;
                w.write_char(')')
            }
            Formula::Eventually(i, f) | Formula::Always(i, f) => {
                let op = if matches!(self, Formula::Eventually(..)) { 'F' } else { 'G' };
                write!(w, "{op}{i}")?;
                f.write(w, name)
            }
            Formula::Until(i, a, b) | Formula::Release(i, a, b) => {
                let op = if matches!(self, Formula::Until(..)) { 'U' } else { 'R' };
                w.write_char('(')?;
                a.write(w, name)?;
                write!(w, " {op}{i} ")?;
                b.write(w, name)?;
                w.write_char(')')
            }
        }
    }
}

fn write_predicate(
    p: &Predicate,
    w: &mut impl fmt::Write,
    name: &dyn Fn(usize) -> String,
) -> fmt::Result {
    match p {
        Predicate::InBox { uav, region } => write!(w, "in({}, {})", name(*uav), region.name),
        Predicate::OutBox { uav, region } => write!(w, "out({}, {})", name(*uav), region.name),
        Predicate::HalfSpace { uav, coeffs, offset } => {
            write!(w, "hs({}", name(*uav))?;
            for c in coeffs {
                write!(w, ", {c:?}")?;
            }
            write!(w, ", {offset:?})")
        }
        Predicate::Separation { a, b, dist } => {
            write!(w, "sep({}, {}, {dist:?})", name(*a), name(*b))
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_predicate(self, f, &|n| format!("u{}", n + 1))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, &|n| format!("u{}", n + 1))
    }
}
