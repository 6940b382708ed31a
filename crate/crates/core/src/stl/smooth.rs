//! Smooth robustness with reverse-mode gradients.
//!
//! Every `min`/`max` in the robustness recursion, including the one inside box
//! depth, is replaced by a log-sum-exp soft version with sharpness `kappa`.
//! Sentinel values (`+-BIG`) are handled like the exact semantics: a `+BIG`
//! operand saturates a max, `-BIG` operands are ignored by it, and a single
//! remaining operand passes through unchanged.
//!
//! Evaluation records a tape (value plus weighted edges to its operands) that
//! is then swept backwards to get the gradient with respect to every trace
//! coordinate.

use super::{Formula, Predicate, Region, Trace, BIG};

/// Value and gradient; `grad[n]` has the layout of `trace.samples(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothValue {
    pub value: f64,
    pub grad: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug)]
enum Node {
    True,
    Atom(usize),
    Not(usize),
    /// Operands are `children[start..end]`.
    And(usize, usize),
    Or(usize, usize),
    Eventually(usize, usize, usize),
    Always(usize, usize, usize),
    Until(usize, usize, usize, usize),
    Release(usize, usize, usize, usize),
}

/// Reusable evaluator for one formula.
#[derive(Clone, Debug)]
pub struct SmoothEvaluator {
    nodes: Vec<Node>,
    atoms: Vec<Predicate>,
    children: Vec<usize>,
    node_uavs: Vec<Vec<usize>>,
    root: usize,
    times: usize,
    kappa: f64,
    hard: bool,
    // per-evaluation buffers
    avail: Vec<usize>,
    memo: Vec<u32>,
    values: Vec<f64>,
    starts: Vec<u32>,
    edges: Vec<(u32, f64)>,
    stack: Vec<u32>,
    adj: Vec<f64>,
    offsets: Vec<usize>,
    lasts: Vec<usize>,
    dim: usize,
}

const NONE: u32 = u32::MAX;

impl SmoothEvaluator {
    /// Soft evaluator with sharpness `kappa > 0`.
    pub fn new(f: &Formula, kappa: f64) -> Self {
        assert!(kappa > 0.0, "kappa must be positive");
        let mut c = Compiled::default();
        let root = c.compile(f);
        Self {
            nodes: c.nodes,
            atoms: c.atoms,
            children: c.children,
            node_uavs: c.uavs,
            root,
            times: f.horizon() + 1,
            kappa,
            hard: kappa.is_infinite(),
            avail: Vec::new(),
            memo: Vec::new(),
            values: Vec::new(),
            starts: Vec::new(),
            edges: Vec::new(),
            stack: Vec::new(),
            adj: Vec::new(),
            offsets: Vec::new(),
            lasts: Vec::new(),
            dim: 0,
        }
    }

    /// Evaluator using hard min/max; its value equals exact robustness and its
    /// gradient is a subgradient.
    pub fn hard(f: &Formula) -> Self {
        Self::new(f, f64::INFINITY)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn value(&mut self, trace: &Trace) -> f64 {
        let root = self.forward(trace);
        self.values[root as usize]
    }

    pub fn value_and_grad(&mut self, trace: &Trace) -> SmoothValue {
        let mut grad: Vec<Vec<f64>> = (0..trace.uav_count())
            .map(|n| vec![0.0; trace.samples(n).len()])
            .collect();
        let value = self.value_and_grad_into(trace, &mut grad);
        SmoothValue { value, grad }
    }

    /// Writes the gradient into `grad` (same layout as the trace samples) and
    /// returns the value.
    pub fn value_and_grad_into(&mut self, trace: &Trace, grad: &mut [Vec<f64>]) -> f64 {
        let root = self.forward(trace) as usize;
        self.adj.clear();
        self.adj.resize(self.values.len(), 0.0);
        self.adj[root] = 1.0;
        let leaves = *self.offsets.last().unwrap_or(&0);
        for j in (leaves..self.values.len()).rev() {
            let a = self.adj[j];
            if a == 0.0 {
                continue;
            }
            let (s, e) = (self.starts[j] as usize, self.starts[j + 1] as usize);
            for &(src, w) in &self.edges[s..e] {
                self.adj[src as usize] += w * a;
            }
        }
        for (n, g) in grad.iter_mut().enumerate() {
            let off = self.offsets[n];
            let len = g.len();
            g.copy_from_slice(&self.adj[off..off + len]);
        }
        self.values[root]
    }

    fn forward(&mut self, trace: &Trace) -> u32 {
        self.dim = trace.dim();
        self.offsets.clear();
        self.lasts.clear();
        self.values.clear();
        self.starts.clear();
        self.edges.clear();
        self.stack.clear();
        self.starts.push(0);
        let mut off = 0;
        for n in 0..trace.uav_count() {
            self.offsets.push(off);
            self.lasts.push(trace.last(n));
            let s = trace.samples(n);
            off += s.len();
            self.values.extend_from_slice(s);
            self.starts.extend(std::iter::repeat_n(0, s.len()));
        }
        self.offsets.push(off);
        self.avail.clear();
        for us in &self.node_uavs {
            let a = us.iter().map(|&n| self.lasts[n]).min().unwrap_or(usize::MAX);
            self.avail.push(a);
        }
        self.memo.clear();
        self.memo.resize(self.nodes.len() * self.times, NONE);
        let atoms = std::mem::take(&mut self.atoms);
        let root = self.eval(&atoms, self.root, 0);
        self.atoms = atoms;
        root
    }

    fn push(&mut self, value: f64) -> u32 {
        self.values.push(value);
        self.starts.push(self.edges.len() as u32);
        (self.values.len() - 1) as u32
    }

    fn leaf(&self, n: usize, k: usize, i: usize) -> u32 {
        (self.offsets[n] + k.min(self.lasts[n]) * self.dim + i) as u32
    }

    fn eval(&mut self, atoms: &[Predicate], node: usize, t: usize) -> u32 {
        let slot = node * self.times + t;
        if t < self.times && self.memo[slot] != NONE {
            return self.memo[slot];
        }
        let idx = match self.nodes[node] {
            Node::True => self.push(BIG),
            Node::Atom(p) => self.atom(&atoms[p], t),
            Node::Not(c) => {
                let c = self.eval(atoms, c, t);
                self.edges.push((c, -1.0));
                self.push(-self.values[c as usize])
            }
            Node::And(s, e) | Node::Or(s, e) => {
                let base = self.stack.len();
                for i in s..e {
                    let c = self.children[i];
                    let r = self.eval(atoms, c, t);
                    self.stack.push(r);
                }
                self.soft(base, matches!(self.nodes[node], Node::Or(..)))
            }
            Node::Eventually(lo, hi, c) | Node::Always(lo, hi, c) => {
                let base = self.stack.len();
                let end = (t + hi).min(self.avail[c]);
                for k in t + lo..=end {
                    let r = self.eval(atoms, c, k);
                    self.stack.push(r);
                }
                self.soft(base, matches!(self.nodes[node], Node::Eventually(..)))
            }
            Node::Until(lo, hi, a, b) | Node::Release(lo, hi, a, b) => {
                let until = matches!(self.nodes[node], Node::Until(..));
                let (av_a, av_b) = (self.avail[a], self.avail[b]);
                let base = self.stack.len();
                for k in t + lo..=(t + hi).min(av_b) {
                    let inner = self.stack.len();
                    let r = self.eval(atoms, b, k);
                    self.stack.push(r);
                    for j in (t + 1)..k.min(av_a.saturating_add(1)) {
                        let r = self.eval(atoms, a, j);
                        self.stack.push(r);
                    }
                    let r = self.soft(inner, !until);
                    self.stack.push(r);
                }
                self.soft(base, until)
            }
        };
        if t < self.times {
            self.memo[slot] = idx;
        }
        idx
    }

    /// Soft max (or min) of the tape entries on the stack above `base`; pops them.
    fn soft(&mut self, base: usize, max: bool) -> u32 {
        let sign = if max { 1.0 } else { -1.0 };
        let mut m = f64::NEG_INFINITY;
        let mut arg = NONE;
        let mut count = 0;
        for &i in &self.stack[base..] {
            let y = sign * self.values[i as usize];
            if y >= BIG {
                self.stack.truncate(base);
                return self.push(sign * BIG);
            }
            if y <= -BIG {
                continue;
            }
            count += 1;
            if y > m {
                m = y;
                arg = i;
            }
        }
        if count == 0 {
            self.stack.truncate(base);
            return self.push(-sign * BIG);
        }
        if count == 1 || self.hard {
            self.stack.truncate(base);
            return arg;
        }
        let k = self.kappa;
        let mut sum = 0.0;
        for &i in &self.stack[base..] {
            let y = sign * self.values[i as usize];
            if y > -BIG {
                sum += (k * (y - m)).exp();
            }
        }
        for j in base..self.stack.len() {
            let i = self.stack[j];
            let y = sign * self.values[i as usize];
            if y > -BIG {
                self.edges.push((i, (k * (y - m)).exp() / sum));
            }
        }
        self.stack.truncate(base);
        self.push(sign * (m + sum.ln() / k))
    }

    fn atom(&mut self, p: &Predicate, t: usize) -> u32 {
        let value = match p {
            Predicate::InBox { uav, region } => self.box_depth(*uav, region, t, 1.0),
            Predicate::OutBox { uav, region } => -self.box_depth(*uav, region, t, -1.0),
            Predicate::HalfSpace { uav, coeffs, offset } => {
                let mut v = 0.0;
                for (i, c) in coeffs.iter().enumerate() {
                    let l = self.leaf(*uav, t, i);
                    v += c * self.values[l as usize];
                    self.edges.push((l, *c));
                }
                v - offset
            }
            Predicate::Separation { a, b, dist } => {
                let mut d2 = 0.0;
                for i in 0..self.dim {
                    let diff = self.values[self.leaf(*a, t, i) as usize]
                        - self.values[self.leaf(*b, t, i) as usize];
                    d2 += diff * diff;
                }
                let d = d2.sqrt();
                if d > 0.0 {
                    for i in 0..self.dim {
                        let (la, lb) = (self.leaf(*a, t, i), self.leaf(*b, t, i));
                        let g = (self.values[la as usize] - self.values[lb as usize]) / d;
                        self.edges.push((la, g));
                        self.edges.push((lb, -g));
                    }
                }
                d - dist
            }
        };
        self.push(value.clamp(-BIG, BIG))
    }

    /// Pushes the edges of the (soft) box depth scaled by `scale` and returns
    /// the unscaled depth.
    fn box_depth(&mut self, uav: usize, region: &Region, t: usize, scale: f64) -> f64 {
        let faces = |x: f64, i: usize| [(x - region.lo[i], 1.0), (region.hi[i] - x, -1.0)];
        let mut m = f64::INFINITY;
        let mut arg = (0, 0.0);
        for i in 0..self.dim {
            let x = self.values[self.leaf(uav, t, i) as usize];
            for (y, s) in faces(x, i) {
                if y < m {
                    m = y;
                    arg = (i, s);
                }
            }
        }
        if self.hard {
            let l = self.leaf(uav, t, arg.0);
            self.edges.push((l, scale * arg.1));
            return m;
        }
        let k = self.kappa;
        let mut sum = 0.0;
        for i in 0..self.dim {
            let x = self.values[self.leaf(uav, t, i) as usize];
            for (y, _) in faces(x, i) {
                sum += (-k * (y - m)).exp();
            }
        }
        for i in 0..self.dim {
            let l = self.leaf(uav, t, i);
            let x = self.values[l as usize];
            let w: f64 = faces(x, i)
                .iter()
                .map(|(y, s)| s * (-k * (y - m)).exp() / sum)
                .sum();
            self.edges.push((l, scale * w));
        }
        m - sum.ln() / k
    }
}

#[derive(Default)]
struct Compiled {
    nodes: Vec<Node>,
    atoms: Vec<Predicate>,
    children: Vec<usize>,
    uavs: Vec<Vec<usize>>,
}

impl Compiled {
    fn compile(&mut self, f: &Formula) -> usize {
        let node = match f {
            Formula::True => Node::True,
            Formula::Atom(p) => {
                self.atoms.push(p.clone());
                Node::Atom(self.atoms.len() - 1)
            }
            Formula::Not(g) => Node::Not(self.compile(g)),
            Formula::And(..) | Formula::Or(..) => {
                let and = matches!(f, Formula::And(..));
                let mut parts = Vec::new();
                flatten(f, and, &mut parts);
                let ids: Vec<usize> = parts.into_iter().map(|g| self.compile(g)).collect();
                let s = self.children.len();
                self.children.extend(ids);
                let e = self.children.len();
                if and {
                    Node::And(s, e)
                } else {
                    Node::Or(s, e)
                }
            }
            Formula::Eventually(i, g) => Node::Eventually(i.lo, i.hi, self.compile(g)),
            Formula::Always(i, g) => Node::Always(i.lo, i.hi, self.compile(g)),
            Formula::Until(i, a, b) => Node::Until(i.lo, i.hi, self.compile(a), self.compile(b)),
            Formula::Release(i, a, b) => {
                Node::Release(i.lo, i.hi, self.compile(a), self.compile(b))
            }
        };
        self.nodes.push(node);
        self.uavs.push(f.uavs().into_iter().collect());
        self.nodes.len() - 1
    }
}

fn flatten<'a>(f: &'a Formula, and: bool, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::And(a, b) if and => {
            flatten(a, and, out);
            flatten(b, and, out);
        }
        Formula::Or(a, b) if !and => {
            flatten(a, and, out);
            flatten(b, and, out);
        }
        _ => out.push(f),
    }
}

/// One-shot smooth robustness at `t = 0`.
pub fn smooth_robustness(f: &Formula, trace: &Trace, kappa: f64) -> f64 {
    SmoothEvaluator::new(f, kappa).value(trace)
}
