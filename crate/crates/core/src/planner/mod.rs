//! Fair planning: an outer search over length tuples, fairest first, with an
//! inner robustness maximization deciding whether each tuple is flyable.

mod ascent;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{FleetState, InputPlan, UavModel};
use crate::error::{Error, Result};
use crate::fairness::FairnessSpec;
use crate::lengths::{
    alpha, pl_bounds, sample_random, Candidates, LengthTuple, PLBox, PruneRule, SearchFrontier,
    ENUMERATION_CAP,
};
use crate::stl::{robustness, robustness_bounds, Formula, SmoothEvaluator, Trace};

/// Rewrites interval upper bounds so that no temporal operator looks past the
/// last sample of the UAVs it mentions. A window that is empty at every
/// reachable evaluation time collapses to `[lo, lo]` with its operand left
/// alone, so every subformula keeps the UAVs it mentions and with them its
/// availability. On traces with these lengths the result has the same
/// robustness as `f`.
pub fn truncate_mission(f: &Formula, lengths: &[usize]) -> Formula {
    trunc(f, 0, lengths)
}

fn avail(f: &Formula, lengths: &[usize]) -> usize {
    f.uavs().into_iter().map(|n| lengths[n]).min().unwrap_or(usize::MAX)
}

fn trunc(f: &Formula, base: usize, lengths: &[usize]) -> Formula {
    let b = Box::new;
    match f {
        Formula::True | Formula::Atom(_) => f.clone(),
        Formula::Not(g) => Formula::Not(b(trunc(g, base, lengths))),
        Formula::And(x, y) => Formula::And(b(trunc(x, base, lengths)), b(trunc(y, base, lengths))),
        Formula::Or(x, y) => Formula::Or(b(trunc(x, base, lengths)), b(trunc(y, base, lengths))),
        Formula::Eventually(i, g) | Formula::Always(i, g) => {
            let a = avail(g, lengths);
            let mut i = *i;
            let g = if a < base + i.lo {
                i.hi = i.lo;
                g.clone()
            } else {
                i.hi = i.hi.min(a - base);
                b(trunc(g, base + i.lo, lengths))
            };
            if matches!(f, Formula::Eventually(..)) {
                Formula::Eventually(i, g)
            } else {
                Formula::Always(i, g)
            }
        }
        Formula::Until(i, x, y) | Formula::Release(i, x, y) => {
            let a = avail(y, lengths);
            let mut i = *i;
            let (x, y) = if a < base + i.lo {
                i.hi = i.lo;
                (x.clone(), y.clone())
            } else {
                i.hi = i.hi.min(a - base);
                (b(trunc(x, base + 1, lengths)), b(trunc(y, base + i.lo, lengths)))
            };
            if matches!(f, Formula::Until(..)) {
                Formula::Until(i, x, y)
            } else {
                Formula::Release(i, x, y)
            }
        }
    }
}

/// Knobs of the inner robustness maximization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerConfig {
    /// Sharpness of the smooth min/max.
    pub kappa: f64,
    /// Restarts: the first starts from the zero plan, the rest are random.
    pub restarts: usize,
    pub max_iters: usize,
    /// Remaining restarts are skipped once exact robustness exceeds this.
    pub margin: f64,
    pub seed: u64,
    /// Reject tuples whose reachable sets cannot satisfy the mission.
    pub precheck: bool,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            kappa: 25.0,
            restarts: 4,
            max_iters: 400,
            margin: 1e-3,
            seed: 0,
            precheck: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub inner: InnerConfig,
    /// Boxes up to this many tuples are sorted; larger ones are expanded lazily.
    pub enumeration_cap: u64,
    /// Every this many outer iterations a random tuple is probed (0 disables).
    pub random_every: usize,
    pub prune: PruneRule,
    /// Upper bound on outer iterations.
    pub max_outer: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            inner: InnerConfig::default(),
            enumeration_cap: ENUMERATION_CAP as u64,
            random_every: 5,
            prune: PruneRule::Dominance,
            max_outer: 1_000_000,
        }
    }
}

/// Outcome of one inner maximization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerResult {
    pub plan: InputPlan,
    /// Exact robustness of the plan.
    pub robustness: f64,
    /// `robustness > 0`.
    pub feasible: bool,
    pub restarts: usize,
    pub iterations: usize,
    /// Rejected by the reachability check without optimizing.
    pub prechecked: bool,
    #[serde(skip)]
    pub elapsed_ms: f64,
}

/// Robustness maximization over the inputs still to be applied, given fixed
/// position history (offline: just the start positions).
#[derive(Clone, Debug)]
pub(crate) struct Problem {
    pub formula: Formula,
    pub model: UavModel,
    /// Flattened executed positions per UAV; the last sample is the current one.
    pub history: Vec<Vec<f64>>,
    pub vel: Vec<Vec<f64>>,
    pub steps: Vec<usize>,
    offsets: Vec<usize>,
}

impl Problem {
    pub fn new(
        formula: Formula,
        model: UavModel,
        history: Vec<Vec<f64>>,
        vel: Vec<Vec<f64>>,
        steps: Vec<usize>,
    ) -> Self {
        let mut offsets = vec![0];
        for &s in &steps {
            offsets.push(offsets.last().unwrap() + s * model.dim);
        }
        Self {
            formula,
            model,
            history,
            vel,
            steps,
            offsets,
        }
    }

    pub fn size(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn current(&self, n: usize) -> &[f64] {
        let h = &self.history[n];
        &h[h.len() - self.model.dim..]
    }

    pub fn trace(&self, x: &[f64]) -> Trace {
        let d = self.model.dim;
        let samples = (0..self.history.len())
            .map(|n| {
                let h = &self.history[n];
                let mut s = Vec::with_capacity(h.len() + self.steps[n] * d);
                s.extend_from_slice(&h[..h.len() - d]);
                let u = &x[self.offsets[n]..self.offsets[n + 1]];
                self.model.rollout_into(self.current(n), &self.vel[n], u, &mut s);
                s
            })
            .collect();
        Trace::new(self.model.dt, d, samples).expect("rollout shapes are consistent")
    }

    pub fn plan(&self, x: &[f64]) -> InputPlan {
        InputPlan {
            dim: self.model.dim,
            inputs: (0..self.steps.len())
                .map(|n| x[self.offsets[n]..self.offsets[n + 1]].to_vec())
                .collect(),
        }
    }

    pub fn flatten(&self, plan: &InputPlan) -> Vec<f64> {
        let mut x = vec![0.0; self.size()];
        for n in 0..self.steps.len() {
            let dst = &mut x[self.offsets[n]..self.offsets[n + 1]];
            let src = &plan.inputs[n];
            let k = dst.len().min(src.len());
            dst[..k].copy_from_slice(&src[..k]);
        }
        x
    }

    pub fn exact(&self, x: &[f64]) -> f64 {
        robustness(&self.formula, &self.trace(x), 0)
    }

    fn value_grad(&self, ev: &mut SmoothEvaluator, x: &[f64], grad: &mut [f64], buf: &mut Vec<Vec<f64>>) -> f64 {
        let tr = self.trace(x);
        buf.resize(tr.uav_count(), Vec::new());
        for (n, b) in buf.iter_mut().enumerate() {
            b.clear();
            b.resize(tr.samples(n).len(), 0.0);
        }
        let v = ev.value_and_grad_into(&tr, buf);
        let d = self.model.dim;
        for n in 0..self.steps.len() {
            let start = self.history[n].len() - d;
            let u = &x[self.offsets[n]..self.offsets[n + 1]];
            self.model
                .pullback(&self.vel[n], u, &buf[n][start..], &mut grad[self.offsets[n]..self.offsets[n + 1]]);
        }
        v
    }

    /// Ascent from `x`; returns exact robustness and iterations.
    pub fn polish(&self, x: &mut Vec<f64>, cfg: &InnerConfig) -> (f64, usize) {
        let mut ev = SmoothEvaluator::new(&self.formula, cfg.kappa);
        let mut buf = Vec::new();
        let stats = ascent::maximize(x, self.model.u_max, cfg.max_iters, |x, g| {
            self.value_grad(&mut ev, x, g, &mut buf)
        });
        (self.exact(x), stats.iterations)
    }

    pub fn random_start(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = self.model.u_max;
        (0..self.size()).map(|_| rng.gen_range(-u..=u)).collect()
    }

    /// Upper bound on the robustness of any plan is non-positive.
    pub fn certainly_infeasible(&self) -> bool {
        let bt = self.model.reach_boxes(&self.history, &self.vel, &self.steps);
        robustness_bounds(&self.formula, &bt, 0).1 <= 0.0
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn mix_seed(seed: u64, tuple: &[usize], salt: u64) -> u64 {
    let mut h = splitmix(seed);
    for &l in tuple {
        h = splitmix(h ^ l as u64);
    }
    splitmix(h ^ salt)
}

/// Multi-start maximization; restart 0 starts at `init` (or the zero plan).
pub(crate) fn solve_problem(p: &Problem, cfg: &InnerConfig, tag: &[usize], init: Option<&InputPlan>) -> InnerResult {
    let start = Instant::now();
    let finish = |x: Vec<f64>, rho: f64, restarts, iterations, prechecked| InnerResult {
        plan: p.plan(&x),
        robustness: rho,
        feasible: rho > 0.0,
        restarts,
        iterations,
        prechecked,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let mut x0 = init.map(|pl| p.flatten(pl)).unwrap_or_else(|| vec![0.0; p.size()]);
    if cfg.precheck && p.certainly_infeasible() {
        let rho = p.exact(&x0);
        return finish(x0, rho, 0, 0, true);
    }
    let (rho0, it0) = p.polish(&mut x0, cfg);
    if rho0 > cfg.margin || cfg.restarts <= 1 || p.size() == 0 {
        return finish(x0, rho0, 1, it0, false);
    }
    let runs: Vec<(Vec<f64>, f64, usize)> = (1..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut x = p.random_start(mix_seed(cfg.seed, tag, r as u64));
            let (rho, it) = p.polish(&mut x, cfg);
            (x, rho, it)
        })
        .collect();
    let iterations = it0 + runs.iter().map(|r| r.2).sum::<usize>();
    let mut best = (x0, rho0);
    for (x, rho, _) in runs {
        if rho > best.1 {
            best = (x, rho);
        }
    }
    finish(best.0, best.1, cfg.restarts, iterations, false)
}

/// Counters of the outer search.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Tuples handed to the inner maximization.
    pub examined: usize,
    pub pruned_dominance: usize,
    pub pruned_fairness: usize,
    pub random_probes: usize,
    /// Inner maximizations, including those settled by the reachability check.
    pub inner_calls: usize,
    pub prechecked: usize,
    /// Decision variables of the returned plan.
    pub decision_variables: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub offline_ms: f64,
    pub inner_ms: f64,
}

/// A solved planning problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub algorithm: String,
    pub tuple: LengthTuple,
    pub fairness_kind: String,
    pub fairness: f64,
    pub robustness: f64,
    pub feasible: bool,
    #[serde(rename = "box")]
    pub bounds: PLBox,
    pub alpha: Vec<f64>,
    pub x0: FleetState,
    pub inputs: InputPlan,
    pub stats: SearchStats,
    pub timings: Timings,
}

impl PlanResult {
    pub fn trace(&self, model: &UavModel) -> Result<Trace> {
        model.rollout(&self.x0, &self.inputs)
    }
}

/// No tuple in the box was found feasible.
#[derive(Clone, Debug, Serialize)]
pub struct InfeasibleReport {
    pub stats: SearchStats,
    pub frontier: SearchFrontier,
    pub timings: Timings,
}

#[derive(Clone, Debug)]
pub enum SolveOutcome {
    Solved(PlanResult),
    Infeasible(InfeasibleReport),
}

impl SolveOutcome {
    pub fn solved(self) -> Option<PlanResult> {
        match self {
            SolveOutcome::Solved(r) => Some(r),
            SolveOutcome::Infeasible(_) => None,
        }
    }
}

/// Mission, model and search settings for one fleet.
#[derive(Clone, Debug)]
pub struct Planner {
    mission: Formula,
    model: UavModel,
    uavs: usize,
    bounds: PLBox,
    pub config: PlannerConfig,
}

impl Planner {
    pub fn new(mission: Formula, model: UavModel, uavs: usize, config: PlannerConfig) -> Result<Self> {
        model.validate()?;
        mission.validate(uavs, model.dim)?;
        let bounds = pl_bounds(&mission, uavs)?;
        Ok(Self {
            mission,
            model,
            uavs,
            bounds,
            config,
        })
    }

    pub fn mission(&self) -> &Formula {
        &self.mission
    }

    pub fn model(&self) -> &UavModel {
        &self.model
    }

    pub fn bounds(&self) -> &PLBox {
        &self.bounds
    }

    pub fn uav_count(&self) -> usize {
        self.uavs
    }

    fn check_state(&self, x0: &FleetState) -> Result<()> {
        if x0.uav_count() != self.uavs || x0.vel.len() != self.uavs {
            return Err(Error::Dimension(format!(
                "state has {} UAVs, mission has {}",
                x0.uav_count(),
                self.uavs
            )));
        }
        if x0.pos.iter().chain(&x0.vel).any(|p| p.len() != self.model.dim) {
            return Err(Error::Dimension("state dimension does not match the model".into()));
        }
        Ok(())
    }

    pub(crate) fn problem(&self, x0: &FleetState, tuple: &[usize]) -> Problem {
        Problem::new(
            truncate_mission(&self.mission, tuple),
            self.model.clone(),
            x0.pos.clone(),
            x0.vel.clone(),
            tuple.to_vec(),
        )
    }

    /// Maximizes robustness over plans of the given lengths.
    pub fn inner_maximize(&self, x0: &FleetState, tuple: &[usize]) -> Result<InnerResult> {
        self.check_state(x0)?;
        if tuple.len() != self.uavs {
            return Err(Error::Dimension("tuple length differs from fleet size".into()));
        }
        Ok(self.inner_with(x0, tuple, &self.config.inner))
    }

    fn inner_with(&self, x0: &FleetState, tuple: &[usize], cfg: &InnerConfig) -> InnerResult {
        solve_problem(&self.problem(x0, tuple), cfg, tuple, None)
    }

    fn result(
        &self,
        algorithm: &str,
        spec: &FairnessSpec,
        x0: &FleetState,
        tuple: LengthTuple,
        inner: InnerResult,
        mut stats: SearchStats,
        timings: Timings,
    ) -> PlanResult {
        let alpha = alpha(&tuple, &self.bounds)
            .unwrap_or_else(|_| crate::lengths::alpha_unchecked(&tuple, &self.bounds));
        stats.decision_variables = inner.plan.size();
        PlanResult {
            algorithm: algorithm.to_string(),
            fairness_kind: spec.name().to_string(),
            fairness: spec.score(&tuple, &self.bounds),
            tuple,
            robustness: inner.robustness,
            feasible: inner.feasible,
            bounds: self.bounds.clone(),
            alpha,
            x0: x0.clone(),
            inputs: inner.plan,
            stats,
            timings,
        }
    }

    /// Fairest tuple (under `spec`) whose inner problem is feasible.
    pub fn solve_fair(&self, x0: &FleetState, spec: &FairnessSpec) -> Result<SolveOutcome> {
        self.check_state(x0)?;
        spec.validate(self.uavs)?;
        let start = Instant::now();
        let cfg = &self.config;
        let bx = self.bounds.clone();
        let score = |t: &[usize]| spec.score(t, &bx);
        let mut cands = Candidates::new(
            bx.clone(),
            score,
            spec.prefers_long(),
            spec.argmax(&bx),
            cfg.enumeration_cap as u128,
        );
        let mut frontier = SearchFrontier::new(cfg.prune);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.inner.seed, &[], 0x0bad_5eed));
        let probe_cfg = InnerConfig {
            restarts: (cfg.inner.restarts / 2).max(1),
            ..cfg.inner.clone()
        };
        let mut stats = SearchStats::default();
        let mut inner_ms = 0.0;
        let mut best: Option<(LengthTuple, f64, InnerResult)> = None;
        let mut run = |t: &[usize], f: f64, c: &InnerConfig, frontier: &mut SearchFrontier, stats: &mut SearchStats| {
            let r = self.inner_with(x0, t, c);
            stats.examined += 1;
            stats.inner_calls += 1;
            stats.prechecked += r.prechecked as usize;
            inner_ms += r.elapsed_ms;
            if r.feasible {
                frontier.record_feasible(t, f);
                if best.as_ref().is_none_or(|b| f > b.1) {
                    best = Some((t.to_vec(), f, r));
                }
                true
            } else {
                frontier.record_infeasible(t);
                false
            }
        };
        for iter in 1..=cfg.max_outer {
            if cfg.random_every > 0 && iter % cfg.random_every == 0 {
                if let Some(t) = sample_random(&bx, &mut frontier, score, &mut rng) {
                    stats.random_probes += 1;
                    let f = score(&t);
                    run(&t, f, &probe_cfg, &mut frontier, &mut stats);
                    continue;
                }
            }
            let Some((t, f)) = cands.next_fairest(&mut frontier) else {
                break;
            };
            if run(&t, f, &cfg.inner, &mut frontier, &mut stats) {
                break;
            }
        }
        stats.pruned_dominance = frontier.pruned_dominance;
        stats.pruned_fairness = frontier.pruned_fairness;
        let timings = Timings {
            offline_ms: start.elapsed().as_secs_f64() * 1e3,
            inner_ms,
        };
        Ok(match best {
            Some((t, _, r)) => {
                SolveOutcome::Solved(self.result(&format!("fairfly-{}", spec.name()), spec, x0, t, r, stats, timings))
            }
            None => SolveOutcome::Infeasible(InfeasibleReport {
                stats,
                frontier,
                timings,
            }),
        })
    }

    /// Single maximization with every UAV flying the full mission horizon;
    /// fairness is reported under `spec` for comparison.
    pub fn solve_baseline(&self, x0: &FleetState, spec: &FairnessSpec) -> Result<PlanResult> {
        self.check_state(x0)?;
        spec.validate(self.uavs)?;
        let start = Instant::now();
        let tuple = vec![self.mission.horizon(); self.uavs];
        let r = self.inner_with(x0, &tuple, &self.config.inner);
        let stats = SearchStats {
            examined: 1,
            inner_calls: 1,
            prechecked: r.prechecked as usize,
            ..SearchStats::default()
        };
        let timings = Timings {
            offline_ms: start.elapsed().as_secs_f64() * 1e3,
            inner_ms: r.elapsed_ms,
        };
        Ok(self.result("baseline", spec, x0, tuple, r, stats, timings))
    }
}
