//! Shrinking-horizon execution of an offline plan.
//!
//! The length tuple is fixed offline; after each executed step every flying
//! UAV has one input fewer to plan. Each re-solve starts from the tail of the
//! previous plan, polishes it and tries one fresh random start. The previous
//! plan is kept unless its robustness dropped (by more than the margin) or it
//! became infeasible, so an undisturbed run replays the offline plan exactly.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::InputPlan;
use crate::error::Result;
use crate::planner::{mix_seed, truncate_mission, PlanResult, Planner, Problem};
use crate::stl::{robustness, satisfies, Trace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnlineConfig {
    /// Sup-norm bound of the uniform position noise added after every step.
    pub noise: f64,
    pub seed: u64,
    /// Random restarts per re-solve, besides polishing the previous plan.
    pub extra_restarts: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            noise: 0.0,
            seed: 0,
            extra_restarts: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adopted {
    /// Previous plan kept unchanged.
    Kept,
    Polished,
    Restarted,
}

/// One re-solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub step: usize,
    pub remaining: Vec<usize>,
    pub decision_variables: usize,
    /// Exact robustness of executed history plus the adopted plan.
    pub robustness: f64,
    pub adopted: Adopted,
    /// The adopted plan is not feasible.
    pub violation: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OnlineTimings {
    pub first_ms: f64,
    pub total_ms: f64,
    pub per_iteration_ms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineRun {
    pub tuple: Vec<usize>,
    pub noise: f64,
    pub seed: u64,
    /// Executed positions per UAV, flattened.
    pub positions: Vec<Vec<f64>>,
    pub iterations: Vec<Iteration>,
    pub satisfied: bool,
    pub robustness: f64,
    pub violations: usize,
    pub timings: OnlineTimings,
}

impl OnlineRun {
    pub fn trace(&self, dt: f64, dim: usize) -> Result<Trace> {
        Trace::new(dt, dim, self.positions.clone())
    }
}

/// Stepwise executor; [`simulate_online`] drives it to the end.
pub struct OnlineController<'a> {
    planner: &'a Planner,
    cfg: OnlineConfig,
    problem: Problem,
    tuple: Vec<usize>,
    plan: InputPlan,
    prev_rho: f64,
    elapsed: usize,
    rng: ChaCha8Rng,
    iterations: Vec<Iteration>,
    timings: OnlineTimings,
}

impl<'a> OnlineController<'a> {
    pub fn new(planner: &'a Planner, offline: &PlanResult, cfg: OnlineConfig) -> Self {
        let problem = Problem::new(
            truncate_mission(planner.mission(), &offline.tuple),
            planner.model().clone(),
            offline.x0.pos.clone(),
            offline.x0.vel.clone(),
            offline.tuple.clone(),
        );
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self {
            planner,
            problem,
            tuple: offline.tuple.clone(),
            plan: offline.inputs.clone(),
            prev_rho: offline.robustness,
            elapsed: 0,
            rng,
            cfg,
            iterations: Vec::new(),
            timings: OnlineTimings::default(),
        }
    }

    pub fn done(&self) -> bool {
        self.tuple.iter().all(|&l| l <= self.elapsed)
    }

    pub fn remaining(&self) -> Vec<usize> {
        self.tuple.iter().map(|&l| l.saturating_sub(self.elapsed)).collect()
    }

    /// Re-solves the remaining problem from the current state (shrinking the
    /// horizon by the steps already executed). Returns the solve time.
    pub fn resolve(&mut self) -> f64 {
        let start = Instant::now();
        let remaining = self.remaining();
        let p = Problem::new(
            self.problem.formula.clone(),
            self.problem.model.clone(),
            self.problem.history.clone(),
            self.problem.vel.clone(),
            remaining.clone(),
        );
        let inner = &self.planner.config.inner;
        let warm = p.flatten(&self.plan);
        let rho_warm = p.exact(&warm);
        let mut polished = warm.clone();
        let (rho_pol, _) = p.polish(&mut polished, inner);
        let mut best = (polished, rho_pol, Adopted::Polished);
        for r in 0..self.cfg.extra_restarts {
            let salt = ((self.elapsed as u64) << 16) | r as u64;
            let mut x = p.random_start(mix_seed(self.cfg.seed ^ inner.seed, &self.tuple, salt));
            let (rho, _) = p.polish(&mut x, inner);
            if rho > best.1 {
                best = (x, rho, Adopted::Restarted);
            }
        }
        let keep = rho_warm > 0.0 && rho_warm >= self.prev_rho - inner.margin;
        let (x, rho, adopted) = if keep || rho_warm >= best.1 {
            (warm, rho_warm, Adopted::Kept)
        } else {
            best
        };
        self.plan = p.plan(&x);
        self.prev_rho = rho;
        self.iterations.push(Iteration {
            step: self.elapsed,
            decision_variables: p.size(),
            remaining,
            robustness: rho,
            adopted,
            violation: rho <= 0.0,
        });
        let ms = start.elapsed().as_secs_f64() * 1e3;
        self.timings.per_iteration_ms.push(ms);
        if self.timings.per_iteration_ms.len() == 1 {
            self.timings.first_ms = ms;
        }
        self.timings.total_ms += ms;
        ms
    }

    /// Applies the first planned input of every flying UAV, then noise.
    pub fn apply(&mut self) {
        let model = &self.problem.model;
        let d = model.dim;
        for n in 0..self.tuple.len() {
            if self.tuple[n] <= self.elapsed {
                continue;
            }
            let h = &self.problem.history[n];
            let mut pos = h[h.len() - d..].to_vec();
            model
                .step(&mut pos, &mut self.problem.vel[n], self.plan.input(n, 0))
                .expect("planned inputs respect the bounds");
            if self.cfg.noise > 0.0 {
                let e = cube_sample(&mut self.rng, d, self.cfg.noise);
                for i in 0..d {
                    pos[i] += e[i];
                }
            }
            self.problem.history[n].extend_from_slice(&pos);
        }
        self.plan = self.plan.shifted(1);
        self.elapsed += 1;
    }

    /// Executes one step; every step after the first re-solves first.
    pub fn advance(&mut self) {
        if self.elapsed > 0 {
            self.resolve();
        }
        self.apply();
    }

    pub fn finish(self) -> OnlineRun {
        let tr = Trace::new(self.problem.model.dt, self.problem.model.dim, self.problem.history.clone())
            .expect("executed trace is well formed");
        let mission = self.planner.mission();
        OnlineRun {
            tuple: self.tuple,
            noise: self.cfg.noise,
            seed: self.cfg.seed,
            satisfied: satisfies(mission, &tr, 0),
            robustness: robustness(mission, &tr, 0),
            violations: self.iterations.iter().filter(|i| i.violation).count(),
            positions: self.problem.history,
            iterations: self.iterations,
            timings: self.timings,
        }
    }
}

fn cube_sample(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect()
}

/// Runs an offline plan to completion with shrinking-horizon re-solves.
pub fn simulate_online(planner: &Planner, offline: &PlanResult, cfg: OnlineConfig) -> OnlineRun {
    let mut c = OnlineController::new(planner, offline, cfg);
    while !c.done() {
        c.advance();
    }
    c.finish()
}

/// Time of the first re-solve only (one step executed, no noise).
pub fn first_iteration_ms(planner: &Planner, offline: &PlanResult, cfg: OnlineConfig) -> Option<f64> {
    let mut c = OnlineController::new(planner, offline, cfg);
    if c.done() {
        return None;
    }
    c.apply();
    if c.done() {
        return None;
    }
    Some(c.resolve())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{FleetState, UavModel};
    use crate::fairness::FairnessSpec;
    use crate::planner::PlannerConfig;
    use crate::stl::{Formula, Predicate, Region};

    fn setup() -> (Planner, PlanResult) {
        let g1 = Region::new("G1", vec![4.0, 3.0], vec![6.0, 5.0]).unwrap();
        let g2 = Region::new("G2", vec![-6.0, 1.0], vec![-4.0, 3.0]).unwrap();
        let f = Formula::eventually(0, 6, Formula::atom(Predicate::InBox { uav: 0, region: g1 }))
            .and(Formula::eventually(0, 4, Formula::atom(Predicate::InBox { uav: 1, region: g2 })))
            .and(Formula::always(0, 4, Formula::atom(Predicate::Separation { a: 0, b: 1, dist: 1.0 })));
        let model = UavModel {
            order: 1,
            dim: 2,
            dt: 1.0,
            u_max: 1.5,
            v_max: 1.0,
        };
        let p = Planner::new(f, model, 2, PlannerConfig::default()).unwrap();
        let x0 = FleetState::at_rest(vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
        let r = p.solve_fair(&x0, &FairnessSpec::F1).unwrap().solved().unwrap();
        (p, r)
    }

    #[test]
    fn undisturbed_run_replays_offline_plan() {
        let (p, r) = setup();
        let run = simulate_online(&p, &r, OnlineConfig::default());
        let offline = r.trace(p.model()).unwrap();
        for n in 0..2 {
            assert_eq!(run.positions[n], offline.samples(n));
        }
        assert!(run.satisfied);
        assert_eq!(run.violations, 0);
    }

    #[test]
    fn horizon_shrinks_every_iteration() {
        let (p, r) = setup();
        let run = simulate_online(&p, &r, OnlineConfig { noise: 0.1, seed: 3, ..OnlineConfig::default() });
        let dims: Vec<usize> = run.iterations.iter().map(|i| i.decision_variables).collect();
        assert_eq!(dims.len(), r.tuple.iter().max().unwrap() - 1);
        assert!(dims.windows(2).all(|w| w[1] < w[0]));
        let offline_dim: usize = r.tuple.iter().sum::<usize>() * 2;
        assert_eq!(dims[0], offline_dim - 2 * 2);
        for (n, &l) in r.tuple.iter().enumerate() {
            assert_eq!(run.positions[n].len(), (l + 1) * 2);
        }
    }

    #[test]
    fn noise_is_reproducible() {
        let (p, r) = setup();
        let cfg = OnlineConfig { noise: 0.2, seed: 9, ..OnlineConfig::default() };
        let a = simulate_online(&p, &r, cfg.clone());
        let b = simulate_online(&p, &r, cfg);
        assert_eq!(a.positions, b.positions);
    }
}
