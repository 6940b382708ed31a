//! Acceptance gates. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use fairfly::dynamics::{FleetState, UavModel};
use fairfly::fairness::{f1, f2, f2_imb};
use fairfly::lengths::pl_bounds;
use fairfly::online::{first_iteration_ms, simulate_online, OnlineConfig};
use fairfly::planner::{InnerConfig, PlannerConfig};
use fairfly::scenario::{build_reach_avoid, desk_map, run_benchmark, Algorithm, BenchConfig};
use fairfly::stl::{robustness, satisfies, Formula, Predicate, Region, SmoothEvaluator, Trace};
use fairfly::{FairnessSpec, Planner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: u32, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = out.pass && in_time;
    println!(
        "{} criterion {id}: {title} | {} | {:.1}s (limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn semantics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut skipped, mut wrong) = (0, 0, 0);
    for _ in 0..1500 {
        let f = common::nnf_formula(&mut rng, 3, 2, 2);
        // three operators above a possibly negated atom
        assert!(f.is_nnf() && f.depth() <= 5);
        let tr = common::ragged_trace(&mut rng, 2, 2, 12);
        let rho = robustness(&f, &tr, 0);
        let truth = common::oracle(&f, &tr, 0);
        if truth != satisfies(&f, &tr, 0) {
            wrong += 1;
        }
        if rho.abs() <= 1e-9 {
            skipped += 1;
            continue;
        }
        checked += 1;
        if (rho > 0.0) != truth {
            wrong += 1;
        }
    }
    Outcome {
        pass: wrong == 0 && checked >= 1000,
        detail: format!("{checked} formulas checked, {skipped} near zero, {wrong} disagreements"),
    }
}

fn horizons() -> Outcome {
    let p = Formula::atom(Predicate::HalfSpace {
        uav: 0,
        coeffs: vec![1.0],
        offset: 0.0,
    });
    let q = Formula::atom(Predicate::HalfSpace {
        uav: 0,
        coeffs: vec![-1.0],
        offset: 2.0,
    });
    let phi1 = Formula::eventually(0, 10, p.clone()).and(Formula::always(0, 10, q));
    let nested = Formula::always(0, 2, Formula::eventually(2, 4, p));
    let samples = phi1.horizon() + 1;
    let idx = nested.horizon();
    Outcome {
        pass: samples == 11 && idx == 6,
        detail: format!("sample count {samples} (want 11), index {idx} (want 6)"),
    }
}

fn fairness_table() -> Outcome {
    let grid: Vec<[f64; 3]> = (0..1000)
        .map(|i| [(i % 10) as f64 / 9.0, ((i / 10) % 10) as f64 / 9.0, (i / 100) as f64 / 9.0])
        .collect();
    let equal = [0.0, 0.25, 0.5, 1.0].iter().all(|&a| f1(&[a; 5]) == 0.0);
    let mut d12: f64 = 0.0;
    let mut dimb: f64 = 0.0;
    for (i, a) in grid.iter().enumerate() {
        d12 = d12.max((f2(a, 1.0).unwrap() - f1(a)).abs());
        let w = 0.05 + 0.95 * (i as f64 / 999.0);
        dimb = dimb.max((f2_imb(a, w, &[1.0; 3]).unwrap() - f2(a, w).unwrap()).abs());
    }
    Outcome {
        pass: equal && d12 < 1e-12 && dimb < 1e-12,
        detail: format!("f1 zero at equal fractions: {equal}, max|f2(w=1)-f1| {d12:e}, max|f2imb(v=1)-f2| {dimb:e}"),
    }
}

fn desk_replication() -> Outcome {
    let s = desk_map(5).unwrap();
    let p = s.planner(PlannerConfig::default()).unwrap();
    let x0 = s.sample_initial(0).unwrap();
    let solve = |spec: FairnessSpec| p.solve_fair(&x0, &spec).unwrap().solved().map(|r| r.tuple);
    let (Some(t1), Some(t2), Some(ti)) = (
        solve(FairnessSpec::F1),
        solve(FairnessSpec::F2 { w: 0.75 }),
        solve(FairnessSpec::F2Imb {
            w: 0.75,
            v: vec![10.0, 10.0, 1.0, 1.0, 1.0],
        }),
    ) else {
        return Outcome {
            pass: false,
            detail: "a fair search returned infeasible".into(),
        };
    };
    let a = t1 == [10, 8, 5, 6, 7];
    let b = t2.iter().zip(&t1).all(|(x, y)| x <= y) && t2 != t1;
    let c = ti[..2].iter().zip(&t2[..2]).all(|(x, y)| x <= y)
        && ti[..2] != t2[..2]
        && ti[2..].iter().zip(&t2[2..]).all(|(x, y)| x >= y);
    Outcome {
        pass: a && b && c,
        detail: format!(
            "f1 {t1:?} ({a}), f2 {t2:?} ({b}), f2imb {ti:?} ({c}); reference tuples [9, 7, 5, 6, 6] matched: {}, [7, 6, 5, 6, 7] matched: {}",
            t2 == [9, 7, 5, 6, 6],
            ti == [7, 6, 5, 6, 7]
        ),
    }
}

/// Two planar UAVs with unit input bound, random goals, sometimes an obstacle.
fn toy_scenario(seed: u64) -> (Formula, UavModel, FleetState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = UavModel {
        order: 1,
        dim: 2,
        dt: 1.0,
        u_max: 1.0,
        v_max: 1.0,
    };
    let starts = vec![
        vec![rng.gen_range(-0.5..0.5), 0.0],
        vec![rng.gen_range(-0.5..0.5), 3.0],
    ];
    let horizons: Vec<usize> = (0..2).map(|_| rng.gen_range(3..=6)).collect();
    let goals: Vec<Region> = (0..2)
        .map(|n| {
            let dist = rng.gen_range(0.5..horizons[n] as f64 - 0.5);
            let ang: f64 = rng.gen_range(-0.6..0.6);
            let c = [starts[n][0] + dist * ang.cos(), starts[n][1] + dist * ang.sin()];
            Region::new(format!("G{n}"), vec![c[0] - 0.5, c[1] - 0.5], vec![c[0] + 0.5, c[1] + 0.5]).unwrap()
        })
        .collect();
    let obstacles: Vec<Region> = if rng.gen_bool(0.5) {
        let x = rng.gen_range(1.0..2.5);
        vec![Region::new("O", vec![x, 1.0], vec![x + 0.6, 2.0]).unwrap()]
    } else {
        Vec::new()
    };
    let goals_clear = goals.iter().all(|g| obstacles.iter().all(|o| !o.intersects(g)));
    let obstacles = if goals_clear { obstacles } else { Vec::new() };
    let f = build_reach_avoid(&horizons, &goals, &obstacles, 0.5).unwrap();
    (f, model, FleetState::at_rest(starts))
}

fn search_equivalence() -> Outcome {
    let exhaustive_cfg = InnerConfig {
        restarts: 16,
        max_iters: 2000,
        precheck: false,
        ..InnerConfig::default()
    };
    let (mut agree, mut pruned_calls, mut full_calls, mut feasible) = (0, 0usize, 0usize, 0);
    let mut mismatches = Vec::new();
    for seed in 0..25u64 {
        let (f, model, x0) = toy_scenario(seed);
        assert!(f.horizon() <= 6);
        let spec = if seed % 2 == 0 {
            FairnessSpec::F2 { w: 0.75 }
        } else {
            FairnessSpec::F1
        };
        let mut cfg = PlannerConfig::default();
        cfg.inner.seed = seed;
        let pruned = Planner::new(f.clone(), model.clone(), 2, cfg).unwrap();
        let out = pruned.solve_fair(&x0, &spec).unwrap();
        let (pruned_value, calls) = match &out {
            fairfly::SolveOutcome::Solved(r) => (Some(r.fairness), r.stats.inner_calls),
            fairfly::SolveOutcome::Infeasible(rep) => (None, rep.stats.inner_calls),
        };
        let full = Planner::new(
            f.clone(),
            model,
            2,
            PlannerConfig {
                inner: InnerConfig {
                    seed,
                    ..exhaustive_cfg.clone()
                },
                ..PlannerConfig::default()
            },
        )
        .unwrap();
        let bx = pl_bounds(&f, 2).unwrap();
        let mut best: Option<f64> = None;
        for t in bx.tuples() {
            full_calls += 1;
            if full.inner_maximize(&x0, &t).unwrap().feasible {
                let v = spec.score(&t, &bx);
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        pruned_calls += calls;
        let same = match (pruned_value, best) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-12,
            (None, None) => true,
            _ => false,
        };
        if best.is_some() {
            feasible += 1;
        }
        if same {
            agree += 1;
        } else {
            mismatches.push(seed);
        }
    }
    let ratio = pruned_calls as f64 / full_calls as f64;
    Outcome {
        pass: agree == 25 && ratio <= 0.7,
        detail: format!(
            "{agree}/25 agree ({feasible} feasible), mismatched seeds {mismatches:?}, mean inner calls {:.1} vs {:.1} exhaustive ({:.0}% fewer)",
            pruned_calls as f64 / 25.0,
            full_calls as f64 / 25.0,
            (1.0 - ratio) * 100.0
        ),
    }
}

fn fairness_dominance() -> Outcome {
    let cfg = BenchConfig {
        online: false,
        ..BenchConfig::default()
    };
    let report = run_benchmark(&cfg).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for &d in &cfg.dims {
        let base = report.cell(Algorithm::Baseline, d).unwrap();
        for alg in [Algorithm::FairFlyF1, Algorithm::FairFlyF2] {
            let c = report.cell(alg, d).unwrap();
            let good = c.feasible == c.runs && c.fairness_f1 >= base.fairness_f1 && c.fairness_f2 >= base.fairness_f2;
            ok &= good;
            parts.push(format!(
                "D={d} {}: f1 {:.3} vs {:.3}, f2 {:.3} vs {:.3}, {}/{} feasible",
                alg.name(),
                c.fairness_f1,
                base.fairness_f1,
                c.fairness_f2,
                base.fairness_f2,
                c.feasible,
                c.runs
            ));
        }
    }
    Outcome {
        pass: ok,
        detail: parts.join("; "),
    }
}

fn online_speedup() -> Outcome {
    let s = desk_map(5).unwrap();
    let (mut fair, mut base) = (0.0, 0.0);
    for seed in 0..20u64 {
        let mut pc = PlannerConfig::default();
        pc.inner.seed = seed;
        let p = s.planner(pc).unwrap();
        let x0 = s.sample_initial(seed).unwrap();
        let spec = FairnessSpec::F2 { w: 0.75 };
        let Some(r) = p.solve_fair(&x0, &spec).unwrap().solved() else {
            return Outcome {
                pass: false,
                detail: format!("seed {seed}: fair search infeasible"),
            };
        };
        let b = p.solve_baseline(&x0, &spec).unwrap();
        let (Some(x), Some(y)) = (
            first_iteration_ms(&p, &r, OnlineConfig::default()),
            first_iteration_ms(&p, &b, OnlineConfig::default()),
        ) else {
            return Outcome {
                pass: false,
                detail: format!("seed {seed}: plan ends before the first re-solve"),
            };
        };
        fair += x;
        base += y;
    }
    let ratio = fair / base;
    Outcome {
        pass: ratio <= 0.75,
        detail: format!("mean first re-solve {:.3} ms vs baseline {:.3} ms, ratio {ratio:.3}", fair / 20.0, base / 20.0),
    }
}

fn robustness_tube() -> Outcome {
    let s = desk_map(5).unwrap();
    let mut ok = 0;
    let mut failed = Vec::new();
    for seed in 0..20u64 {
        let mut pc = PlannerConfig::default();
        pc.inner.seed = seed;
        let p = s.planner(pc).unwrap();
        let x0 = s.sample_initial(seed).unwrap();
        let Some(r) = p.solve_fair(&x0, &FairnessSpec::F1).unwrap().solved() else {
            failed.push(seed);
            continue;
        };
        let run = simulate_online(
            &p,
            &r,
            OnlineConfig {
                noise: 0.5 * r.robustness,
                seed: 1000 + seed,
                ..OnlineConfig::default()
            },
        );
        let tr = run.trace(s.model.dt, s.model.dim).unwrap();
        if satisfies(p.mission(), &tr, 0) {
            ok += 1;
        } else {
            failed.push(seed);
        }
    }
    Outcome {
        pass: ok == 20,
        detail: format!("{ok}/20 noisy runs satisfy the mission, failing seeds {failed:?}"),
    }
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let d = 2 + i % 2;
        let dim = 2 + (i / 2) % 2;
        let horizons: Vec<usize> = (0..d).map(|_| rng.gen_range(2..=6)).collect();
        let goals: Vec<Region> = (0..d).map(|n| common::region(&mut rng, dim, &format!("G{n}"))).collect();
        let obstacles = vec![common::region(&mut rng, dim, "O")];
        let f = build_reach_avoid(&horizons, &goals, &obstacles, rng.gen_range(0.2..1.5)).unwrap();
        let samples: Vec<Vec<f64>> = horizons
            .iter()
            .map(|&l| (0..(l + 1) * dim).map(|_| rng.gen_range(-4.0..4.0)).collect())
            .collect();
        let tr = Trace::new(1.0, dim, samples).unwrap();
        let mut ev = SmoothEvaluator::new(&f, 25.0);
        let sv = ev.value_and_grad(&tr);
        let mut num = Vec::new();
        let mut ana = Vec::new();
        for n in 0..d {
            for j in 0..tr.samples(n).len() {
                let mut plus = tr.clone();
                plus.samples_mut(n)[j] += h;
                let mut minus = tr.clone();
                minus.samples_mut(n)[j] -= h;
                num.push((ev.value(&plus) - ev.value(&minus)) / (2.0 * h));
                ana.push(sv.grad[n][j]);
            }
        }
        let err: f64 = num.iter().zip(&ana).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = num.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(err / scale);
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!("worst relative gradient error {worst:e} over 100 instances"),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        run(1, "sign of robustness matches brute-force satisfaction", secs(30), semantics_oracle),
        run(2, "horizon examples", secs(5), horizons),
        run(3, "fairness function identities", secs(5), fairness_table),
        run(4, "desk map tuples (D = 5)", secs(600), desk_replication),
        run(5, "pruned search matches exhaustive search", secs(900), search_equivalence),
        run(6, "fair plans at least as fair as baseline", secs(1800), fairness_dominance),
        run(7, "first online re-solve speedup", secs(600), online_speedup),
        run(8, "noisy online runs stay satisfying", secs(600), robustness_tube),
        run(9, "smooth robustness gradients", secs(120), gradient_check),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
