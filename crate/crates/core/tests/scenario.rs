use fairfly::planner::PlannerConfig;
use fairfly::scenario::{desk_map, run_benchmark, Algorithm, BenchConfig, BenchmarkReport, MissionSpec, Scenario};
use fairfly::stl::{parse, robustness, Trace};
use fairfly::FairnessSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn generated_mission_matches_written_text() {
    let s = desk_map(5).unwrap();
    let generated = s.formula().unwrap();
    assert_eq!(generated, s.formula().unwrap());
    let written = parse(&s.reach_avoid_text(), &s.parse_context().unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let samples = s
            .horizons()
            .iter()
            .map(|&h| (0..(h + 1) * 3).map(|_| rng.gen_range(0.0..60.0)).collect())
            .collect();
        let tr = Trace::new(1.0, 3, samples).unwrap();
        assert_eq!(robustness(&generated, &tr, 0), robustness(&written, &tr, 0));
    }
}

#[test]
fn text_missions_load_from_json() {
    let mut s = desk_map(2).unwrap();
    s.mission = MissionSpec::Stl {
        text: "F[0,10] in(u1, G1) & F[0,8] in(u2, G2) & G[0,8] sep(u1, u2, 2)".into(),
    };
    let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
    assert_eq!(back.formula().unwrap().horizon(), 10);
    let json = back.to_json().unwrap();
    assert!(json.contains("\"kind\": \"stl\""));
}

#[test]
fn bad_scenarios_are_rejected() {
    let mut s = desk_map(2).unwrap();
    s.separation = 0.0;
    assert!(s.validate().is_err());
    let mut s = desk_map(2).unwrap();
    s.version = 7;
    assert!(s.validate().is_err());
    let mut s = desk_map(2).unwrap();
    s.fairness = FairnessSpec::F2Imb { w: 0.75, v: vec![1.0] };
    assert!(s.validate().is_err());
}

fn small_config() -> BenchConfig {
    BenchConfig {
        dims: vec![2, 3],
        seeds: 3,
        planner: PlannerConfig::default(),
        ..BenchConfig::default()
    }
}

fn strip_timings(r: &BenchmarkReport) -> Vec<String> {
    r.rows
        .iter()
        .map(|row| format!("{} {} {} {:?} {:?} {} {:?}", row.algorithm, row.d, row.seed, row.robustness, row.fairness, row.feasible, row.tuple))
        .collect()
}

#[test]
fn benchmark_report_shape_and_determinism() {
    let cfg = small_config();
    let a = run_benchmark(&cfg).unwrap();
    let b = run_benchmark(&cfg).unwrap();
    assert_eq!(a.cells.len(), 3 * 2);
    assert_eq!(a.rows.len(), 3 * 2 * 3);
    assert_eq!(strip_timings(&a), strip_timings(&b));
    for d in [2, 3] {
        let base = a.cell(Algorithm::Baseline, d).unwrap();
        let fair = a.cell(Algorithm::FairFlyF1, d).unwrap();
        assert!(fair.fairness_f1 >= base.fairness_f1);
        assert!(a.rows.iter().filter(|r| r.feasible).all(|r| r.timings.online_first_ms.is_nan() || r.timings.online_first_ms > 0.0));
    }
}

#[test]
fn csv_round_trip_and_plot_series() {
    let cfg = BenchConfig {
        dims: vec![2],
        seeds: 2,
        online: false,
        ..BenchConfig::default()
    };
    let r = run_benchmark(&cfg).unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("algorithm,D,seed,robustness,fairness,offline_ms,online_first_ms,"));
    let back = BenchmarkReport::read_csv(buf.as_slice()).unwrap();
    assert_eq!(strip_timings(&back), strip_timings(&r));
    assert_eq!(back.cells.len(), r.cells.len());
    let plot = back.plot_data();
    for key in ["fairness_f1", "fairness_f2", "robustness", "offline_ms", "online_first_ms"] {
        assert_eq!(plot["series"][key]["baseline"][0][0], 2, "{key}");
    }
}
