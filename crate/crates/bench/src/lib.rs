//! Fixtures shared by the benchmarks.

use fairfly::dynamics::FleetState;
use fairfly::planner::PlannerConfig;
use fairfly::scenario::{desk_map, Scenario};
use fairfly::stl::{Formula, Trace};
use fairfly::Planner;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Desk {
    pub scenario: Scenario,
    pub mission: Formula,
    pub planner: Planner,
    pub x0: FleetState,
}

/// Desk map with `d` UAVs and the start state of seed 0.
pub fn desk(d: usize) -> Desk {
    let scenario = desk_map(d).expect("desk map builds");
    let planner = scenario.planner(PlannerConfig::default()).expect("planner builds");
    Desk {
        mission: scenario.formula().expect("mission builds"),
        x0: scenario.sample_initial(0).expect("take-off boxes are valid"),
        scenario,
        planner,
    }
}

/// Random positions inside the desk volume, one sample per step of each
/// UAV's horizon.
pub fn random_trace(s: &Scenario, seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = s
        .horizons()
        .iter()
        .map(|&h| {
            (0..=h)
                .flat_map(|_| [rng.gen_range(0.0..60.0), rng.gen_range(0.0..60.0), rng.gen_range(0.0..20.0)])
                .collect()
        })
        .collect();
    Trace::new(s.model.dt, s.model.dim, samples).expect("trace shape matches the model")
}
