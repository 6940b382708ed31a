//! Scenario files, the reach-avoid mission generator, the shipped desk map and
//! the benchmark harness.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{sample_initial, FleetState, UavModel};
use crate::error::{Error, Result};
use crate::fairness::FairnessSpec;
use crate::online::{first_iteration_ms, OnlineConfig};
use crate::planner::{mix_seed, PlanResult, Planner, PlannerConfig, SolveOutcome};
use crate::stl::{parse, Formula, ParseContext, Predicate, Region};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavSpec {
    pub name: String,
    /// Region the start position is drawn from.
    pub takeoff: String,
    pub goal: String,
    /// Time index by which the goal must be reached.
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MissionSpec {
    /// Generated from goals, obstacles, horizons and separation.
    ReachAvoid,
    /// Hand-written formula; names refer to `uavs` and `regions`.
    Stl { text: String },
}

/// A fleet, its airspace and its mission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub model: UavModel,
    pub separation: f64,
    pub regions: BTreeMap<String, Bounds>,
    #[serde(default)]
    pub obstacles: Vec<String>,
    pub uavs: Vec<UavSpec>,
    pub mission: MissionSpec,
    #[serde(default)]
    pub fairness: FairnessSpec,
}

/// `F[0,H_n] in(n, G_n)` for every UAV, `G[0,H_n]` avoidance of every
/// obstacle, and `G[0,min(H_n,H_m)]` separation of every pair `n < m`.
pub fn build_reach_avoid(
    horizons: &[usize],
    goals: &[Region],
    obstacles: &[Region],
    separation: f64,
) -> Result<Formula> {
    if goals.len() != horizons.len() {
        return Err(Error::Scenario(format!(
            "{} goals for {} UAVs",
            goals.len(),
            horizons.len()
        )));
    }
    let reach = goals.iter().enumerate().map(|(n, g)| {
        Formula::eventually(
            0,
            horizons[n],
            Formula::atom(Predicate::InBox {
                uav: n,
                region: g.clone(),
            }),
        )
    });
    let avoid = (0..horizons.len()).filter(|_| !obstacles.is_empty()).map(|n| {
        let outs = obstacles.iter().map(|o| {
            Formula::atom(Predicate::OutBox {
                uav: n,
                region: o.clone(),
            })
        });
        Formula::always(0, horizons[n], Formula::conjunction(outs))
    });
    let mut pairs = Vec::new();
    for n in 0..horizons.len() {
        for m in n + 1..horizons.len() {
            pairs.push(Formula::always(
                0,
                horizons[n].min(horizons[m]),
                Formula::atom(Predicate::Separation {
                    a: n,
                    b: m,
                    dist: separation,
                }),
            ));
        }
    }
    Ok(Formula::conjunction(reach.chain(avoid).chain(pairs)))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn uav_count(&self) -> usize {
        self.uavs.len()
    }

    pub fn region(&self, name: &str) -> Result<Region> {
        let b = self
            .regions
            .get(name)
            .ok_or_else(|| Error::UnknownRegion(name.to_string()))?;
        Region::new(name, b.lo.clone(), b.hi.clone())
    }

    pub fn all_regions(&self) -> Result<Vec<Region>> {
        self.regions.keys().map(|k| self.region(k)).collect()
    }

    pub fn takeoff_regions(&self) -> Result<Vec<Region>> {
        self.uavs.iter().map(|u| self.region(&u.takeoff)).collect()
    }

    pub fn goal_regions(&self) -> Result<Vec<Region>> {
        self.uavs.iter().map(|u| self.region(&u.goal)).collect()
    }

    pub fn obstacle_regions(&self) -> Result<Vec<Region>> {
        self.obstacles.iter().map(|o| self.region(o)).collect()
    }

    pub fn horizons(&self) -> Vec<usize> {
        self.uavs.iter().map(|u| u.horizon).collect()
    }

    pub fn uav_names(&self) -> Vec<String> {
        self.uavs.iter().map(|u| u.name.clone()).collect()
    }

    pub fn parse_context(&self) -> Result<ParseContext> {
        Ok(ParseContext::new()
            .with_uavs(self.uav_names())
            .with_regions(self.all_regions()?))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        self.model.validate()?;
        if !(self.separation > 0.0) {
            return Err(Error::Scenario("separation must be positive".into()));
        }
        if self.uavs.is_empty() {
            return Err(Error::Scenario("scenario has no UAVs".into()));
        }
        let mut names: Vec<&str> = self.uavs.iter().map(|u| u.name.as_str()).collect();
        names.sort();
        names.dedup();
        if names.len() != self.uavs.len() {
            return Err(Error::Scenario("UAV names must be unique".into()));
        }
        for r in self.all_regions()? {
            if r.dim() != self.model.dim {
                return Err(Error::Dimension(format!(
                    "region `{}` has dimension {}, model has {}",
                    r.name,
                    r.dim(),
                    self.model.dim
                )));
            }
        }
        let obstacles = self.obstacle_regions()?;
        for u in &self.uavs {
            for r in [self.region(&u.takeoff)?, self.region(&u.goal)?] {
                if let Some(o) = obstacles.iter().find(|o| o.intersects(&r)) {
                    return Err(Error::Scenario(format!(
                        "region `{}` of {} overlaps obstacle `{}`",
                        r.name, u.name, o.name
                    )));
                }
            }
        }
        self.fairness.validate(self.uav_count())?;
        self.formula()?.validate(self.uav_count(), self.model.dim)
    }

    /// The global mission.
    pub fn formula(&self) -> Result<Formula> {
        match &self.mission {
            MissionSpec::ReachAvoid => build_reach_avoid(
                &self.horizons(),
                &self.goal_regions()?,
                &self.obstacle_regions()?,
                self.separation,
            ),
            MissionSpec::Stl { text } => parse(text, &self.parse_context()?),
        }
    }

    /// The reach-avoid mission written in the text syntax.
    pub fn reach_avoid_text(&self) -> String {
        let h = self.horizons();
        let mut parts = Vec::new();
        for (n, u) in self.uavs.iter().enumerate() {
            parts.push(format!("F[0,{}] in({}, {})", h[n], u.name, u.goal));
        }
        if !self.obstacles.is_empty() {
            for (n, u) in self.uavs.iter().enumerate() {
                let outs: Vec<String> = self.obstacles.iter().map(|o| format!("out({}, {o})", u.name)).collect();
                parts.push(format!("G[0,{}] ({})", h[n], outs.join(" & ")));
            }
        }
        for n in 0..self.uavs.len() {
            for m in n + 1..self.uavs.len() {
                parts.push(format!(
                    "G[0,{}] sep({}, {}, {:?})",
                    h[n].min(h[m]),
                    self.uavs[n].name,
                    self.uavs[m].name,
                    self.separation
                ));
            }
        }
        parts.join(" & ")
    }

    pub fn planner(&self, config: PlannerConfig) -> Result<Planner> {
        Planner::new(self.formula()?, self.model.clone(), self.uav_count(), config)
    }

    /// Seeded start state drawn from the take-off boxes.
    pub fn sample_initial(&self, seed: u64) -> Result<FleetState> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[], 0x07a4_e0ff));
        sample_initial(&self.takeoff_regions()?, &mut rng)
    }

    /// Scenario with only the first `d` UAVs.
    pub fn prefix(&self, d: usize) -> Result<Scenario> {
        if d == 0 || d > self.uav_count() {
            return Err(Error::Scenario(format!("cannot take {d} of {} UAVs", self.uav_count())));
        }
        let mut s = self.clone();
        s.uavs.truncate(d);
        s.name = format!("{}-{d}", self.name);
        if let FairnessSpec::F2Imb { v, .. } = &mut s.fairness {
            v.truncate(d);
        }
        Ok(s)
    }
}

const LANES: [f64; 5] = [6.0, 18.0, 30.0, 42.0, 54.0];
/// Near edge and depth (along y) of each lane's goal.
const GOAL_Y: [f64; 5] = [7.0, 7.0, 24.0, 30.0, 36.0];
const DESK_HORIZONS: [usize; 5] = [10, 8, 5, 6, 7];

/// The shipped map: a 60 x 60 x 20 m volume with five lanes, take-off boxes on
/// the near side, goals at staggered depths and one box obstacle in front of
/// the middle lane. Fleets beyond five reuse the lanes on higher layers.
pub fn desk_map(d: usize) -> Result<Scenario> {
    if d == 0 {
        return Err(Error::Scenario("fleet must not be empty".into()));
    }
    let mut regions = BTreeMap::new();
    let mut uavs = Vec::new();
    regions.insert(
        "O".to_string(),
        Bounds {
            lo: vec![27.0, 10.0, 0.0],
            hi: vec![31.0, 18.0, 20.0],
        },
    );
    for n in 0..d {
        let lane = n % 5;
        let layer = (n / 5) as f64;
        let x = LANES[lane];
        let (tx_lo, tx_hi) = if lane == 2 { (29.5, 30.5) } else { (x - 1.0, x + 1.0) };
        let z = 6.0 * layer;
        let t = format!("T{}", n + 1);
        let g = format!("G{}", n + 1);
        regions.insert(
            t.clone(),
            Bounds {
                lo: vec![tx_lo, 2.0, 4.0 + z],
                hi: vec![tx_hi, 4.0, 6.0 + z],
            },
        );
        regions.insert(
            g.clone(),
            Bounds {
                lo: vec![x - 3.0, GOAL_Y[lane], 2.0 + z],
                hi: vec![x + 3.0, GOAL_Y[lane] + 6.0, 8.0 + z],
            },
        );
        uavs.push(UavSpec {
            name: format!("u{}", n + 1),
            takeoff: t,
            goal: g,
            horizon: DESK_HORIZONS[lane],
        });
    }
    let s = Scenario {
        version: SCHEMA_VERSION,
        name: "desk".into(),
        model: UavModel {
            order: 1,
            dim: 3,
            dt: 1.0,
            u_max: 6.0,
            v_max: 6.0,
        },
        separation: 2.0,
        regions,
        obstacles: vec!["O".into()],
        uavs,
        mission: MissionSpec::ReachAvoid,
        fairness: FairnessSpec::default(),
    };
    s.validate()?;
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "fairfly-f1")]
    FairFlyF1,
    #[serde(rename = "fairfly-f2")]
    FairFlyF2,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Baseline => "baseline",
            Algorithm::FairFlyF1 => "fairfly-f1",
            Algorithm::FairFlyF2 => "fairfly-f2",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub algorithms: Vec<Algorithm>,
    pub dims: Vec<usize>,
    pub seeds: usize,
    /// Weight of the f2 scoring and of the FairFly-f2 search.
    pub w: f64,
    /// Measure the first online re-solve.
    pub online: bool,
    pub planner: PlannerConfig,
    /// Defaults to the desk map.
    pub scenario: Option<Scenario>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![Algorithm::Baseline, Algorithm::FairFlyF1, Algorithm::FairFlyF2],
            dims: vec![2, 3, 5],
            seeds: 20,
            w: 0.75,
            online: true,
            planner: PlannerConfig::default(),
            scenario: None,
        }
    }
}

/// Wall-clock measurements of one run, kept apart from the deterministic
/// fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTimings {
    pub offline_ms: f64,
    /// NaN when no re-solve happens (every UAV done after one step).
    pub online_first_ms: f64,
}

/// One (algorithm, fleet size, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: String,
    #[serde(rename = "D")]
    pub d: usize,
    pub seed: u64,
    pub robustness: f64,
    /// Under the function the algorithm optimizes (f2 for the baseline).
    pub fairness: f64,
    pub fairness_f1: f64,
    pub fairness_f2: f64,
    pub feasible: bool,
    pub tuple: Vec<usize>,
    pub timings: RunTimings,
}

/// Flat CSV record of a [`BenchRow`].
#[derive(Serialize, Deserialize)]
struct CsvRow {
    algorithm: String,
    #[serde(rename = "D")]
    d: usize,
    seed: u64,
    robustness: f64,
    fairness: f64,
    offline_ms: f64,
    online_first_ms: f64,
    fairness_f1: f64,
    fairness_f2: f64,
    feasible: bool,
    /// Space-separated lengths; empty when no tuple was found.
    tuple: String,
}

impl From<&BenchRow> for CsvRow {
    fn from(r: &BenchRow) -> Self {
        Self {
            algorithm: r.algorithm.clone(),
            d: r.d,
            seed: r.seed,
            robustness: r.robustness,
            fairness: r.fairness,
            offline_ms: r.timings.offline_ms,
            online_first_ms: r.timings.online_first_ms,
            fairness_f1: r.fairness_f1,
            fairness_f2: r.fairness_f2,
            feasible: r.feasible,
            tuple: r.tuple.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" "),
        }
    }
}

impl TryFrom<CsvRow> for BenchRow {
    type Error = Error;

    fn try_from(r: CsvRow) -> Result<Self> {
        let tuple = r
            .tuple
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| Error::Scenario(format!("bad tuple entry `{x}`"))))
            .collect::<Result<_>>()?;
        Ok(Self {
            algorithm: r.algorithm,
            d: r.d,
            seed: r.seed,
            robustness: r.robustness,
            fairness: r.fairness,
            fairness_f1: r.fairness_f1,
            fairness_f2: r.fairness_f2,
            feasible: r.feasible,
            tuple,
            timings: RunTimings {
                offline_ms: r.offline_ms,
                online_first_ms: r.online_first_ms,
            },
        })
    }
}

/// Means over the feasible runs of one (algorithm, fleet size) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub algorithm: String,
    #[serde(rename = "D")]
    pub d: usize,
    pub runs: usize,
    pub feasible: usize,
    pub robustness: f64,
    pub fairness_f1: f64,
    pub fairness_f2: f64,
    pub timings: RunTimings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub cells: Vec<BenchCell>,
    pub rows: Vec<BenchRow>,
}

/// Mean of the non-NaN values.
fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.filter(|x| !x.is_nan()).fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Plans one algorithm on one start state.
pub fn run_algorithm(
    planner: &Planner,
    x0: &FleetState,
    algorithm: Algorithm,
    w: f64,
) -> Result<Option<PlanResult>> {
    let f2 = FairnessSpec::F2 { w };
    Ok(match algorithm {
        Algorithm::Baseline => Some(planner.solve_baseline(x0, &f2)?),
        Algorithm::FairFlyF1 => planner.solve_fair(x0, &FairnessSpec::F1)?.solved(),
        Algorithm::FairFlyF2 => match planner.solve_fair(x0, &f2)? {
            SolveOutcome::Solved(r) => Some(r),
            SolveOutcome::Infeasible(_) => None,
        },
    })
}

/// Runs every (algorithm, fleet size, seed) combination.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchmarkReport> {
    let base = match &cfg.scenario {
        Some(s) => s.clone(),
        None => desk_map(cfg.dims.iter().copied().max().unwrap_or(1))?,
    };
    let f2 = FairnessSpec::F2 { w: cfg.w };
    f2.validate(1)?;
    let mut jobs = Vec::new();
    for &d in &cfg.dims {
        let sc = base.prefix(d)?;
        for &alg in &cfg.algorithms {
            for seed in 0..cfg.seeds as u64 {
                let mut pc = cfg.planner.clone();
                pc.inner.seed = seed;
                jobs.push((alg, d, seed, sc.planner(pc)?, sc.sample_initial(seed)?));
            }
        }
    }
    let rows: Vec<BenchRow> = jobs
        .into_par_iter()
        .map(|(alg, d, seed, planner, x0)| -> Result<BenchRow> {
            let res = run_algorithm(&planner, &x0, alg, cfg.w)?;
            let mut row = BenchRow {
                algorithm: alg.name().into(),
                d,
                seed,
                robustness: f64::NAN,
                fairness: f64::NAN,
                fairness_f1: f64::NAN,
                fairness_f2: f64::NAN,
                feasible: false,
                tuple: Vec::new(),
                timings: RunTimings {
                    offline_ms: f64::NAN,
                    online_first_ms: f64::NAN,
                },
            };
            if let Some(r) = res {
                let bx = planner.bounds();
                row.robustness = r.robustness;
                row.fairness = r.fairness;
                row.fairness_f1 = FairnessSpec::F1.score(&r.tuple, bx);
                row.fairness_f2 = f2.score(&r.tuple, bx);
                row.feasible = r.feasible;
                row.timings.offline_ms = r.timings.offline_ms;
                if cfg.online && r.feasible {
                    row.timings.online_first_ms =
                        first_iteration_ms(&planner, &r, OnlineConfig::default()).unwrap_or(f64::NAN);
                }
                row.tuple = r.tuple;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(BenchmarkReport::from_rows(rows))
}

impl BenchmarkReport {
    /// Groups rows into cells, ordered by algorithm name then fleet size.
    pub fn from_rows(rows: Vec<BenchRow>) -> Self {
        let mut keys: Vec<(String, usize)> = rows.iter().map(|r| (r.algorithm.clone(), r.d)).collect();
        keys.sort();
        keys.dedup();
        let cells = keys
            .into_iter()
            .map(|(alg, d)| {
                let all: Vec<&BenchRow> = rows.iter().filter(|r| r.d == d && r.algorithm == alg).collect();
                let ok = || all.iter().filter(|r| r.feasible);
                BenchCell {
                    algorithm: alg.clone(),
                    d,
                    runs: all.len(),
                    feasible: ok().count(),
                    robustness: mean(ok().map(|r| r.robustness)),
                    fairness_f1: mean(ok().map(|r| r.fairness_f1)),
                    fairness_f2: mean(ok().map(|r| r.fairness_f2)),
                    timings: RunTimings {
                        offline_ms: mean(ok().map(|r| r.timings.offline_ms)),
                        online_first_ms: mean(ok().map(|r| r.timings.online_first_ms)),
                    },
                }
            })
            .collect();
        Self { cells, rows }
    }

    pub fn cell(&self, algorithm: Algorithm, d: usize) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.algorithm == algorithm.name() && c.d == d)
    }

    /// Raw per-run rows as CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(CsvRow::from(r))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let rows = rdr
            .deserialize::<CsvRow>()
            .map(|row| BenchRow::try_from(row.map_err(Error::from)?))
            .collect::<Result<_>>()?;
        Ok(Self::from_rows(rows))
    }

    /// Per-metric series of `[D, mean]` points for each algorithm.
    pub fn plot_data(&self) -> serde_json::Value {
        let metric = |name: &str, get: &dyn Fn(&BenchCell) -> f64| {
            let mut by_alg: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
            for c in &self.cells {
                by_alg.entry(c.algorithm.clone()).or_default().push((c.d, get(c)));
            }
            (name.to_string(), serde_json::json!(by_alg))
        };
        let series: serde_json::Map<String, serde_json::Value> = [
            metric("fairness_f1", &|c| c.fairness_f1),
            metric("fairness_f2", &|c| c.fairness_f2),
            metric("robustness", &|c| c.robustness),
            metric("offline_ms", &|c| c.timings.offline_ms),
            metric("online_first_ms", &|c| c.timings.online_first_ms),
        ]
        .into_iter()
        .collect();
        serde_json::json!({ "series": series })
    }
}
