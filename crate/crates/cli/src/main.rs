use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fairfly::online::{simulate_online, OnlineConfig};
use fairfly::planner::{PlanResult, PlannerConfig, SolveOutcome};
use fairfly::scenario::{BenchConfig, BenchmarkReport, Scenario};
use fairfly::stl::{parse, robustness, satisfies, ParseContext, Trace};
use fairfly::FairnessSpec;
use serde::Serialize;

const GRAMMAR: &str = "\
Formula syntax:
  phi  := or ('->' phi)?
  or   := and ('|' and)*
  and  := bin ('&' bin)*
  bin  := un (('U' | 'R') '[' a ',' b ']' un)?
  un   := '!' un | 'F' '[' a ',' b ']' un | 'G' '[' a ',' b ']' un | prim
  prim := 'true' | 'false' | atom | '(' phi ')'
  atom := in(u, R) | out(u, R) | hs(u, a1, .., ad, b) | sep(u, v, s)
UAVs are scenario names or u1, u2, ...; intervals are sample offsets.
Scenario files are JSON (schema version 1); see the README for the fields.";

#[derive(Parser)]
#[command(name = "fairfly", version, about = "Fair trajectory planning for UAV fleets with STL missions")]
#[command(after_long_help = GRAMMAR)]
struct Cli {
    /// Suppress the human-readable summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for parallel restarts and benchmark runs.
    #[arg(long, global = true, env = "FAIRFLY_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Robustness and verdict of a formula on a trace.
    Monitor(MonitorArgs),
    /// Plan a scenario offline.
    Plan(PlanArgs),
    /// Execute a plan with shrinking-horizon re-solves.
    Online(OnlineArgs),
    /// Run the benchmark matrix.
    Bench(BenchArgs),
    /// Turn a benchmark CSV into per-metric plot series.
    PlotData(PlotArgs),
}

#[derive(Args)]
struct MonitorArgs {
    /// File holding the formula text.
    #[arg(long, conflicts_with = "expr", required_unless_present = "expr")]
    formula: Option<PathBuf>,
    /// Formula given inline.
    #[arg(long)]
    expr: Option<String>,
    /// Trace CSV with columns uav,k,x1..xd.
    #[arg(long)]
    trace: PathBuf,
    /// Scenario providing region and UAV names.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Evaluation time index.
    #[arg(long, default_value_t = 0)]
    at: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum FairnessKind {
    F1,
    F2,
    F2imb,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's fairness function.
    #[arg(long, value_enum)]
    fairness: Option<FairnessKind>,
    #[arg(long)]
    w: Option<f64>,
    /// Comma-separated per-UAV weights for f2imb.
    #[arg(long, value_delimiter = ',')]
    v: Option<Vec<f64>>,
    /// Plan every UAV to the mission horizon instead of searching lengths.
    #[arg(long)]
    baseline: bool,
    /// Drives the start state and the solver's random restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Planner settings (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the plan JSON (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the planned trace as CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct OnlineArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Plan JSON written by `plan`.
    #[arg(long)]
    plan: PathBuf,
    /// Sup-norm bound of the position noise.
    #[arg(long, default_value_t = 0.0, conflicts_with = "noise_scale")]
    noise: f64,
    /// Noise bound as a fraction of the plan's robustness.
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark settings (JSON); defaults to the desk map matrix.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<usize>,
    /// Comma-separated fleet sizes.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Skip the online timing measurement.
    #[arg(long)]
    no_online: bool,
    /// Where to write the per-run CSV (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Per-run CSV written by `bench`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
enum Status {
    Done,
    Infeasible,
}

struct Ctx {
    quiet: bool,
    json: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_json(&read(path)?).with_context(|| format!("loading scenario {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<PlannerConfig> {
    match path {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing planner config {}", p.display())),
        None => Ok(PlannerConfig::default()),
    }
}

fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes `text` to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_trace(path: &Path, tr: &Trace) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    tr.write_csv(f)?;
    Ok(())
}

fn monitor(ctx: &Ctx, a: MonitorArgs) -> Result<Status> {
    let text = match (&a.formula, &a.expr) {
        (Some(p), _) => read(p)?,
        (None, Some(e)) => e.clone(),
        (None, None) => bail!("give --formula or --expr"),
    };
    let pctx = match &a.scenario {
        Some(p) => load_scenario(p)?.parse_context()?,
        None => ParseContext::new(),
    };
    let f = parse(text.trim(), &pctx).context("parsing formula")?;
    let tr = Trace::read_csv(fs::File::open(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?, a.dt)?;
    f.validate(tr.uav_count(), tr.dim())?;
    let rho = robustness(&f, &tr, a.at);
    let sat = satisfies(&f, &tr, a.at);
    if ctx.json {
        #[derive(Serialize)]
        struct Verdict {
            robustness: f64,
            satisfied: bool,
            horizon: usize,
        }
        emit(
            None,
            &to_json(&Verdict {
                robustness: rho,
                satisfied: sat,
                horizon: f.horizon(),
            })?,
        )?;
    } else {
        println!("robustness {rho}");
        println!("{}", if sat { "SAT" } else { "UNSAT" });
    }
    Ok(Status::Done)
}

fn fairness_spec(a: &PlanArgs, scenario: &Scenario) -> Result<FairnessSpec> {
    let w = |default: f64| a.w.unwrap_or(default);
    let current_w = match &scenario.fairness {
        FairnessSpec::F2 { w } | FairnessSpec::F2Imb { w, .. } => *w,
        FairnessSpec::F1 => 0.75,
    };
    let spec = match a.fairness {
        None => match (&scenario.fairness, a.w, &a.v) {
            (FairnessSpec::F2 { .. }, Some(w), _) => FairnessSpec::F2 { w },
            (FairnessSpec::F2Imb { w, v }, nw, nv) => FairnessSpec::F2Imb {
                w: nw.unwrap_or(*w),
                v: nv.clone().unwrap_or_else(|| v.clone()),
            },
            (s, _, _) => s.clone(),
        },
        Some(FairnessKind::F1) => FairnessSpec::F1,
        Some(FairnessKind::F2) => FairnessSpec::F2 { w: w(current_w) },
        Some(FairnessKind::F2imb) => FairnessSpec::F2Imb {
            w: w(current_w),
            v: match (&a.v, &scenario.fairness) {
                (Some(v), _) => v.clone(),
                (None, FairnessSpec::F2Imb { v, .. }) => v.clone(),
                (None, _) => bail!("f2imb needs per-UAV weights (--v)"),
            },
        },
    };
    spec.validate(scenario.uav_count())?;
    Ok(spec)
}

fn plan(ctx: &Ctx, a: PlanArgs) -> Result<Status> {
    let scenario = load_scenario(&a.scenario)?;
    let spec = fairness_spec(&a, &scenario)?;
    let mut config = load_config(a.config.as_deref())?;
    config.inner.seed = a.seed;
    let planner = scenario.planner(config)?;
    let x0 = scenario.sample_initial(a.seed)?;
    let result = if a.baseline {
        planner.solve_baseline(&x0, &spec)?
    } else {
        match planner.solve_fair(&x0, &spec)? {
            SolveOutcome::Solved(r) => r,
            SolveOutcome::Infeasible(report) => {
                emit(a.out.as_deref(), &to_json(&report)?)?;
                ctx.note(format!(
                    "infeasible: no tuple in the box {:?}..{:?} admits a satisfying plan ({} examined)",
                    planner.bounds().lo,
                    planner.bounds().hi,
                    report.stats.examined
                ));
                return Ok(Status::Infeasible);
            }
        }
    };
    emit(a.out.as_deref(), &to_json(&result)?)?;
    if let Some(p) = &a.trace_out {
        write_trace(p, &result.trace(&scenario.model)?)?;
    }
    ctx.note(format!(
        "{}: tuple {:?}, {} {:.4}, robustness {:.4}, {:.1} ms",
        result.algorithm, result.tuple, result.fairness_kind, result.fairness, result.robustness, result.timings.offline_ms
    ));
    Ok(if result.feasible {
        Status::Done
    } else {
        Status::Infeasible
    })
}

fn online(ctx: &Ctx, a: OnlineArgs) -> Result<Status> {
    let scenario = load_scenario(&a.scenario)?;
    let plan: PlanResult =
        serde_json::from_str(&read(&a.plan)?).with_context(|| format!("parsing plan {}", a.plan.display()))?;
    if plan.tuple.len() != scenario.uav_count() {
        bail!("plan has {} UAVs, scenario has {}", plan.tuple.len(), scenario.uav_count());
    }
    let planner = scenario.planner(load_config(a.config.as_deref())?)?;
    let noise = a.noise_scale.map_or(a.noise, |s| s * plan.robustness.max(0.0));
    let run = simulate_online(
        &planner,
        &plan,
        OnlineConfig {
            noise,
            seed: a.seed,
            ..OnlineConfig::default()
        },
    );
    emit(a.out.as_deref(), &to_json(&run)?)?;
    if let Some(p) = &a.trace_out {
        write_trace(p, &run.trace(scenario.model.dt, scenario.model.dim)?)?;
    }
    ctx.note(format!(
        "{} after {} re-solves, robustness {:.4}, {} violations, first re-solve {:.2} ms",
        if run.satisfied { "satisfied" } else { "violated" },
        run.iterations.len(),
        run.robustness,
        run.violations,
        run.timings.first_ms
    ));
    Ok(Status::Done)
}

fn bench(ctx: &Ctx, a: BenchArgs) -> Result<Status> {
    let mut cfg: BenchConfig = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing bench config {}", p.display()))?,
        None => BenchConfig::default(),
    };
    if let Some(s) = a.seeds {
        cfg.seeds = s;
    }
    if let Some(d) = a.dims {
        cfg.dims = d;
    }
    if a.no_online {
        cfg.online = false;
    }
    let report = fairfly::scenario::run_benchmark(&cfg)?;
    if let Some(p) = &a.report {
        fs::write(p, to_json(&report)?).with_context(|| format!("writing {}", p.display()))?;
    }
    if ctx.json && a.out.is_none() {
        emit(None, &to_json(&report)?)?;
    } else {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        emit(a.out.as_deref(), std::str::from_utf8(&buf)?)?;
    }
    if !ctx.quiet {
        eprintln!("{:<12} {:>3} {:>9} {:>10} {:>10} {:>10} {:>11} {:>11}", "algorithm", "D", "feasible", "rho", "f1", "f2", "offline_ms", "online_ms");
        for c in &report.cells {
            eprintln!(
                "{:<12} {:>3} {:>5}/{:<3} {:>10.4} {:>10.4} {:>10.4} {:>11.2} {:>11.3}",
                c.algorithm, c.d, c.feasible, c.runs, c.robustness, c.fairness_f1, c.fairness_f2, c.timings.offline_ms, c.timings.online_first_ms
            );
        }
    }
    Ok(Status::Done)
}

fn plot_data(ctx: &Ctx, a: PlotArgs) -> Result<Status> {
    let f = fs::File::open(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let report = BenchmarkReport::read_csv(f)?;
    emit(a.out.as_deref(), &to_json(&report.plot_data())?)?;
    ctx.note(format!("{} cells from {} runs", report.cells.len(), report.rows.len()));
    Ok(Status::Done)
}

fn run(cli: Cli) -> Result<Status> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let ctx = Ctx {
        quiet: cli.quiet,
        json: cli.json,
    };
    match cli.command {
        Command::Monitor(a) => monitor(&ctx, a),
        Command::Plan(a) => plan(&ctx, a),
        Command::Online(a) => online(&ctx, a),
        Command::Bench(a) => bench(&ctx, a),
        Command::PlotData(a) => plot_data(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            if usage {
                eprintln!("\n{GRAMMAR}");
                return ExitCode::from(1);
            }
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Infeasible) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
