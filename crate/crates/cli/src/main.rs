mod config;
mod surface;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use calcap::capacity::{estimate_capacity, DualityParams, LpParams};
use calcap::geometry::{BoxUnionSet, Point};
use calcap::kernels::{eval_kernel, eval_regularized, BumpProfile, KernelKind};
use calcap::measures::CellMeasure;
use calcap::rect2d::{capacity_formula, max_value, rect_bracket, vertex_min};
use calcap::variational::{maximize_f, PotentialSource, VariationalProblem};
use calcap::whitney::{build_cover, CoverParams, DecomposeParams, GridParams, SelectParams};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use config::{Artifact, RunConfig};

#[derive(Parser)]
#[command(name = "calcap", version, about = "Potentials and capacity brackets for the half-order heat kernel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate P, P* or P_sym (optionally regularized at scale τ) at points.
    KernelEval {
        #[arg(long, default_value = "P_SYM")]
        kernel: String,
        /// Comma-separated coordinates, time last; repeat for more points.
        #[arg(long = "at", value_parser = parse_list, required = true, allow_hyphen_values = true)]
        at: Vec<Vec<f64>>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form capacity value, M(r), m(r) and the bracket for a rectangle.
    RectCapacity {
        #[arg(long)]
        lx: f64,
        #[arg(long)]
        lt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV of the potential of Lebesgue measure on [0, r] x [0, 1].
    PotentialSurface {
        #[arg(long)]
        r: f64,
        #[arg(long, value_parser = parse_grid, default_value = "101x101")]
        grid: (usize, usize),
        #[arg(long, default_value = "P")]
        kernel: String,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        x_range: Option<(f64, f64)>,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        t_range: Option<(f64, f64)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// LP lower bound and duality upper bound for a box union.
    EstimateCapacity {
        #[arg(long)]
        set: PathBuf,
        #[arg(long, default_value_t = 4)]
        generation: i32,
        #[arg(long)]
        both_kernels: bool,
        #[arg(long)]
        safety: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximize the variational functional over uniform-start cell measures.
    Variational {
        #[arg(long)]
        set: PathBuf,
        #[arg(long, default_value_t = 3)]
        generation: i32,
        #[arg(long)]
        tau0: Option<f64>,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Superlevel set, Whitney decomposition and cover selection.
    Whitney {
        #[arg(long)]
        set: PathBuf,
        /// A measure JSON or the artifact written by `variational`.
        #[arg(long)]
        mu0: PathBuf,
        #[arg(long)]
        tau0: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 1)]
        refine: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        p4_hypothesis: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quick self-checks; exit 0 when every check passes.
    Verify {
        #[arg(long, default_value = "rect")]
        suite: String,
    },
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"))).collect()
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two comma-separated numbers, got '{s}'")),
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    Ok((w.parse().map_err(|e| format!("'{w}': {e}"))?, h.parse().map_err(|e| format!("'{h}': {e}"))?))
}

/// Exit 2 for bad input, 1 for failed computations.
enum Failure {
    Config(String),
    Compute(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<calcap::Error> for Failure {
    fn from(e: calcap::Error) -> Self {
        Failure::Compute(e.into())
    }
}

fn to_config(command: &Command) -> RunConfig {
    let path = |p: &Path| Some(p.display().to_string());
    let out = |p: &Option<PathBuf>| p.as_deref().and_then(path);
    match command {
        Command::KernelEval { kernel, at, tau, out: o } => RunConfig {
            command: "kernel-eval".into(),
            kernel: Some(kernel.clone()),
            points: at.clone(),
            tau0: *tau,
            out: out(o),
            ..Default::default()
        },
        Command::RectCapacity { lx, lt, out: o } => {
            RunConfig { command: "rect-capacity".into(), lx: Some(*lx), lt: Some(*lt), out: out(o), ..Default::default() }
        }
        Command::PotentialSurface { r, grid, kernel, x_range, t_range, out: o } => RunConfig {
            command: "potential-surface".into(),
            r: Some(*r),
            grid: Some(*grid),
            kernel: Some(kernel.clone()),
            x_range: *x_range,
            t_range: *t_range,
            out: path(o),
            ..Default::default()
        },
        Command::EstimateCapacity { set, generation, both_kernels, safety, out: o } => RunConfig {
            command: "estimate-capacity".into(),
            set: path(set),
            generation: Some(*generation),
            both_kernels: *both_kernels,
            safety: *safety,
            out: out(o),
            ..Default::default()
        },
        Command::Variational { set, generation, tau0, iters, seed, out: o } => RunConfig {
            command: "variational".into(),
            set: path(set),
            generation: Some(*generation),
            tau0: *tau0,
            iters: Some(*iters),
            seed: Some(*seed),
            out: out(o),
            ..Default::default()
        },
        Command::Whitney { set, mu0, tau0, theta, refine, seed, p4_hypothesis, out: o } => RunConfig {
            command: "whitney".into(),
            set: path(set),
            mu0: path(mu0),
            tau0: *tau0,
            theta: *theta,
            refine: Some(*refine),
            seed: Some(*seed),
            p4_hypothesis: *p4_hypothesis,
            out: out(o),
            ..Default::default()
        },
        Command::Verify { suite } => RunConfig { command: "verify".into(), suite: Some(suite.clone()), ..Default::default() },
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::Config(format!("{}: malformed JSON at line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })
}

fn read_set(path: &Path) -> Result<BoxUnionSet, Failure> {
    let value = read_json(path)?;
    let set: BoxUnionSet = serde_json::from_value(value)
        .map_err(|e| Failure::Config(format!("{}: not a box union: {e}", path.display())))?;
    set.validate().map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(set)
}

/// A bare measure, or the `result` of a `variational` artifact with its `tau0`.
fn read_measure(path: &Path) -> Result<(CellMeasure, Option<f64>), Failure> {
    let value = read_json(path)?;
    let (body, tau0) = match value.get("result") {
        Some(r) => (r.get("mu0").cloned().unwrap_or(serde_json::Value::Null), r.get("tau0").and_then(|t| t.as_f64())),
        None => (value, None),
    };
    let mu: CellMeasure = serde_json::from_value(body)
        .map_err(|e| Failure::Config(format!("{}: not a cell measure: {e}", path.display())))?;
    mu.validate().map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok((mu, tau0))
}

fn parse_kernel(name: &str) -> Result<KernelKind, Failure> {
    KernelKind::parse(name).map_err(|e| Failure::Config(e.to_string()))
}

fn emit<T: Serialize>(config: &RunConfig, result: T, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(&Artifact::new(config, result)).context("serializing the artifact")?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(command: Command, config: &RunConfig) -> Result<(), Failure> {
    match command {
        Command::KernelEval { kernel, at, tau, out } => {
            let kind = parse_kernel(&kernel)?;
            let bump = BumpProfile::default();
            let values = at
                .iter()
                .map(|c| {
                    if c.len() < 2 {
                        return Err(Failure::Config(format!("a point needs at least two coordinates, got {c:?}")));
                    }
                    let p = Point::from_coords(c.clone());
                    let v = match tau {
                        Some(t) => eval_regularized(kind, &p, t, &bump)?,
                        None => eval_kernel(kind, &p)?,
                    };
                    Ok(json!({ "point": c, "value": v }))
                })
                .collect::<Result<Vec<_>, _>>()?;
            emit(config, json!({ "kernel": kind, "tau": tau, "values": values }), out.as_deref())
        }
        Command::RectCapacity { lx, lt, out } => {
            let r = lx / lt;
            let value = capacity_formula(lx, lt)?;
            let (lo, hi) = rect_bracket(lx, lt)?;
            println!("r = {r}");
            println!("capacity = {value}");
            println!("M(r) = {}", max_value(r));
            println!("m(r) = {}", vertex_min(r));
            println!("bracket = [{lo}, {hi}]");
            if let Some(p) = out {
                let result = json!({
                    "lx": lx, "lt": lt, "r": r, "capacity": value,
                    "M": max_value(r), "m": vertex_min(r), "bracket": [lo, hi],
                });
                emit(config, result, Some(&p))?;
            }
            Ok(())
        }
        Command::PotentialSurface { r, grid, kernel, x_range, t_range, out } => {
            let kind = parse_kernel(&kernel)?;
            let (xr, tr) = surface::default_ranges(r);
            let s = surface::rect_surface(r, kind, x_range.unwrap_or(xr), t_range.unwrap_or(tr), grid);
            surface::export_surface(&s, &out).with_context(|| format!("writing {}", out.display()))?;
            let mut meta = out.clone().into_os_string();
            meta.push(".meta.json");
            let result = json!({ "rows": s.rows.len(), "csv": out.display().to_string() });
            emit(config, result, Some(Path::new(&meta)))
        }
        Command::EstimateCapacity { set, generation, both_kernels, safety, out } => {
            let set = read_set(&set)?;
            let mut lp = LpParams { both_kernels, ..LpParams::with_generation(generation) };
            if let Some(s) = safety {
                lp.safety = s;
            }
            let dual = DualityParams::default();
            let bracket = estimate_capacity(&set, &lp, &dual)?;
            eprintln!("lower = {}, upper = {}", bracket.lower, bracket.upper);
            let result = json!({
                "lower": bracket.lower,
                "upper": bracket.upper,
                "capacity": bracket.capacity,
                "witness": bracket.lower_witness,
                "constraint_report": bracket.constraint_report,
                "seeds": { "lp": null, "note": "the LP and duality bounds are deterministic" },
                "solver": {
                    "lp": "dense bounded simplex with cutting planes",
                    "rounds": bracket.constraint_report.rounds,
                    "pivots": bracket.constraint_report.pivots,
                    "duality_boxes": bracket.duality.boxes,
                    "params": lp,
                    "duality_rel_gap": dual.rel_gap,
                },
                "bracket": bracket,
            });
            emit(config, result, out.as_deref())
        }
        Command::Variational { set, generation, tau0, iters, seed, out } => {
            let set = read_set(&set)?;
            let prob = VariationalProblem::uniform(&set, generation, tau0, 1.0)?;
            let best = maximize_f(&prob, iters, seed)?;
            eprintln!("F = {}, mass = {}, energy = {}", best.value, best.mass, best.energy);
            emit(config, &best, out.as_deref())
        }
        Command::Whitney { set, mu0, tau0, theta, refine, seed, p4_hypothesis, out } => {
            let set = read_set(&set)?;
            let (mu, stored_tau) = read_measure(&mu0)?;
            let tau0 = tau0.or(stored_tau).unwrap_or(0.25 * mu.min_cell_width());
            let source = PotentialSource::new(&mu, tau0, &BumpProfile::default())?;
            let params = CoverParams {
                grid: GridParams { refine, ..GridParams::default() },
                theta,
                decompose: DecomposeParams::default(),
                select: SelectParams { seed, p4_hypothesis, ..SelectParams::default() },
            };
            let run = build_cover(&set, &source, &params)?;
            eprintln!("{} cubes, θ = {}", run.cover.stats.count, run.cover.theta);
            emit(config, &run, out.as_deref())
        }
        Command::Verify { suite } => {
            let checks = verify::run_suite(&suite).map_err(Failure::Config)?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += !c.pass as usize;
            }
            println!("{} of {} checks passed", checks.len() - failed, checks.len());
            if failed > 0 {
                return Err(Failure::Compute(anyhow::anyhow!("{failed} checks failed")));
            }
            Ok(())
        }
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("CALCAP_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| format!("CALCAP_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("CALCAP_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let config = to_config(&cli.command);
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
