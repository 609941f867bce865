//! `hmwtpp`: load or generate instances, solve them exactly, check plans,
//! and export models for other solvers.
//!
//! Exit codes: 0 success, 1 error, 2 usage, 3 infeasible, 4 time or node
//! limit, 5 plan failed validation, 6 cut-round cap reached.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use hmwtpp::costmodels::weigher_for;
use hmwtpp::export::{read_solution, write_lp, write_mps, write_solution};
use hmwtpp::instances::{
    build_guitar, gen_grid, grid_geojson, grid_to_instance, load_instance, parse_tsplib, routes_geojson,
    serialize_instance, toomany, tsplib_to_instance, GridParams, Recipe, Selection,
};
use hmwtpp::{
    build_graph, encode, extract_plan, solve, validate_plan, CostSpec, DistanceRule, EncodeOptions, MilpModel,
    MultiGraph, Objective, Plan, ProblemInstance, SecMode, SolveLimits, SolveStatus,
};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_LIMIT: u8 = 4;
const EXIT_INVALID: u8 = 5;
const EXIT_ROUND_CAP: u8 = 6;

#[derive(Parser)]
#[command(name = "hmwtpp", version, about = "Exact multi-worker task route planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and write the report, plan and solution.
    Solve(SolveArgs),
    /// Check a plan, or a raw solution file, against an instance.
    Validate(ValidateArgs),
    /// Write the encoded model in LP or MPS format.
    Export(ExportArgs),
    /// Generate a synthetic power-grid inspection instance.
    GenGrid(GenGridArgs),
    /// Print the task multigraph.
    DumpGraph(DumpArgs),
    /// Write one of the built-in instances.
    Fixture(FixtureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Distance {
    Exact,
    Rounded,
    Att,
}

/// Where the instance comes from. `.tsp` files are converted with the
/// TSPLIB options, anything else is read as a native JSON instance.
#[derive(Args)]
struct InputArgs {
    input: PathBuf,
    /// Workers for TSPLIB input.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Travel speed for TSPLIB input, distance units per second.
    #[arg(long, default_value_t = 10.0)]
    speed: f64,
    /// 1-based TSPLIB node used as the base.
    #[arg(long, default_value_t = 1)]
    base: usize,
    /// Distance rule for TSPLIB coordinates.
    #[arg(long, value_enum, default_value_t = Distance::Exact)]
    distance: Distance,
    /// TSPLIB tasks that lose one random worker.
    #[arg(long, default_value_t = 0)]
    drop_compat: usize,
    /// Random order pairs added to TSPLIB input.
    #[arg(long, default_value_t = 0)]
    order_pairs: usize,
    /// Random precedence pairs added to TSPLIB input.
    #[arg(long, default_value_t = 0)]
    precedence: usize,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ModelArgs {
    /// Subtour elimination: `dfj` (lazy cuts) or `mtz` (order variables).
    #[arg(long, default_value = "dfj")]
    sec: SecMode,
    /// `mtm` (longest route) or `total` (sum of route times).
    #[arg(long, default_value = "mtm")]
    objective: Objective,
    /// Allow workers to wait at their base before starting.
    #[arg(long)]
    waiting: bool,
    /// Cap every worker's normalized energy use at 1.
    #[arg(long)]
    energy_budget: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Seconds for the whole solve.
    #[arg(long, value_parser = positive)]
    time_limit: Option<f64>,
    /// Relative gap at which the search stops.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    gap: f64,
    /// Branch-and-bound nodes before the search stops.
    #[arg(long)]
    node_limit: Option<usize>,
    /// Also write the model in LP format.
    #[arg(long)]
    export_lp: Option<PathBuf>,
    /// Also write the model in MPS format.
    #[arg(long)]
    export_mps: Option<PathBuf>,
    /// Directory for report.txt, plan.json and solution.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// A plan JSON file written by `solve`.
    #[arg(long, conflicts_with = "solution", required_unless_present = "solution")]
    plan: Option<PathBuf>,
    /// A `name value` solution file for the encoded model.
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Lp,
    Mps,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Format::Lp)]
    format: Format,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenGridArgs {
    #[arg(long, default_value_t = 6)]
    towers: usize,
    #[arg(long, default_value_t = 5)]
    segments: usize,
    #[arg(long, default_value_t = 2)]
    multirotors: usize,
    #[arg(long, default_value_t = 0)]
    vtols: usize,
    /// Upper bound of the random wind speed, m/s.
    #[arg(long, default_value_t = 5.0)]
    max_wind: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the grid as GeoJSON.
    #[arg(long)]
    geojson: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Guitar,
    Toomany,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(value_enum)]
    name: Builtin,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s}")),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, got {s}")),
    }
}

fn load(args: &InputArgs) -> Result<ProblemInstance> {
    let path = &args.input;
    let is_tsp = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsp"));
    if !is_tsp {
        return load_instance(path).with_context(|| format!("reading {}", path.display()));
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let p = parse_tsplib(&text).with_context(|| format!("parsing {}", path.display()))?;
    if args.base == 0 {
        bail!("--base is 1-based");
    }
    let recipe = Recipe {
        compatibility: args.drop_compat,
        order: args.order_pairs,
        precedence: args.precedence,
        seed: args.seed,
        distance: match args.distance {
            Distance::Exact => DistanceRule::Exact,
            Distance::Rounded => DistanceRule::Rounded,
            Distance::Att => DistanceRule::Att,
        },
    };
    Ok(tsplib_to_instance(&p, args.workers, args.speed, args.base - 1, &recipe)?)
}

fn options(inst: &ProblemInstance, m: &ModelArgs) -> EncodeOptions {
    let mut opts = EncodeOptions::from_instance(inst, m.sec, m.objective);
    opts.waiting |= m.waiting;
    opts.energy_budget |= m.energy_budget;
    opts
}

fn prepare(input: &InputArgs, m: &ModelArgs) -> Result<(ProblemInstance, MultiGraph, MilpModel)> {
    let inst = load(input)?;
    let graph = build_graph(&inst, weigher_for(&inst).as_ref())?;
    let model = encode(&graph, &options(&inst, m))?;
    info!("{}: {} variables, {} constraints", inst.name, model.variables.len(), model.constraints.len());
    Ok((inst, graph, model))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<u8> {
    let (inst, graph, model) = prepare(&a.input, &a.model)?;
    if let Some(p) = &a.export_lp {
        write_or_print(Some(p), &write_lp(&model, &inst.name, &[]))?;
    }
    if let Some(p) = &a.export_mps {
        write_or_print(Some(p), &write_mps(&model, &inst.name, &[]))?;
    }
    let limits = SolveLimits {
        time_limit: a.time_limit.map(Duration::from_secs_f64),
        gap: a.gap,
        node_limit: a.node_limit,
        ..Default::default()
    };
    let mut report = solve(&graph, &model, &limits)?;
    report.seed = Some(a.input.seed);
    print!("{}", report.to_text());

    let mut code = match report.status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::TimeLimit | SolveStatus::NodeLimit => EXIT_LIMIT,
        SolveStatus::IterationCap => EXIT_ROUND_CAP,
        SolveStatus::Unbounded => EXIT_ERROR,
    };
    let plan = match &report.solution {
        Some(x) => {
            let plan = extract_plan(&inst.name, &graph, &model, x)?;
            let check = validate_plan(&inst, &graph, &model.options, &plan);
            if !check.is_valid() {
                eprintln!("plan failed validation:\n{check}");
                code = EXIT_INVALID;
            }
            Some(plan)
        }
        None => None,
    };
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("report.txt"), report.to_text())?;
        if let (Some(plan), Some(x)) = (&plan, &report.solution) {
            fs::write(dir.join("plan.json"), plan.to_json())?;
            fs::write(dir.join("solution.txt"), write_solution(&model, x))?;
            if let CostSpec::Grid { grid } = &inst.costs {
                let geo = serde_json::to_string_pretty(&routes_geojson(grid, plan))?;
                fs::write(dir.join("routes.geojson"), geo + "\n")?;
            }
        }
    }
    Ok(code)
}

fn cmd_validate(a: &ValidateArgs) -> Result<u8> {
    let (inst, graph, model) = prepare(&a.input, &a.model)?;
    let mut opts = model.options.clone();
    let plan = match (&a.plan, &a.solution) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let plan = Plan::from_json(&text).with_context(|| format!("parsing {}", p.display()))?;
            if plan.instance != inst.name {
                bail!("plan is for instance `{}` but the instance is `{}`", plan.instance, inst.name);
            }
            opts.objective = plan.objective_kind;
            plan
        }
        (None, Some(s)) => {
            let text = fs::read_to_string(s).with_context(|| format!("reading {}", s.display()))?;
            let x = read_solution(&model, &text)?;
            let residual = model.max_violation(&x, &[]);
            if residual > 1e-6 {
                eprintln!("solution violates the model by {residual:e}");
                return Ok(EXIT_INVALID);
            }
            extract_plan(&inst.name, &graph, &model, &x)?
        }
        (None, None) => bail!("need --plan or --solution"),
    };
    let report = validate_plan(&inst, &graph, &opts, &plan);
    if report.is_valid() {
        println!("valid: objective {}", plan.objective);
        Ok(0)
    } else {
        println!("{report}");
        Ok(EXIT_INVALID)
    }
}

fn cmd_export(a: &ExportArgs) -> Result<u8> {
    let (inst, _, model) = prepare(&a.input, &a.model)?;
    let text = match a.format {
        Format::Lp => write_lp(&model, &inst.name, &[]),
        Format::Mps => write_mps(&model, &inst.name, &[]),
    };
    write_or_print(a.out.as_deref(), &text)?;
    Ok(0)
}

fn cmd_gen_grid(a: &GenGridArgs) -> Result<u8> {
    let params = GridParams {
        towers: a.towers,
        segments: a.segments,
        multirotors: a.multirotors,
        vtols: a.vtols,
        max_wind: a.max_wind,
        seed: a.seed,
    };
    let grid = gen_grid(&params)?;
    let (mut inst, _) = grid_to_instance(&grid, &Selection::all(&grid))?;
    inst.name = format!("grid_{}t_{}s_seed{}", a.towers, a.segments, a.seed);
    inst.seed = Some(a.seed);
    write_or_print(a.out.as_deref(), &serialize_instance(&inst))?;
    if let Some(p) = &a.geojson {
        let geo = serde_json::to_string_pretty(&grid_geojson(&grid))?;
        fs::write(p, geo + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(0)
}

fn cmd_dump(a: &DumpArgs) -> Result<u8> {
    let inst = load(&a.input)?;
    let graph = build_graph(&inst, weigher_for(&inst).as_ref())?;
    print!("{}", hmwtpp::graph::dump(&graph));
    Ok(0)
}

fn cmd_fixture(a: &FixtureArgs) -> Result<u8> {
    let inst = match a.name {
        Builtin::Guitar => build_guitar(),
        Builtin::Toomany => {
            let grid = toomany();
            let (mut inst, _) = grid_to_instance(&grid, &Selection::all(&grid))?;
            inst.name = "toomany".into();
            inst
        }
    };
    write_or_print(a.out.as_deref(), &serialize_instance(&inst))?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HMWTPP_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Export(a) => cmd_export(a),
        Command::GenGrid(a) => cmd_gen_grid(a),
        Command::DumpGraph(a) => cmd_dump(a),
        Command::Fixture(a) => cmd_fixture(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
