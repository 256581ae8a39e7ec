mod config;
mod output;
mod render;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use n3body::action::total_action;
use n3body::bounds::{verify_time_lemmas, BoundEngine, PiConvention};
use n3body::io::{loop_from_json, loop_to_json, minimize_result_json, to_pretty};
use n3body::solver::{membership_check, ode_residual_guarded, refinement_ladder, MinimizeOptions};
use n3body::testorbits::{build_test_orbit, certify_with};
use n3body::{SymmetryParams, SystemLoop};

use crate::output::{sibling, write_atomic};

#[derive(Parser, Debug)]
#[command(name = "n3body", version, about = "Symmetric N+3-body loops: collision bounds, certificates and action minimization")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-case collision bounds and the threshold.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Value of pi for the constants; `both` prints two columns.
        #[arg(long, value_enum, default_value_t = PiChoice::Both)]
        pi: PiChoice,
    },
    /// Action of the circular test loop against the collision threshold.
    Certify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        radii: Radii,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, value_enum, default_value_t = PiChoice::Exact)]
        pi: PiChoice,
    },
    /// Minimize the action from a test loop or a stored loop.
    Minimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        radii: Radii,
        #[command(flatten)]
        solver: SolverArgs,
        /// Further levels with K and M doubled, each started from the last.
        #[arg(long, default_value_t = 0)]
        refine: usize,
        /// Per-body sampled curves `t,body,x,y` for plotting.
        #[arg(long)]
        emit_plot: Option<PathBuf>,
    },
    /// Exhaustive check of the collision-time distinctness lemmas.
    Lemmas {
        #[command(flatten)]
        common: Common,
        /// Run even when the parameters are incompatible.
        #[arg(long)]
        force: bool,
    },
    /// Kinetic, potential and pairwise action of a loop.
    Action {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        radii: Radii,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Uniform samples of every body.
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        radii: Radii,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Windings, symmetry residual, separation and ODE residual of a loop.
    Membership {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        radii: Radii,
        #[arg(long)]
        grid: Option<usize>,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    d: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    k1: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    k2: Option<i64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the rendered output here (atomically) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Read the loop (and its parameters) from a JSON document.
    #[arg(long)]
    loop_in: Option<PathBuf>,
    /// Flat `key=value` file; its entries act as flags given before the command line ones.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct Radii {
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    modes: Option<i64>,
    #[arg(long)]
    gtol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    eps_sep: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PiChoice {
    Exact,
    #[value(name = "3.1415")]
    Truncated,
    Both,
}

impl PiChoice {
    fn conventions(self) -> Vec<PiConvention> {
        match self {
            PiChoice::Exact => vec![PiConvention::Exact],
            PiChoice::Truncated => vec![PiConvention::FourDecimals],
            PiChoice::Both => vec![PiConvention::Exact, PiConvention::FourDecimals],
        }
    }

    fn single(self) -> PiConvention {
        match self {
            PiChoice::Truncated => PiConvention::FourDecimals,
            _ => PiConvention::Exact,
        }
    }
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn solver(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn params_from(common: &Common) -> Result<SymmetryParams, Failure> {
    match (common.n, common.r, common.d, common.k1, common.k2) {
        (Some(n), Some(r), Some(d), Some(k1), Some(k2)) => Ok(SymmetryParams::new(n, r, d, k1, k2)),
        _ => Err(Failure::invalid("parameters --n --r --d --k1 --k2 are required")),
    }
}

fn checked_params(common: &Common) -> Result<SymmetryParams, Failure> {
    let params = params_from(common)?;
    let compat = params.compatibility_check();
    if !compat.is_ok() {
        return Err(Failure::invalid(format!("incompatible parameters ({params}): {compat}")));
    }
    Ok(params)
}

/// The loop from `--loop-in`, or the circular test loop from `--a/--b`.
fn input_loop(common: &Common, radii: &Radii) -> Result<SystemLoop, Failure> {
    if let Some(path) = &common.loop_in {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
        let system = loop_from_json(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        if common.n.is_some() {
            let flags = params_from(common)?;
            if flags != system.params {
                return Err(Failure::invalid(format!(
                    "flags ({flags}) disagree with the stored loop ({})",
                    system.params
                )));
            }
        }
        let compat = system.params.compatibility_check();
        if !compat.is_ok() {
            return Err(Failure::invalid(format!("incompatible parameters in loop file: {compat}")));
        }
        return Ok(system);
    }
    let params = checked_params(common)?;
    let (Some(a), Some(b)) = (radii.a, radii.b) else {
        return Err(Failure::invalid("either --loop-in or both --a and --b are required"));
    };
    build_test_orbit(&params, a, b).map_err(|e| Failure::invalid(e.to_string()))
}

fn emit(common: &Common, text: &str) -> Result<(), Failure> {
    match &common.out {
        Some(path) => write_atomic(path, text).map_err(|e| Failure::invalid(format!("writing {}: {e}", path.display()))),
        None => to_stdout(text),
    }
}

fn to_stdout(text: &str) -> Result<(), Failure> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Ok(()) => Ok(()),
        // reader went away (`| head`); nothing left to report
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(Failure::invalid(format!("writing stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Bounds { common, pi } => cmd_bounds(&common, pi),
        Command::Certify { common, radii, grid, pi } => cmd_certify(&common, &radii, grid, pi),
        Command::Minimize { common, radii, solver, refine, emit_plot } => {
            cmd_minimize(&common, &radii, &solver, refine, emit_plot.as_deref())
        }
        Command::Lemmas { common, force } => cmd_lemmas(&common, force),
        Command::Action { common, radii, grid } => cmd_action(&common, &radii, grid),
        Command::Sample { common, radii, grid } => cmd_sample(&common, &radii, grid),
        Command::Membership { common, radii, grid } => cmd_membership(&common, &radii, grid),
    }
}

fn cmd_bounds(common: &Common, pi: PiChoice) -> Outcome {
    let params = checked_params(common)?;
    let reports = pi
        .conventions()
        .into_iter()
        .map(|c| BoundEngine::new(c).collision_threshold(&params))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::invalid(e.to_string()))?;
    let text = match common.format {
        Format::Table => render::bounds_table(&params, &reports),
        Format::Json => to_pretty(&json!({ "params": params, "reports": reports })),
        Format::Csv => render::bounds_csv(&reports),
    };
    emit(common, &text)?;
    Ok(0)
}

fn cmd_certify(common: &Common, radii: &Radii, grid: Option<usize>, pi: PiChoice) -> Outcome {
    let params = checked_params(common)?;
    let (Some(a), Some(b)) = (radii.a, radii.b) else {
        return Err(Failure::invalid("--a and --b are required"));
    };
    let grid = grid.unwrap_or_else(|| params.default_grid());
    let engine = BoundEngine::new(pi.single());
    let report = certify_with(&engine, &params, a, b, grid).map_err(|e| Failure::invalid(e.to_string()))?;
    let text = match common.format {
        Format::Table => render::certificate_table(&report),
        Format::Json => {
            let system = build_test_orbit(&params, a, b).map_err(|e| Failure::invalid(e.to_string()))?;
            let mut value = serde_json::to_value(&report).expect("report serializes");
            value["loop"] = loop_to_json(&system);
            to_pretty(&value)
        }
        Format::Csv => render::certificate_csv(&report),
    };
    emit(common, &text)?;
    Ok(if report.certified() { 0 } else { 1 })
}

fn solver_options(params: &SymmetryParams, args: &SolverArgs) -> MinimizeOptions {
    let mut opts = MinimizeOptions::for_params(params);
    if let Some(v) = args.grid {
        opts.grid = v;
    }
    if let Some(v) = args.modes {
        opts.modes = v;
    }
    if let Some(v) = args.gtol {
        opts.gtol = v;
    }
    if let Some(v) = args.max_iter {
        opts.max_iter = v;
    }
    if let Some(v) = args.eps_sep {
        opts.eps_sep = v;
    }
    opts
}

fn cmd_minimize(common: &Common, radii: &Radii, args: &SolverArgs, refine: usize, plot: Option<&Path>) -> Outcome {
    let start = input_loop(common, radii)?;
    let opts = solver_options(&start.params, args);
    let mut ladder = refinement_ladder(&start, &opts, refine + 1).map_err(|e| Failure::solver(e.to_string()))?;
    let result = ladder.pop().expect("at least one level");
    let windings = match result.windings.summary(&result.system.params) {
        Some((k1, k2)) => format!("({k1},{k2})"),
        None => "mixed".to_string(),
    };
    let summary = format!(
        "action={:.10} gradnorm={:.3e} minsep={:.6} windings={} iterations={} termination={:?} ode_residual={:.3e} certified={}",
        result.action,
        result.gradnorm,
        result.min_separation,
        windings,
        result.iterations,
        result.termination,
        result.ode_residual,
        result.certified
    );
    let document = to_pretty(&minimize_result_json(&result));
    let trajectory = result
        .system
        .sample(result.options.grid)
        .map_err(|e| Failure::solver(e.to_string()))?;
    match &common.out {
        Some(path) => {
            let write = |p: &Path, text: &str| {
                write_atomic(p, text).map_err(|e| Failure::invalid(format!("writing {}: {e}", p.display())))
            };
            write(path, &document)?;
            write(&sibling(path, "trajectory.csv"), &trajectory.to_csv())?;
            write(&sibling(path, "log.csv"), &result.history_csv())?;
            to_stdout(&format!("{summary}\n"))?;
        }
        None => match common.format {
            Format::Json => to_stdout(&document)?,
            Format::Csv => to_stdout(&result.history_csv())?,
            Format::Table => to_stdout(&format!("{summary}\n"))?,
        },
    }
    if let Some(path) = plot {
        write_atomic(path, &render::plot_csv(&trajectory))
            .map_err(|e| Failure::invalid(format!("writing {}: {e}", path.display())))?;
    }
    if result.converged() {
        Ok(0)
    } else {
        Err(Failure::solver(format!("not converged: {summary}")))
    }
}

fn cmd_lemmas(common: &Common, force: bool) -> Outcome {
    let params = if force { params_from(common)? } else { checked_params(common)? };
    let report = verify_time_lemmas(params.n, params.r);
    let text = match common.format {
        Format::Json => to_pretty(&serde_json::to_value(&report).expect("report serializes")),
        Format::Table | Format::Csv => render::lemmas_table(&report, common.format == Format::Csv),
    };
    emit(common, &text)?;
    Ok(if report.passed() { 0 } else { 1 })
}

fn grid_for(system: &SystemLoop, grid: Option<usize>) -> usize {
    grid.unwrap_or_else(|| system.params.default_grid())
}

fn cmd_action(common: &Common, radii: &Radii, grid: Option<usize>) -> Outcome {
    let system = input_loop(common, radii)?;
    let grid = grid_for(&system, grid);
    let breakdown = total_action(&system, grid).map_err(|e| Failure::invalid(e.to_string()))?;
    let text = match common.format {
        Format::Table => render::action_table(&breakdown, grid),
        Format::Json => to_pretty(&json!({
            "grid": grid,
            "kinetic": breakdown.kinetic,
            "potential": breakdown.potential,
            "total": breakdown.total,
            "pairwise_total": breakdown.pairwise_total(),
            "pairs": breakdown.pairs,
            "loop": loop_to_json(&system),
        })),
        Format::Csv => render::action_csv(&breakdown),
    };
    emit(common, &text)?;
    Ok(0)
}

fn cmd_sample(common: &Common, radii: &Radii, grid: Option<usize>) -> Outcome {
    let system = input_loop(common, radii)?;
    let grid = grid_for(&system, grid);
    let traj = system.sample(grid).map_err(|e| Failure::invalid(e.to_string()))?;
    let text = match common.format {
        Format::Json => {
            to_pretty(&json!({
                "grid": grid,
                "positions": render::complex_rows(&traj.positions),
                "velocities": render::complex_rows(&traj.velocities),
                "loop": loop_to_json(&system),
            }))
        }
        Format::Table | Format::Csv => traj.to_csv(),
    };
    emit(common, &text)?;
    Ok(0)
}

fn cmd_membership(common: &Common, radii: &Radii, grid: Option<usize>) -> Outcome {
    let system = input_loop(common, radii)?;
    let grid = grid_for(&system, grid);
    let report = membership_check(&system, grid).map_err(|e| Failure::invalid(e.to_string()))?;
    let ode = ode_residual_guarded(&system, grid, 1e-6).ok();
    let text = match common.format {
        Format::Json => {
            let mut value = serde_json::to_value(&report).expect("report serializes");
            value["ode_residual"] = json!(ode);
            value["loop"] = loop_to_json(&system);
            to_pretty(&value)
        }
        Format::Table | Format::Csv => render::membership_table(&system.params, &report, ode),
    };
    emit(common, &text)?;
    Ok(if report.windings.all_match() { 0 } else { 1 })
}

