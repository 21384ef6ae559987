use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use transit_sandbox::demand::{generate_passengers, read_demand_csv, write_demand_csv};
use transit_sandbox::metrics::{compare, write_comparison_csv};
use transit_sandbox::policy::cost::{
    cost_surface, default_frequency_grid, optimize_design, optimized_design, FixedCostParams, DEFAULT_STOP_RANGE,
};
use transit_sandbox::scenario::FixedDesign;
use transit_sandbox_cli::config::{scenario_id, Config};
use transit_sandbox_cli::sweep::{execute, run_sweep, SweepOptions};
use transit_sandbox_cli::{output, CliError};

#[derive(Parser)]
#[command(name = "sandbox", version, about = "Fixed-route, semi-flexible and on-demand transit simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file, or the name of a bundled one.
    #[arg(long, default_value = "b63_case_study")]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a passenger CSV for one demand level and seed.
    GenDemand {
        #[command(flatten)]
        common: Common,
        /// Demand level, passengers per hour (default: first configured).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Simulate one design on one demand list.
    Run {
        #[command(flatten)]
        common: Common,
        /// Design id from the configuration.
        #[arg(long)]
        design: String,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Passenger CSV to use instead of generating demand.
        #[arg(long)]
        demand: Option<PathBuf>,
        /// Write the event log and vehicle positions every SECONDS (default 1).
        #[arg(long, value_name = "SECONDS", num_args = 0..=1, default_missing_value = "1")]
        trace: Option<f64>,
    },
    /// Fixed-route cost surface over stops and frequency, and its minimum.
    OptimizeFixed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Every configured design at every demand level and seed.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Seeds to run (repeatable); overrides the configuration.
        #[arg(long)]
        seed: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        #[arg(long, value_name = "SECONDS", num_args = 0..=1, default_missing_value = "1")]
        trace: Option<f64>,
    },
    /// Compare reports from earlier `run`/`sweep` summaries against a baseline design.
    Compare {
        /// summary.json files.
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        #[arg(long)]
        baseline: String,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn trace_ticks(cfg: &Config, seconds: Option<f64>) -> Result<Option<i64>, CliError> {
    match seconds {
        None => Ok(None),
        Some(s) if s > 0.0 => Ok(Some(((s / cfg.simulation.time_step).round() as i64).max(1))),
        Some(s) => Err(CliError::Config(format!("trace interval must be positive, got {s}"))),
    }
}

fn gen_demand(common: &Common, lambda: Option<f64>, seed: u64) -> Result<(), CliError> {
    let cfg = Config::load(&common.config)?;
    let lambda = cfg.pick_lambda(lambda)?;
    let s = cfg.scenario_params(lambda, seed);
    let demand = generate_passengers(&s, 0.0, s.sim_length)?;
    std::fs::create_dir_all(&common.out_dir)?;
    let path = common.out_dir.join("demand.csv");
    write_demand_csv(&demand, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
    output::write_summary(
        &common.out_dir,
        &json!({
            "command": "gen-demand",
            "scenario_id": scenario_id(lambda),
            "lambda": lambda,
            "seed": seed,
            "passengers": demand.len(),
            "demand_fingerprint": transit_sandbox::demand::fingerprint(&demand),
            "file": "demand.csv",
        }),
    )?;
    eprintln!("{} passengers written to {}", demand.len(), path.display());
    Ok(())
}

fn run_one(
    common: &Common,
    design_id: &str,
    lambda: Option<f64>,
    seed: u64,
    demand_path: Option<&Path>,
    trace: Option<f64>,
) -> Result<(), CliError> {
    let cfg = Config::load(&common.config)?;
    let lambda = cfg.pick_lambda(lambda)?;
    let s = cfg.scenario_params(lambda, seed);
    s.validate()?;
    let entry = cfg.design(design_id)?;
    let design = cfg.design_for(entry, &s)?;
    design.validate(&s)?;
    let demand = match demand_path {
        Some(p) => {
            let f = std::fs::File::open(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let (demand, warnings) = read_demand_csv(std::io::BufReader::new(f), &s)?;
            for w in warnings {
                eprintln!("warning: {} line {}: {}", p.display(), w.line, w.message);
            }
            demand
        }
        None => generate_passengers(&s, 0.0, s.sim_length)?,
    };
    let every = trace_ticks(&cfg, trace)?;
    let out = execute(&s, &design, design_id, &demand, every)?;
    output::write_run_files(&common.out_dir, &out)?;
    if every.is_some() {
        output::write_traces(&common.out_dir, "run", &out)?;
    }
    output::write_summary(
        &common.out_dir,
        &json!({
            "command": "run",
            "design": design,
            "scenario": s,
            "reports": [out.report],
        }),
    )?;
    let r = &out.report;
    eprintln!(
        "{} {}: ridership {} rejected {} avg wtt {} min, VMT {:.2} mi",
        r.design_id,
        r.scenario_id,
        r.ridership,
        r.rejected,
        r.avg_wtt_min.map_or("-".to_string(), |w| format!("{w:.2}")),
        r.vmt_mi
    );
    Ok(())
}

fn optimize_fixed(common: &Common, lambda: Option<f64>) -> Result<(), CliError> {
    let cfg = Config::load(&common.config)?;
    let lambda = cfg.pick_lambda(lambda)?;
    let s = cfg.scenario_params(lambda, cfg.simulation.seeds[0]);
    let p = FixedCostParams::new(&cfg.cost, &s);
    let grid = default_frequency_grid();
    let surface = cost_surface(&p, DEFAULT_STOP_RANGE, &grid);
    let opt = optimize_design(&p, DEFAULT_STOP_RANGE, &grid).ok_or_else(|| CliError::Config("empty grid".into()))?;
    std::fs::create_dir_all(&common.out_dir)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(common.out_dir.join("surface.csv"))
        .map_err(|e| CliError::Run(e.to_string()))?;
    let row = |w: &mut csv::Writer<std::fs::File>, sp: &transit_sandbox::policy::cost::SurfacePoint| {
        w.write_record([
            sp.stops.to_string(),
            format!("{:.1}", sp.f),
            format!("{:.6}", sp.cost.c_o),
            format!("{:.6}", sp.cost.c_u),
            format!("{:.6}", sp.cost.c_t),
        ])
    };
    let header = ["S", "f", "C_o", "C_u", "C_t"];
    w.write_record(header).map_err(|e| CliError::Run(e.to_string()))?;
    for sp in &surface {
        row(&mut w, sp).map_err(|e| CliError::Run(e.to_string()))?;
    }
    w.flush()?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(common.out_dir.join("optimum.csv"))
        .map_err(|e| CliError::Run(e.to_string()))?;
    w.write_record(header).map_err(|e| CliError::Run(e.to_string()))?;
    row(&mut w, &opt).map_err(|e| CliError::Run(e.to_string()))?;
    w.flush()?;
    let design = optimized_design(&opt, &FixedDesign::b63_existing());
    output::write_summary(
        &common.out_dir,
        &json!({
            "command": "optimize-fixed",
            "lambda": lambda,
            "cost": cfg.cost,
            "optimum": opt,
            "design": design,
        }),
    )?;
    eprintln!(
        "lambda {lambda}: S* = {}, f* = {:.1}/h, C_t = {:.2} $/h, t_c = {:.1} min",
        opt.stops,
        opt.f,
        opt.cost.c_t,
        opt.cost.t_c * 60.0
    );
    Ok(())
}

fn sweep(common: &Common, seeds: Vec<u64>, parallelism: usize, trace: Option<f64>) -> Result<(), CliError> {
    let cfg = Config::load(&common.config)?;
    let seeds = if seeds.is_empty() { cfg.simulation.seeds.clone() } else { seeds };
    let every = trace_ticks(&cfg, trace)?;
    let opts = SweepOptions {
        seeds: seeds.clone(),
        parallelism,
        trace: every.map(|e| (common.out_dir.join("traces"), e)),
    };
    let outcome = run_sweep(&cfg, &opts)?;
    let baseline = cfg.designs[0].id.clone();
    output::write_sweep_files(&common.out_dir, &outcome.reports, &baseline)?;
    let failures: Vec<_> = outcome
        .failures
        .iter()
        .map(|f| json!({"scenario_id": f.scenario_id, "design_id": f.design_id, "seed": f.seed, "error": f.message}))
        .collect();
    output::write_summary(
        &common.out_dir,
        &json!({
            "command": "sweep",
            "seeds": seeds,
            "lambda": cfg.scenario.lambda,
            "designs": cfg.designs.iter().map(|d| d.id.clone()).collect::<Vec<_>>(),
            "runs": outcome.reports.len() + outcome.failures.len(),
            "baseline": baseline,
            "failures": failures,
            "reports": outcome.reports,
        }),
    )?;
    for f in &outcome.failures {
        eprintln!("failed: {} {} seed {}: {}", f.scenario_id, f.design_id, f.seed, f.message);
    }
    eprintln!(
        "{} runs, {} failed; results in {}",
        outcome.reports.len() + outcome.failures.len(),
        outcome.failures.len(),
        common.out_dir.display()
    );
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Run(format!("{} runs failed", outcome.failures.len())))
    }
}

fn compare_cmd(summaries: &[PathBuf], baseline: &str, out_dir: &Path) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for p in summaries {
        reports.extend(output::read_summary_reports(p)?);
    }
    if !reports.iter().any(|r| r.design_id == baseline) {
        return Err(CliError::Config(format!("no report for baseline design {baseline}")));
    }
    let rows = compare(&reports, baseline)?;
    std::fs::create_dir_all(out_dir)?;
    write_comparison_csv(&rows, std::io::BufWriter::new(std::fs::File::create(out_dir.join("comparison.csv"))?))?;
    output::write_summary(out_dir, &json!({"command": "compare", "baseline": baseline, "rows": rows}))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenDemand { common, lambda, seed } => gen_demand(&common, lambda, seed),
        Command::Run {
            common,
            design,
            lambda,
            seed,
            demand,
            trace,
        } => run_one(&common, &design, lambda, seed, demand.as_deref(), trace),
        Command::OptimizeFixed { common, lambda } => optimize_fixed(&common, lambda),
        Command::Sweep {
            common,
            seed,
            parallelism,
            trace,
        } => sweep(&common, seed, parallelism, trace),
        Command::Compare {
            summaries,
            baseline,
            out_dir,
        } => compare_cmd(&summaries, &baseline, &out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
