//! Batch execution of every (scenario, design, seed) combination.
//!
//! Demand is generated once per (scenario, seed) and shared by all designs.
//! Runs are independent and may execute on several threads; results are
//! always returned in (scenario, design, seed) order.

use std::path::PathBuf;

use rayon::prelude::*;
use transit_sandbox::demand::{generate_passengers, Passenger};
use transit_sandbox::engine::{Engine, RunOutput, Tick};
use transit_sandbox::metrics::RunReport;
use transit_sandbox::scenario::{ScenarioParams, SystemDesign};

use crate::config::{scenario_id, Config};
use crate::output;
use crate::CliError;

/// Runs one design on a demand list and labels the report.
pub fn execute(
    scenario: &ScenarioParams,
    design: &SystemDesign,
    design_id: &str,
    demand: &[Passenger],
    trace_every: Option<Tick>,
) -> Result<RunOutput, CliError> {
    let mut engine = Engine::new(scenario, design, demand)?;
    if let Some(every) = trace_every {
        engine = engine.with_trace(every);
    }
    let mut out = engine.finish()?;
    out.report.design_id = design_id.to_string();
    out.report.scenario_id = scenario_id(scenario.lambda);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Job {
    pub lambda: f64,
    pub design: usize,
    pub seed: u64,
}

/// All combinations in output order. Their count is
/// `seeds x demand levels x designs`.
pub fn jobs(cfg: &Config, seeds: &[u64]) -> Vec<Job> {
    let mut out = Vec::new();
    for &lambda in &cfg.scenario.lambda {
        for design in 0..cfg.designs.len() {
            for &seed in seeds {
                out.push(Job { lambda, design, seed });
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub scenario_id: String,
    pub design_id: String,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub reports: Vec<RunReport>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub seeds: Vec<u64>,
    pub parallelism: usize,
    /// Directory and interval for per-run trace files.
    pub trace: Option<(PathBuf, Tick)>,
}

pub fn run_sweep(cfg: &Config, opts: &SweepOptions) -> Result<SweepOutcome, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism.max(1))
        .build()
        .map_err(|e| CliError::Run(e.to_string()))?;
    let cells: Vec<(f64, u64)> = cfg
        .scenario
        .lambda
        .iter()
        .flat_map(|&l| opts.seeds.iter().map(move |&s| (l, s)))
        .collect();
    let demands: Vec<Vec<Passenger>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(l, s)| {
                let sc = cfg.scenario_params(l, s);
                generate_passengers(&sc, 0.0, sc.sim_length)
            })
            .collect::<Result<_, _>>()
    })?;
    let demand_for = |l: f64, s: u64| -> &[Passenger] {
        let i = cells.iter().position(|&c| c == (l, s)).expect("cell generated");
        &demands[i]
    };
    let jobs = jobs(cfg, &opts.seeds);
    let expected = opts.seeds.len() * cfg.scenario.lambda.len() * cfg.designs.len();
    assert_eq!(jobs.len(), expected, "sweep size must be seeds x scenarios x designs");
    let results: Vec<Result<RunReport, Failure>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let entry = &cfg.designs[job.design];
                let scenario = cfg.scenario_params(job.lambda, job.seed);
                let fail = |e: CliError| Failure {
                    scenario_id: scenario_id(job.lambda),
                    design_id: entry.id.clone(),
                    seed: job.seed,
                    message: e.to_string(),
                };
                let design = cfg.design_for(entry, &scenario).map_err(fail)?;
                let trace_every = opts.trace.as_ref().map(|t| t.1);
                let out = execute(&scenario, &design, &entry.id, demand_for(job.lambda, job.seed), trace_every).map_err(fail)?;
                if let Some((dir, _)) = &opts.trace {
                    let stem = format!("{}_{}_seed{}", out.report.scenario_id, entry.id, job.seed);
                    output::write_traces(dir, &stem, &out).map_err(fail)?;
                }
                Ok(out.report)
            })
            .collect()
    });
    let mut outcome = SweepOutcome::default();
    for r in results {
        match r {
            Ok(rep) => outcome.reports.push(rep),
            Err(f) => outcome.failures.push(f),
        }
    }
    Ok(outcome)
}
