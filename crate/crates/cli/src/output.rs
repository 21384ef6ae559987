//! Output files. Every command writes CSV tables plus one `summary.json`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;
use transit_sandbox::engine::{write_events_csv, write_trace_csv, RunOutput};
use transit_sandbox::metrics::{
    compare, write_comparison_csv, write_passengers_csv, write_pivot_csv, write_report_csv, PivotField, RunReport,
};

use crate::CliError;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

/// `<stem>_events.csv` and `<stem>_trace.csv`.
pub fn write_traces(dir: &Path, stem: &str, out: &RunOutput) -> Result<(), CliError> {
    write_events_csv(&out.events, out.ctx.dt, create(dir, &format!("{stem}_events.csv"))?)?;
    write_trace_csv(&out.trace, out.ctx.dt, create(dir, &format!("{stem}_trace.csv"))?)?;
    Ok(())
}

/// `report.csv`, `passengers.csv` and `vehicles.csv` for a single run.
pub fn write_run_files(dir: &Path, out: &RunOutput) -> Result<(), CliError> {
    write_report_csv(std::slice::from_ref(&out.report), create(dir, "report.csv")?)?;
    write_passengers_csv(&out.report.passengers, &out.ctx.scenario, create(dir, "passengers.csv")?)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(dir, "vehicles.csv")?);
    w.write_record(["vehicle_id", "vmt_mi", "total_km"]).map_err(csv_err)?;
    for (v, mi) in out.vehicles.iter().zip(&out.report.per_vehicle_vmt_mi) {
        w.write_record([v.id.to_string(), format!("{mi:.6}"), format!("{:.6}", v.odometer)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Run(e.to_string())
}

/// Report table, comparison against `baseline`, and design-by-demand tables
/// of ridership, weighted travel time and VMT.
pub fn write_sweep_files(dir: &Path, reports: &[RunReport], baseline: &str) -> Result<(), CliError> {
    write_report_csv(reports, create(dir, "reports.csv")?)?;
    let rows = compare(reports, baseline)?;
    write_comparison_csv(&rows, create(dir, "comparison.csv")?)?;
    for (field, name) in [
        (PivotField::Ridership, "table_ridership.csv"),
        (PivotField::AvgWtt, "table_wtt.csv"),
        (PivotField::Vmt, "table_vmt.csv"),
    ] {
        write_pivot_csv(reports, field, create(dir, name)?)?;
    }
    Ok(())
}

pub fn write_summary<T: Serialize>(dir: &Path, summary: &T) -> Result<(), CliError> {
    let w = create(dir, "summary.json")?;
    serde_json::to_writer_pretty(w, summary).map_err(|e| CliError::Run(e.to_string()))
}

/// Reports stored in a `summary.json` written by `run` or `sweep`.
pub fn read_summary_reports(path: &Path) -> Result<Vec<RunReport>, CliError> {
    #[derive(serde::Deserialize)]
    struct Reports {
        reports: Vec<RunReport>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let s: Reports = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(s.reports)
}
