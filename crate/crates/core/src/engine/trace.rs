//! Event log and per-step vehicle trace, both exported as CSV.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::ids::{PassengerId, VehicleId};

use super::vehicle::KinematicState;
use super::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Request,
    AssignFixed,
    AssignFlex,
    AssignOd,
    RejectOd,
    Pool,
    RejectFlex,
    RejectDrain,
    ReachStop,
    Board,
    Alight,
    Arrive,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Request => "request",
            EventKind::AssignFixed => "assign_fixed",
            EventKind::AssignFlex => "assign_flex",
            EventKind::AssignOd => "assign_od",
            EventKind::RejectOd => "reject_od",
            EventKind::Pool => "pool",
            EventKind::RejectFlex => "reject_flex",
            EventKind::RejectDrain => "reject_drain",
            EventKind::ReachStop => "reach_stop",
            EventKind::Board => "board",
            EventKind::Alight => "alight",
            EventKind::Arrive => "arrive",
        }
    }

    pub fn is_assignment(self) -> bool {
        matches!(self, EventKind::AssignFixed | EventKind::AssignFlex | EventKind::AssignOd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub tick: Tick,
    pub kind: EventKind,
    pub passenger: Option<PassengerId>,
    pub vehicle: Option<VehicleId>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: Tick,
    pub vehicle: VehicleId,
    pub x: f64,
    pub y: f64,
    pub state: KinematicState,
    pub onboard: usize,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_events_csv<W: Write>(events: &[Event], dt: f64, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["t_s", "event", "passenger_id", "vehicle_id", "detail"])?;
    for e in events {
        w.write_record([
            (e.tick as f64 * dt).to_string(),
            e.kind.as_str().to_string(),
            opt(e.passenger),
            opt(e.vehicle),
            e.detail.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], dt: f64, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["t_s", "vehicle_id", "x_km", "y_km", "state", "onboard_count"])?;
    for r in rows {
        w.write_record([
            (r.tick as f64 * dt).to_string(),
            r.vehicle.to_string(),
            format!("{:.6}", r.x),
            format!("{:.6}", r.y),
            r.state.to_string(),
            r.onboard.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
