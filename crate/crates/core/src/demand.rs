//! Passenger requests: Poisson generation, CSV exchange format and the demand
//! fingerprint shared by every report built from the same list.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SandboxError};
use crate::geometry::Point;
use crate::ids::{PassengerId, VehicleId};
use crate::scenario::ScenarioParams;

/// Redraws allowed per passenger before an OD pair is declared unsatisfiable.
pub const OD_RETRY_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PassengerState {
    Unassigned,
    WalkingToStop,
    WaitingAtStop,
    Onboard,
    Egressing,
    Served,
    Rejected,
}

impl PassengerState {
    pub fn is_terminal(self) -> bool {
        matches!(self, PassengerState::Served | PassengerState::Rejected)
    }

    /// Legal forward transitions. States may be skipped (a door-to-door rider
    /// never walks) but never revisited; `Rejected` only follows `Unassigned`.
    pub fn can_become(self, next: PassengerState) -> bool {
        use PassengerState::*;
        match next {
            Rejected => self == Unassigned,
            _ => !self.is_terminal() && next > self,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passenger {
    pub id: PassengerId,
    /// Request time, s from the start of the demand window.
    pub arrival_time: f64,
    pub origin: Point,
    pub destination: Point,
    pub state: PassengerState,
    pub boarding_stop: Option<Point>,
    pub alighting_stop: Option<Point>,
    pub t_access: f64,
    pub t_wait: f64,
    pub t_invehicle: f64,
    pub t_egress: f64,
    pub assigned_vehicle: Option<VehicleId>,
    /// Time the passenger first failed assignment, s from the window start.
    pub rejection_time: Option<f64>,
}

impl Passenger {
    pub fn new(id: u32, arrival_time: f64, origin: Point, destination: Point) -> Self {
        Self {
            id: PassengerId(id),
            arrival_time,
            origin,
            destination,
            state: PassengerState::Unassigned,
            boarding_stop: None,
            alighting_stop: None,
            t_access: 0.0,
            t_wait: 0.0,
            t_invehicle: 0.0,
            t_egress: 0.0,
            assigned_vehicle: None,
            rejection_time: None,
        }
    }
}

/// Poisson arrivals of rate `lambda` on `[t_start, t_end)` with uniform
/// origins and destinations that cannot be connected on foot.
pub fn generate_passengers(scenario: &ScenarioParams, t_start: f64, t_end: f64) -> Result<Vec<Passenger>> {
    if !(t_start < t_end) {
        return Err(SandboxError::DemandGeneration(format!(
            "empty window [{t_start}, {t_end})"
        )));
    }
    scenario.validate()?;
    if scenario.lambda == 0.0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let gaps = Exp::new(scenario.lambda / 3600.0).expect("positive rate");
    let dt = scenario.time_step;
    let mut out = Vec::new();
    let mut t = t_start;
    loop {
        t += gaps.sample(&mut rng);
        if t >= t_end {
            break;
        }
        let quantized = t_start + ((t - t_start) / dt).floor() * dt;
        let (o, d) = draw_od(scenario, &mut rng)?;
        out.push(Passenger::new(out.len() as u32, quantized, o, d));
    }
    Ok(out)
}

fn draw_od(scenario: &ScenarioParams, rng: &mut ChaCha8Rng) -> Result<(Point, Point)> {
    let mut draw = || Point::new(rng.gen::<f64>() * scenario.length, rng.gen::<f64>() * scenario.width);
    for _ in 0..OD_RETRY_CAP {
        let o = draw();
        let d = draw();
        if scenario.metric.distance(o, d) > scenario.zeta_a {
            return Ok((o, d));
        }
    }
    Err(SandboxError::DemandGeneration(format!(
        "no OD pair farther apart than zeta_a = {} km after {OD_RETRY_CAP} draws",
        scenario.zeta_a
    )))
}

#[derive(Debug, Serialize, Deserialize)]
struct DemandRow {
    id: u32,
    arrival_s: f64,
    ox_km: f64,
    oy_km: f64,
    dx_km: f64,
    dy_km: f64,
}

pub fn write_demand_csv<W: Write>(passengers: &[Passenger], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for p in passengers {
        w.serialize(DemandRow {
            id: p.id.0,
            arrival_s: p.arrival_time,
            ox_km: p.origin.x,
            oy_km: p.origin.y,
            dx_km: p.destination.x,
            dy_km: p.destination.y,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn demand_csv_bytes(passengers: &[Passenger]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_demand_csv(passengers, &mut buf).expect("writing to memory");
    if passengers.is_empty() {
        buf.extend_from_slice(b"id,arrival_s,ox_km,oy_km,dx_km,dy_km\n");
    }
    buf
}

/// Non-fatal findings while loading an external demand list.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandWarning {
    pub line: u64,
    pub message: String,
}

/// Reads a demand CSV and checks it against the scenario: coordinates must lie
/// in the region and arrivals inside `[0, sim_length)`. Rows whose OD pair is
/// within walking distance are kept and reported as warnings. Rows are
/// returned sorted by arrival time and re-numbered in that order when the ids
/// are not already `0..n` in order.
pub fn read_demand_csv<R: Read>(input: R, scenario: &ScenarioParams) -> Result<(Vec<Passenger>, Vec<DemandWarning>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let region = scenario.region();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for rec in reader.deserialize::<DemandRow>() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            SandboxError::DemandParse {
                line,
                reason: e.to_string(),
            }
        })?;
        let line = rows.len() as u64 + 2;
        let o = Point::new(rec.ox_km, rec.oy_km);
        let d = Point::new(rec.dx_km, rec.dy_km);
        for (label, p) in [("origin", o), ("destination", d)] {
            if !region.contains(p) {
                return Err(SandboxError::DemandParse {
                    line,
                    reason: format!("{label} {p} lies outside the {}x{} km region", region.length, region.width),
                });
            }
        }
        if !(rec.arrival_s >= 0.0 && rec.arrival_s < scenario.sim_length) {
            return Err(SandboxError::DemandParse {
                line,
                reason: format!(
                    "arrival {} s is outside the demand window [0, {})",
                    rec.arrival_s, scenario.sim_length
                ),
            });
        }
        if scenario.metric.distance(o, d) <= scenario.zeta_a {
            warnings.push(DemandWarning {
                line,
                message: format!("passenger {} can walk from origin to destination", rec.id),
            });
        }
        rows.push(rec);
    }
    rows.sort_by(|a, b| a.arrival_s.total_cmp(&b.arrival_s).then(a.id.cmp(&b.id)));
    let renumber = rows.iter().enumerate().any(|(i, r)| r.id as usize != i);
    let passengers = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let id = if renumber { i as u32 } else { r.id };
            Passenger::new(id, r.arrival_s, Point::new(r.ox_km, r.oy_km), Point::new(r.dx_km, r.dy_km))
        })
        .collect();
    Ok((passengers, warnings))
}

/// Content hash of the demand list in its CSV form (first 16 hex digits of
/// SHA-256).
pub fn fingerprint(passengers: &[Passenger]) -> String {
    let digest = Sha256::digest(demand_csv_bytes(passengers));
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
