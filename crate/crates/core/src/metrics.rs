//! Run reports: ridership, weighted travel time, vehicle distance, and the
//! accounting checks behind them.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::demand::{Passenger, PassengerState};
use crate::engine::{EngineState, EventKind, SimContext, Tick};
use crate::error::{Result, SandboxError};
use crate::ids::PassengerId;
use crate::policy::insertion::CandidateCounter;
use crate::scenario::{ScenarioParams, SystemDesign};

pub const KM_PER_MILE: f64 = 1.609344;

/// Generalized travel time of one passenger, minutes:
/// `(gamma_v t_v + gamma_w t_w + gamma_a (t_a + t_e)) / 60`.
pub fn weighted_travel_time(p: &Passenger, s: &ScenarioParams) -> f64 {
    (s.gamma_v * p.t_invehicle + s.gamma_w * p.t_wait + s.gamma_a * (p.t_access + p.t_egress)) / 60.0
}

pub fn state_name(state: PassengerState) -> &'static str {
    match state {
        PassengerState::Unassigned => "unassigned",
        PassengerState::WalkingToStop => "walking_to_stop",
        PassengerState::WaitingAtStop => "waiting_at_stop",
        PassengerState::Onboard => "onboard",
        PassengerState::Egressing => "egressing",
        PassengerState::Served => "served",
        PassengerState::Rejected => "rejected",
    }
}

/// Results of the bookkeeping checks run on every report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    /// Served riders whose accrued times disagree with their event log.
    pub double_entry_mismatches: usize,
    /// Largest gap between a vehicle's odometer and its driven legs, km.
    pub odometer_gap_km: f64,
    pub capacity_violations: u32,
    pub backtrack_violations: u32,
    pub late_checkpoint_departures: u32,
    pub checkpoint_order_violations: u32,
    pub plan_drift: u32,
    pub wait_limit_violations: usize,
    pub ride_limit_violations: usize,
    pub max_section_backtrack_km: f64,
    pub insertion_calls: u64,
    pub candidates_enumerated: u64,
    pub candidates_expected: u64,
}

impl AuditSummary {
    pub fn clean(&self) -> bool {
        self.double_entry_mismatches == 0
            && self.odometer_gap_km < 1e-6
            && self.capacity_violations == 0
            && self.backtrack_violations == 0
            && self.late_checkpoint_departures == 0
            && self.checkpoint_order_violations == 0
            && self.plan_drift == 0
            && self.wait_limit_violations == 0
            && self.ride_limit_violations == 0
            && self.candidates_enumerated == self.candidates_expected
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub design_id: String,
    pub scenario_id: String,
    pub seed: u64,
    pub design_type: String,
    pub lambda: f64,
    pub generated: usize,
    /// Passengers delivered to their destination.
    pub ridership: usize,
    pub rejected: usize,
    /// Mean weighted travel time of served passengers, minutes.
    pub avg_wtt_min: Option<f64>,
    pub avg_access_s: Option<f64>,
    pub avg_wait_s: Option<f64>,
    pub avg_invehicle_s: Option<f64>,
    pub avg_egress_s: Option<f64>,
    /// Vehicle distance inside the demand window.
    pub vmt_mi: f64,
    pub vmt_km: f64,
    /// Vehicle distance over the whole run including warm-up and drain, km.
    pub total_distance_km: f64,
    /// Window distance per vehicle, miles, in vehicle id order.
    pub per_vehicle_vmt_mi: Vec<f64>,
    pub fleet: usize,
    pub demand_fingerprint: String,
    pub audit: AuditSummary,
    #[serde(skip)]
    pub passengers: Vec<Passenger>,
}

#[derive(Default, Clone, Copy)]
struct Marks {
    request: Option<Tick>,
    assign: Option<Tick>,
    reach: Option<Tick>,
    board: Option<Tick>,
    alight: Option<Tick>,
    arrive: Option<Tick>,
}

fn event_marks(st: &EngineState) -> HashMap<PassengerId, Marks> {
    let mut m: HashMap<PassengerId, Marks> = HashMap::new();
    for e in &st.events {
        let Some(p) = e.passenger else { continue };
        let k = m.entry(p).or_default();
        match e.kind {
            EventKind::Request => k.request = Some(e.tick),
            kind if kind.is_assignment() => k.assign = Some(e.tick),
            EventKind::ReachStop => k.reach = Some(e.tick),
            EventKind::Board => k.board = Some(e.tick),
            EventKind::Alight => k.alight = Some(e.tick),
            EventKind::Arrive => k.arrive = Some(e.tick),
            _ => {}
        }
    }
    m
}

pub(crate) fn aggregate(
    ctx: &SimContext,
    design: &SystemDesign,
    st: &EngineState,
    fingerprint: &str,
    counter: CandidateCounter,
) -> Result<RunReport> {
    let s = &ctx.scenario;
    let dt = ctx.dt;
    let marks = event_marks(st);
    let mut audit = AuditSummary {
        capacity_violations: st.audit.capacity,
        backtrack_violations: st.audit.backtrack,
        late_checkpoint_departures: st.audit.late_departures,
        checkpoint_order_violations: st.audit.checkpoint_order,
        plan_drift: st.audit.plan_drift,
        insertion_calls: counter.calls,
        candidates_enumerated: counter.enumerated,
        candidates_expected: counter.expected,
        ..AuditSummary::default()
    };
    let (wait_cap, ride_cap) = match design {
        SystemDesign::Flex(d) => (Some(d.zeta_w), None),
        SystemDesign::OnDemand(d) => (Some(d.zeta_w), Some(d.zeta_d)),
        SystemDesign::Fixed(_) => (None, None),
    };
    let mut served = Vec::new();
    for r in &st.riders {
        if r.pax.state != PassengerState::Served {
            continue;
        }
        served.push(&r.pax);
        let m = marks.get(&r.id()).copied().unwrap_or_default();
        let (Some(req), Some(assign), Some(board), Some(alight), Some(arrive)) = (m.request, m.assign, m.board, m.alight, m.arrive)
        else {
            audit.double_entry_mismatches += 1;
            continue;
        };
        let access = m.reach.map_or(0, |t| t - assign);
        let wait = board - req - access;
        let ride = alight - board;
        let egress = arrive - alight;
        let close = |ticks: Tick, acc: f64| (ticks as f64 * dt - acc).abs() < 1e-6;
        if !(close(access, r.pax.t_access) && close(wait, r.pax.t_wait) && close(ride, r.pax.t_invehicle) && close(egress, r.pax.t_egress)) {
            audit.double_entry_mismatches += 1;
        }
        if wait_cap.is_some_and(|c| r.pax.t_wait > c + 1e-9) {
            audit.wait_limit_violations += 1;
        }
        if ride_cap.is_some_and(|z| r.pax.t_invehicle > z * r.direct_s + 1e-9) {
            audit.ride_limit_violations += 1;
        }
    }
    let mut window_km = 0.0;
    let mut total_km = 0.0;
    for v in &st.vehicles {
        let partial = match &v.motion {
            crate::engine::Motion::Moving(leg) => (leg.steps_done as f64 * ctx.step_km).min(leg.length),
            _ => 0.0,
        };
        audit.odometer_gap_km = audit.odometer_gap_km.max((v.odometer - v.completed_legs - partial).abs());
        audit.max_section_backtrack_km = audit.max_section_backtrack_km.max(v.max_section_backtrack);
        window_km += v.window_distance;
        total_km += v.odometer;
    }
    if audit.odometer_gap_km > 1e-6 {
        return Err(SandboxError::Audit(format!(
            "odometer differs from driven legs by {} km",
            audit.odometer_gap_km
        )));
    }
    if audit.double_entry_mismatches > 0 {
        return Err(SandboxError::Audit(format!(
            "{} passengers' accrued times disagree with the event log",
            audit.double_entry_mismatches
        )));
    }
    let n = served.len();
    let mean = |f: &dyn Fn(&Passenger) -> f64| (n > 0).then(|| served.iter().map(|p| f(p)).sum::<f64>() / n as f64);
    Ok(RunReport {
        design_id: design.kind().to_string(),
        scenario_id: String::new(),
        seed: s.seed,
        design_type: design.kind().to_string(),
        lambda: s.lambda,
        generated: st.riders.len(),
        ridership: st.served,
        rejected: st.rejected,
        avg_wtt_min: mean(&|p| weighted_travel_time(p, s)),
        avg_access_s: mean(&|p| p.t_access),
        avg_wait_s: mean(&|p| p.t_wait),
        avg_invehicle_s: mean(&|p| p.t_invehicle),
        avg_egress_s: mean(&|p| p.t_egress),
        vmt_mi: window_km / KM_PER_MILE,
        vmt_km: window_km,
        total_distance_km: total_km,
        per_vehicle_vmt_mi: st.vehicles.iter().map(|v| v.window_distance / KM_PER_MILE).collect(),
        fleet: st.vehicles.len(),
        demand_fingerprint: fingerprint.to_string(),
        audit,
        passengers: st.riders.iter().map(|r| r.pax.clone()).collect(),
    })
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One row per run: `design_id,scenario_id,seed,ridership,rejected,avg_wtt_min,vmt_mi`.
pub fn write_report_csv<W: Write>(reports: &[RunReport], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["design_id", "scenario_id", "seed", "ridership", "rejected", "avg_wtt_min", "vmt_mi"])?;
    for r in reports {
        w.write_record([
            r.design_id.clone(),
            r.scenario_id.clone(),
            r.seed.to_string(),
            r.ridership.to_string(),
            r.rejected.to_string(),
            opt_num(r.avg_wtt_min),
            format!("{:.6}", r.vmt_mi),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_passengers_csv<W: Write>(passengers: &[Passenger], scenario: &ScenarioParams, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "passenger_id",
        "arrival_s",
        "ox_km",
        "oy_km",
        "dx_km",
        "dy_km",
        "state",
        "vehicle_id",
        "t_access_s",
        "t_wait_s",
        "t_invehicle_s",
        "t_egress_s",
        "wtt_min",
        "rejection_s",
    ])?;
    for p in passengers {
        let served = p.state == PassengerState::Served;
        w.write_record([
            p.id.to_string(),
            p.arrival_time.to_string(),
            p.origin.x.to_string(),
            p.origin.y.to_string(),
            p.destination.x.to_string(),
            p.destination.y.to_string(),
            state_name(p.state).to_string(),
            p.assigned_vehicle.map(|v| v.to_string()).unwrap_or_default(),
            p.t_access.to_string(),
            p.t_wait.to_string(),
            p.t_invehicle.to_string(),
            p.t_egress.to_string(),
            opt_num(served.then(|| weighted_travel_time(p, scenario))),
            p.rejection_time.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub design_id: String,
    pub scenario_id: String,
    pub seed: u64,
    pub ridership: usize,
    pub avg_wtt_min: Option<f64>,
    pub vmt_mi: f64,
    pub ridership_ratio: Option<f64>,
    pub wtt_ratio: Option<f64>,
    pub vmt_ratio: Option<f64>,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| a / b)
}

/// Each report against the baseline design run on the same scenario and
/// seed. Reports built from different demand lists cannot be compared.
pub fn compare(reports: &[RunReport], baseline_design: &str) -> Result<Vec<ComparisonRow>> {
    let mut base: HashMap<(&str, u64), &RunReport> = HashMap::new();
    for r in reports.iter().filter(|r| r.design_id == baseline_design) {
        base.insert((r.scenario_id.as_str(), r.seed), r);
    }
    let mut rows = Vec::new();
    for r in reports {
        let b = base.get(&(r.scenario_id.as_str(), r.seed)).copied();
        if let Some(b) = b {
            if b.demand_fingerprint != r.demand_fingerprint {
                return Err(SandboxError::FingerprintMismatch(
                    b.demand_fingerprint.clone(),
                    r.demand_fingerprint.clone(),
                ));
            }
        }
        rows.push(ComparisonRow {
            design_id: r.design_id.clone(),
            scenario_id: r.scenario_id.clone(),
            seed: r.seed,
            ridership: r.ridership,
            avg_wtt_min: r.avg_wtt_min,
            vmt_mi: r.vmt_mi,
            ridership_ratio: b.and_then(|b| ratio(r.ridership as f64, b.ridership as f64)),
            wtt_ratio: b.and_then(|b| Some(r.avg_wtt_min?).zip(b.avg_wtt_min).and_then(|(x, y)| ratio(x, y))),
            vmt_ratio: b.and_then(|b| ratio(r.vmt_mi, b.vmt_mi)),
        });
    }
    Ok(rows)
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "design_id",
        "scenario_id",
        "seed",
        "ridership",
        "avg_wtt_min",
        "vmt_mi",
        "ridership_ratio",
        "wtt_ratio",
        "vmt_ratio",
    ])?;
    for r in rows {
        w.write_record([
            r.design_id.clone(),
            r.scenario_id.clone(),
            r.seed.to_string(),
            r.ridership.to_string(),
            opt_num(r.avg_wtt_min),
            format!("{:.6}", r.vmt_mi),
            opt_num(r.ridership_ratio),
            opt_num(r.wtt_ratio),
            opt_num(r.vmt_ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotField {
    Ridership,
    AvgWtt,
    Vmt,
}

impl PivotField {
    fn value(self, r: &RunReport) -> Option<f64> {
        match self {
            PivotField::Ridership => Some(r.ridership as f64),
            PivotField::AvgWtt => r.avg_wtt_min,
            PivotField::Vmt => Some(r.vmt_mi),
        }
    }
}

/// Design-by-demand table of seed means: one row per design (in first-seen
/// order), one column per arrival rate.
pub fn write_pivot_csv<W: Write>(reports: &[RunReport], field: PivotField, out: W) -> Result<()> {
    let mut lambdas: Vec<f64> = reports.iter().map(|r| r.lambda).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let mut designs: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for r in reports {
        let d = match designs.iter().position(|&d| d == r.design_id) {
            Some(i) => i,
            None => {
                designs.push(&r.design_id);
                designs.len() - 1
            }
        };
        let l = lambdas.iter().position(|&l| l == r.lambda).expect("lambda listed");
        if let Some(v) = field.value(r) {
            let c = cells.entry((d, l)).or_insert((0.0, 0));
            c.0 += v;
            c.1 += 1;
        }
    }
    let mut w = csv_writer(out);
    let mut header = vec!["design_id".to_string()];
    header.extend(lambdas.iter().map(|l| format!("lambda_{l}")));
    w.write_record(&header)?;
    for (di, d) in designs.iter().enumerate() {
        let mut row = vec![d.to_string()];
        for li in 0..lambdas.len() {
            row.push(opt_num(cells.get(&(di, li)).map(|(s, n)| s / *n as f64)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn weighted_time_formula() {
        let s = ScenarioParams::b63(80.0, 1);
        let mut p = Passenger::new(0, 0.0, Point::new(0.0, 0.0), Point::new(5.0, 0.0));
        p.t_invehicle = 600.0;
        p.t_wait = 120.0;
        p.t_access = 60.0;
        p.t_egress = 60.0;
        let expect = (600.0 + 1.59 * 120.0 + 1.79 * 120.0) / 60.0;
        assert!((weighted_travel_time(&p, &s) - expect).abs() < 1e-12);
    }

    fn report(design: &str, fp: &str, ridership: usize, vmt: f64) -> RunReport {
        RunReport {
            design_id: design.into(),
            scenario_id: "s".into(),
            seed: 1,
            design_type: "fixed".into(),
            lambda: 80.0,
            generated: ridership,
            ridership,
            rejected: 0,
            avg_wtt_min: Some(50.0),
            avg_access_s: None,
            avg_wait_s: None,
            avg_invehicle_s: None,
            avg_egress_s: None,
            vmt_mi: vmt,
            vmt_km: vmt * KM_PER_MILE,
            total_distance_km: 0.0,
            per_vehicle_vmt_mi: vec![vmt],
            fleet: 1,
            demand_fingerprint: fp.into(),
            audit: AuditSummary::default(),
            passengers: Vec::new(),
        }
    }

    #[test]
    fn comparison_ratios_and_fingerprint_guard() {
        let rows = compare(&[report("a", "x", 100, 10.0), report("b", "x", 50, 30.0)], "a").unwrap();
        assert_eq!(rows[1].ridership_ratio, Some(0.5));
        assert_eq!(rows[1].vmt_ratio, Some(3.0));
        let err = compare(&[report("a", "x", 100, 10.0), report("b", "y", 50, 30.0)], "a");
        assert!(matches!(err, Err(SandboxError::FingerprintMismatch(_, _))));
    }

    #[test]
    fn report_csv_header() {
        let mut buf = Vec::new();
        write_report_csv(&[report("a", "x", 3, 1.5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("design_id,scenario_id,seed,ridership,rejected,avg_wtt_min,vmt_mi\n"));
        assert!(text.contains("a,s,1,3,0,50.000000,1.500000"));
    }
}
