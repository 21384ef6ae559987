//! Discrete-time simulation loop shared by all operating policies.
//!
//! One iteration advances the clock by a single time step:
//!
//! 1. requests arriving at this tick are handed to the policy,
//! 2. the policy's per-step hook runs (rejected-passenger retries),
//! 3. walkers reaching their stop start waiting, egressing riders finish,
//! 4. vehicles dwell, board, depart or move,
//! 5. every active passenger accrues one step in its current state.
//!
//! Times are integer ticks. A leg of length `d` always takes
//! `max(1, ceil(d / step_km))` ticks and a stop visit at least one tick, and
//! the insertion planners use the same arithmetic, so planned pickup and
//! drop-off times are realised exactly.

mod trace;
mod vehicle;

use std::collections::VecDeque;

pub use trace::{write_events_csv, write_trace_csv, Event, EventKind, TraceRow};
pub use vehicle::{Direction, KinematicState, Leg, Motion, RoutePlan, RouteStop, StopKind, Vehicle};

use crate::demand::{Passenger, PassengerState};
use crate::error::{Result, SandboxError};
use crate::geometry::{Metric, Point};
use crate::ids::{PassengerId, VehicleId};
use crate::metrics::{aggregate, RunReport};
use crate::policy::{build_policy, Policy};
use crate::scenario::{ScenarioParams, SystemDesign};

pub type Tick = i64;

/// Longest drain allowed after the demand window closes, s.
const MAX_DRAIN_S: f64 = 86_400.0;
const EPS: f64 = 1e-9;

/// Warm-up before the demand window: two one-way cycle times for line
/// services, nothing for on-demand fleets that start at their depots.
pub fn warmup_duration(design: &SystemDesign) -> f64 {
    match design {
        SystemDesign::Fixed(d) => 2.0 * d.t_c,
        SystemDesign::Flex(d) => 2.0 * d.t_c,
        SystemDesign::OnDemand(_) => 0.0,
    }
}

/// Tick arithmetic and derived constants of one run.
#[derive(Debug, Clone)]
pub struct SimContext {
    pub scenario: ScenarioParams,
    /// Seconds per tick.
    pub dt: f64,
    /// Vehicle travel per tick, km.
    pub step_km: f64,
    /// Dwell per stop visit, ticks (at least one).
    pub dwell: Tick,
    pub warmup: Tick,
    /// First tick after the demand window.
    pub window_end: Tick,
}

impl SimContext {
    pub fn new(scenario: &ScenarioParams, design: &SystemDesign) -> Result<Self> {
        scenario.validate()?;
        design.validate(scenario)?;
        let dt = scenario.time_step;
        let t_d = match design {
            SystemDesign::Fixed(d) => d.t_d,
            SystemDesign::Flex(d) => d.t_d,
            SystemDesign::OnDemand(d) => d.t_d,
        };
        let warmup = ceil_ticks(warmup_duration(design), dt);
        Ok(Self {
            scenario: scenario.clone(),
            dt,
            step_km: scenario.v_o * dt / 3600.0,
            dwell: ceil_ticks(t_d, dt).max(1),
            warmup,
            window_end: warmup + (scenario.sim_length / dt).round() as Tick,
        })
    }

    pub fn metric(&self) -> Metric {
        self.scenario.metric
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        self.scenario.metric.distance(a, b)
    }

    /// Ticks to drive from `a` to `b`.
    pub fn travel_ticks(&self, a: Point, b: Point) -> Tick {
        self.ticks_for_distance(self.distance(a, b))
    }

    pub fn ticks_for_distance(&self, km: f64) -> Tick {
        ((km / self.step_km - EPS).ceil() as Tick).max(1)
    }

    /// Ticks to walk from `a` to `b`; zero for coincident points.
    pub fn walk_ticks(&self, a: Point, b: Point) -> Tick {
        let s = self.distance(a, b) / self.scenario.v_w * 3600.0;
        ceil_ticks(s, self.dt)
    }

    pub fn ticks(&self, seconds: f64) -> Tick {
        ceil_ticks(seconds, self.dt)
    }

    /// Whole ticks not exceeding `seconds`.
    pub fn floor_ticks(&self, seconds: f64) -> Tick {
        (seconds / self.dt + EPS).floor() as Tick
    }

    pub fn seconds(&self, ticks: Tick) -> f64 {
        ticks as f64 * self.dt
    }

    /// Direct ride time between two points at `v_o`, s.
    pub fn direct_ride_s(&self, a: Point, b: Point) -> f64 {
        self.distance(a, b) / self.scenario.v_o * 3600.0
    }
}

fn ceil_ticks(seconds: f64, dt: f64) -> Tick {
    if seconds <= 0.0 {
        0
    } else {
        (seconds / dt - EPS).ceil().max(0.0) as Tick
    }
}

/// Passenger ledger entry with the timing data the planners need.
#[derive(Debug, Clone)]
pub struct Rider {
    pub pax: Passenger,
    pub request: Tick,
    pub direction: Direction,
    /// Tick from which the rider is present at the boarding point.
    pub avail: Tick,
    pub access_ticks: Tick,
    pub egress_ticks: Tick,
    pub direct_s: f64,
    pub assigned_at: Option<Tick>,
    pub board: Option<Tick>,
    pub alight: Option<Tick>,
    pub done: Option<Tick>,
    pub fixed_board: Option<usize>,
    pub fixed_alight: Option<usize>,
    pub last_attempt: Tick,
}

impl Rider {
    pub fn id(&self) -> PassengerId {
        self.pax.id
    }

    pub fn state(&self) -> PassengerState {
        self.pax.state
    }
}

/// Counts of constraint breaches observed while executing plans.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecutionAudit {
    pub capacity: u32,
    pub backtrack: u32,
    pub late_departures: u32,
    pub checkpoint_order: u32,
    /// Arrivals that differ from the tick planned at insertion time.
    pub plan_drift: u32,
    pub notes: Vec<String>,
}

impl ExecutionAudit {
    pub fn total(&self) -> u32 {
        self.capacity + self.backtrack + self.late_departures + self.checkpoint_order + self.plan_drift
    }

    fn note(&mut self, msg: String) {
        if self.notes.len() < 50 {
            self.notes.push(msg);
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineState {
    pub clock: Tick,
    pub vehicles: Vec<Vehicle>,
    pub riders: Vec<Rider>,
    /// Index of the next rider whose request has not been released yet.
    pub next_request: usize,
    pub active: Vec<PassengerId>,
    pub rejected_pool: Vec<PassengerId>,
    pub stop_queues: Vec<VecDeque<PassengerId>>,
    pub events: Vec<Event>,
    pub trace: Vec<TraceRow>,
    pub served: usize,
    pub rejected: usize,
    pub audit: ExecutionAudit,
    last_checkpoint: Vec<Option<usize>>,
}

impl EngineState {
    pub fn rider(&self, id: PassengerId) -> &Rider {
        &self.riders[id.index()]
    }

    pub fn rider_mut(&mut self, id: PassengerId) -> &mut Rider {
        &mut self.riders[id.index()]
    }

    pub fn log(&mut self, kind: EventKind, pax: Option<PassengerId>, veh: Option<VehicleId>, detail: String) {
        self.events.push(Event {
            tick: self.clock,
            kind,
            passenger: pax,
            vehicle: veh,
            detail,
        });
    }

    pub fn set_state(&mut self, id: PassengerId, next: PassengerState) {
        let r = &mut self.riders[id.index()];
        debug_assert!(
            r.pax.state.can_become(next),
            "passenger {id}: {:?} -> {next:?}",
            r.pax.state
        );
        r.pax.state = next;
        match next {
            PassengerState::Served => self.served += 1,
            PassengerState::Rejected => self.rejected += 1,
            _ => {}
        }
    }

    /// Final rejection of an unassigned passenger.
    pub fn reject(&mut self, ctx: &SimContext, id: PassengerId, kind: EventKind) {
        let now = ctx.seconds(self.clock - ctx.warmup);
        self.set_state(id, PassengerState::Rejected);
        let r = self.rider_mut(id);
        if r.pax.rejection_time.is_none() {
            r.pax.rejection_time = Some(now);
        }
        self.log(kind, Some(id), None, String::new());
    }

    /// Passengers still in the system (released, not served or rejected).
    pub fn in_progress(&self) -> usize {
        self.active.len()
    }

    pub fn pending(&self) -> usize {
        self.riders.len() - self.next_request
    }

    /// `generated = served + rejected + in progress + not yet arrived`.
    pub fn conserved(&self) -> bool {
        self.riders.len() == self.served + self.rejected + self.in_progress() + self.pending()
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub events: Vec<Event>,
    pub trace: Vec<TraceRow>,
    pub riders: Vec<Rider>,
    pub vehicles: Vec<Vehicle>,
    pub audit: ExecutionAudit,
    pub ctx: SimContext,
}

pub struct Engine {
    pub ctx: SimContext,
    pub state: EngineState,
    pub design: SystemDesign,
    policy: Box<dyn Policy>,
    trace_every: Option<Tick>,
    fingerprint: String,
}

impl Engine {
    /// Builds the fleet and passenger ledger. Arrival times in `demand` are
    /// relative to the start of the demand window.
    pub fn new(scenario: &ScenarioParams, design: &SystemDesign, demand: &[Passenger]) -> Result<Self> {
        let ctx = SimContext::new(scenario, design)?;
        let mut policy = build_policy(design, &ctx)?;
        let vehicles = policy.init_fleet(&ctx)?;
        let mut order: Vec<&Passenger> = demand.iter().collect();
        order.sort_by(|a, b| a.arrival_time.total_cmp(&b.arrival_time).then(a.id.cmp(&b.id)));
        let mut riders = Vec::with_capacity(order.len());
        for (i, p) in order.into_iter().enumerate() {
            if !(p.arrival_time >= 0.0 && p.arrival_time < scenario.sim_length) {
                return Err(SandboxError::invalid(
                    "passenger arrival time",
                    "arrival_s",
                    format!(
                        "passenger {} arrives at {} s, outside [0, {})",
                        p.id, p.arrival_time, scenario.sim_length
                    ),
                ));
            }
            let mut pax = p.clone();
            pax.id = PassengerId(i as u32);
            let request = ctx.warmup + (p.arrival_time / ctx.dt).round() as Tick;
            riders.push(Rider {
                request,
                direction: Direction::of_trip(p.origin.x, p.destination.x),
                avail: request,
                access_ticks: 0,
                egress_ticks: 0,
                direct_s: ctx.direct_ride_s(p.origin, p.destination),
                assigned_at: None,
                board: None,
                alight: None,
                done: None,
                fixed_board: None,
                fixed_alight: None,
                last_attempt: request,
                pax,
            });
        }
        let queues = match design {
            SystemDesign::Fixed(d) => d.stops,
            _ => 0,
        };
        let n_veh = vehicles.len();
        Ok(Self {
            fingerprint: crate::demand::fingerprint(demand),
            state: EngineState {
                clock: 0,
                vehicles,
                riders,
                next_request: 0,
                active: Vec::new(),
                rejected_pool: Vec::new(),
                stop_queues: vec![VecDeque::new(); queues],
                events: Vec::new(),
                trace: Vec::new(),
                served: 0,
                rejected: 0,
                audit: ExecutionAudit::default(),
                last_checkpoint: vec![None; n_veh],
            },
            design: design.clone(),
            policy,
            trace_every: None,
            ctx,
        })
    }

    /// Records vehicle positions every `every` ticks.
    pub fn with_trace(mut self, every: Tick) -> Self {
        self.trace_every = Some(every.max(1));
        self
    }

    pub fn is_finished(&self) -> bool {
        self.state.clock >= self.ctx.window_end && self.state.active.is_empty() && self.state.pending() == 0
    }

    /// Advances the simulation by one time step.
    pub fn step(&mut self) {
        let t = self.state.clock;
        if t == self.ctx.window_end {
            self.policy.on_drain(&self.ctx, &mut self.state);
        }
        self.release_requests(t);
        self.policy.on_step(&self.ctx, &mut self.state);
        self.update_walkers(t);
        self.update_vehicles(t);
        self.accrue();
        if let Some(every) = self.trace_every {
            if t % every == 0 {
                self.record_trace(t);
            }
        }
        debug_assert!(self.state.conserved(), "passenger conservation broken at tick {t}");
        self.state.clock += 1;
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        let limit = self.ctx.window_end + self.ctx.ticks(MAX_DRAIN_S);
        while !self.is_finished() {
            if self.state.clock > limit {
                return Err(SandboxError::DrainTimeout(MAX_DRAIN_S));
            }
            self.step();
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<RunOutput> {
        self.run_to_end()?;
        if !self.state.conserved() {
            return Err(SandboxError::Audit("passenger conservation broken".into()));
        }
        let report = aggregate(&self.ctx, &self.design, &self.state, &self.fingerprint, self.policy.counter())?;
        Ok(RunOutput {
            report,
            events: self.state.events,
            trace: self.state.trace,
            riders: self.state.riders,
            vehicles: self.state.vehicles,
            audit: self.state.audit,
            ctx: self.ctx,
        })
    }

    fn release_requests(&mut self, t: Tick) {
        while self.state.next_request < self.state.riders.len() {
            let r = &self.state.riders[self.state.next_request];
            if r.request > t {
                break;
            }
            let id = r.id();
            self.state.next_request += 1;
            self.state.active.push(id);
            self.state.log(EventKind::Request, Some(id), None, String::new());
            self.policy.assign(&self.ctx, &mut self.state, id);
        }
    }

    fn update_walkers(&mut self, t: Tick) {
        let st = &mut self.state;
        for i in 0..st.active.len() {
            let id = st.active[i];
            let r = &st.riders[id.index()];
            match r.pax.state {
                PassengerState::WalkingToStop if r.avail <= t => {
                    let fixed = r.fixed_board;
                    st.set_state(id, PassengerState::WaitingAtStop);
                    st.log(EventKind::ReachStop, Some(id), None, String::new());
                    if let Some(q) = fixed {
                        st.stop_queues[q].push_back(id);
                    }
                }
                PassengerState::Egressing if r.done.is_some_and(|d| d <= t) => {
                    st.set_state(id, PassengerState::Served);
                    st.log(EventKind::Arrive, Some(id), None, String::new());
                }
                _ => {}
            }
        }
    }

    fn accrue(&mut self) {
        let dt = self.ctx.dt;
        let st = &mut self.state;
        for &id in &st.active {
            let p = &mut st.riders[id.index()].pax;
            match p.state {
                PassengerState::Unassigned | PassengerState::WaitingAtStop => p.t_wait += dt,
                PassengerState::WalkingToStop => p.t_access += dt,
                PassengerState::Onboard => p.t_invehicle += dt,
                PassengerState::Egressing => p.t_egress += dt,
                PassengerState::Served | PassengerState::Rejected => {}
            }
        }
        let riders = &st.riders;
        st.active.retain(|id| !riders[id.index()].pax.state.is_terminal());
    }

    fn record_trace(&mut self, t: Tick) {
        for v in &self.state.vehicles {
            self.state.trace.push(TraceRow {
                tick: t,
                vehicle: v.id,
                x: v.position.x,
                y: v.position.y,
                state: v.kinematic_state(),
                onboard: v.onboard.len(),
            });
        }
    }

    /// When several vehicles dwell at the same fixed stop in the same
    /// direction, only the one departing first takes passengers from the queue.
    fn first_to_leave(&self, vi: usize, q: usize, dir: Direction) -> bool {
        let key = |i: usize, v: &Vehicle| -> Option<(Tick, usize)> {
            let Motion::Dwelling { arrived } = v.motion else { return None };
            let stop = v.plan.head()?;
            (stop.fixed_index == Some(q) && v.direction == Some(dir)).then(|| (stop.departure(arrived, self.ctx.dwell), i))
        };
        let Some(mine) = key(vi, &self.state.vehicles[vi]) else { return false };
        self.state
            .vehicles
            .iter()
            .enumerate()
            .filter_map(|(i, v)| key(i, v))
            .all(|other| other >= mine)
    }

    fn update_vehicles(&mut self, t: Tick) {
        for vi in 0..self.state.vehicles.len() {
            let motion = self.state.vehicles[vi].motion.clone();
            match motion {
                Motion::Dwelling { arrived } => self.dwell_step(vi, arrived, t),
                Motion::Moving(_) => self.move_step(vi, t),
                Motion::Idle => {
                    let v = &mut self.state.vehicles[vi];
                    if let Some(next) = v.plan.head() {
                        let to = next.location;
                        start_leg(&self.ctx, v, to);
                        self.move_step(vi, t);
                    }
                }
            }
        }
    }

    fn dwell_step(&mut self, vi: usize, arrived: Tick, t: Tick) {
        if t == arrived {
            self.alight(vi, t);
            if self.state.vehicles[vi].plan.is_last() {
                let v = &mut self.state.vehicles[vi];
                self.policy.on_terminal(&self.ctx, v, t);
            }
        }
        self.board(vi, t);
        let v = &mut self.state.vehicles[vi];
        let Some(stop) = v.plan.head() else {
            v.motion = Motion::Idle;
            return;
        };
        let dep = stop.departure(arrived, self.ctx.dwell);
        if t + 1 < dep {
            return;
        }
        if let Some(tt) = stop.timetable {
            if dep > tt {
                self.state.audit.late_departures += 1;
                let msg = format!("vehicle {} left {} at tick {} after timetable {}", v.id, stop.location, dep, tt);
                self.state.audit.note(msg);
            }
        }
        v.plan.cursor += 1;
        v.plan.compact();
        match v.plan.head() {
            Some(next) => {
                let to = next.location;
                start_leg(&self.ctx, v, to);
            }
            None => v.motion = Motion::Idle,
        }
    }

    fn move_step(&mut self, vi: usize, t: Tick) {
        let ctx = &self.ctx;
        let in_window = t >= ctx.warmup && t < ctx.window_end;
        let v = &mut self.state.vehicles[vi];
        let Motion::Moving(leg) = &mut v.motion else { return };
        let before = (leg.steps_done as f64 * ctx.step_km).min(leg.length);
        leg.steps_done += 1;
        let arrived = leg.steps_done >= leg.ticks;
        let after = if arrived { leg.length } else { (leg.steps_done as f64 * ctx.step_km).min(leg.length) };
        let old = v.position;
        v.position = if arrived { leg.to } else { ctx.metric().point_along(leg.from, leg.to, after) };
        let moved = after - before;
        v.odometer += moved;
        if in_window {
            v.window_distance += moved;
        }
        if let Some(dir) = v.direction {
            v.section_backtrack += dir.backtrack(old, v.position);
            v.max_section_backtrack = v.max_section_backtrack.max(v.section_backtrack);
        }
        if !arrived {
            return;
        }
        v.completed_legs += leg.length;
        v.motion = Motion::Dwelling { arrived: t + 1 };
        let stop = v.plan.head().expect("moving vehicles have a target stop");
        if stop.planned_arrival.is_some_and(|p| p != t + 1) {
            self.state.audit.plan_drift += 1;
            let msg = format!("vehicle {} reached {} at tick {}, planned {:?}", v.id, stop.location, t + 1, stop.planned_arrival);
            self.state.audit.note(msg);
        }
        if let Some(c) = stop.checkpoint {
            if let Some(limit) = self.policy.backtrack_limit() {
                if v.section_backtrack > limit + 1e-9 {
                    self.state.audit.backtrack += 1;
                    let msg = format!("vehicle {} backtracked {:.4} km before checkpoint {c}", v.id, v.section_backtrack);
                    self.state.audit.note(msg);
                }
            }
            v.section_backtrack = 0.0;
            let last = self.state.last_checkpoint[vi];
            if let Some(prev) = last {
                if prev.abs_diff(c) > 1 {
                    self.state.audit.checkpoint_order += 1;
                    let msg = format!("vehicle {} went from checkpoint {prev} to {c}", v.id);
                    self.state.audit.note(msg);
                }
            }
            self.state.last_checkpoint[vi] = Some(c);
        }
    }

    fn alight(&mut self, vi: usize, t: Tick) {
        let st = &mut self.state;
        let v = &mut st.vehicles[vi];
        let vid = v.id;
        let Some(stop) = v.plan.head_mut() else { return };
        let leaving = std::mem::take(&mut stop.dropoffs);
        for id in leaving {
            let v = &mut st.vehicles[vi];
            v.onboard.retain(|&p| p != id);
            let r = &mut st.riders[id.index()];
            r.alight = Some(t);
            let egress = r.egress_ticks;
            if egress > 0 {
                r.done = Some(t + egress);
                st.set_state(id, PassengerState::Egressing);
            } else {
                r.done = Some(t);
                st.set_state(id, PassengerState::Served);
            }
            st.log(EventKind::Alight, Some(id), Some(vid), String::new());
            if egress == 0 {
                st.log(EventKind::Arrive, Some(id), None, String::new());
            }
        }
    }

    fn board(&mut self, vi: usize, t: Tick) {
        let head = self.state.vehicles[vi].plan.head();
        let queue_access = match (head.and_then(|s| s.fixed_index), self.state.vehicles[vi].direction) {
            (Some(q), Some(dir)) => self.first_to_leave(vi, q, dir),
            _ => false,
        };
        let st = &mut self.state;
        let v = &st.vehicles[vi];
        let Some(stop) = v.plan.head() else { return };
        let mut boarding = Vec::new();
        for &id in &stop.pickups {
            if st.riders[id.index()].pax.state == PassengerState::WaitingAtStop {
                boarding.push(id);
            }
        }
        if let (Some(q), Some(dir)) = (stop.fixed_index, v.direction) {
            if queue_access {
                let room = v.capacity.saturating_sub(v.onboard.len() + boarding.len());
                let queue = &mut st.stop_queues[q];
                let mut taken = 0;
                queue.retain(|&id| {
                    if taken < room && st.riders[id.index()].direction == dir {
                        taken += 1;
                        boarding.push(id);
                        false
                    } else {
                        true
                    }
                });
            }
        }
        if boarding.is_empty() {
            return;
        }
        let vid = st.vehicles[vi].id;
        for id in boarding {
            let v = &mut st.vehicles[vi];
            if v.onboard.len() >= v.capacity {
                st.audit.capacity += 1;
                st.audit.note(format!("vehicle {vid} over capacity boarding passenger {id} at tick {t}"));
            }
            v.onboard.push(id);
            let head = v.plan.cursor;
            v.plan.stops[head].pickups.retain(|&p| p != id);
            if let Some(a) = st.riders[id.index()].fixed_alight {
                let stop = v.plan.stops[head..]
                    .iter_mut()
                    .skip(1)
                    .find(|s| s.fixed_index == Some(a))
                    .expect("fixed alighting stop lies ahead on the trip");
                stop.dropoffs.push(id);
                st.riders[id.index()].pax.assigned_vehicle = Some(vid);
            }
            st.riders[id.index()].board = Some(t);
            st.set_state(id, PassengerState::Onboard);
            st.log(EventKind::Board, Some(id), Some(vid), String::new());
        }
    }
}

/// Starts the leg from the vehicle's position to `to`.
pub(crate) fn start_leg(ctx: &SimContext, v: &mut Vehicle, to: Point) {
    let length = ctx.distance(v.position, to);
    v.motion = Motion::Moving(Leg {
        from: v.position,
        to,
        length,
        ticks: ctx.ticks_for_distance(length),
        steps_done: 0,
    });
}

/// Runs one design against a demand list and aggregates the report.
pub fn run(scenario: &ScenarioParams, design: &SystemDesign, demand: &[Passenger]) -> Result<RunReport> {
    Ok(Engine::new(scenario, design, demand)?.finish()?.report)
}
