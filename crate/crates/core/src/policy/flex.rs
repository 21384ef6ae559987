//! Semi-flexible route: vehicles keep a checkpoint timetable and use the
//! slack between checkpoints to deviate to passengers' doors or to meeting
//! points the passengers walk to. Requests that cannot be fitted are retried
//! every 30 s until their wait limit runs out.

use crate::engine::{Direction, EngineState, EventKind, Motion, RoutePlan, RouteStop, SimContext, StopKind, Tick, Vehicle};
use crate::error::Result;
use crate::geometry::Point;
use crate::ids::PassengerId;
use crate::scenario::FlexDesign;

use super::insertion::{Access, At, CandidateCounter, Choice, NewRequest, Objective, Planner, Snapshot};
use super::{commit, snapshot, Policy};

pub const RETRY_INTERVAL_S: f64 = 30.0;
/// Meeting points kept per trip end, nearest first.
const MAX_MEETING_POINTS: usize = 6;

/// One inter-checkpoint section of the line.
#[derive(Debug, Clone, PartialEq)]
pub struct FlexSegment {
    pub from_checkpoint: usize,
    pub to_checkpoint: usize,
    /// Scheduled running time between the checkpoints, s.
    pub t_t: f64,
    /// Time available for deviations, s.
    pub slack_total: f64,
}

pub fn checkpoints(design: &FlexDesign, ctx: &SimContext) -> Vec<Point> {
    ctx.scenario.region().evenly_spaced(design.checkpoints)
}

pub fn segments(design: &FlexDesign, ctx: &SimContext) -> Vec<FlexSegment> {
    let t_t = design.segment_travel_time(&ctx.scenario);
    let slack = design.segment_slack(&ctx.scenario);
    (1..design.checkpoints)
        .map(|i| FlexSegment {
            from_checkpoint: i - 1,
            to_checkpoint: i,
            t_t,
            slack_total: slack,
        })
        .collect()
}

pub struct FlexPolicy {
    design: FlexDesign,
    checkpoints: Vec<Point>,
    /// Trip start time of each vehicle's current trip, s.
    trip_start: Vec<f64>,
    next_slot: u64,
    pool: Vec<PassengerId>,
    max_wait: Tick,
    retry: Tick,
    objective: Objective,
    counter: CandidateCounter,
}

impl FlexPolicy {
    pub fn new(design: &FlexDesign, ctx: &SimContext) -> Self {
        let s = &ctx.scenario;
        Self {
            design: design.clone(),
            checkpoints: checkpoints(design, ctx),
            trip_start: Vec::new(),
            next_slot: 0,
            pool: Vec::new(),
            max_wait: ctx.floor_ticks(design.zeta_w),
            retry: ctx.ticks(RETRY_INTERVAL_S),
            objective: Objective::PassengerTime {
                gamma_w: s.gamma_w,
                gamma_v: s.gamma_v,
                gamma_a: s.gamma_a,
            },
            counter: CandidateCounter::default(),
        }
    }

    /// Checkpoints in visiting order with their timetabled departures for a
    /// trip leaving its first terminal at `start` seconds.
    fn trip(&self, ctx: &SimContext, dir: Direction, start: f64) -> RoutePlan {
        let n = self.checkpoints.len();
        let section = self.design.t_c / (n - 1) as f64;
        let stops = (0..n)
            .map(|k| {
                let c = match dir {
                    Direction::Forward => k,
                    Direction::Backward => n - 1 - k,
                };
                let mut s = RouteStop::new(self.checkpoints[c], StopKind::Checkpoint);
                s.checkpoint = Some(c);
                s.timetable = Some(ctx.ticks(start + k as f64 * section));
                s
            })
            .collect();
        RoutePlan::new(stops)
    }

    /// Candidate meeting points for one trip end, nearest first.
    fn meeting_points(&self, ctx: &SimContext, snap: &Snapshot, door: Point) -> Vec<Access> {
        let zeta_a = ctx.scenario.zeta_a;
        let mut out: Vec<(f64, usize, Access)> = Vec::new();
        for (k, s) in snap.stops.iter().enumerate() {
            let d = ctx.distance(door, s.loc);
            let usable = d < 1e-9 || (d <= zeta_a && (self.design.walking_enabled || s.checkpoint));
            if usable {
                let a = Access {
                    loc: s.loc,
                    walk: ctx.walk_ticks(door, s.loc),
                    at: At::Stop(k),
                };
                out.push((d, out.len(), a));
            }
        }
        if self.design.walking_enabled {
            for (i, w) in snap.stops.windows(2).enumerate() {
                let foot = ctx.metric().foot_on_leg(w[0].loc, w[1].loc, door);
                let d = ctx.distance(door, foot);
                let on_end = ctx.distance(foot, w[0].loc) < 1e-9 || ctx.distance(foot, w[1].loc) < 1e-9;
                if d <= zeta_a && d > 1e-9 && !on_end {
                    let a = Access {
                        loc: foot,
                        walk: ctx.walk_ticks(door, foot),
                        at: At::Place(i),
                    };
                    out.push((d, out.len(), a));
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.truncate(MAX_MEETING_POINTS);
        out.into_iter().map(|(_, _, a)| a).collect()
    }

    /// Tries every dispatched vehicle running in the passenger's direction and
    /// commits the cheapest feasible insertion.
    fn try_assign(&mut self, ctx: &SimContext, st: &mut EngineState, id: PassengerId) -> bool {
        let now = st.clock;
        let r = &st.riders[id.index()];
        let (origin, destination, dir, request) = (r.pax.origin, r.pax.destination, r.direction, r.request);
        let max_wait = self.max_wait;
        let limits = move |_: &crate::engine::Rider| (Some(max_wait), None);
        let mut best: Option<(usize, Choice, Access, Access)> = None;
        for vi in 0..st.vehicles.len() {
            let v = &st.vehicles[vi];
            if !v.is_dispatched(now) || v.direction != Some(dir) {
                continue;
            }
            let snap = snapshot(st, v, &limits, Some(self.design.zeta_b), true);
            let mut pickups = vec![Access::door(origin)];
            pickups.extend(self.meeting_points(ctx, &snap, origin));
            let mut dropoffs = vec![Access::door(destination)];
            dropoffs.extend(self.meeting_points(ctx, &snap, destination));
            let req = NewRequest {
                request,
                max_wait: Some(max_wait),
                max_ride: None,
                pickups,
                dropoffs,
            };
            let mut planner = Planner::new(ctx, &snap, self.objective);
            if let Some(c) = planner.best(&req, &mut self.counter) {
                let better = match &best {
                    None => true,
                    Some((_, b, _, _)) => super::insertion::cost_order(c.cost, b.cost).is_lt(),
                };
                if better {
                    let (pa, da) = (req.pickups[c.pickup], req.dropoffs[c.dropoff]);
                    best = Some((vi, c, pa, da));
                }
            }
        }
        let Some((vi, c, pa, da)) = best else { return false };
        let mode = if pa.at == At::AnyPlace && da.at == At::AnyPlace {
            "direct"
        } else {
            "walk"
        };
        let detail = format!("k1={};k2={};mode={mode}", c.k1, c.k2);
        commit(st, vi, id, &c, pa, da, EventKind::AssignFlex, detail);
        true
    }
}

impl Policy for FlexPolicy {
    fn init_fleet(&mut self, ctx: &SimContext) -> Result<Vec<Vehicle>> {
        let h = self.design.headway();
        let mut fleet = Vec::with_capacity(self.design.fleet);
        for i in 0..self.design.fleet {
            let start = self.next_slot as f64 * h;
            self.next_slot += 1;
            let mut v = Vehicle::new(i as u32, self.design.capacity, self.checkpoints[0]);
            v.direction = Some(Direction::Forward);
            v.plan = self.trip(ctx, Direction::Forward, start);
            v.dispatch_tick = ctx.ticks(start);
            v.motion = Motion::Dwelling {
                arrived: v.dispatch_tick - ctx.dwell,
            };
            self.trip_start.push(start);
            fleet.push(v);
        }
        Ok(fleet)
    }

    fn assign(&mut self, ctx: &SimContext, st: &mut EngineState, id: PassengerId) {
        if !self.try_assign(ctx, st, id) {
            let now = ctx.seconds(st.clock - ctx.warmup);
            st.riders[id.index()].last_attempt = st.clock;
            st.riders[id.index()].pax.rejection_time = Some(now);
            self.pool.push(id);
            st.log(EventKind::Pool, Some(id), None, String::new());
        }
    }

    fn on_step(&mut self, ctx: &SimContext, st: &mut EngineState) {
        if self.pool.is_empty() {
            return;
        }
        let now = st.clock;
        let pool = std::mem::take(&mut self.pool);
        let mut keep = Vec::with_capacity(pool.len());
        for id in pool {
            let r = &st.riders[id.index()];
            if now - r.request >= self.max_wait {
                st.reject(ctx, id, EventKind::RejectFlex);
            } else if now - r.last_attempt >= self.retry {
                if !self.try_assign(ctx, st, id) {
                    st.riders[id.index()].last_attempt = now;
                    keep.push(id);
                }
            } else {
                keep.push(id);
            }
        }
        self.pool = keep;
    }

    fn on_terminal(&mut self, ctx: &SimContext, v: &mut Vehicle, _now: Tick) {
        let vi = v.id.index();
        let dir = v.direction.unwrap_or(Direction::Forward).reversed();
        let start = match dir {
            Direction::Backward => self.trip_start[vi] + self.design.t_c,
            Direction::Forward => {
                let slot = self.next_slot as f64 * self.design.headway();
                self.next_slot += 1;
                slot.max(self.trip_start[vi] + self.design.t_c)
            }
        };
        self.trip_start[vi] = start;
        v.plan = self.trip(ctx, dir, start);
        v.direction = Some(dir);
    }

    fn on_drain(&mut self, ctx: &SimContext, st: &mut EngineState) {
        for id in std::mem::take(&mut self.pool) {
            st.reject(ctx, id, EventKind::RejectDrain);
        }
    }

    fn backtrack_limit(&self) -> Option<f64> {
        Some(self.design.zeta_b)
    }

    fn counter(&self) -> CandidateCounter {
        self.counter
    }
}
