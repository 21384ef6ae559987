//! Fixed-route service: stops along the centre line, vehicles shuttling
//! between the terminals on a headway, passengers walking to the stops.

use crate::demand::PassengerState;
use crate::engine::{Direction, EngineState, EventKind, Motion, RoutePlan, RouteStop, SimContext, StopKind, Tick, Vehicle};
use crate::error::{Result, SandboxError};
use crate::geometry::Point;
use crate::ids::PassengerId;
use crate::scenario::FixedDesign;

use super::Policy;

/// Stop positions for a fixed route: evenly spaced with terminals at both
/// ends of the line, unless explicit `x` coordinates are given.
pub fn layout(design: &FixedDesign, ctx: &SimContext) -> Result<Vec<Point>> {
    let region = ctx.scenario.region();
    let y = region.centerline_y();
    match &design.stop_x {
        None => Ok(region.evenly_spaced(design.stops)),
        Some(xs) => {
            if xs.len() != design.stops {
                return Err(SandboxError::invalid(
                    "stop coordinates",
                    "stop_x",
                    format!("{} coordinates given for S = {}", xs.len(), design.stops),
                ));
            }
            if xs.windows(2).any(|w| w[1] <= w[0]) || xs.iter().any(|&x| !(0.0..=region.length).contains(&x)) {
                return Err(SandboxError::invalid(
                    "stop coordinates",
                    "stop_x",
                    "coordinates must be strictly increasing and inside [0, L]",
                ));
            }
            Ok(xs.iter().map(|&x| Point::new(x, y)).collect())
        }
    }
}

/// Boarding and alighting stop indices: the pair with the least total
/// walking, boarding and alighting stops distinct. With stops along one line
/// this is the nearest stop at each end unless both ends share a nearest
/// stop. Ties go to the lower index.
pub fn choose_stops(stops: &[Point], ctx: &SimContext, origin: Point, destination: Point) -> (usize, usize) {
    let mut best = (f64::INFINITY, 0, 1);
    for (b, &sb) in stops.iter().enumerate() {
        let wb = ctx.distance(origin, sb);
        for (a, &sa) in stops.iter().enumerate() {
            if a == b {
                continue;
            }
            let w = wb + ctx.distance(sa, destination);
            if w < best.0 - 1e-12 {
                best = (w, b, a);
            }
        }
    }
    (best.1, best.2)
}

pub struct FixedPolicy {
    stops: Vec<Point>,
    fleet: usize,
    capacity: usize,
    headway: f64,
    next_slot: u64,
}

impl FixedPolicy {
    pub fn new(design: &FixedDesign, ctx: &SimContext) -> Result<Self> {
        Ok(Self {
            stops: layout(design, ctx)?,
            fleet: design.fleet,
            capacity: design.capacity,
            headway: design.headway(),
            next_slot: 0,
        })
    }

    pub fn stops(&self) -> &[Point] {
        &self.stops
    }

    fn slot_tick(&mut self, ctx: &SimContext) -> Tick {
        let t = ctx.ticks(self.next_slot as f64 * self.headway);
        self.next_slot += 1;
        t
    }

    fn trip(&self, dir: Direction) -> RoutePlan {
        let mut stops: Vec<RouteStop> = self
            .stops
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut s = RouteStop::new(p, StopKind::FixedStop);
                s.fixed_index = Some(i);
                s
            })
            .collect();
        if dir == Direction::Backward {
            stops.reverse();
        }
        RoutePlan::new(stops)
    }
}

impl Policy for FixedPolicy {
    fn init_fleet(&mut self, ctx: &SimContext) -> Result<Vec<Vehicle>> {
        let mut fleet = Vec::with_capacity(self.fleet);
        for i in 0..self.fleet {
            let slot = self.slot_tick(ctx);
            let mut v = Vehicle::new(i as u32, self.capacity, self.stops[0]);
            v.direction = Some(Direction::Forward);
            v.plan = self.trip(Direction::Forward);
            v.plan.stops[0].timetable = Some(slot);
            v.motion = Motion::Dwelling { arrived: slot - ctx.dwell };
            v.dispatch_tick = slot;
            fleet.push(v);
        }
        Ok(fleet)
    }

    fn assign(&mut self, ctx: &SimContext, st: &mut EngineState, id: PassengerId) {
        let now = st.clock;
        let r = &st.riders[id.index()];
        let (b, a) = choose_stops(&self.stops, ctx, r.pax.origin, r.pax.destination);
        let (sb, sa) = (self.stops[b], self.stops[a]);
        let access = ctx.walk_ticks(r.pax.origin, sb);
        let egress = ctx.walk_ticks(sa, r.pax.destination);
        let r = &mut st.riders[id.index()];
        r.fixed_board = Some(b);
        r.fixed_alight = Some(a);
        r.direction = if a > b { Direction::Forward } else { Direction::Backward };
        r.access_ticks = access;
        r.egress_ticks = egress;
        r.avail = now + access;
        r.assigned_at = Some(now);
        r.pax.boarding_stop = Some(sb);
        r.pax.alighting_stop = Some(sa);
        let detail = format!("board_stop={b};alight_stop={a}");
        if access > 0 {
            st.set_state(id, PassengerState::WalkingToStop);
        } else {
            st.set_state(id, PassengerState::WaitingAtStop);
            st.stop_queues[b].push_back(id);
        }
        st.log(EventKind::AssignFixed, Some(id), None, detail);
    }

    fn on_terminal(&mut self, ctx: &SimContext, v: &mut Vehicle, _now: Tick) {
        let dir = v.direction.unwrap_or(Direction::Forward).reversed();
        v.plan = self.trip(dir);
        if dir == Direction::Forward {
            let slot = self.slot_tick(ctx);
            v.plan.stops[0].timetable = Some(slot);
        }
        v.direction = Some(dir);
    }
}
