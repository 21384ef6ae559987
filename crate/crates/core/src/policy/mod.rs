//! Operating policies: how requests are assigned and how vehicles behave at
//! the ends of their plans.

pub mod cost;
pub mod fixed;
pub mod flex;
pub mod insertion;
pub mod ondemand;

use std::collections::HashMap;

use crate::demand::PassengerState;
use crate::engine::{EngineState, EventKind, Motion, Rider, RouteStop, SimContext, Tick, Vehicle};
use crate::error::Result;
use crate::ids::PassengerId;
use crate::scenario::SystemDesign;

use insertion::{Access, CandidateCounter, Choice, Placement, SnapPax, SnapStop, Snapshot, Start};

/// Hooks the engine calls during a run. All methods run on the engine's
/// thread in a fixed order, so policies may keep mutable state.
pub trait Policy: Send {
    fn init_fleet(&mut self, ctx: &SimContext) -> Result<Vec<Vehicle>>;

    /// A new request has arrived at the current tick.
    fn assign(&mut self, ctx: &SimContext, st: &mut EngineState, id: PassengerId);

    /// Called once per tick after new requests have been handled.
    fn on_step(&mut self, _ctx: &SimContext, _st: &mut EngineState) {}

    /// The vehicle has reached the last stop of its plan and finished
    /// alighting there. Line services start their next trip here.
    fn on_terminal(&mut self, _ctx: &SimContext, _v: &mut Vehicle, _now: Tick) {}

    /// The demand window has closed.
    fn on_drain(&mut self, _ctx: &SimContext, _st: &mut EngineState) {}

    /// Per-section backtracking allowance, km.
    fn backtrack_limit(&self) -> Option<f64> {
        None
    }

    fn counter(&self) -> CandidateCounter {
        CandidateCounter::default()
    }
}

pub fn build_policy(design: &SystemDesign, ctx: &SimContext) -> Result<Box<dyn Policy>> {
    Ok(match design {
        SystemDesign::Fixed(d) => Box::new(fixed::FixedPolicy::new(d, ctx)?),
        SystemDesign::Flex(d) => Box::new(flex::FlexPolicy::new(d, ctx)),
        SystemDesign::OnDemand(d) => Box::new(ondemand::OnDemandPolicy::new(d, ctx)?),
    })
}

/// Planner view of one vehicle. `limits` gives each rider's wait and ride
/// caps in ticks.
pub(crate) fn snapshot(
    st: &EngineState,
    v: &Vehicle,
    limits: &dyn Fn(&Rider) -> (Option<Tick>, Option<Tick>),
    backtrack_limit: Option<f64>,
    closed: bool,
) -> Snapshot {
    let now = st.clock;
    let rem = v.plan.remaining();
    let mut backtrack_used = v.section_backtrack;
    let start = match &v.motion {
        Motion::Idle => Start::Idle,
        Motion::Moving(leg) => {
            if let (Some(dir), Some(head)) = (v.direction, rem.first()) {
                backtrack_used += dir.backtrack(v.position, head.location);
            }
            Start::Moving {
                arrive: now + leg.remaining_ticks(),
            }
        }
        Motion::Dwelling { arrived } => Start::Dwelling { arrived: *arrived },
    };
    let mut index: HashMap<PassengerId, usize> = HashMap::new();
    let mut pax = Vec::new();
    let mut local = |id: PassengerId, pax: &mut Vec<SnapPax>| -> usize {
        *index.entry(id).or_insert_with(|| {
            let r = &st.riders[id.index()];
            let (max_wait, max_ride) = limits(r);
            pax.push(SnapPax {
                request: r.request,
                access: r.access_ticks,
                avail: r.avail,
                boarded: if r.pax.state == PassengerState::Onboard { r.board } else { None },
                max_wait,
                max_ride,
            });
            pax.len() - 1
        })
    };
    let mut stops = Vec::with_capacity(rem.len());
    for s in rem {
        let mut snap = SnapStop::at(s.location);
        snap.timetable = s.timetable;
        snap.checkpoint = s.is_checkpoint();
        for &id in &s.dropoffs {
            snap.dropoffs.push(local(id, &mut pax));
        }
        for &id in &s.pickups {
            snap.pickups.push(local(id, &mut pax));
        }
        stops.push(snap);
    }
    Snapshot {
        position: v.position,
        start,
        now,
        onboard: v.onboard.len(),
        capacity: v.capacity,
        direction: v.direction,
        backtrack_limit,
        backtrack_used,
        closed,
        stops,
        pax,
    }
}

/// Writes a chosen insertion into the vehicle's plan and the rider ledger.
#[allow(clippy::too_many_arguments)]
pub(crate) fn commit(
    st: &mut EngineState,
    vi: usize,
    id: PassengerId,
    choice: &Choice,
    pick: Access,
    drop: Access,
    kind: EventKind,
    detail: String,
) {
    let now = st.clock;
    let avail = now + pick.walk;
    let v = &mut st.vehicles[vi];
    let vid = v.id;
    let base = v.plan.cursor;
    if matches!(choice.pick_at, Placement::New(_)) {
        v.plan.stops.insert(base + choice.k1, RouteStop::virtual_stop(pick.loc));
    }
    if matches!(choice.drop_at, Placement::New(_)) {
        v.plan.stops.insert(base + choice.k2, RouteStop::virtual_stop(drop.loc));
    }
    {
        let s = &mut v.plan.stops[base + choice.k1];
        s.pickups.push(id);
        s.hold_until = Some(s.hold_until.unwrap_or(0).max(avail + 1));
    }
    v.plan.stops[base + choice.k2].dropoffs.push(id);
    for (s, &a) in v.plan.stops[base..].iter_mut().zip(&choice.arrivals) {
        s.planned_arrival = Some(a);
    }
    let r = &mut st.riders[id.index()];
    r.assigned_at = Some(now);
    r.access_ticks = pick.walk;
    r.avail = avail;
    r.egress_ticks = drop.walk;
    r.pax.assigned_vehicle = Some(vid);
    r.pax.boarding_stop = Some(pick.loc);
    r.pax.alighting_stop = Some(drop.loc);
    let next = if pick.walk > 0 {
        PassengerState::WalkingToStop
    } else {
        PassengerState::WaitingAtStop
    };
    st.set_state(id, next);
    st.log(kind, Some(id), Some(vid), detail);
}
