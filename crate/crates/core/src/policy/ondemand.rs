//! Door-to-door on-demand service: vehicles start at depots and take each
//! request into the plan that grows least, or reject it on the spot.

use crate::engine::{EngineState, EventKind, Rider, SimContext, Tick, Vehicle};
use crate::error::Result;
use crate::geometry::Point;
use crate::ids::PassengerId;
use crate::scenario::{OnDemandDesign, OnDemandObjective};

use super::insertion::{cost_order, Access, CandidateCounter, Choice, NewRequest, Objective, Planner};
use super::{commit, snapshot, Policy};

pub use super::insertion::candidate_count;

/// Depot positions along the centre line; a single depot sits mid-route.
pub fn depots(design: &OnDemandDesign, ctx: &SimContext) -> Vec<Point> {
    ctx.scenario.region().evenly_spaced(design.depots)
}

pub struct OnDemandPolicy {
    design: OnDemandDesign,
    max_wait: Tick,
    objective: Objective,
    counter: CandidateCounter,
}

impl OnDemandPolicy {
    pub fn new(design: &OnDemandDesign, ctx: &SimContext) -> Result<Self> {
        design.depot_counts()?;
        let s = &ctx.scenario;
        let objective = match design.objective {
            OnDemandObjective::VehicleTime => Objective::VehicleTime,
            OnDemandObjective::WeightedPassengerTime => Objective::PassengerTime {
                gamma_w: s.gamma_w,
                gamma_v: s.gamma_v,
                gamma_a: s.gamma_a,
            },
        };
        Ok(Self {
            design: design.clone(),
            max_wait: ctx.floor_ticks(design.zeta_w),
            objective,
            counter: CandidateCounter::default(),
        })
    }

    fn max_ride(&self, ctx: &SimContext, r: &Rider) -> Tick {
        ctx.floor_ticks(self.design.zeta_d * r.direct_s)
    }
}

impl Policy for OnDemandPolicy {
    fn init_fleet(&mut self, ctx: &SimContext) -> Result<Vec<Vehicle>> {
        let counts = self.design.depot_counts()?;
        let mut fleet = Vec::with_capacity(self.design.fleet);
        for (depot, n) in depots(&self.design, ctx).into_iter().zip(counts) {
            for _ in 0..n {
                fleet.push(Vehicle::new(fleet.len() as u32, self.design.capacity, depot));
            }
        }
        Ok(fleet)
    }

    fn assign(&mut self, ctx: &SimContext, st: &mut EngineState, id: PassengerId) {
        let now = st.clock;
        let r = &st.riders[id.index()];
        let req = NewRequest {
            request: r.request,
            max_wait: Some(self.max_wait),
            max_ride: Some(self.max_ride(ctx, r)),
            pickups: vec![Access::door(r.pax.origin)],
            dropoffs: vec![Access::door(r.pax.destination)],
        };
        let origin = r.pax.origin;
        let (max_wait, zeta_d) = (self.max_wait, self.design.zeta_d);
        let limits = move |x: &Rider| (Some(max_wait), Some(ctx.floor_ticks(zeta_d * x.direct_s)));
        let mut best: Option<(usize, Choice)> = None;
        for vi in 0..st.vehicles.len() {
            let v = &st.vehicles[vi];
            // No route reaches the origin sooner than driving straight there.
            if now + ctx.travel_ticks(v.position, origin) - req.request > self.max_wait {
                continue;
            }
            let snap = snapshot(st, v, &limits, None, false);
            let mut planner = Planner::new(ctx, &snap, self.objective);
            if let Some(c) = planner.best(&req, &mut self.counter) {
                if best.as_ref().map_or(true, |(_, b)| cost_order(c.cost, b.cost).is_lt()) {
                    best = Some((vi, c));
                }
            }
        }
        match best {
            Some((vi, c)) => {
                let detail = format!("k1={};k2={};increment_s={}", c.k1, c.k2, ctx.seconds(c.increment));
                commit(st, vi, id, &c, req.pickups[0], req.dropoffs[0], EventKind::AssignOd, detail);
            }
            None => st.reject(ctx, id, EventKind::RejectOd),
        }
    }

    fn counter(&self) -> CandidateCounter {
        self.counter
    }
}
