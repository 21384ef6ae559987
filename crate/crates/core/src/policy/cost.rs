//! Analytic cost model of a fixed route and its grid optimizer.
//!
//! Total cost per hour is the operator cost `c f t_c` plus the users' access,
//! waiting and in-vehicle time valued at `P_a`, `P_w` and `P_v`. The one-way
//! cycle time grows with boarding time per passenger and with the delay of
//! every stop.

use serde::{Deserialize, Serialize};

use crate::scenario::{FixedDesign, ScenarioParams};

/// Cost constants in the units a configuration file uses. None of them are
/// observed quantities; the defaults are working assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostAssumptions {
    /// Operating cost, $ per vehicle-hour.
    pub c: f64,
    /// Value of access time, $ per hour.
    #[serde(rename = "P_a")]
    pub p_a: f64,
    #[serde(rename = "P_w")]
    pub p_w: f64,
    #[serde(rename = "P_v")]
    pub p_v: f64,
    /// Boarding and alighting time per passenger, s.
    pub beta: f64,
    /// Delay per stop, s.
    pub t_s: f64,
    /// Average trip length as a fraction of the route length.
    pub l_fraction: f64,
}

impl Default for CostAssumptions {
    fn default() -> Self {
        Self {
            c: 150.0,
            p_a: 25.0,
            p_w: 10.0,
            p_v: 10.0,
            beta: 4.0,
            t_s: 20.0,
            l_fraction: 1.0 / 3.0,
        }
    }
}

/// Model inputs in hours and kilometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedCostParams {
    pub c: f64,
    pub p_a: f64,
    pub p_w: f64,
    pub p_v: f64,
    /// h per passenger.
    pub beta: f64,
    /// h per stop.
    pub t_s: f64,
    /// Average trip length, km.
    pub l: f64,
    pub length: f64,
    pub v_o: f64,
    pub v_w: f64,
    /// Demand, passengers per hour.
    pub demand: f64,
}

impl FixedCostParams {
    pub fn new(a: &CostAssumptions, scenario: &ScenarioParams) -> Self {
        Self {
            c: a.c,
            p_a: a.p_a,
            p_w: a.p_w,
            p_v: a.p_v,
            beta: a.beta / 3600.0,
            t_s: a.t_s / 3600.0,
            l: a.l_fraction * scenario.length,
            length: scenario.length,
            v_o: scenario.v_o,
            v_w: scenario.v_w,
            demand: scenario.lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    /// One-way cycle time, h.
    pub t_c: f64,
    pub c_o: f64,
    pub access: f64,
    pub wait: f64,
    pub in_vehicle: f64,
    pub c_u: f64,
    pub c_t: f64,
}

/// One-way cycle time in hours.
pub fn cycle_time(stops: usize, f: f64, p: &FixedCostParams) -> f64 {
    p.length / p.v_o + p.beta * p.demand / f + stops as f64 * p.t_s
}

pub fn total_cost(stops: usize, f: f64, p: &FixedCostParams) -> CostBreakdown {
    let t_c = cycle_time(stops, f, p);
    let n = p.demand;
    let c_o = p.c * f * t_c;
    let access = p.p_a * (p.length / (2.0 * p.v_w * stops as f64)) * n;
    let wait = p.p_w * (1.0 / (2.0 * f)) * n;
    let in_vehicle = p.p_v * (p.l / p.length) * t_c * n;
    let c_u = access + wait + in_vehicle;
    CostBreakdown {
        t_c,
        c_o,
        access,
        wait,
        in_vehicle,
        c_u,
        c_t: c_o + c_u,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub stops: usize,
    pub f: f64,
    pub cost: CostBreakdown,
}

/// Frequencies 0.5, 0.6, ..., 6.0 per hour.
pub fn default_frequency_grid() -> Vec<f64> {
    (5..=60).map(|k| k as f64 / 10.0).collect()
}

pub const DEFAULT_STOP_RANGE: std::ops::RangeInclusive<usize> = 2..=120;

pub fn cost_surface(p: &FixedCostParams, stops: std::ops::RangeInclusive<usize>, f_grid: &[f64]) -> Vec<SurfacePoint> {
    stops
        .flat_map(|s| f_grid.iter().map(move |&f| SurfacePoint { stops: s, f, cost: total_cost(s, f, p) }))
        .collect()
}

/// Exhaustive minimum over the grid; ties go to fewer stops, then lower
/// frequency. `None` for an empty grid.
pub fn optimize_design(p: &FixedCostParams, stops: std::ops::RangeInclusive<usize>, f_grid: &[f64]) -> Option<SurfacePoint> {
    let mut grid = f_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut best: Option<SurfacePoint> = None;
    for s in stops {
        for &f in &grid {
            let cost = total_cost(s, f, p);
            if best.map_or(true, |b| cost.c_t < b.cost.c_t) {
                best = Some(SurfacePoint { stops: s, f, cost });
            }
        }
    }
    best
}

/// Simulation design for an optimum: cycle time from the cost model and
/// enough vehicles to run the frequency over a round trip.
pub fn optimized_design(opt: &SurfacePoint, template: &FixedDesign) -> FixedDesign {
    let t_c = opt.cost.t_c * 3600.0;
    let round_trip_h = 2.0 * opt.cost.t_c;
    FixedDesign {
        stops: opt.stops,
        f: opt.f,
        fleet: ((round_trip_h * opt.f) - 1e-9).ceil().max(1.0) as usize,
        capacity: template.capacity,
        t_d: template.t_d,
        t_c,
        stop_x: None,
    }
}
