//! Browser bindings. Each exported function takes plain numbers or JSON text
//! and returns JSON text, so the page needs no generated types.

use serde_json::{json, Value};
use transit_sandbox::demand::{generate_passengers, PassengerState};
use transit_sandbox::engine::{Engine, Tick};
use transit_sandbox::policy::cost::{
    cost_surface, default_frequency_grid, optimize_design, CostAssumptions, FixedCostParams, DEFAULT_STOP_RANGE,
};
use transit_sandbox::scenario::{FixedDesign, FlexDesign, OnDemandDesign, ScenarioParams, SystemDesign};
use wasm_bindgen::prelude::*;

fn scenario(lambda: f64, seed: u32, hours: f64) -> Result<ScenarioParams, String> {
    let s = ScenarioParams {
        sim_length: hours * 3600.0,
        ..ScenarioParams::b63(lambda, seed as u64)
    };
    s.validate().map_err(|e| e.to_string())?;
    Ok(s)
}

/// The case-study designs, keyed by a short label.
pub fn presets_json() -> String {
    let presets = [
        ("fixed", SystemDesign::Fixed(FixedDesign::b63_existing())),
        ("flex_sc20", SystemDesign::Flex(FlexDesign::b63(20))),
        ("flex_sc10", SystemDesign::Flex(FlexDesign::b63(10))),
        ("on_demand", SystemDesign::OnDemand(OnDemandDesign::b63())),
    ];
    let map: serde_json::Map<String, Value> = presets
        .into_iter()
        .map(|(k, d)| (k.to_string(), serde_json::to_value(d).expect("designs serialize")))
        .collect();
    Value::Object(map).to_string()
}

/// Runs one design and returns the report, vehicle positions every
/// `frame_s` seconds of the demand window, and every passenger's outcome.
pub fn simulate_json(design_json: &str, lambda: f64, seed: u32, hours: f64, frame_s: f64) -> Result<String, String> {
    let design: SystemDesign = serde_json::from_str(design_json).map_err(|e| e.to_string())?;
    let s = scenario(lambda, seed, hours)?;
    design.validate(&s).map_err(|e| e.to_string())?;
    let demand = generate_passengers(&s, 0.0, s.sim_length).map_err(|e| e.to_string())?;
    let every = (frame_s / s.time_step).round().max(1.0) as Tick;
    let out = Engine::new(&s, &design, &demand)
        .map_err(|e| e.to_string())?
        .with_trace(every)
        .finish()
        .map_err(|e| e.to_string())?;

    let warmup = out.ctx.warmup;
    let mut frames: Vec<Value> = Vec::new();
    let mut current: Option<(Tick, Vec<Value>)> = None;
    for row in out.trace.iter().filter(|r| r.tick >= warmup) {
        if current.as_ref().is_some_and(|(t, _)| *t != row.tick) {
            let (t, v) = current.take().unwrap();
            frames.push(json!({ "t": out.ctx.seconds(t - warmup), "vehicles": v }));
        }
        current
            .get_or_insert_with(|| (row.tick, Vec::new()))
            .1
            .push(json!([row.x, row.y, row.onboard]));
    }
    if let Some((t, v)) = current {
        frames.push(json!({ "t": out.ctx.seconds(t - warmup), "vehicles": v }));
    }

    let passengers: Vec<Value> = out
        .report
        .passengers
        .iter()
        .map(|p| {
            json!({
                "t": p.arrival_time,
                "o": [p.origin.x, p.origin.y],
                "d": [p.destination.x, p.destination.y],
                "served": p.state == PassengerState::Served,
            })
        })
        .collect();
    let region = s.region();
    Ok(json!({
        "region": { "length": region.length, "width": region.width },
        "report": out.report,
        "frames": frames,
        "passengers": passengers,
    })
    .to_string())
}

/// Fixed-route cost surface over stop count and frequency at the default
/// cost constants, plus the optimum.
pub fn cost_surface_json(lambda: f64) -> Result<String, String> {
    let s = scenario(lambda, 1, 4.0)?;
    let p = FixedCostParams::new(&CostAssumptions::default(), &s);
    let grid = default_frequency_grid();
    let points = cost_surface(&p, DEFAULT_STOP_RANGE, &grid);
    let opt = optimize_design(&p, DEFAULT_STOP_RANGE, &grid).ok_or("empty grid")?;
    let stops: Vec<usize> = DEFAULT_STOP_RANGE.collect();
    let c_t: Vec<Vec<f64>> = points.chunks(grid.len()).map(|row| row.iter().map(|q| q.cost.c_t).collect()).collect();
    Ok(json!({
        "stops": stops,
        "f": grid,
        "c_t": c_t,
        "optimum": { "S": opt.stops, "f": opt.f, "C_o": opt.cost.c_o, "C_u": opt.cost.c_u, "C_t": opt.cost.c_t },
    })
    .to_string())
}

/// Poisson demand as `[arrival_s, ox, oy, dx, dy]` rows.
pub fn demand_json(lambda: f64, seed: u32, hours: f64) -> Result<String, String> {
    let s = scenario(lambda, seed, hours)?;
    let d = generate_passengers(&s, 0.0, s.sim_length).map_err(|e| e.to_string())?;
    let rows: Vec<[f64; 5]> = d
        .iter()
        .map(|p| [p.arrival_time, p.origin.x, p.origin.y, p.destination.x, p.destination.y])
        .collect();
    Ok(json!({ "region": { "length": s.length, "width": s.width }, "passengers": rows }).to_string())
}

#[wasm_bindgen]
pub fn presets() -> String {
    presets_json()
}

#[wasm_bindgen]
pub fn simulate(design_json: &str, lambda: f64, seed: u32, hours: f64, frame_s: f64) -> Result<String, JsValue> {
    simulate_json(design_json, lambda, seed, hours, frame_s).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = costSurface)]
pub fn cost_surface_js(lambda: f64) -> Result<String, JsValue> {
    cost_surface_json(lambda).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = generateDemand)]
pub fn generate_demand(lambda: f64, seed: u32, hours: f64) -> Result<String, JsValue> {
    demand_json(lambda, seed, hours).map_err(|e| JsValue::from_str(&e))
}
