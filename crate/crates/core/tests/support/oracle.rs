// Exhaustive insertion search used as a reference for the planner.
//
// Every way of placing the new pickup and drop-off into the remaining stop
// sequence is written out as an explicit list of visits, then simulated
// from scratch. Shared by the core tests and the acceptance suite.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transit_sandbox::engine::{Direction, SimContext, Tick};
use transit_sandbox::geometry::Point;
use transit_sandbox::policy::insertion::{
    cost_order, Access, At, CandidateCounter, NewRequest, Objective, Planner, SnapPax, SnapStop, Snapshot, Start,
};
use transit_sandbox::scenario::{FlexDesign, OnDemandDesign, ScenarioParams, SystemDesign};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Visit {
    Old(usize),
    Pick,
    Drop,
    /// Existing stop that also serves the new passenger.
    OldPick(usize),
    OldDrop(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Found {
    pub cost: f64,
    pub k1: usize,
    pub k2: usize,
    pub pickup: usize,
    pub dropoff: usize,
    pub board: Tick,
    pub alight: Tick,
}

struct Run {
    end: Tick,
    board: Vec<Tick>,
    alight: Vec<Tick>,
    sections: Vec<f64>,
    late: Vec<Tick>,
    new_board: Tick,
    new_alight: Tick,
    loads: Vec<i64>,
}

fn old_of(v: Visit) -> Option<usize> {
    match v {
        Visit::Old(k) | Visit::OldPick(k) | Visit::OldDrop(k) => Some(k),
        _ => None,
    }
}

fn simulate(ctx: &SimContext, s: &Snapshot, seq: &[Visit], pick: Option<Access>, drop: Option<Access>) -> Run {
    let mut r = Run {
        end: s.now,
        board: vec![0; s.pax.len()],
        alight: vec![0; s.pax.len()],
        sections: Vec::new(),
        late: vec![0; s.stops.len()],
        new_board: 0,
        new_alight: 0,
        loads: Vec::new(),
    };
    let avail_new = pick.map_or(0, |a| s.now + a.walk);
    let mut load = s.onboard as i64;
    let mut bt = s.backtrack_used;
    let mut last: Option<(Point, Tick)> = None;
    for (idx, &v) in seq.iter().enumerate() {
        let loc = match v {
            Visit::Pick => pick.unwrap().loc,
            Visit::Drop => drop.unwrap().loc,
            other => s.stops[old_of(other).unwrap()].loc,
        };
        let from = last.map_or(s.position, |l| l.0);
        let arr = match (last, s.start) {
            (Some((_, dep)), _) => dep + ctx.travel_ticks(from, loc),
            (None, Start::Moving { arrive }) => arrive,
            (None, Start::Dwelling { arrived }) => arrived,
            (None, Start::Idle) => s.now + ctx.travel_ticks(from, loc),
        };
        let moved = last.is_some() || s.start == Start::Idle;
        if moved {
            if let Some(d) = s.direction {
                bt += d.backtrack(from, loc);
            }
        }
        let mut ready = arr + ctx.dwell;
        if let Some(k) = old_of(v) {
            let st = &s.stops[k];
            if st.checkpoint {
                r.sections.push(bt);
                bt = 0.0;
            }
            for &p in &st.dropoffs {
                r.alight[p] = arr;
                load -= 1;
            }
            for &p in &st.pickups {
                r.board[p] = arr.max(s.pax[p].avail);
                ready = ready.max(s.pax[p].avail + 1);
                load += 1;
            }
        }
        if matches!(v, Visit::Drop | Visit::OldDrop(_)) {
            r.new_alight = arr;
            load -= 1;
        }
        if matches!(v, Visit::Pick | Visit::OldPick(_)) {
            r.new_board = arr.max(avail_new);
            ready = ready.max(avail_new + 1);
            load += 1;
        }
        r.loads.push(load);
        if idx == 0 && matches!(s.start, Start::Dwelling { .. }) {
            ready = ready.max(s.now + 1);
        }
        let mut dep = ready;
        if let Some(k) = old_of(v) {
            if let Some(tt) = s.stops[k].timetable {
                r.late[k] = (ready - tt).max(0);
                dep = dep.max(tt);
            }
        }
        last = Some((loc, dep));
        r.end = dep;
    }
    r.sections.push(bt);
    r
}

fn weighted(ctx: &SimContext, s: &Snapshot, run: &Run, obj: Objective) -> f64 {
    let Objective::PassengerTime { gamma_w, gamma_v, .. } = obj else {
        return 0.0;
    };
    let mut t = 0.0;
    for (i, p) in s.pax.iter().enumerate() {
        match p.boarded {
            Some(b) => t += gamma_v * (run.alight[i] - b) as f64 * ctx.dt,
            None => {
                t += gamma_w * (run.board[i] - p.request - p.access) as f64 * ctx.dt;
                t += gamma_v * (run.alight[i] - run.board[i]) as f64 * ctx.dt;
            }
        }
    }
    t
}

/// Every pickup/drop-off visit sequence allowed by the two meeting options.
fn sequences(s: &Snapshot, pa: At, da: At) -> Vec<Vec<Visit>> {
    let n = s.stops.len();
    let old: Vec<Visit> = (0..n).map(Visit::Old).collect();
    let mut out = Vec::new();
    if n == 0 {
        if pa == At::AnyPlace && da == At::AnyPlace {
            out.push(vec![Visit::Pick, Visit::Drop]);
        }
        return out;
    }
    // New items go at slot g = "after old stop g - 1" for g in 1..=n.
    let pick_slots: Vec<Option<usize>> = match pa {
        At::AnyPlace => (1..=n).map(Some).collect(),
        At::Place(i) if i < n => vec![Some(i + 1)],
        At::Stop(k) if k < n => vec![None],
        _ => vec![],
    };
    for ps in pick_slots {
        let drop_slots: Vec<Option<usize>> = match da {
            At::AnyPlace => (1..=n).map(Some).collect(),
            At::Place(j) if j < n => vec![Some(j + 1)],
            At::Stop(m) if m < n => vec![None],
            _ => vec![],
        };
        for ds in drop_slots {
            let mut seq = Vec::new();
            for (g, &v) in old.iter().enumerate() {
                let k = g;
                let mut here = v;
                if ps.is_none() {
                    if let At::Stop(pk) = pa {
                        if pk == k {
                            here = Visit::OldPick(k);
                        }
                    }
                }
                if ds.is_none() {
                    if let At::Stop(dk) = da {
                        if dk == k {
                            if here != Visit::Old(k) {
                                // both ends merged into the same stop
                                here = Visit::Old(usize::MAX);
                            } else {
                                here = Visit::OldDrop(k);
                            }
                        }
                    }
                }
                seq.push(here);
                if ps == Some(g + 1) {
                    seq.push(Visit::Pick);
                }
                if ds == Some(g + 1) {
                    seq.push(Visit::Drop);
                }
            }
            if seq.contains(&Visit::Old(usize::MAX)) {
                continue;
            }
            let pi = seq.iter().position(|v| matches!(v, Visit::Pick | Visit::OldPick(_))).unwrap();
            let di = seq.iter().position(|v| matches!(v, Visit::Drop | Visit::OldDrop(_))).unwrap();
            if di > pi {
                out.push(seq);
            }
        }
    }
    out
}

/// Door-to-door sequences for a plan with `n` remaining stops.
pub fn door_sequence_count(s: &Snapshot) -> usize {
    sequences(s, At::AnyPlace, At::AnyPlace).len()
}

pub fn brute_force(ctx: &SimContext, s: &Snapshot, req: &NewRequest, obj: Objective) -> Option<Found> {
    let old: Vec<Visit> = (0..s.stops.len()).map(Visit::Old).collect();
    let base = simulate(ctx, s, &old, None, None);
    let base_cost = weighted(ctx, s, &base, obj);
    let limit = s.backtrack_limit.unwrap_or(f64::INFINITY);
    let mut all: Vec<Found> = Vec::new();
    for (a, pa) in req.pickups.iter().enumerate() {
        for (b, da) in req.dropoffs.iter().enumerate() {
            'seq: for seq in sequences(s, pa.at, da.at) {
                let n = seq.len();
                if s.closed && !s.stops.is_empty() && old_of(seq[n - 1]).is_none() {
                    continue;
                }
                let run = simulate(ctx, s, &seq, Some(*pa), Some(*da));
                if run.loads.iter().any(|&l| l > s.capacity as i64) {
                    continue;
                }
                for (i, &bt) in run.sections.iter().enumerate() {
                    let cap = base.sections.get(i).copied().unwrap_or(limit).max(limit);
                    if bt > cap + 1e-9 {
                        continue 'seq;
                    }
                }
                for k in 0..s.stops.len() {
                    if run.late[k] > base.late[k] {
                        continue 'seq;
                    }
                }
                for (i, p) in s.pax.iter().enumerate() {
                    if p.boarded.is_none() {
                        if let Some(m) = p.max_wait {
                            let cap = m.max(base.board[i] - p.request - p.access);
                            if run.board[i] - p.request - p.access > cap {
                                continue 'seq;
                            }
                        }
                    }
                    if let Some(m) = p.max_ride {
                        let from = |r: &Run| p.boarded.unwrap_or(r.board[i]);
                        let cap = m.max(base.alight[i] - from(&base));
                        if run.alight[i] - from(&run) > cap {
                            continue 'seq;
                        }
                    }
                }
                let wait = run.new_board - req.request - pa.walk;
                let ride = run.new_alight - run.new_board;
                if req.max_wait.is_some_and(|m| wait > m) || req.max_ride.is_some_and(|m| ride > m) {
                    continue;
                }
                let cost = match obj {
                    Objective::VehicleTime => (run.end - base.end) as f64 * ctx.dt,
                    Objective::PassengerTime { gamma_w, gamma_v, gamma_a } => {
                        weighted(ctx, s, &run, obj) - base_cost
                            + (gamma_w * wait as f64 + gamma_v * ride as f64 + gamma_a * (pa.walk + da.walk) as f64) * ctx.dt
                    }
                };
                let k1 = seq.iter().position(|v| matches!(v, Visit::Pick | Visit::OldPick(_))).unwrap();
                let k2 = seq.iter().position(|v| matches!(v, Visit::Drop | Visit::OldDrop(_))).unwrap();
                all.push(Found {
                    cost,
                    k1,
                    k2,
                    pickup: a,
                    dropoff: b,
                    board: run.new_board,
                    alight: run.new_alight,
                });
            }
        }
    }
    let min = all.iter().map(|f| f.cost).fold(f64::INFINITY, f64::min);
    all.into_iter()
        .filter(|f| cost_order(f.cost, min).is_eq())
        .min_by_key(|f| (f.k1, f.k2, f.pickup, f.dropoff))
}

/// A random instance: context, vehicle snapshot, request and objective.
pub struct Instance {
    pub ctx: SimContext,
    pub snap: Snapshot,
    pub req: NewRequest,
    pub objective: Objective,
    /// Flex-style instance with meeting points on the line.
    pub flex: bool,
}

fn rand_point(rng: &mut ChaCha8Rng, x0: f64, x1: f64) -> Point {
    Point::new(rng.gen_range(x0..x1), rng.gen_range(0.0..1.6))
}

pub fn random_instance(seed: u64, flex: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenario = ScenarioParams::b63(80.0, 1);
    let design = if flex {
        SystemDesign::Flex(FlexDesign::b63(10))
    } else {
        SystemDesign::OnDemand(OnDemandDesign::b63())
    };
    let ctx = SimContext::new(&scenario, &design).unwrap();
    let now: Tick = 1000;
    let n = rng.gen_range(0..=6usize);
    let position = rand_point(&mut rng, 0.0, 1.0);
    let start = if n == 0 {
        Start::Idle
    } else if rng.gen_bool(0.5) {
        Start::Moving { arrive: now + rng.gen_range(1..300) }
    } else {
        Start::Dwelling { arrived: now - rng.gen_range(0..ctx.dwell + 5) }
    };
    let mut stops: Vec<SnapStop> = Vec::new();
    let mut x = position.x;
    for k in 0..n {
        let loc = if flex {
            x += rng.gen_range(-0.2..0.8);
            Point::new(x.max(0.0), rng.gen_range(0.0..1.6))
        } else {
            rand_point(&mut rng, 0.0, 3.0)
        };
        let mut st = SnapStop::at(if k == 0 && !matches!(start, Start::Moving { .. }) { position } else { loc });
        if flex && (rng.gen_bool(0.4) || k == n - 1) {
            st.checkpoint = true;
            st.loc.y = 0.8;
        }
        stops.push(st);
    }
    let mut pax = Vec::new();
    let n_pax = if n == 0 { 0 } else { rng.gen_range(0..=4usize) };
    let mut onboard = 0;
    for _ in 0..n_pax {
        let limit_w = rng.gen_bool(0.7).then(|| rng.gen_range(200..1500));
        let limit_r = rng.gen_bool(0.6).then(|| rng.gen_range(200..2500));
        if rng.gen_bool(0.4) {
            let d = rng.gen_range(0..n);
            stops[d].dropoffs.push(pax.len());
            onboard += 1;
            pax.push(SnapPax {
                request: now - 900,
                access: 0,
                avail: now - 800,
                boarded: Some(now - rng.gen_range(10..600)),
                max_wait: limit_w,
                max_ride: limit_r,
            });
        } else if n >= 2 {
            let p = rng.gen_range(0..n - 1);
            let d = rng.gen_range(p + 1..n);
            stops[p].pickups.push(pax.len());
            stops[d].dropoffs.push(pax.len());
            let access = rng.gen_range(0..300);
            let avail = now + rng.gen_range(-100..250);
            pax.push(SnapPax {
                request: avail - access - rng.gen_range(0..200),
                access,
                avail,
                boarded: None,
                max_wait: limit_w,
                max_ride: limit_r,
            });
        }
    }
    // Keep the existing plan within capacity, as committed plans always are.
    let mut load = onboard as i64;
    let mut peak = load;
    for st in &stops {
        load -= st.dropoffs.len() as i64;
        load += st.pickups.len() as i64;
        peak = peak.max(load);
    }
    let capacity = rng.gen_range(1..=4usize).max(peak as usize);
    let mut snap = Snapshot {
        position,
        start,
        now,
        onboard,
        capacity,
        direction: flex.then_some(Direction::Forward),
        backtrack_limit: flex.then_some(0.4),
        backtrack_used: if flex { rng.gen_range(0.0..0.2) } else { 0.0 },
        closed: flex && n > 0,
        stops,
        pax,
    };
    // Timetables sit at or after the unchanged schedule's arrival, with some slack.
    if flex {
        let mut shift = 0;
        let seq_arrivals = arrivals(&ctx, &snap);
        for k in 0..n {
            if snap.stops[k].checkpoint {
                shift += rng.gen_range(0..400);
                snap.stops[k].timetable = Some(seq_arrivals[k] + ctx.dwell + shift);
            }
        }
    }
    let o = rand_point(&mut rng, 0.0, 3.0);
    let mut d = rand_point(&mut rng, 0.0, 3.0);
    if flex && d.x < o.x && rng.gen_bool(0.8) {
        d.x = o.x + rng.gen_range(0.0..1.0);
    }
    let mut pickups = vec![Access::door(o)];
    let mut dropoffs = vec![Access::door(d)];
    if flex && n > 0 {
        for _ in 0..rng.gen_range(0..3) {
            pickups.push(meeting(&mut rng, &ctx, &snap, o));
        }
        for _ in 0..rng.gen_range(0..3) {
            dropoffs.push(meeting(&mut rng, &ctx, &snap, d));
        }
    }
    let req = NewRequest {
        request: now - rng.gen_range(0..200),
        max_wait: rng.gen_bool(0.8).then(|| rng.gen_range(300..1800)),
        max_ride: rng.gen_bool(0.6).then(|| rng.gen_range(300..3000)),
        pickups,
        dropoffs,
    };
    let objective = if rng.gen_bool(0.5) {
        Objective::VehicleTime
    } else {
        Objective::PassengerTime {
            gamma_w: 1.59,
            gamma_v: 1.0,
            gamma_a: 1.79,
        }
    };
    Instance { ctx, snap, req, objective, flex }
}

fn arrivals(ctx: &SimContext, s: &Snapshot) -> Vec<Tick> {
    let mut out = Vec::new();
    let mut last: Option<(Point, Tick)> = None;
    for st in &s.stops {
        let arr = match (last, s.start) {
            (Some((p, dep)), _) => dep + ctx.travel_ticks(p, st.loc),
            (None, Start::Moving { arrive }) => arrive,
            (None, Start::Dwelling { arrived }) => arrived,
            (None, Start::Idle) => s.now + ctx.travel_ticks(s.position, st.loc),
        };
        out.push(arr);
        last = Some((st.loc, arr + ctx.dwell));
    }
    out
}

fn meeting(rng: &mut ChaCha8Rng, ctx: &SimContext, s: &Snapshot, door: Point) -> Access {
    let n = s.stops.len();
    let k = rng.gen_range(0..n);
    if rng.gen_bool(0.5) {
        let loc = s.stops[k].loc;
        Access {
            loc,
            walk: ctx.walk_ticks(door, loc),
            at: At::Stop(k),
        }
    } else {
        let a = s.stops[k].loc;
        let loc = Point::new(a.x + rng.gen_range(0.0..0.3), a.y);
        Access {
            loc,
            walk: ctx.walk_ticks(door, loc),
            at: At::Place(k),
        }
    }
}

/// Planner result for an instance, with the candidate counter it filled.
pub fn planner_choice(inst: &Instance) -> (Option<Found>, CandidateCounter) {
    let mut counter = CandidateCounter::default();
    let c = Planner::new(&inst.ctx, &inst.snap, inst.objective).best(&inst.req, &mut counter);
    let found = c.map(|c| Found {
        cost: c.cost,
        k1: c.k1,
        k2: c.k2,
        pickup: c.pickup,
        dropoff: c.dropoff,
        board: c.board,
        alight: c.alight,
    });
    (found, counter)
}

/// Same decision: both infeasible, or the same option pair and positions at
/// the same cost and times.
pub fn agree(a: &Option<Found>, b: &Option<Found>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => {
            cost_order(x.cost, y.cost).is_eq()
                && (x.k1, x.k2, x.pickup, x.dropoff, x.board, x.alight) == (y.k1, y.k2, y.pickup, y.dropoff, y.board, y.alight)
        }
        _ => false,
    }
}
