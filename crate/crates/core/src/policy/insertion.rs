//! Insertion of a pickup/drop-off pair into a vehicle's remaining stops.
//!
//! The flexible-route and on-demand policies both work on a [`Snapshot`] of
//! one vehicle: where it is, the stops it still has to visit and the
//! passengers tied to those stops. A candidate is a pickup placement and a
//! drop-off placement; the evaluator rebuilds the tick schedule from the
//! vehicle's live state and checks every constraint along the way.
//!
//! Places are numbered by the stop they follow: place `i` sits between
//! remaining stops `i` and `i + 1`. The first remaining stop is committed
//! (the vehicle is dwelling there or driving to it), so nothing goes before
//! it. With `n` remaining stops a door-to-door pair can use any `i <= j` in
//! `0..n`, which gives `n (n + 1) / 2` candidates; an empty plan has exactly
//! one.

use crate::engine::{Direction, SimContext, Tick};
use crate::geometry::Point;

/// Candidate routes produced by inserting one origin/destination pair into
/// a plan with `n` remaining stops.
pub fn candidate_count(n: usize) -> usize {
    if n == 0 {
        1
    } else {
        n * (n + 1) / 2
    }
}

/// Door-to-door `(pickup place, drop-off place)` pairs for `n` remaining stops.
pub fn insertion_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    let m = n.max(1);
    (0..m).flat_map(move |i| (i..m).map(move |j| (i, j)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// Empty plan; the vehicle can leave right away.
    Idle,
    /// Driving to the first remaining stop, reached at this tick.
    Moving { arrive: Tick },
    /// Dwelling at the first remaining stop since this tick.
    Dwelling { arrived: Tick },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapStop {
    pub loc: Point,
    pub timetable: Option<Tick>,
    pub checkpoint: bool,
    /// Indices into [`Snapshot::pax`].
    pub pickups: Vec<usize>,
    pub dropoffs: Vec<usize>,
}

impl SnapStop {
    pub fn at(loc: Point) -> Self {
        Self {
            loc,
            timetable: None,
            checkpoint: false,
            pickups: Vec::new(),
            dropoffs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapPax {
    pub request: Tick,
    /// Walking ticks to the pickup point.
    pub access: Tick,
    /// Tick from which the passenger is at the pickup point.
    pub avail: Tick,
    /// Boarding tick for passengers already on the vehicle.
    pub boarded: Option<Tick>,
    pub max_wait: Option<Tick>,
    pub max_ride: Option<Tick>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub position: Point,
    pub start: Start,
    pub now: Tick,
    pub onboard: usize,
    pub capacity: usize,
    pub direction: Option<Direction>,
    pub backtrack_limit: Option<f64>,
    /// Backtracking in the current section up to the first remaining stop.
    pub backtrack_used: f64,
    /// Nothing may follow the last stop (line trips end at a terminal).
    pub closed: bool,
    pub stops: Vec<SnapStop>,
    pub pax: Vec<SnapPax>,
}

/// Where a new passenger can be met.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum At {
    /// A new stop at any place (the passenger's own door).
    AnyPlace,
    /// A new stop on the leg following remaining stop `i`.
    Place(usize),
    /// An existing remaining stop.
    Stop(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Access {
    pub loc: Point,
    /// Walking ticks between the passenger's door and `loc`.
    pub walk: Tick,
    pub at: At,
}

impl Access {
    pub fn door(loc: Point) -> Self {
        Self { loc, walk: 0, at: At::AnyPlace }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    New(usize),
    Merge(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewRequest {
    pub request: Tick,
    pub max_wait: Option<Tick>,
    pub max_ride: Option<Tick>,
    /// Pickup options; the first should be the door when door pickups are allowed.
    pub pickups: Vec<Access>,
    pub dropoffs: Vec<Access>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Growth of the vehicle's plan duration.
    VehicleTime,
    /// Weighted passenger time over everyone on the plan, walking included
    /// for the new passenger.
    PassengerTime { gamma_w: f64, gamma_v: f64, gamma_a: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    /// Objective increment, weighted seconds.
    pub cost: f64,
    /// Positions of the pickup and drop-off in the new remaining sequence.
    pub k1: usize,
    pub k2: usize,
    pub pickup: usize,
    pub dropoff: usize,
    pub pick_at: Placement,
    pub drop_at: Placement,
    pub board: Tick,
    pub alight: Tick,
    /// Growth of the plan's end tick.
    pub increment: Tick,
    /// Arrival tick at each stop of the new sequence.
    pub arrivals: Vec<Tick>,
}

impl Choice {
    /// Strictly preferred over `other`: lower cost, then lower `(k1, k2)`,
    /// then earlier meeting options.
    pub fn better_than(&self, other: &Choice) -> bool {
        match cost_order(self.cost, other.cost) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => {
                (self.k1, self.k2, self.pickup, self.dropoff) < (other.k1, other.k2, other.pickup, other.dropoff)
            }
        }
    }
}

/// Costs within a relative 1e-9 are treated as ties.
pub fn cost_order(a: f64, b: f64) -> std::cmp::Ordering {
    let tol = 1e-9 * a.abs().max(b.abs()).max(1.0);
    if a < b - tol {
        std::cmp::Ordering::Less
    } else if a > b + tol {
        std::cmp::Ordering::Greater
    } else {
        std::cmp::Ordering::Equal
    }
}

/// Door-to-door candidates visited, and how many the closed form predicts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CandidateCounter {
    pub calls: u64,
    pub enumerated: u64,
    pub expected: u64,
}

impl CandidateCounter {
    pub fn consistent(&self) -> bool {
        self.enumerated == self.expected
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Item {
    Old(usize),
    Pick,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Checks {
    Off,
    /// Everything except capacity and the new passenger's ride.
    PickupOnly,
    Full,
}

struct Eval {
    board: Tick,
    alight: Tick,
    end: Tick,
    total: f64,
}

/// Reference values from the unchanged plan. Existing passengers are held to
/// their limits or to what the current plan already gives them, whichever
/// is looser, so an insertion can never be blamed for an earlier breach.
struct Baseline {
    end: Tick,
    total: f64,
    wait_cap: Vec<Option<Tick>>,
    ride_cap: Vec<Option<Tick>>,
    backtrack_cap: Vec<f64>,
    late_cap: Vec<Tick>,
}

pub struct Planner<'a> {
    ctx: &'a SimContext,
    snap: &'a Snapshot,
    objective: Objective,
    base: Baseline,
    items: Vec<Item>,
    board: Vec<Tick>,
    alight: Vec<Tick>,
    arrivals: Vec<Tick>,
    sections: Vec<f64>,
    lateness: Vec<Tick>,
}

impl<'a> Planner<'a> {
    pub fn new(ctx: &'a SimContext, snap: &'a Snapshot, objective: Objective) -> Self {
        let mut p = Self {
            ctx,
            snap,
            objective,
            base: Baseline {
                end: 0,
                total: 0.0,
                wait_cap: Vec::new(),
                ride_cap: Vec::new(),
                backtrack_cap: Vec::new(),
                late_cap: Vec::new(),
            },
            items: Vec::new(),
            board: vec![0; snap.pax.len()],
            alight: vec![0; snap.pax.len()],
            arrivals: Vec::new(),
            sections: Vec::new(),
            lateness: vec![0; snap.stops.len()],
        };
        let dummy = NewRequest {
            request: 0,
            max_wait: None,
            max_ride: None,
            pickups: Vec::new(),
            dropoffs: Vec::new(),
        };
        let e = p.schedule(&dummy, None, None, Checks::Off).expect("unchecked schedule always completes");
        p.base.end = e.end;
        p.base.total = e.total;
        p.base.wait_cap = snap
            .pax
            .iter()
            .enumerate()
            .map(|(i, x)| match (x.boarded, x.max_wait) {
                (None, Some(m)) => Some(m.max(p.board[i] - x.request - x.access)),
                _ => None,
            })
            .collect();
        p.base.ride_cap = snap
            .pax
            .iter()
            .enumerate()
            .map(|(i, x)| x.max_ride.map(|m| m.max(p.alight[i] - x.boarded.unwrap_or(p.board[i]))))
            .collect();
        let limit = snap.backtrack_limit.unwrap_or(f64::INFINITY);
        p.base.backtrack_cap = p.sections.iter().map(|&b| b.max(limit)).collect();
        p.base.late_cap = p.lateness.clone();
        p
    }

    /// End tick of the unchanged plan.
    pub fn baseline_end(&self) -> Tick {
        self.base.end
    }

    fn build(&mut self, pick: Option<Placement>, drop: Option<Placement>) {
        self.items.clear();
        let n = self.snap.stops.len();
        if n == 0 {
            if pick.is_some() {
                self.items.push(Item::Pick);
            }
            if drop.is_some() {
                self.items.push(Item::Drop);
            }
            return;
        }
        for k in 0..n {
            self.items.push(Item::Old(k));
            if pick == Some(Placement::New(k)) {
                self.items.push(Item::Pick);
            }
            if drop == Some(Placement::New(k)) {
                self.items.push(Item::Drop);
            }
        }
    }

    /// Walks the candidate sequence from the vehicle's live state.
    fn schedule(
        &mut self,
        req: &NewRequest,
        pick: Option<(Placement, Access)>,
        drop: Option<(Placement, Access)>,
        checks: Checks,
    ) -> Option<Eval> {
        let ctx = self.ctx;
        let snap = self.snap;
        let n = snap.stops.len();
        if checks != Checks::Off && snap.closed && n > 0 {
            let last = Some(Placement::New(n - 1));
            if pick.map(|p| p.0) == last || drop.map(|d| d.0) == last {
                return None;
            }
        }
        self.build(pick.map(|p| p.0), drop.map(|d| d.0));
        self.arrivals.clear();
        self.sections.clear();
        let cand_avail = pick.map(|(_, a)| snap.now + a.walk).unwrap_or(0);
        let mut cand_board = 0;
        let mut cand_alight = 0;
        let mut load = snap.onboard as i64;
        let mut backtrack = snap.backtrack_used;
        let mut prev: Option<(Point, Tick)> = None;
        let mut end = snap.now;
        for pos in 0..self.items.len() {
            let item = self.items[pos];
            let loc = match item {
                Item::Old(k) => snap.stops[k].loc,
                Item::Pick => pick.expect("pickup item").1.loc,
                Item::Drop => drop.expect("drop-off item").1.loc,
            };
            let arrival = match prev {
                Some((from, dep)) => {
                    if let Some(dir) = snap.direction {
                        backtrack += dir.backtrack(from, loc);
                    }
                    dep + ctx.travel_ticks(from, loc)
                }
                None => match snap.start {
                    Start::Moving { arrive } => arrive,
                    Start::Dwelling { arrived } => arrived,
                    Start::Idle => {
                        if let Some(dir) = snap.direction {
                            backtrack += dir.backtrack(snap.position, loc);
                        }
                        snap.now + ctx.travel_ticks(snap.position, loc)
                    }
                },
            };
            self.arrivals.push(arrival);
            let old = match item {
                Item::Old(k) => Some(&snap.stops[k]),
                _ => None,
            };
            if old.is_some_and(|s| s.checkpoint) {
                let section = self.sections.len();
                if checks != Checks::Off && backtrack > self.base.backtrack_cap.get(section).copied().unwrap_or(f64::INFINITY) + 1e-9 {
                    return None;
                }
                self.sections.push(backtrack);
                backtrack = 0.0;
            }
            let mut hold: Tick = 0;
            if let Some(stop) = old {
                for &p in &stop.dropoffs {
                    self.alight[p] = arrival;
                    load -= 1;
                }
                for &p in &stop.pickups {
                    let x = &snap.pax[p];
                    self.board[p] = arrival.max(x.avail);
                    hold = hold.max(x.avail + 1);
                    load += 1;
                }
            }
            let merged = |pl: Option<(Placement, Access)>| match (pl, item) {
                (Some((Placement::Merge(m), _)), Item::Old(k)) => m == k,
                _ => false,
            };
            if item == Item::Drop || merged(drop) {
                cand_alight = arrival;
                load -= 1;
            }
            if item == Item::Pick || merged(pick) {
                cand_board = arrival.max(cand_avail);
                hold = hold.max(cand_avail + 1);
                load += 1;
            }
            if checks == Checks::Full && load > snap.capacity as i64 {
                return None;
            }
            let mut dep = (arrival + ctx.dwell).max(hold);
            if pos == 0 && matches!(snap.start, Start::Dwelling { .. }) {
                dep = dep.max(snap.now + 1);
            }
            if let (Some(tt), Item::Old(k)) = (old.and_then(|s| s.timetable), item) {
                let late = (dep - tt).max(0);
                if checks == Checks::Off {
                    self.lateness[k] = late;
                } else if late > self.base.late_cap[k] {
                    return None;
                }
                dep = dep.max(tt);
            }
            prev = Some((loc, dep));
            end = dep;
        }
        if checks != Checks::Off {
            let section = self.sections.len();
            if backtrack > self.base.backtrack_cap.get(section).copied().unwrap_or(snap.backtrack_limit.unwrap_or(f64::INFINITY)) + 1e-9
            {
                return None;
            }
        } else {
            self.sections.push(backtrack);
        }

        let dt = ctx.dt;
        let mut total = 0.0;
        for (i, x) in snap.pax.iter().enumerate() {
            let ride = self.alight[i] - x.boarded.unwrap_or(self.board[i]);
            if x.boarded.is_none() {
                let wait = self.board[i] - x.request - x.access;
                if checks != Checks::Off && self.base.wait_cap[i].is_some_and(|c| wait > c) {
                    return None;
                }
                if let Objective::PassengerTime { gamma_w, .. } = self.objective {
                    total += gamma_w * wait as f64 * dt;
                }
            }
            if checks != Checks::Off && self.base.ride_cap[i].is_some_and(|c| ride > c) {
                return None;
            }
            if let Objective::PassengerTime { gamma_v, .. } = self.objective {
                total += gamma_v * ride as f64 * dt;
            }
        }
        if let Some((_, a)) = pick {
            let wait = cand_board - req.request - a.walk;
            if checks != Checks::Off && req.max_wait.is_some_and(|m| wait > m) {
                return None;
            }
            if let Objective::PassengerTime { gamma_w, gamma_a, .. } = self.objective {
                total += (gamma_w * wait as f64 + gamma_a * a.walk as f64) * dt;
            }
        }
        if let (Some((_, _)), Some((_, d))) = (pick, drop) {
            let ride = cand_alight - cand_board;
            if checks == Checks::Full && req.max_ride.is_some_and(|m| ride > m) {
                return None;
            }
            if let Objective::PassengerTime { gamma_v, gamma_a, .. } = self.objective {
                total += (gamma_v * ride as f64 + gamma_a * d.walk as f64) * dt;
            }
        }
        Some(Eval {
            board: cand_board,
            alight: cand_alight,
            end,
            total,
        })
    }

    fn pickup_placements(&self, at: At) -> Vec<Placement> {
        let n = self.snap.stops.len();
        match at {
            At::AnyPlace => (0..n.max(1)).map(Placement::New).collect(),
            At::Place(i) if i < n => vec![Placement::New(i)],
            At::Stop(k) if k < n => vec![Placement::Merge(k)],
            _ => Vec::new(),
        }
    }

    /// Drop-off placements that keep the drop-off after `pick`.
    fn drop_placements(&self, at: At, pick: Placement) -> Vec<Placement> {
        let n = self.snap.stops.len();
        // First place / first existing stop index the drop-off may use.
        let (first_place, first_stop) = match pick {
            Placement::New(i) => (i, i + 1),
            Placement::Merge(k) => (k, k + 1),
        };
        match at {
            At::AnyPlace => (first_place..n.max(1)).map(Placement::New).collect(),
            At::Place(j) if j < n && j >= first_place => vec![Placement::New(j)],
            At::Stop(m) if m < n && m >= first_stop => vec![Placement::Merge(m)],
            _ => Vec::new(),
        }
    }

    fn positions(&self, pick: Placement, drop: Placement) -> (usize, usize) {
        if self.snap.stops.is_empty() {
            return (0, 1);
        }
        let k1 = match pick {
            Placement::New(i) => i + 1,
            Placement::Merge(k) => k,
        };
        let shift = |after: usize| matches!(pick, Placement::New(i) if i < after) as usize;
        let k2 = match drop {
            Placement::New(j) => j + 1 + shift(j + 1),
            Placement::Merge(m) => m + shift(m),
        };
        (k1, k2)
    }

    /// Cheapest feasible insertion of `req` into this vehicle, if any.
    pub fn best(&mut self, req: &NewRequest, counter: &mut CandidateCounter) -> Option<Choice> {
        let n = self.snap.stops.len();
        counter.calls += 1;
        counter.expected += candidate_count(n) as u64;
        let mut best: Option<Choice> = None;
        for (a, pa) in req.pickups.iter().enumerate() {
            for pick in self.pickup_placements(pa.at) {
                let door_pairs = |me: &Self| -> u64 {
                    req.dropoffs
                        .iter()
                        .filter(|d| d.at == At::AnyPlace)
                        .map(|d| me.drop_placements(d.at, pick).len() as u64)
                        .sum()
                };
                if pa.at == At::AnyPlace {
                    counter.enumerated += door_pairs(self);
                }
                // Adding the drop-off only delays later stops further, so a
                // pickup that already breaks a constraint rules out every pair.
                if self.schedule(req, Some((pick, *pa)), None, Checks::PickupOnly).is_none() {
                    continue;
                }
                for (b, da) in req.dropoffs.iter().enumerate() {
                    for drop in self.drop_placements(da.at, pick) {
                        let Some(e) = self.schedule(req, Some((pick, *pa)), Some((drop, *da)), Checks::Full) else {
                            continue;
                        };
                        let (k1, k2) = self.positions(pick, drop);
                        let cost = match self.objective {
                            Objective::VehicleTime => (e.end - self.base.end) as f64 * self.ctx.dt,
                            Objective::PassengerTime { .. } => e.total - self.base.total,
                        };
                        let c = Choice {
                            cost,
                            k1,
                            k2,
                            pickup: a,
                            dropoff: b,
                            pick_at: pick,
                            drop_at: drop,
                            board: e.board,
                            alight: e.alight,
                            increment: e.end - self.base.end,
                            arrivals: Vec::new(),
                        };
                        if best.as_ref().map_or(true, |b| c.better_than(b)) {
                            best = Some(c);
                        }
                    }
                }
            }
        }
        let mut best = best?;
        let (pa, da) = (req.pickups[best.pickup], req.dropoffs[best.dropoff]);
        self.schedule(req, Some((best.pick_at, pa)), Some((best.drop_at, da)), Checks::Full)
            .expect("chosen insertion stays feasible");
        best.arrivals = self.arrivals.clone();
        Some(best)
    }
}
