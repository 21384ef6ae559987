use serde::{Deserialize, Serialize};

use crate::geometry::{Metric, Point};
use crate::ids::{PassengerId, VehicleId};

use super::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Increasing `x`.
    Forward,
    Backward,
}

impl Direction {
    pub fn of_trip(from_x: f64, to_x: f64) -> Self {
        if to_x >= from_x {
            Direction::Forward
        } else {
            Direction::Backward
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }

    /// Distance moved against this direction along `x` when going from `a` to `b`.
    pub fn backtrack(self, a: Point, b: Point) -> f64 {
        let dx = b.x - a.x;
        match self {
            Direction::Forward => (-dx).max(0.0),
            Direction::Backward => dx.max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopKind {
    Checkpoint,
    FixedStop,
    VirtualStop,
    Depot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteStop {
    pub location: Point,
    pub kind: StopKind,
    pub pickups: Vec<PassengerId>,
    pub dropoffs: Vec<PassengerId>,
    pub planned_arrival: Option<Tick>,
    /// Earliest departure set by the timetable (terminals, checkpoints).
    pub timetable: Option<Tick>,
    /// Earliest departure needed to let an assigned walker board.
    pub hold_until: Option<Tick>,
    /// Index into the fixed-route stop layout.
    pub fixed_index: Option<usize>,
    /// Index of the checkpoint along the line (0 = terminal at `x = 0`).
    pub checkpoint: Option<usize>,
}

impl RouteStop {
    pub fn new(location: Point, kind: StopKind) -> Self {
        Self {
            location,
            kind,
            pickups: Vec::new(),
            dropoffs: Vec::new(),
            planned_arrival: None,
            timetable: None,
            hold_until: None,
            fixed_index: None,
            checkpoint: None,
        }
    }

    pub fn virtual_stop(location: Point) -> Self {
        Self::new(location, StopKind::VirtualStop)
    }

    pub fn is_checkpoint(&self) -> bool {
        self.kind == StopKind::Checkpoint
    }

    /// Departure tick given the arrival tick and the dwell length.
    pub fn departure(&self, arrived: Tick, dwell: Tick) -> Tick {
        let mut dep = arrived + dwell;
        if let Some(t) = self.timetable {
            dep = dep.max(t);
        }
        if let Some(h) = self.hold_until {
            dep = dep.max(h);
        }
        dep
    }
}

/// Ordered stops still to be served. `stops[cursor]` is the stop the vehicle
/// is dwelling at or heading to; earlier entries are history of the current
/// trip.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoutePlan {
    pub stops: Vec<RouteStop>,
    pub cursor: usize,
}

impl RoutePlan {
    pub fn new(stops: Vec<RouteStop>) -> Self {
        Self { stops, cursor: 0 }
    }

    pub fn remaining(&self) -> &[RouteStop] {
        &self.stops[self.cursor.min(self.stops.len())..]
    }

    pub fn remaining_mut(&mut self) -> &mut [RouteStop] {
        let c = self.cursor.min(self.stops.len());
        &mut self.stops[c..]
    }

    pub fn head(&self) -> Option<&RouteStop> {
        self.stops.get(self.cursor)
    }

    pub fn head_mut(&mut self) -> Option<&mut RouteStop> {
        self.stops.get_mut(self.cursor)
    }

    pub fn is_last(&self) -> bool {
        self.cursor + 1 == self.stops.len()
    }

    /// Drops the executed prefix so that the head sits at index 0.
    pub fn compact(&mut self) {
        if self.cursor > 0 {
            let c = self.cursor.min(self.stops.len());
            self.stops.drain(..c);
            self.cursor = 0;
        }
    }
}

/// Movement between two stops along the metric's path.
#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub from: Point,
    pub to: Point,
    pub length: f64,
    pub ticks: Tick,
    pub steps_done: Tick,
}

impl Leg {
    pub fn remaining_ticks(&self) -> Tick {
        self.ticks - self.steps_done
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    Idle,
    Moving(Leg),
    Dwelling { arrived: Tick },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KinematicState {
    Idle,
    Moving,
    Dwelling,
}

impl std::fmt::Display for KinematicState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KinematicState::Idle => "idle",
            KinematicState::Moving => "moving",
            KinematicState::Dwelling => "dwelling",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehicleId,
    pub capacity: usize,
    pub position: Point,
    /// Trip direction for line services; `None` for on-demand vehicles.
    pub direction: Option<Direction>,
    pub motion: Motion,
    pub onboard: Vec<PassengerId>,
    pub plan: RoutePlan,
    pub dispatch_tick: Tick,
    /// Total distance driven, km.
    pub odometer: f64,
    /// Distance driven inside the demand window, km.
    pub window_distance: f64,
    /// Sum of lengths of completed legs, km.
    pub completed_legs: f64,
    /// Distance moved against the trip direction since the last checkpoint, km.
    pub section_backtrack: f64,
    pub max_section_backtrack: f64,
}

impl Vehicle {
    pub fn new(id: u32, capacity: usize, position: Point) -> Self {
        Self {
            id: VehicleId(id),
            capacity,
            position,
            direction: None,
            motion: Motion::Idle,
            onboard: Vec::new(),
            plan: RoutePlan::default(),
            dispatch_tick: 0,
            odometer: 0.0,
            window_distance: 0.0,
            completed_legs: 0.0,
            section_backtrack: 0.0,
            max_section_backtrack: 0.0,
        }
    }

    pub fn kinematic_state(&self) -> KinematicState {
        match self.motion {
            Motion::Idle => KinematicState::Idle,
            Motion::Moving(_) => KinematicState::Moving,
            Motion::Dwelling { .. } => KinematicState::Dwelling,
        }
    }

    /// Ticks left at the current stop, counted from `now`.
    pub fn dwell_remaining(&self, now: Tick, dwell: Tick) -> Tick {
        match (&self.motion, self.plan.head()) {
            (Motion::Dwelling { arrived }, Some(stop)) => (stop.departure(*arrived, dwell) - now).max(0),
            _ => 0,
        }
    }

    pub fn is_dispatched(&self, now: Tick) -> bool {
        now >= self.dispatch_tick
    }

    /// Distance still to cover on the current leg, km.
    pub fn leg_remaining(&self, metric: Metric) -> f64 {
        match (&self.motion, self.plan.head()) {
            (Motion::Moving(_), Some(stop)) => metric.distance(self.position, stop.location),
            _ => 0.0,
        }
    }
}
