//! Planar geometry of the rectangular service region.
//!
//! Coordinates are kilometres. `x` runs along the route axis (`0..=L`) and `y`
//! across the region (`0..=W`). The line service runs along `y = W / 2`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:.4}, {:.4})", self.x, self.y)
    }
}

/// Distance metric used for both walking and vehicle movement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// L1 distance; vehicles follow an x-then-y staircase between stops.
    #[default]
    Rectilinear,
    /// Straight-line distance and motion.
    Euclidean,
}

impl Metric {
    pub fn distance(self, p: Point, q: Point) -> f64 {
        match self {
            Metric::Rectilinear => rect_distance(p, q),
            Metric::Euclidean => ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt(),
        }
    }

    /// Position after travelling `progress` km along the path from `from` to `to`.
    pub fn point_along(self, from: Point, to: Point, progress: f64) -> Point {
        let total = self.distance(from, to);
        if progress <= 0.0 || total <= 0.0 {
            return from;
        }
        if progress >= total {
            return to;
        }
        match self {
            Metric::Rectilinear => {
                let dx = to.x - from.x;
                if progress <= dx.abs() {
                    Point::new(from.x + dx.signum() * progress, from.y)
                } else {
                    let rest = progress - dx.abs();
                    Point::new(to.x, from.y + (to.y - from.y).signum() * rest)
                }
            }
            Metric::Euclidean => {
                let r = progress / total;
                Point::new(from.x + (to.x - from.x) * r, from.y + (to.y - from.y) * r)
            }
        }
    }

    /// Closest point to `p` on the leg `from -> to`, restricted to the part of
    /// the path that runs along the route axis (the horizontal run of the
    /// staircase, or the whole segment for straight legs).
    pub fn foot_on_leg(self, from: Point, to: Point, p: Point) -> Point {
        match self {
            Metric::Rectilinear => {
                let (lo, hi) = if from.x <= to.x { (from.x, to.x) } else { (to.x, from.x) };
                Point::new(p.x.clamp(lo, hi), from.y)
            }
            Metric::Euclidean => {
                let (dx, dy) = (to.x - from.x, to.y - from.y);
                let len2 = dx * dx + dy * dy;
                if len2 <= 0.0 {
                    return from;
                }
                let t = (((p.x - from.x) * dx + (p.y - from.y) * dy) / len2).clamp(0.0, 1.0);
                Point::new(from.x + dx * t, from.y + dy * t)
            }
        }
    }
}

/// Rectilinear (L1) distance in km.
pub fn rect_distance(p: Point, q: Point) -> f64 {
    (p.x - q.x).abs() + (p.y - q.y).abs()
}

/// Walking duration in seconds at `v_w` km/h over the rectilinear distance.
pub fn walk_time(p: Point, q: Point, v_w: f64) -> f64 {
    rect_distance(p, q) / v_w * 3600.0
}

/// Axis-aligned service region `[0, L] x [0, W]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub length: f64,
    pub width: f64,
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        const EPS: f64 = 1e-9;
        p.x >= -EPS && p.x <= self.length + EPS && p.y >= -EPS && p.y <= self.width + EPS
    }

    pub fn centerline_y(&self) -> f64 {
        self.width / 2.0
    }

    /// `count` points evenly spaced along the centre line, terminals included.
    /// A single point sits at the middle of the line.
    pub fn evenly_spaced(&self, count: usize) -> Vec<Point> {
        let y = self.centerline_y();
        match count {
            0 => Vec::new(),
            1 => vec![Point::new(self.length / 2.0, y)],
            n => (0..n)
                .map(|i| Point::new(i as f64 * self.length / (n - 1) as f64, y))
                .collect(),
        }
    }
}
