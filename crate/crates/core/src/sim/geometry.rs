use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        if !(min_x < max_x && min_y < max_y) {
            return Err(Error::InvalidSpec(format!(
                "degenerate rectangle [{min_x}, {max_x}] x [{min_y}, {max_y}]"
            )));
        }
        Ok(Rect {
            min_x,
            min_y,
            max_x,
            max_y,
        })
    }

    pub fn nearest(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.min_x, self.max_x), p.y.clamp(self.min_y, self.max_y))
    }

    /// Euclidean distance to the rectangle; 0 inside.
    pub fn distance(&self, p: Point) -> f64 {
        p.dist(self.nearest(p))
    }
}

/// Distance from `p` to the closed segment `a`-`b`, with the closest point.
pub fn point_segment(p: Point, a: Point, b: Point) -> (f64, Point) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    let q = Point::new(a.x + t * dx, a.y + t * dy);
    (p.dist(q), q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    /// Waypoint index where the heading changes.
    pub waypoint: usize,
    /// Unsigned heading change in degrees.
    pub angle_deg: f64,
}

/// Reference route as an open polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    waypoints: Vec<Point>,
}

/// Closest point on a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub distance: f64,
    pub point: Point,
    pub segment: usize,
    /// Arc length from the start to `point`.
    pub s: f64,
}

impl PathSpec {
    pub fn new(waypoints: Vec<Point>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidSpec("a path needs at least two waypoints".into()));
        }
        if waypoints.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpec("consecutive waypoints must differ".into()));
        }
        if waypoints.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidSpec("waypoints must be finite".into()));
        }
        Ok(PathSpec { waypoints })
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.waypoints.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    /// Heading changes at interior waypoints.
    pub fn corners(&self) -> Vec<Corner> {
        (1..self.waypoints.len() - 1)
            .filter_map(|i| {
                let h0 = heading(self.waypoints[i - 1], self.waypoints[i]);
                let h1 = heading(self.waypoints[i], self.waypoints[i + 1]);
                let d = wrap_angle(h1 - h0).abs().to_degrees();
                (d > 1e-9).then_some(Corner {
                    waypoint: i,
                    angle_deg: d,
                })
            })
            .collect()
    }

    pub fn project(&self, p: Point) -> Projection {
        let mut best = Projection {
            distance: f64::INFINITY,
            point: self.waypoints[0],
            segment: 0,
            s: 0.0,
        };
        let mut s0 = 0.0;
        for (i, (a, b)) in self.segments().enumerate() {
            let (d, q) = point_segment(p, a, b);
            if d < best.distance {
                best = Projection {
                    distance: d,
                    point: q,
                    segment: i,
                    s: s0 + a.dist(q),
                };
            }
            s0 += a.dist(b);
        }
        best
    }

    /// Closest point among segments `from..=to`, for trackers that must not
    /// jump to a distant part of a self-touching route.
    pub fn project_between(&self, p: Point, from: usize, to: usize) -> Projection {
        let mut best: Option<Projection> = None;
        let mut s0 = 0.0;
        for (i, (a, b)) in self.segments().enumerate() {
            if (from..=to).contains(&i) {
                let (d, q) = point_segment(p, a, b);
                if best.is_none_or(|bp| d < bp.distance) {
                    best = Some(Projection {
                        distance: d,
                        point: q,
                        segment: i,
                        s: s0 + a.dist(q),
                    });
                }
            }
            s0 += a.dist(b);
        }
        best.unwrap_or_else(|| self.project(p))
    }

    /// Point at arc length `s`, clamped to the ends, and the segment heading there.
    pub fn at(&self, s: f64) -> (Point, f64) {
        let mut rem = s.max(0.0);
        for (a, b) in self.segments() {
            let l = a.dist(b);
            if rem <= l {
                let t = rem / l;
                return (Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)), heading(a, b));
            }
            rem -= l;
        }
        let n = self.waypoints.len();
        (self.waypoints[n - 1], heading(self.waypoints[n - 2], self.waypoints[n - 1]))
    }
}

pub fn heading(a: Point, b: Point) -> f64 {
    (b.y - a.y).atan2(b.x - a.x)
}

/// Wraps to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Mean distance, in centimetres, from executed positions to the reference polyline.
pub fn trajectory_deviation(executed: &[Point], reference: &PathSpec) -> Result<f64> {
    if executed.is_empty() {
        return Err(Error::RejectedInput("executed path is empty".into()));
    }
    let total: f64 = executed.iter().map(|p| reference.project(*p).distance).sum();
    Ok(100.0 * total / executed.len() as f64)
}
