//! The navigation course: a closed loop with three right-angle corners and one
//! chamfered corner, surrounded by walls, an inner block and a cabinet.

use serde::{Deserialize, Serialize};

use super::geometry::{heading, PathSpec, Point, Rect};
use super::world::Pose;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Course {
    pub path: PathSpec,
    pub obstacles: Vec<Rect>,
    /// Waypoint index of the far point B; the start A is waypoint 0.
    pub turnaround: usize,
}

/// Geometry of the default loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopLayout {
    pub width_m: f64,
    pub length_m: f64,
    pub chamfer_m: f64,
    /// Free margin between the path and any obstacle.
    pub margin_m: f64,
}

impl Default for LoopLayout {
    fn default() -> Self {
        LoopLayout {
            width_m: 2.5,
            length_m: 8.0,
            chamfer_m: 0.5,
            margin_m: 0.42,
        }
    }
}

impl LoopLayout {
    /// Loop height that makes the perimeter equal `length_m`.
    pub fn height(&self) -> f64 {
        let c = self.chamfer_m;
        (self.length_m - 2.0 * self.width_m + 2.0 * c - c * std::f64::consts::SQRT_2) / 2.0
    }

    pub fn build(&self) -> Result<Course> {
        let (w, h, c, m) = (self.width_m, self.height(), self.chamfer_m, self.margin_m);
        if !(c > 0.0 && c < w / 2.0 && c < h / 2.0 && m > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "loop layout {w} x {h} with chamfer {c} and margin {m} is not realisable"
            )));
        }
        let path = PathSpec::new(vec![
            Point::new(w / 2.0, 0.0),
            Point::new(w, 0.0),
            Point::new(w, h),
            Point::new(w / 2.0, h),
            Point::new(0.0, h),
            Point::new(0.0, c),
            Point::new(c, 0.0),
            Point::new(w / 2.0, 0.0),
        ])?;
        // Inner block corner pulled back so that it clears the chamfer diagonal.
        let inner_left = (m * std::f64::consts::SQRT_2 + c - m).max(m);
        let t = 0.1;
        let outer = m + 0.2;
        let obstacles = vec![
            Rect::new(inner_left, m, w - m, h - m)?,
            Rect::new(-outer - t, -outer - t, w + outer + t, -outer)?,
            Rect::new(-outer - t, h + outer, w + outer + t, h + outer + t)?,
            Rect::new(-outer - t, -outer, -outer, h + outer)?,
            Rect::new(w + outer, -outer, w + outer + t, h + outer)?,
            // Cabinet against the left wall near the top-left corner.
            Rect::new(-outer, h - 0.6, -m, h + 0.2)?,
        ];
        Ok(Course {
            path,
            obstacles,
            turnaround: 3,
        })
    }
}

impl Course {
    pub fn standard() -> Self {
        LoopLayout::default().build().expect("default layout is valid")
    }

    pub fn start_pose(&self) -> Pose {
        let wp = self.path.waypoints();
        Pose {
            x: wp[0].x,
            y: wp[0].y,
            theta: heading(wp[0], wp[1]),
        }
    }

    /// Smallest distance from the reference path to any obstacle.
    pub fn clearance(&self) -> f64 {
        let n = 4000;
        let len = self.path.length();
        (0..=n)
            .map(|i| {
                let (p, _) = self.path.at(len * i as f64 / n as f64);
                self.obstacles.iter().map(|r| r.distance(p)).fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }
}
