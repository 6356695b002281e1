use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::learner::{wrap_angle, ArmState};

/// Closed interval of path progress, both ends in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRange {
    pub start: f64,
    pub end: f64,
}

impl PathRange {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        let r = PathRange { start, end };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.start && self.start <= self.end && self.end <= 1.0) {
            return Err(invalid_param(format!("path range [{}, {}] is not inside [0, 1]", self.start, self.end)));
        }
        Ok(())
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }

    pub fn contains(&self, s: f64) -> bool {
        self.start <= s && s <= self.end
    }

    pub fn overlap(&self, other: &PathRange) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

/// Polyline through waypoints, parameterized by the fraction of its planar
/// arc length. Orientation is interpolated along each leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalPath {
    pub waypoints: Vec<ArmState>,
}

impl NominalPath {
    pub fn new(waypoints: Vec<ArmState>) -> Result<Self> {
        let p = NominalPath { waypoints };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::Configuration("a path needs at least two waypoints".into()));
        }
        if self.waypoints.iter().any(|w| !w.in_workspace()) {
            return Err(Error::Configuration("path leaves the workspace".into()));
        }
        if self.waypoints.windows(2).any(|w| w[0].distance(&w[1]) <= 0.0) {
            return Err(Error::Configuration("path has a zero-length leg".into()));
        }
        Ok(())
    }

    fn legs(&self) -> impl Iterator<Item = (&ArmState, &ArmState, f64)> {
        self.waypoints.windows(2).map(|w| (&w[0], &w[1], w[0].distance(&w[1])))
    }

    pub fn length(&self) -> f64 {
        self.legs().map(|(_, _, l)| l).sum()
    }

    /// Pose at progress `s` (clamped to `[0, 1]`).
    pub fn point_at(&self, s: f64) -> ArmState {
        let mut remaining = s.clamp(0.0, 1.0) * self.length();
        let mut last = self.waypoints[0];
        for (a, b, l) in self.legs() {
            if remaining <= l {
                let w = remaining / l;
                return ArmState::new(
                    a.x + w * (b.x - a.x),
                    a.y + w * (b.y - a.y),
                    a.theta + w * wrap_angle(b.theta - a.theta),
                );
            }
            remaining -= l;
            last = *b;
        }
        last
    }

    /// Progress of the point on the path closest to `state` in the plane.
    pub fn project(&self, state: &ArmState) -> f64 {
        let total = self.length();
        let mut best = (f64::INFINITY, 0.0);
        let mut before = 0.0;
        for (a, b, l) in self.legs() {
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let w = (((state.x - a.x) * dx + (state.y - a.y) * dy) / (l * l)).clamp(0.0, 1.0);
            let d = (a.x + w * dx - state.x).hypot(a.y + w * dy - state.y);
            if d < best.0 {
                best = (d, (before + w * l) / total);
            }
            before += l;
        }
        best.1
    }

    /// `n` evenly spaced poses from start to end.
    pub fn sample(&self, n: usize) -> Vec<ArmState> {
        match n {
            0 => Vec::new(),
            1 => vec![self.point_at(0.0)],
            _ => (0..n).map(|i| self.point_at(i as f64 / (n - 1) as f64)).collect(),
        }
    }
}
