use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::path::{NominalPath, PathRange};
use super::teacher::{traverse, MotionProfile};
use crate::error::{Error, Result};
use crate::learner::{wrap_angle, ArmState, DemoLabel, Demonstration, Feature};

/// Names accepted by [`TaskSpec::builtin`].
pub const BUILTIN_TASKS: [&str; 4] = ["cleaning-first", "cleaning-middle", "cleaning-last", "welding"];

/// A stretch of the path and whether the robot was shown it before teaching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub range: PathRange,
    pub known: bool,
}

/// Feature targets and bounds for a welding-style task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeldSpec {
    /// Edge distance m, height m, orientation rad.
    pub targets: [f64; 3],
    /// Reachable range of edge distance and height, m.
    pub edge_bounds: (f64, f64),
    pub height_bounds: (f64, f64),
    /// Feature emphasized in each third of the seam.
    pub emphasis: [Feature; 3],
}

impl WeldSpec {
    /// Largest possible feature error, integrated over the normalized path:
    /// the farthest reachable edge distance and height from their targets
    /// plus a half-turn of orientation.
    pub fn e_max(&self) -> f64 {
        let far = |(lo, hi): (f64, f64), target: f64| (target - lo).abs().max((hi - target).abs());
        far(self.edge_bounds, self.targets[0]) + far(self.height_bounds, self.targets[1]) + PI
    }

    fn validate(&self) -> Result<()> {
        let mut seen = [false; 3];
        for f in self.emphasis {
            seen[f.index()] = true;
        }
        if seen.contains(&false) {
            return Err(Error::Configuration(
                "every welding segment needs exactly one distinct emphasized feature".into(),
            ));
        }
        let inside = |(lo, hi): (f64, f64), t: f64| lo < hi && lo <= t && t <= hi;
        if !inside(self.edge_bounds, self.targets[0]) || !inside(self.height_bounds, self.targets[1]) {
            return Err(Error::Configuration("feature targets outside their bounds".into()));
        }
        if wrap_angle(self.targets[2]) != self.targets[2] {
            return Err(Error::Configuration("orientation target must lie in (-pi, pi]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub nominal_path: NominalPath,
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weld: Option<WeldSpec>,
}

impl TaskSpec {
    /// Three segments: a straight approach, an arched detour that turns the
    /// gripper a quarter turn, and a straight exit. The segment at
    /// `withheld` (0, 1 or 2) is unknown to the robot.
    pub fn cleaning(withheld: usize) -> Result<Self> {
        let name = match withheld {
            0 => "cleaning-first",
            1 => "cleaning-middle",
            2 => "cleaning-last",
            _ => return Err(Error::Configuration(format!("no cleaning segment {withheld}"))),
        };
        // The detour is half an ellipse over the straight line, sampled
        // finely enough to be smooth at teaching speed.
        let arc_points = 16;
        let mut waypoints = vec![ArmState::new(-0.9, -0.3, 0.0)];
        waypoints.extend((0..=arc_points).map(|i| {
            let f = i as f64 / arc_points as f64;
            let phi = PI * (1.0 - f);
            ArmState::new(0.3 * phi.cos(), -0.3 + 0.6 * phi.sin(), FRAC_PI_2 * f)
        }));
        waypoints.push(ArmState::new(0.9, -0.3, FRAC_PI_2));
        let path = NominalPath::new(waypoints)?;
        let total = path.length();
        let legs: Vec<f64> = path.waypoints.windows(2).map(|w| w[0].distance(&w[1])).collect();
        let first = legs[0] / total;
        let last = 1.0 - legs[legs.len() - 1] / total;
        let cuts = [0.0, first, last, 1.0];
        let segments = cuts
            .windows(2)
            .enumerate()
            .map(|(i, c)| Segment { range: PathRange { start: c[0], end: c[1] }, known: i != withheld })
            .collect();
        let task = TaskSpec { name: name.into(), nominal_path: path, segments, weld: None };
        task.validate()?;
        Ok(task)
    }

    /// A straight 0.6 m seam along x with the given emphasis order.
    pub fn welding(emphasis: [Feature; 3]) -> Result<Self> {
        let path = NominalPath::new(vec![ArmState::new(-0.3, 0.0, 0.0), ArmState::new(0.3, 0.0, 0.0)])?;
        let task = TaskSpec {
            name: "welding".into(),
            nominal_path: path,
            segments: thirds().into_iter().map(|range| Segment { range, known: true }).collect(),
            weld: Some(WeldSpec {
                targets: [0.05, 0.02, 0.0],
                edge_bounds: (0.0, 0.3),
                height_bounds: (0.0, 0.3),
                emphasis,
            }),
        };
        task.validate()?;
        Ok(task)
    }

    /// Look up a built-in task. Welding starts with the identity emphasis
    /// order; use [`super::uncertainty_schedule`] to randomize it.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "cleaning-first" => Self::cleaning(0),
            "cleaning-middle" => Self::cleaning(1),
            "cleaning-last" => Self::cleaning(2),
            "welding" => Self::welding(Feature::ALL),
            other => Err(Error::Configuration(format!("unknown task {other:?}"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let task: TaskSpec = serde_json::from_str(text)?;
        task.validate()?;
        Ok(task)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.nominal_path.validate()?;
        let mut at = 0.0;
        for seg in &self.segments {
            seg.range.validate()?;
            if seg.range.start != at || seg.range.is_empty() {
                return Err(Error::Configuration("segments must partition the path in order".into()));
            }
            at = seg.range.end;
        }
        if at != 1.0 {
            return Err(Error::Configuration("segments must cover the whole path".into()));
        }
        if let Some(w) = &self.weld {
            w.validate()?;
            if self.segments.len() != 3 {
                return Err(Error::Configuration("a welding task has three segments".into()));
            }
        }
        Ok(())
    }

    pub fn is_welding(&self) -> bool {
        self.weld.is_some()
    }

    pub fn weld_spec(&self) -> Result<&WeldSpec> {
        self.weld.as_ref().ok_or_else(|| Error::Configuration(format!("{} is not a welding task", self.name)))
    }

    pub fn e_max(&self) -> Result<f64> {
        Ok(self.weld_spec()?.e_max())
    }

    pub fn segment_at(&self, progress: f64) -> Option<&Segment> {
        self.segments.iter().find(|s| s.range.contains(progress))
    }

    pub fn is_known(&self, progress: f64) -> bool {
        self.segment_at(progress).is_some_and(|s| s.known)
    }

    /// Hull of the segments the robot was never shown.
    pub fn uncertain_region(&self) -> Result<PathRange> {
        let unknown: Vec<&Segment> = self.segments.iter().filter(|s| !s.known).collect();
        match (unknown.first(), unknown.last()) {
            (Some(a), Some(b)) => PathRange::new(a.range.start, b.range.end),
            _ => Err(Error::Configuration(format!("{} has no unknown segment", self.name))),
        }
    }

    /// Noisy expert traversals of the full path.
    pub fn expert_demos(&self, count: usize, profile: &MotionProfile, seed: u64) -> Result<Vec<Demonstration>> {
        let full = PathRange::new(0.0, 1.0)?;
        (0..count)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                traverse(&self.nominal_path, full, profile, 0.0, DemoLabel::Expert, &mut rng)
            })
            .collect()
    }

    /// Drop the samples that fall in unknown segments, splitting each
    /// demonstration into contiguous known pieces. Actions are kept as
    /// recorded.
    pub fn withhold(&self, demos: &[Demonstration]) -> Vec<Demonstration> {
        let mut out = Vec::new();
        for demo in demos {
            let mut piece: Vec<_> = Vec::new();
            for s in &demo.samples {
                if self.is_known(self.nominal_path.project(&s.state)) {
                    piece.push(*s);
                } else if !piece.is_empty() {
                    out.push(Demonstration { label: demo.label, samples: std::mem::take(&mut piece) });
                }
            }
            if !piece.is_empty() {
                out.push(Demonstration { label: demo.label, samples: piece });
            }
        }
        out
    }
}

fn thirds() -> [PathRange; 3] {
    [
        PathRange { start: 0.0, end: 1.0 / 3.0 },
        PathRange { start: 1.0 / 3.0, end: 2.0 / 3.0 },
        PathRange { start: 2.0 / 3.0, end: 1.0 },
    ]
}
