//! Scripted teachers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::path::{NominalPath, PathRange};
use crate::error::{invalid_param, Result};
use crate::learner::{ArmState, DemoLabel, Demonstration, ACTION_DT};

/// Correlation of the tracking error between consecutive samples.
const TRACKING_CORRELATION: f64 = 0.9;

/// How a scripted teacher moves the arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    /// Along-path speed, m/s.
    pub speed: f64,
    /// Stationary standard deviation of the planar tracking error, m.
    pub tracking_sd: f64,
    /// Stationary standard deviation of the orientation error, rad.
    pub heading_sd: f64,
    /// Seconds between looks at an on-screen readout.
    pub glance_interval: f64,
    /// Seconds the arm is held still during each look.
    pub glance_pause: f64,
}

impl Default for MotionProfile {
    fn default() -> Self {
        MotionProfile { speed: 0.2, tracking_sd: 0.002, heading_sd: 0.01, glance_interval: 1.0, glance_pause: 0.5 }
    }
}

impl MotionProfile {
    /// A steadier hand used for the robot's expert demonstrations.
    pub fn expert() -> Self {
        MotionProfile { tracking_sd: 0.0005, heading_sd: 0.002, ..MotionProfile::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed > 0.0 && self.speed < crate::learner::MAX_LINEAR_SPEED) {
            return Err(invalid_param("teacher speed must be positive and below the arm limit"));
        }
        if !(self.tracking_sd >= 0.0 && self.heading_sd >= 0.0) {
            return Err(invalid_param("tracking noise must be non-negative"));
        }
        if !(self.glance_interval > 0.0 && self.glance_pause >= 0.0) {
            return Err(invalid_param("glance interval must be positive"));
        }
        Ok(())
    }
}

/// Stationary first-order autoregressive noise.
#[derive(Debug, Clone)]
pub(crate) struct Ar1<const N: usize> {
    state: [f64; N],
    sd: [f64; N],
}

impl<const N: usize> Ar1<N> {
    pub(crate) fn new<R: Rng>(sd: [f64; N], rng: &mut R) -> Self {
        let mut state = [0.0; N];
        for i in 0..N {
            let e: f64 = StandardNormal.sample(rng);
            state[i] = sd[i] * e;
        }
        Ar1 { state, sd }
    }

    pub(crate) fn value(&self) -> [f64; N] {
        self.state
    }

    pub(crate) fn step<R: Rng>(&mut self, rng: &mut R) {
        let rho = TRACKING_CORRELATION;
        let innovation = (1.0 - rho * rho).sqrt();
        for i in 0..N {
            let e: f64 = StandardNormal.sample(rng);
            self.state[i] = rho * self.state[i] + innovation * self.sd[i] * e;
        }
    }
}

/// Walks a range of the nominal path one [`ACTION_DT`] tick at a time.
#[derive(Debug, Clone)]
pub struct Traverser<'a> {
    path: &'a NominalPath,
    range: PathRange,
    step: f64,
    ticks: u64,
    done: bool,
    noise: Ar1<3>,
}

impl<'a> Traverser<'a> {
    pub fn new<R: Rng>(path: &'a NominalPath, range: PathRange, profile: &MotionProfile, rng: &mut R) -> Result<Self> {
        profile.validate()?;
        range.validate()?;
        Ok(Traverser {
            path,
            range,
            step: profile.speed * ACTION_DT / path.length(),
            ticks: 0,
            done: false,
            noise: Ar1::new([profile.tracking_sd, profile.tracking_sd, profile.heading_sd], rng),
        })
    }

    /// Nominal progress of the next pose.
    pub fn progress(&self) -> f64 {
        (self.range.start + self.ticks as f64 * self.step).min(self.range.end)
    }

    /// Next pose, or `None` once the end of the range has been emitted.
    pub fn next_pose<R: Rng>(&mut self, rng: &mut R) -> Option<ArmState> {
        if self.done {
            return None;
        }
        let progress = self.progress();
        let p = self.path.point_at(progress);
        let [dx, dy, dth] = self.noise.value();
        let pose = ArmState::new(p.x + dx, p.y + dy, p.theta + dth);
        if progress >= self.range.end - 1e-12 {
            self.done = true;
        }
        self.ticks += 1;
        self.noise.step(rng);
        Some(pose)
    }
}

/// A noisy traversal of `range` at constant speed starting at time `t0`.
pub fn traverse<R: Rng>(
    path: &NominalPath,
    range: PathRange,
    profile: &MotionProfile,
    t0: f64,
    label: DemoLabel,
    rng: &mut R,
) -> Result<Demonstration> {
    let mut walker = Traverser::new(path, range, profile, rng)?;
    let mut poses = Vec::new();
    while let Some(pose) = walker.next_pose(rng) {
        poses.push((t0 + poses.len() as f64 * ACTION_DT, pose));
    }
    let demo = Demonstration::from_poses(label, &poses);
    demo.validate()?;
    Ok(demo)
}

/// What a teacher senses at one render tick.
#[derive(Debug, Clone, PartialEq)]
pub enum Perception {
    Nothing,
    /// On-screen percentages, one per channel.
    Percent(Vec<f64>),
    /// Pressures under the hand, psi.
    Pressure(Vec<f64>),
}

/// A teacher that gives a first demonstration while sensing feedback, then
/// chooses what to re-teach.
pub trait TeacherPolicy {
    fn motion(&self) -> MotionProfile;
    /// Called once per render tick of the first demonstration.
    fn observe(&mut self, progress: f64, perception: &Perception);
    /// Stretch of the path covered by the second demonstration.
    fn region(&mut self) -> PathRange;
}

/// Re-teaches where the felt pressure exceeded a threshold (or the on-screen
/// value exceeded a percentage). Flagged points closer than `merge_gap` are
/// joined and the longest run is re-taught; with nothing flagged the whole
/// path is.
#[derive(Debug, Clone)]
pub struct ThresholdTeacher {
    pub threshold_psi: f64,
    pub gui_threshold_pct: f64,
    /// Standard deviation of pressure perception, psi.
    pub perception_sd: f64,
    pub merge_gap: f64,
    pub motion: MotionProfile,
    flagged: Vec<f64>,
    rng: ChaCha8Rng,
}

impl ThresholdTeacher {
    pub fn new(seed: u64) -> Self {
        ThresholdTeacher {
            threshold_psi: 2.0,
            gui_threshold_pct: 50.0,
            perception_sd: 0.05,
            merge_gap: 0.1,
            motion: MotionProfile::default(),
            flagged: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn flagged(&self) -> &[f64] {
        &self.flagged
    }
}

impl TeacherPolicy for ThresholdTeacher {
    fn motion(&self) -> MotionProfile {
        self.motion
    }

    fn observe(&mut self, progress: f64, perception: &Perception) {
        let hit = match perception {
            Perception::Nothing => false,
            Perception::Percent(p) => p.iter().any(|&v| v > self.gui_threshold_pct),
            Perception::Pressure(p) => p.iter().any(|&v| {
                let e: f64 = StandardNormal.sample(&mut self.rng);
                v + self.perception_sd * e > self.threshold_psi
            }),
        };
        if hit {
            self.flagged.push(progress);
        }
    }

    fn region(&mut self) -> PathRange {
        let mut pts = self.flagged.clone();
        pts.sort_by(f64::total_cmp);
        let mut best: Option<(f64, f64)> = None;
        let mut run: Option<(f64, f64)> = None;
        for p in pts {
            run = match run {
                Some((a, b)) if p - b <= self.merge_gap => Some((a, p)),
                _ => Some((p, p)),
            };
            let r = run.unwrap();
            if best.is_none_or(|(a, b)| r.1 - r.0 > b - a) {
                best = Some(r);
            }
        }
        match best {
            Some((a, b)) if b > a => PathRange { start: a, end: b },
            _ => PathRange { start: 0.0, end: 1.0 },
        }
    }
}

/// Re-teaches a fixed stretch regardless of feedback.
#[derive(Debug, Clone)]
pub struct FeedbackIgnoringTeacher {
    pub range: PathRange,
    pub motion: MotionProfile,
}

impl FeedbackIgnoringTeacher {
    pub fn new(range: PathRange) -> Self {
        FeedbackIgnoringTeacher { range, motion: MotionProfile::default() }
    }

    /// A stretch of length `budget` placed uniformly at random.
    pub fn random(budget: f64, seed: u64) -> Result<Self> {
        if !(budget > 0.0 && budget <= 1.0) {
            return Err(invalid_param("re-teach budget must lie in (0, 1]"));
        }
        let start = ChaCha8Rng::seed_from_u64(seed).random_range(0.0..=1.0 - budget);
        Ok(Self::new(PathRange::new(start, (start + budget).min(1.0))?))
    }
}

impl TeacherPolicy for FeedbackIgnoringTeacher {
    fn motion(&self) -> MotionProfile {
        self.motion
    }

    fn observe(&mut self, _progress: f64, _perception: &Perception) {}

    fn region(&mut self) -> PathRange {
        self.range
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> NominalPath {
        NominalPath::new(vec![ArmState::new(0.0, 0.0, 0.0), ArmState::new(1.0, 0.0, 0.0)]).unwrap()
    }

    #[test]
    fn traversal_covers_range_at_speed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let range = PathRange::new(0.25, 0.75).unwrap();
        let demo = traverse(&line(), range, &MotionProfile::default(), 0.0, DemoLabel::Expert, &mut rng).unwrap();
        assert_eq!(demo.len(), 51);
        assert!((demo.duration() - 2.5).abs() < 1e-9);
        assert!((demo.samples[0].state.x - 0.25).abs() < 0.01);
        assert!((demo.samples.last().unwrap().state.x - 0.75).abs() < 0.01);
    }

    #[test]
    fn traversal_deterministic() {
        let a = traverse(
            &line(),
            PathRange::new(0.0, 1.0).unwrap(),
            &MotionProfile::default(),
            0.0,
            DemoLabel::Expert,
            &mut ChaCha8Rng::seed_from_u64(5),
        );
        let b = traverse(
            &line(),
            PathRange::new(0.0, 1.0).unwrap(),
            &MotionProfile::default(),
            0.0,
            DemoLabel::Expert,
            &mut ChaCha8Rng::seed_from_u64(5),
        );
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn threshold_teacher_picks_longest_run() {
        let mut t = ThresholdTeacher::new(0);
        t.perception_sd = 0.0;
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            let p = if (0.4..=0.6).contains(&s) || (0.9..=0.92).contains(&s) { 2.8 } else { 1.1 };
            t.observe(s, &Perception::Pressure(vec![p]));
        }
        let r = t.region();
        assert!((r.start - 0.4).abs() < 1e-9 && (r.end - 0.6).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn unflagged_teacher_reteaches_everything() {
        let mut t = ThresholdTeacher::new(0);
        t.observe(0.5, &Perception::Nothing);
        assert_eq!(t.region(), PathRange { start: 0.0, end: 1.0 });
    }

    #[test]
    fn gui_threshold() {
        let mut t = ThresholdTeacher::new(0);
        t.observe(0.2, &Perception::Percent(vec![70.0]));
        t.observe(0.3, &Perception::Percent(vec![80.0]));
        t.observe(0.35, &Perception::Percent(vec![40.0]));
        assert_eq!(t.region(), PathRange { start: 0.2, end: 0.3 });
    }

    #[test]
    fn random_budget_placement() {
        let t = FeedbackIgnoringTeacher::random(0.3, 9).unwrap();
        assert!((t.range.len() - 0.3).abs() < 1e-12);
        assert!(FeedbackIgnoringTeacher::random(0.0, 9).is_err());
    }
}
