//! Welding-style tasks: three features must be held at targets along a seam
//! and the display points out one feature per third of the seam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::metrics::{Metrics, IDLE_SPEED};
use super::session::{FeedbackFrame, FeedbackMode, FeedbackRenderer, GRASP_LOCATION};
use super::task::TaskSpec;
use super::teacher::{Ar1, MotionProfile};
use crate::display::ArmLocation;
use crate::error::{invalid_param, Error, Result};
use crate::learner::{
    feature_errors, feature_uncertainty, wrap_angle, Feature, FeatureSource, WeldSample, WeldTrajectory, ACTION_DT,
};

/// Which feature is emphasized in each third of the seam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UncertaintySchedule {
    pub order: [Feature; 3],
}

impl UncertaintySchedule {
    pub fn new(order: [Feature; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for f in order {
            seen[f.index()] = true;
        }
        if seen.contains(&false) {
            return Err(invalid_param("schedule must use each feature exactly once"));
        }
        Ok(UncertaintySchedule { order })
    }

    /// The schedule a welding task carries.
    pub fn of_task(task: &TaskSpec) -> Result<Self> {
        Self::new(task.weld_spec()?.emphasis)
    }

    pub fn third(progress: f64) -> usize {
        ((progress.clamp(0.0, 1.0) * 3.0) as usize).min(2)
    }

    pub fn feature_at(&self, progress: f64) -> Feature {
        self.order[Self::third(progress)]
    }

    /// Full uncertainty on the emphasized feature, none on the others.
    /// Outside the seam nothing is emphasized.
    pub fn emphasis_at(&self, progress: f64) -> [f64; 3] {
        let mut u = [0.0; 3];
        if (0.0..=1.0).contains(&progress) {
            u[self.feature_at(progress).index()] = 1.0;
        }
        u
    }
}

/// Seeded random assignment of features to seam thirds.
pub fn uncertainty_schedule(task: &TaskSpec, seed: u64) -> Result<UncertaintySchedule> {
    task.weld_spec()?;
    let mut order = Feature::ALL;
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    UncertaintySchedule::new(order)
}

/// The built-in welding task with a seeded emphasis order.
pub fn welding_task(seed: u64) -> Result<TaskSpec> {
    let base = TaskSpec::builtin("welding")?;
    TaskSpec::welding(uncertainty_schedule(&base, seed)?.order)
}

/// Seam-length-normalized integral of the summed absolute feature error.
pub fn weld_error(trajectory: &WeldTrajectory, task: &TaskSpec) -> Result<f64> {
    let targets = task.weld_spec()?.targets;
    let total = trajectory.seam_length();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("trajectory does not advance along the seam".into()));
    }
    let g = |s: &WeldSample| feature_errors(&s.features, &targets).iter().map(|e| e.abs()).sum::<f64>();
    let integral: f64 =
        trajectory.samples.windows(2).map(|w| 0.5 * (g(&w[0]) + g(&w[1])) * (w[1].seam - w[0].seam).abs()).sum();
    Ok(integral / total)
}

/// Error reduction as a percentage of the largest possible error.
pub fn improvement_weld(e_init: f64, e: f64, e_max: f64) -> Result<f64> {
    if !(e_max > 0.0) {
        return Err(invalid_param("e_max must be positive"));
    }
    Ok((e_init - e) / e_max * 100.0)
}

/// Intervals in which neither the seam position nor the tool offsets move
/// faster than [`IDLE_SPEED`].
pub fn weld_idle_time(trajectory: &WeldTrajectory) -> f64 {
    trajectory
        .samples
        .windows(2)
        .filter(|w| {
            let (a, b) = (&w[0], &w[1]);
            let d = ((b.seam - a.seam).powi(2)
                + (b.features[0] - a.features[0]).powi(2)
                + (b.features[1] - a.features[1]).powi(2))
            .sqrt();
            d < IDLE_SPEED * (b.t - a.t)
        })
        .map(|w| w[1].t - w[0].t)
        .fold(0.0, |a, b| a + b)
}

/// A scripted welder. Left alone it holds each feature off target by its
/// habit; a feature it is told about decays toward target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeldTeacher {
    /// Edge distance m, height m, orientation rad.
    pub habit: [f64; 3],
    pub jitter_sd: [f64; 3],
    /// Time constant of a correction, s.
    pub correction_time: f64,
    pub threshold_psi: f64,
    pub gui_threshold_pct: f64,
    pub perception_sd: f64,
    pub motion: MotionProfile,
}

impl Default for WeldTeacher {
    fn default() -> Self {
        WeldTeacher {
            habit: [0.04, 0.03, 0.35],
            jitter_sd: [0.001, 0.001, 0.01],
            correction_time: 0.5,
            threshold_psi: 2.0,
            gui_threshold_pct: 50.0,
            perception_sd: 0.05,
            motion: MotionProfile { speed: 0.05, ..MotionProfile::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeldRecord {
    pub task: String,
    pub feedback: FeedbackMode,
    pub seed: u64,
    /// Demonstration given before any feedback.
    pub initial: WeldTrajectory,
    /// Demonstration given with feedback.
    pub demo: WeldTrajectory,
    pub frames: Vec<FeedbackFrame>,
}

/// Run an initial demonstration without feedback and a second one with the
/// per-feature uncertainty from `source` rendered in `feedback` mode.
pub fn run_weld_session(
    task: &TaskSpec,
    source: &FeatureSource<'_>,
    teacher: &WeldTeacher,
    feedback: FeedbackMode,
    seed: u64,
) -> Result<WeldRecord> {
    let spec = task.weld_spec()?;
    teacher.motion.validate()?;
    if !(teacher.correction_time > 0.0) {
        return Err(invalid_param("correction time must be positive"));
    }
    let seam = task.nominal_path.length();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = weld_pass(spec.targets, seam, teacher, None, &mut rng)?.0;
    rng.set_stream(1);
    let mut renderer = FeedbackRenderer::new(feedback, 3)?;
    let (demo, frames) = weld_pass(spec.targets, seam, teacher, Some((source, &mut renderer)), &mut rng)?;
    Ok(WeldRecord { task: task.name.clone(), feedback, seed, initial, demo, frames })
}

fn weld_pass(
    targets: [f64; 3],
    seam: f64,
    teacher: &WeldTeacher,
    mut guidance: Option<(&FeatureSource<'_>, &mut FeedbackRenderer)>,
    rng: &mut ChaCha8Rng,
) -> Result<(WeldTrajectory, Vec<FeedbackFrame>)> {
    let profile = teacher.motion;
    let step = profile.speed * ACTION_DT;
    let decay = (-ACTION_DT / teacher.correction_time).exp();
    let mut jitter = Ar1::new(teacher.jitter_sd, rng);
    let mut dev = teacher.habit;
    let mut flagged = [false; 3];
    let mut samples = Vec::new();
    let mut frames = Vec::new();
    let (mut ticks, mut hold_until, mut next_glance) = (0u64, f64::NEG_INFINITY, profile.glance_interval);
    loop {
        let t = samples.len() as f64 * ACTION_DT;
        let pos = (ticks as f64 * step).min(seam);
        let j = jitter.value();
        let features = [targets[0] + dev[0] + j[0], targets[1] + dev[1] + j[1], wrap_angle(targets[2] + dev[2] + j[2])];
        samples.push(WeldSample { t, seam: pos, features });
        let holding = t < hold_until - 1e-9;
        if let Some((source, renderer)) = guidance.as_mut() {
            let mode = renderer.mode();
            if renderer.due(t) {
                let u = feature_uncertainty(source, &features, pos / seam)?;
                if let Some(f) = renderer.update(t, &u)? {
                    frames.push(f);
                }
            } else {
                renderer.advance(t)?;
            }
            match mode {
                FeedbackMode::None => {}
                FeedbackMode::Gui => {
                    if !holding && t >= next_glance - 1e-9 {
                        for (f, &p) in flagged.iter_mut().zip(renderer.screen()) {
                            *f = p > teacher.gui_threshold_pct;
                        }
                        hold_until = t + profile.glance_pause;
                        next_glance = hold_until + profile.glance_interval;
                    }
                }
                FeedbackMode::Local | FeedbackMode::Global => {
                    let felt: Vec<f64> = if mode == FeedbackMode::Local {
                        ArmLocation::ALL.iter().map(|&l| renderer.felt(l).into_iter().fold(0.0, f64::max)).collect()
                    } else {
                        renderer.felt(GRASP_LOCATION)
                    };
                    for (f, &p) in flagged.iter_mut().zip(&felt) {
                        let e: f64 = StandardNormal.sample(rng);
                        *f = p + teacher.perception_sd * e > teacher.threshold_psi;
                    }
                }
            }
        }
        let holding = t < hold_until - 1e-9;
        if !holding {
            if pos >= seam - 1e-12 {
                break;
            }
            for (d, &f) in dev.iter_mut().zip(&flagged) {
                if f {
                    *d *= decay;
                }
            }
            ticks += 1;
            jitter.step(rng);
        }
    }
    Ok((WeldTrajectory { samples }, frames))
}

/// Teaching Time and weld Improvement for a welding session.
pub fn weld_metrics(record: &WeldRecord, task: &TaskSpec) -> Result<Metrics> {
    if record.task != task.name {
        return Err(Error::InvalidInput(format!("session is for {}, not {}", record.task, task.name)));
    }
    let e_init = weld_error(&record.initial, task)?;
    let e = weld_error(&record.demo, task)?;
    Ok(Metrics {
        teaching_time: record.demo.duration(),
        idle_time: weld_idle_time(&record.demo),
        correct_segment: None,
        improvement_u: None,
        u1: None,
        u2: None,
        improvement_weld: Some(improvement_weld(e_init, e, task.e_max()?)?),
        e_init: Some(e_init),
        e: Some(e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{FeatureEnsemble, TrainConfig};

    fn task() -> TaskSpec {
        TaskSpec::builtin("welding").unwrap()
    }

    fn constant(offset: [f64; 3], n: usize) -> WeldTrajectory {
        let t = task();
        let targets = t.weld_spec().unwrap().targets;
        let len = t.nominal_path.length();
        WeldTrajectory {
            samples: (0..=n)
                .map(|i| WeldSample {
                    t: i as f64 * 0.05,
                    seam: len * i as f64 / n as f64,
                    features: [targets[0] + offset[0], targets[1] + offset[1], targets[2] + offset[2]],
                })
                .collect(),
        }
    }

    #[test]
    fn on_target_is_zero_error() {
        let t = task();
        let e_init = weld_error(&constant([0.01, 0.02, 0.3], 50), &t).unwrap();
        let e = weld_error(&constant([0.0; 3], 50), &t).unwrap();
        assert_eq!(e, 0.0);
        let imp = improvement_weld(e_init, e, t.e_max().unwrap()).unwrap();
        assert!((imp - e_init / t.e_max().unwrap() * 100.0).abs() < 1e-12);
        assert_eq!(improvement_weld(e_init, e_init, 1.0).unwrap(), 0.0);
        assert!(improvement_weld(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn height_offset_integral() {
        let e = weld_error(&constant([0.0, 0.01, 0.0], 37), &task()).unwrap();
        assert!((e - 0.01).abs() < 1e-12);
    }

    #[test]
    fn orientation_error_wraps() {
        let e = weld_error(&constant([0.0, 0.0, 2.0 * std::f64::consts::PI - 0.1], 10), &task()).unwrap();
        assert!((e - 0.1).abs() < 1e-9);
    }

    #[test]
    fn schedule_is_seeded_permutation() {
        let t = task();
        assert_eq!(uncertainty_schedule(&t, 4).unwrap(), uncertainty_schedule(&t, 4).unwrap());
        let s = uncertainty_schedule(&t, 11).unwrap();
        let mut idx: Vec<usize> = s.order.iter().map(|f| f.index()).collect();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2]);
        assert!(uncertainty_schedule(&TaskSpec::cleaning(0).unwrap(), 1).is_err());
    }

    #[test]
    fn schedule_frequencies_balanced() {
        let t = task();
        let n = 3000;
        let mut counts = [[0u32; 3]; 3];
        for seed in 0..n {
            let s = uncertainty_schedule(&t, seed).unwrap();
            for (third, f) in s.order.iter().enumerate() {
                counts[third][f.index()] += 1;
            }
        }
        for row in counts {
            for c in row {
                assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.04, "{counts:?}");
            }
        }
    }

    #[test]
    fn emphasis_one_hot_per_third() {
        let s = UncertaintySchedule::new([Feature::Orientation, Feature::EdgeDistance, Feature::Height]).unwrap();
        assert_eq!(s.emphasis_at(0.1), [0.0, 0.0, 1.0]);
        assert_eq!(s.emphasis_at(0.5), [1.0, 0.0, 0.0]);
        assert_eq!(s.emphasis_at(1.0), [0.0, 1.0, 0.0]);
        assert_eq!(s.emphasis_at(1.2), [0.0; 3]);
        assert_eq!(s.emphasis_at(f64::NAN), [0.0; 3]);
        assert!(UncertaintySchedule::new([Feature::Height; 3]).is_err());
    }

    #[test]
    fn guided_session_improves() {
        let t = welding_task(8).unwrap();
        let schedule = UncertaintySchedule::of_task(&t).unwrap();
        let source = FeatureSource { learned: None, schedule: Some(&schedule) };
        let teacher = WeldTeacher::default();
        let none = weld_metrics(&run_weld_session(&t, &source, &teacher, FeedbackMode::None, 3).unwrap(), &t).unwrap();
        assert!(none.improvement_weld.unwrap().abs() < 1.0);
        for mode in [FeedbackMode::Local, FeedbackMode::Global, FeedbackMode::Gui] {
            let rec = run_weld_session(&t, &source, &teacher, mode, 3).unwrap();
            let m = weld_metrics(&rec, &t).unwrap();
            assert!(m.improvement_weld.unwrap() > 2.0, "{mode}: {m:?}");
            assert!(m.improvement_weld.unwrap() <= m.e_init.unwrap() / t.e_max().unwrap() * 100.0 + 1e-9);
        }
    }

    #[test]
    fn gui_pauses_count_as_idle() {
        let t = welding_task(1).unwrap();
        let schedule = UncertaintySchedule::of_task(&t).unwrap();
        let source = FeatureSource { learned: None, schedule: Some(&schedule) };
        let rec = run_weld_session(&t, &source, &WeldTeacher::default(), FeedbackMode::Gui, 2).unwrap();
        let m = weld_metrics(&rec, &t).unwrap();
        assert!(m.idle_time > 2.0, "{m:?}");
        assert!(m.teaching_time > rec.initial.duration() + 2.0);
    }

    #[test]
    fn learned_heads_flag_undemonstrated_feature() {
        // Edge and height corrections are demonstrated; orientation is always on target.
        let t = task();
        let targets = t.weld_spec().unwrap().targets;
        let trajs: Vec<WeldTrajectory> = [-0.06, -0.03, 0.03, 0.06]
            .iter()
            .map(|&start| WeldTrajectory {
                samples: (0..60)
                    .map(|i| {
                        let d = start * (-(i as f64) * 0.05 / 0.5).exp();
                        WeldSample {
                            t: i as f64 * 0.05,
                            seam: i as f64 * 0.0025,
                            features: [targets[0] + d, targets[1] - d, targets[2]],
                        }
                    })
                    .collect(),
            })
            .collect();
        let cfg = TrainConfig { epochs: 80, ..TrainConfig::default() }.with_seed(5);
        let model = FeatureEnsemble::train(&trajs, targets, &cfg).unwrap();
        let q = [targets[0] + 0.02, targets[1] - 0.02, targets[2] + 0.8];
        let u = feature_uncertainty(&FeatureSource { learned: Some(&model), schedule: None }, &q, 0.5).unwrap();
        assert!(u[2] > u[0] && u[2] > u[1], "{u:?}");
    }
}
