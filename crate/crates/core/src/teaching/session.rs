use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{correct_segment, idle_time, improvement_uncertainty, Metrics};
use super::path::PathRange;
use super::task::TaskSpec;
use super::teacher::{traverse, MotionProfile, Perception, TeacherPolicy, Traverser};
use crate::display::{render, ArmLocation, DisplayPlant, Layout, RenderFrame, MIN_RENDER_PSI};
use crate::error::{invalid_param, Error, Result};
use crate::learner::{train, ArmState, DemoLabel, Demonstration, EnsembleModel, TrainConfig, ACTION_DT};
use crate::pneumatics::PlantConfig;

/// Uncertainty is re-rendered at most this often, Hz.
pub const RENDER_RATE_HZ: f64 = 20.0;
/// Where the teacher's hand rests on the arm.
pub const GRASP_LOCATION: ArmLocation = ArmLocation::EndEffector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    None,
    Gui,
    Local,
    Global,
}

impl FeedbackMode {
    pub const ALL: [FeedbackMode; 4] =
        [FeedbackMode::None, FeedbackMode::Gui, FeedbackMode::Local, FeedbackMode::Global];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::None => "none",
            FeedbackMode::Gui => "gui",
            FeedbackMode::Local => "local",
            FeedbackMode::Global => "global",
        }
    }

    /// Display layout for `channels` uncertainty channels; `None` for the
    /// modes that drive no rings.
    pub fn layout(self, channels: usize) -> Result<Option<Layout>> {
        let all = &ArmLocation::ALL;
        match self {
            FeedbackMode::None | FeedbackMode::Gui => Ok(None),
            FeedbackMode::Local if channels == 1 => Ok(Some(Layout::single_sleeve(GRASP_LOCATION))),
            FeedbackMode::Local if channels <= all.len() => Layout::local(&all[..channels], 1).map(Some),
            FeedbackMode::Local => Err(invalid_param(format!("local layout supports at most {} channels", all.len()))),
            FeedbackMode::Global => Layout::global(all, channels).map(Some),
        }
    }
}

impl fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown feedback mode {s:?}")))
    }
}

/// What the teacher was shown at one render tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackFrame {
    Haptic(RenderFrame),
    /// Uncertainty as on-screen percentages.
    Gui {
        t: f64,
        percent: Vec<f64>,
    },
}

impl FeedbackFrame {
    pub fn t(&self) -> f64 {
        match self {
            FeedbackFrame::Haptic(f) => f.t,
            FeedbackFrame::Gui { t, .. } => *t,
        }
    }
}

/// Turns uncertainty into feedback frames at no more than
/// [`RENDER_RATE_HZ`], driving a simulated display for the haptic modes.
#[derive(Debug, Clone)]
pub struct FeedbackRenderer {
    mode: FeedbackMode,
    channels: usize,
    layout: Option<Layout>,
    plant: Option<DisplayPlant>,
    plant_config: PlantConfig,
    last_frame: Option<f64>,
    last_percent: Vec<f64>,
}

impl FeedbackRenderer {
    pub fn new(mode: FeedbackMode, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(invalid_param("at least one uncertainty channel is needed"));
        }
        let layout = mode.layout(channels)?;
        let plant = layout.as_ref().map(|l| DisplayPlant::for_layout(l, MIN_RENDER_PSI));
        Ok(FeedbackRenderer {
            mode,
            channels,
            layout,
            plant,
            plant_config: PlantConfig::default(),
            last_frame: None,
            last_percent: vec![0.0; channels],
        })
    }

    pub fn mode(&self) -> FeedbackMode {
        self.mode
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Whether a frame would be emitted at time `t`.
    pub fn due(&self, t: f64) -> bool {
        self.mode != FeedbackMode::None && self.last_frame.is_none_or(|last| t - last >= 1.0 / RENDER_RATE_HZ - 1e-9)
    }

    /// Run the display forward to time `t`.
    pub fn advance(&mut self, t: f64) -> Result<()> {
        if let Some(plant) = &mut self.plant {
            if t < plant.time - 1e-9 {
                return Err(Error::State(format!("time went backwards to {t} from {}", plant.time)));
            }
            plant.advance(t - plant.time, &self.plant_config);
        }
        Ok(())
    }

    /// Advance to `t` and, if a frame is due, render `uncertainties`.
    pub fn update(&mut self, t: f64, uncertainties: &[f64]) -> Result<Option<FeedbackFrame>> {
        if uncertainties.len() != self.channels {
            return Err(Error::InvalidInput(format!(
                "expected {} uncertainties, got {}",
                self.channels,
                uncertainties.len()
            )));
        }
        self.advance(t)?;
        if !self.due(t) {
            return Ok(None);
        }
        self.last_frame = Some(t);
        let frame = match (&self.layout, &mut self.plant) {
            (Some(layout), Some(plant)) => {
                let frame = render(layout, uncertainties, t)?;
                crate::display::apply_frame(&frame, plant)?;
                FeedbackFrame::Haptic(frame)
            }
            _ => {
                if uncertainties.iter().any(|u| u.is_nan()) {
                    return Err(Error::InvalidInput("uncertainty is NaN".into()));
                }
                self.last_percent = uncertainties.iter().map(|u| 100.0 * u.clamp(0.0, 1.0)).collect();
                FeedbackFrame::Gui { t, percent: self.last_percent.clone() }
            }
        };
        Ok(Some(frame))
    }

    /// Pressures currently in the rings at `location`, psi.
    pub fn felt(&self, location: ArmLocation) -> Vec<f64> {
        self.plant
            .as_ref()
            .and_then(|p| p.snapshot().location(location.id()).map(|l| l.pressures.clone()))
            .unwrap_or_default()
    }

    /// Most recent on-screen percentages.
    pub fn screen(&self) -> &[f64] {
        &self.last_percent
    }
}

/// A two-demonstration teaching session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub task: String,
    pub feedback: FeedbackMode,
    pub seed: u64,
    /// First (full path, with feedback) and second (re-teach) demonstration.
    pub demos: Vec<Demonstration>,
    pub frames: Vec<FeedbackFrame>,
    /// Duration of each demonstration including idle time, s.
    pub wall_times: Vec<f64>,
    /// The first demonstration stopped short of the path end, or the second
    /// never started.
    pub truncated: bool,
}

impl SessionRecord {
    pub fn first(&self) -> Option<&Demonstration> {
        self.demos.first()
    }

    pub fn second(&self) -> Option<&Demonstration> {
        self.demos.get(1)
    }
}

/// How the robot is prepared before a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeachingConfig {
    pub expert_count: usize,
    pub expert_seed: u64,
    pub expert_motion: MotionProfile,
    pub train: TrainConfig,
    /// Points along the nominal path at which uncertainty is averaged.
    pub probe_points: usize,
}

impl Default for TeachingConfig {
    fn default() -> Self {
        TeachingConfig {
            expert_count: 5,
            expert_seed: 0,
            expert_motion: MotionProfile::expert(),
            train: TrainConfig::default(),
            probe_points: 200,
        }
    }
}

/// A task plus the robot trained on expert demonstrations with the unknown
/// segments removed.
#[derive(Debug, Clone)]
pub struct TeachingContext {
    pub task: TaskSpec,
    pub config: TeachingConfig,
    pub training_demos: Vec<Demonstration>,
    pub model: EnsembleModel,
}

impl TeachingContext {
    pub fn new(task: TaskSpec, config: TeachingConfig) -> Result<Self> {
        task.validate()?;
        let experts = task.expert_demos(config.expert_count, &config.expert_motion, config.expert_seed)?;
        let training_demos = task.withhold(&experts);
        let model = train(&training_demos, &config.train)?;
        Ok(TeachingContext { task, config, training_demos, model })
    }

    /// Render the current uncertainty at `state` if a frame is due.
    pub fn frame_for(
        &self,
        renderer: &mut FeedbackRenderer,
        t: f64,
        state: &ArmState,
    ) -> Result<Option<FeedbackFrame>> {
        if renderer.due(t) {
            renderer.update(t, &[self.model.uncertainty(state)?])
        } else {
            renderer.advance(t)?;
            Ok(None)
        }
    }

    /// Scripted session: the teacher walks the whole path while feeling the
    /// rendered uncertainty, then re-teaches the stretch it chose.
    pub fn run_session(
        &self,
        teacher: &mut dyn TeacherPolicy,
        feedback: FeedbackMode,
        seed: u64,
    ) -> Result<SessionRecord> {
        let profile = teacher.motion();
        let path = &self.task.nominal_path;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut renderer = FeedbackRenderer::new(feedback, 1)?;
        let mut walker = Traverser::new(path, PathRange::new(0.0, 1.0)?, &profile, &mut rng)?;
        let mut poses: Vec<(f64, ArmState)> = Vec::new();
        let mut frames = Vec::new();
        let mut next_glance = profile.glance_interval;
        let mut hold: Option<(ArmState, f64)> = None;
        loop {
            let t = poses.len() as f64 * ACTION_DT;
            let pose = match hold {
                Some((pose, until)) if t < until - 1e-9 => pose,
                _ => {
                    hold = None;
                    match walker.next_pose(&mut rng) {
                        Some(p) => p,
                        None => break,
                    }
                }
            };
            poses.push((t, pose));
            if let Some(frame) = self.frame_for(&mut renderer, t, &pose)? {
                frames.push(frame);
            }
            let perception = match feedback {
                FeedbackMode::None => Perception::Nothing,
                FeedbackMode::Gui if hold.is_none() && t >= next_glance - 1e-9 => {
                    hold = Some((pose, t + profile.glance_pause));
                    next_glance = t + profile.glance_pause + profile.glance_interval;
                    Perception::Percent(renderer.screen().to_vec())
                }
                FeedbackMode::Gui => Perception::Nothing,
                FeedbackMode::Local | FeedbackMode::Global => Perception::Pressure(renderer.felt(GRASP_LOCATION)),
            };
            teacher.observe(path.project(&pose), &perception);
        }
        let demo1 = Demonstration::from_poses(DemoLabel::UserFirst, &poses);
        let region = teacher.region();
        rng.set_stream(1);
        let t0 = demo1.duration() + ACTION_DT;
        let demo2 = traverse(path, region, &profile, t0, DemoLabel::UserSecond, &mut rng)?;
        Ok(SessionRecord {
            task: self.task.name.clone(),
            feedback,
            seed,
            wall_times: vec![demo1.duration(), demo2.duration()],
            demos: vec![demo1, demo2],
            frames,
            truncated: false,
        })
    }

    /// Rebuild a session from recorded pose streams, re-rendering the
    /// feedback the first demonstration would have produced.
    pub fn replay_session(
        &self,
        first: &[(f64, ArmState)],
        second: &[(f64, ArmState)],
        feedback: FeedbackMode,
        seed: u64,
    ) -> Result<SessionRecord> {
        let demo1 = Demonstration::from_poses(DemoLabel::UserFirst, first);
        let demo2 = Demonstration::from_poses(DemoLabel::UserSecond, second);
        demo1.validate()?;
        demo2.validate()?;
        let mut renderer = FeedbackRenderer::new(feedback, 1)?;
        let mut frames = Vec::new();
        for &(t, state) in first {
            if let Some(frame) = self.frame_for(&mut renderer, t, &state)? {
                frames.push(frame);
            }
        }
        let reached_end = first.last().is_some_and(|(_, s)| self.task.nominal_path.project(s) >= 0.98);
        Ok(SessionRecord {
            task: self.task.name.clone(),
            feedback,
            seed,
            wall_times: vec![demo1.duration(), demo2.duration()],
            truncated: !reached_end || demo2.is_empty(),
            demos: vec![demo1, demo2],
            frames,
        })
    }

    /// Evenly spaced states along the nominal path.
    pub fn probes(&self) -> Vec<ArmState> {
        self.task.nominal_path.sample(self.config.probe_points)
    }

    /// Mean normalized uncertainty of `model` along the nominal path, scaled
    /// by `normalizer`.
    pub fn mean_uncertainty(&self, model: &EnsembleModel, normalizer: f64) -> f64 {
        let probes = self.probes();
        probes.iter().map(|s| model.normalized(&s.features(), normalizer)).sum::<f64>() / probes.len() as f64
    }

    /// Mean uncertainty of the initial model over (unknown, known) segments.
    pub fn segment_uncertainty(&self) -> Result<(f64, f64)> {
        let n = self.model.normalizer()?;
        let path = &self.task.nominal_path;
        let (mut unknown, mut known) = (Vec::new(), Vec::new());
        for s in self.probes() {
            let u = self.model.normalized(&s.features(), n);
            if self.task.is_known(path.project(&s)) {
                known.push(u);
            } else {
                unknown.push(u);
            }
        }
        let mean = |v: &[f64]| {
            if v.is_empty() {
                Err(Error::Configuration("task needs both known and unknown segments".into()))
            } else {
                Ok(v.iter().sum::<f64>() / v.len() as f64)
            }
        };
        Ok((mean(&unknown)?, mean(&known)?))
    }

    /// Model retrained on the expert data plus `demo`.
    pub fn retrain_with(&self, demo: &Demonstration) -> Result<EnsembleModel> {
        let mut demos = self.training_demos.clone();
        demos.push(demo.clone());
        train(&demos, &self.config.train)
    }

    /// Teaching Time, Correct Segment and Improvement for a session. Both
    /// uncertainties use the initial model's normalizer.
    pub fn metrics(&self, record: &SessionRecord) -> Result<Metrics> {
        if record.task != self.task.name {
            return Err(Error::InvalidInput(format!("session is for {}, not {}", record.task, self.task.name)));
        }
        let demo2 = record
            .second()
            .filter(|d| !d.is_empty())
            .ok_or_else(|| Error::State("session has no second demonstration".into()))?;
        let n1 = self.model.normalizer()?;
        let u1 = self.mean_uncertainty(&self.model, n1);
        let retrained = self.retrain_with(demo2)?;
        let u2 = self.mean_uncertainty(&retrained, n1);
        Ok(Metrics {
            teaching_time: demo2.duration(),
            idle_time: idle_time(demo2),
            correct_segment: Some(correct_segment(demo2, &self.task.uncertain_region()?, &self.task.nominal_path)?),
            improvement_u: Some(improvement_uncertainty(u1, u2)?),
            u1: Some(u1),
            u2: Some(u2),
            improvement_weld: None,
            e_init: None,
            e: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Demo1,
    Demo2,
    Complete,
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    SessionStart { task: String, feedback: FeedbackMode, seed: u64 },
    PhaseChange { t: f64, phase: Phase },
    DemoSample { demo: u8, t: f64, x: f64, y: f64, theta: f64 },
    Frame { frame: FeedbackFrame },
    SessionEnd { truncated: bool },
}

impl SessionRecord {
    /// Log events in time order.
    pub fn to_events(&self) -> Vec<SessionEvent> {
        let mut out =
            vec![SessionEvent::SessionStart { task: self.task.clone(), feedback: self.feedback, seed: self.seed }];
        let mut frames = self.frames.iter().peekable();
        for (i, demo) in self.demos.iter().enumerate() {
            let phase = if i == 0 { Phase::Demo1 } else { Phase::Demo2 };
            let t = demo.samples.first().map_or(0.0, |s| s.t);
            out.push(SessionEvent::PhaseChange { t, phase });
            for s in &demo.samples {
                while let Some(f) = frames.next_if(|f| f.t() <= s.t) {
                    out.push(SessionEvent::Frame { frame: f.clone() });
                }
                out.push(SessionEvent::DemoSample {
                    demo: i as u8 + 1,
                    t: s.t,
                    x: s.state.x,
                    y: s.state.y,
                    theta: s.state.theta,
                });
            }
        }
        out.extend(frames.map(|f| SessionEvent::Frame { frame: f.clone() }));
        let end = self.demos.iter().filter_map(|d| d.samples.last()).map(|s| s.t).fold(0.0, f64::max);
        out.push(SessionEvent::PhaseChange { t: end, phase: Phase::Complete });
        out.push(SessionEvent::SessionEnd { truncated: self.truncated });
        out
    }

    pub fn from_events(events: &[SessionEvent]) -> Result<Self> {
        let Some(SessionEvent::SessionStart { task, feedback, seed }) = events.first() else {
            return Err(Error::Parse("session log must start with session_start".into()));
        };
        let mut poses: [Vec<(f64, ArmState)>; 2] = [Vec::new(), Vec::new()];
        let mut frames = Vec::new();
        let mut truncated = None;
        for e in &events[1..] {
            match e {
                SessionEvent::DemoSample { demo, t, x, y, theta } => {
                    let slot = poses
                        .get_mut((*demo as usize).wrapping_sub(1))
                        .ok_or_else(|| Error::Parse(format!("unknown demonstration {demo}")))?;
                    slot.push((*t, ArmState { x: *x, y: *y, theta: *theta }));
                }
                SessionEvent::Frame { frame } => frames.push(frame.clone()),
                SessionEvent::SessionEnd { truncated: tr } => truncated = Some(*tr),
                SessionEvent::PhaseChange { .. } => {}
                SessionEvent::SessionStart { .. } => return Err(Error::Parse("repeated session_start".into())),
            }
        }
        let demos = vec![
            Demonstration::from_poses(DemoLabel::UserFirst, &poses[0]),
            Demonstration::from_poses(DemoLabel::UserSecond, &poses[1]),
        ];
        Ok(SessionRecord {
            task: task.clone(),
            feedback: *feedback,
            seed: *seed,
            wall_times: demos.iter().map(|d| d.duration()).collect(),
            demos,
            frames,
            truncated: truncated.unwrap_or(true),
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in self.to_events() {
            serde_json::to_writer(&mut out, &e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut events = Vec::new();
        for line in input.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                events.push(serde_json::from_str(&line)?);
            }
        }
        Self::from_events(&events)
    }
}
