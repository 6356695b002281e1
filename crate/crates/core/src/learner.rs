//! Ensemble behavior cloning and the uncertainty it reports.
//!
//! Each member is a small multilayer perceptron trained on a bootstrap
//! resample of (state, action) pairs. Disagreement between members is the
//! raw uncertainty; it is divided by the largest disagreement seen on the
//! training states and clamped to `[0, 1]` before it is displayed.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::teaching::UncertaintySchedule;

/// Demonstrations are resampled to this grid before training, seconds.
pub const ACTION_DT: f64 = 0.05;
/// Fastest end-effector translation a teacher can produce, m/s.
pub const MAX_LINEAR_SPEED: f64 = 1.0;
/// Fastest end-effector rotation, rad/s.
pub const MAX_ANGULAR_SPEED: f64 = PI;
/// Half-width of the square planar workspace, m.
pub const WORKSPACE_HALF_WIDTH: f64 = 1.5;
/// Lower bound on the uncertainty normalizer, in squared scaled-action units.
pub const VARIANCE_FLOOR: f64 = 1e-3;

const POSITION_SCALE: f64 = 0.2;

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Planar end-effector pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl ArmState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        ArmState { x, y, theta: wrap_angle(theta) }
    }

    pub fn in_workspace(&self) -> bool {
        self.x.abs() <= WORKSPACE_HALF_WIDTH && self.y.abs() <= WORKSPACE_HALF_WIDTH && self.theta.is_finite()
    }

    /// Network input features.
    pub fn features(&self) -> Vec<f64> {
        vec![self.x / POSITION_SCALE, self.y / POSITION_SCALE, self.theta / PI]
    }

    pub fn distance(&self, other: &ArmState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Pose delta from `self` to `next`, angle wrapped.
    pub fn delta_to(&self, next: &ArmState) -> [f64; 3] {
        [next.x - self.x, next.y - self.y, wrap_angle(next.theta - self.theta)]
    }
}

/// Scale a pose delta taken over [`ACTION_DT`] to fractions of the fastest
/// possible step.
pub fn scale_action(action: &[f64; 3]) -> Vec<f64> {
    let lin = MAX_LINEAR_SPEED * ACTION_DT;
    let ang = MAX_ANGULAR_SPEED * ACTION_DT;
    vec![action[0] / lin, action[1] / lin, action[2] / ang]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoLabel {
    Expert,
    UserFirst,
    UserSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoSample {
    pub t: f64,
    pub state: ArmState,
    pub action: [f64; 3],
}

/// One line of a demonstration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct DemoLine {
    t: f64,
    x: f64,
    y: f64,
    theta: f64,
    ax: f64,
    ay: f64,
    atheta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub label: DemoLabel,
    pub samples: Vec<DemoSample>,
}

impl Demonstration {
    /// Build from timestamped poses; each action is the delta to the next
    /// pose and the final action is zero.
    pub fn from_poses(label: DemoLabel, poses: &[(f64, ArmState)]) -> Self {
        let samples = poses
            .iter()
            .enumerate()
            .map(|(i, &(t, state))| {
                let action = poses.get(i + 1).map(|(_, next)| state.delta_to(next)).unwrap_or([0.0; 3]);
                DemoSample { t, state, action }
            })
            .collect();
        Demonstration { label, samples }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn arc_length(&self) -> f64 {
        self.samples.windows(2).map(|w| w[0].state.distance(&w[1].state)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if !s.state.in_workspace() || !s.t.is_finite() {
                return Err(Error::InvalidInput(format!("sample {i} outside the workspace")));
            }
            let span = match self.samples.get(i + 1) {
                Some(next) if next.t <= s.t => {
                    return Err(Error::InvalidInput(format!("timestamps not increasing at sample {i}")));
                }
                Some(next) => next.t - s.t,
                None => ACTION_DT,
            };
            let lin = MAX_LINEAR_SPEED * span + 1e-9;
            let ang = MAX_ANGULAR_SPEED * span + 1e-9;
            if s.action[0].hypot(s.action[1]) > lin || s.action[2].abs() > ang {
                return Err(Error::InvalidInput(format!("action at sample {i} exceeds teacher speed limits")));
            }
        }
        Ok(())
    }

    /// Linearly interpolate poses onto a `dt` grid starting at the first
    /// sample and recompute actions as next-pose deltas.
    pub fn resample(&self, dt: f64) -> Result<Demonstration> {
        if !(dt > 0.0) {
            return Err(invalid_param("resample step must be positive"));
        }
        let Some(first) = self.samples.first() else {
            return Ok(self.clone());
        };
        if self.samples.windows(2).all(|w| (w[1].t - w[0].t - dt).abs() < 1e-9) {
            return Ok(self.clone());
        }
        let t0 = first.t;
        let end = self.duration();
        let n = (end / dt + 1e-9).floor() as usize;
        let mut poses = Vec::with_capacity(n + 1);
        let mut seg = 0;
        for k in 0..=n {
            let t = t0 + k as f64 * dt;
            while seg + 1 < self.samples.len() && self.samples[seg + 1].t < t {
                seg += 1;
            }
            let a = &self.samples[seg];
            let state = match self.samples.get(seg + 1) {
                Some(b) if t > a.t => {
                    let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
                    let dtheta = wrap_angle(b.state.theta - a.state.theta);
                    ArmState::new(
                        a.state.x + w * (b.state.x - a.state.x),
                        a.state.y + w * (b.state.y - a.state.y),
                        a.state.theta + w * dtheta,
                    )
                }
                _ => a.state,
            };
            poses.push((t, state));
        }
        Ok(Demonstration::from_poses(self.label, &poses))
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.samples {
            let line = DemoLine {
                t: s.t,
                x: s.state.x,
                y: s.state.y,
                theta: s.state.theta,
                ax: s.action[0],
                ay: s.action[1],
                atheta: s.action[2],
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(label: DemoLabel, input: R) -> Result<Demonstration> {
        let mut samples = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: DemoLine = serde_json::from_str(&line)?;
            samples.push(DemoSample {
                t: l.t,
                state: ArmState::new(l.x, l.y, l.theta),
                action: [l.ax, l.ay, l.atheta],
            });
        }
        let demo = Demonstration { label, samples };
        demo.validate()?;
        Ok(demo)
    }
}

/// Paired network inputs and regression targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionSet {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl TransitionSet {
    pub fn push(&mut self, input: Vec<f64>, target: Vec<f64>) {
        self.inputs.push(input);
        self.targets.push(target);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// State/action pairs of demonstrations resampled to [`ACTION_DT`].
    pub fn from_demos(demos: &[Demonstration]) -> Result<Self> {
        let mut set = TransitionSet::default();
        for demo in demos {
            for s in demo.resample(ACTION_DT)?.samples {
                set.push(s.state.features(), scale_action(&s.action));
            }
        }
        Ok(set)
    }

    fn dims(&self) -> Result<(usize, usize)> {
        let (Some(i), Some(t)) = (self.inputs.first(), self.targets.first()) else {
            return Err(Error::InvalidInput("no training transitions".into()));
        };
        let (di, dt) = (i.len(), t.len());
        if di == 0 || dt == 0 || self.inputs.len() != self.targets.len() {
            return Err(Error::InvalidInput("malformed transition set".into()));
        }
        if self.inputs.iter().any(|v| v.len() != di) || self.targets.iter().any(|v| v.len() != dt) {
            return Err(Error::InvalidInput("ragged transition set".into()));
        }
        Ok((di, dt))
    }
}

/// Fully connected `in → hidden → hidden → out` network with tanh hidden
/// units. Parameters are stored flat: W1, b1, W2, b2, W3, b3 (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    pub params: Vec<f64>,
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

impl Mlp {
    fn offsets(input_dim: usize, hidden: usize, output_dim: usize) -> Offsets {
        let w1 = 0;
        let b1 = w1 + hidden * input_dim;
        let w2 = b1 + hidden;
        let b2 = w2 + hidden * hidden;
        let w3 = b2 + hidden;
        let b3 = w3 + output_dim * hidden;
        Offsets { w1, b1, w2, b2, w3, b3, end: b3 + output_dim }
    }

    /// Glorot-uniform weights, first-layer biases uniform in (-1, 1), other
    /// biases zero.
    pub fn new<R: Rng>(input_dim: usize, hidden: usize, output_dim: usize, rng: &mut R) -> Self {
        let o = Self::offsets(input_dim, hidden, output_dim);
        let mut params = vec![0.0; o.end];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-limit..limit);
            }
        };
        fill(o.w1..o.b1, input_dim, hidden);
        fill(o.w2..o.b2, hidden, hidden);
        fill(o.w3..o.b3, hidden, output_dim);
        for p in &mut params[o.b1..o.w2] {
            *p = rng.random_range(-1.0..1.0);
        }
        Mlp { input_dim, hidden, output_dim, params }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn hidden_layers(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let o = Self::offsets(self.input_dim, self.hidden, self.output_dim);
        let p = &self.params;
        let h = self.hidden;
        let h1: Vec<f64> = (0..h)
            .map(|j| {
                let row = &p[o.w1 + j * self.input_dim..o.w1 + (j + 1) * self.input_dim];
                (p[o.b1 + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh()
            })
            .collect();
        let h2: Vec<f64> = (0..h)
            .map(|j| {
                let row = &p[o.w2 + j * h..o.w2 + (j + 1) * h];
                (p[o.b2 + j] + row.iter().zip(&h1).map(|(w, v)| w * v).sum::<f64>()).tanh()
            })
            .collect();
        (h1, h2)
    }

    fn output_from(&self, h2: &[f64]) -> Vec<f64> {
        let o = Self::offsets(self.input_dim, self.hidden, self.output_dim);
        let p = &self.params;
        (0..self.output_dim)
            .map(|k| {
                let row = &p[o.w3 + k * self.hidden..o.w3 + (k + 1) * self.hidden];
                p[o.b3 + k] + row.iter().zip(h2).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let (_, h2) = self.hidden_layers(x);
        self.output_from(&h2)
    }

    /// Mean squared error over every output element of the batch.
    pub fn loss(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> f64 {
        let denom = (inputs.len() * self.output_dim) as f64;
        inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| self.forward(x).iter().zip(t.iter()).map(|(y, t)| (y - t).powi(2)).sum::<f64>())
            .sum::<f64>()
            / denom
    }

    /// Loss and its gradient with respect to [`Mlp::params`].
    pub fn loss_and_gradient(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> (f64, Vec<f64>) {
        let o = Self::offsets(self.input_dim, self.hidden, self.output_dim);
        let p = &self.params;
        let (h, din, dout) = (self.hidden, self.input_dim, self.output_dim);
        let denom = (inputs.len() * dout) as f64;
        let mut grad = vec![0.0; p.len()];
        let mut loss = 0.0;
        let mut dh2 = vec![0.0; h];
        let mut dz1 = vec![0.0; h];
        for (x, t) in inputs.iter().zip(targets) {
            let (h1, h2) = self.hidden_layers(x);
            let y = self.output_from(&h2);
            dh2.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..dout {
                let diff = y[k] - t[k];
                loss += diff * diff;
                let dy = 2.0 * diff / denom;
                grad[o.b3 + k] += dy;
                for j in 0..h {
                    grad[o.w3 + k * h + j] += dy * h2[j];
                    dh2[j] += dy * p[o.w3 + k * h + j];
                }
            }
            dz1.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..h {
                let dz2 = dh2[j] * (1.0 - h2[j] * h2[j]);
                grad[o.b2 + j] += dz2;
                for i in 0..h {
                    grad[o.w2 + j * h + i] += dz2 * h1[i];
                    dz1[i] += dz2 * p[o.w2 + j * h + i];
                }
            }
            for i in 0..h {
                let dz = dz1[i] * (1.0 - h1[i] * h1[i]);
                grad[o.b1 + i] += dz;
                for (m, xv) in x.iter().enumerate().take(din) {
                    grad[o.w1 + i * din + m] += dz * xv;
                }
            }
        }
        (loss / denom, grad)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub members: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            members: 5,
            hidden: 32,
            epochs: 150,
            learning_rate: 0.01,
            batch_size: 32,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.members < 2 {
            return Err(invalid_param("an ensemble needs at least two members"));
        }
        if self.hidden == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(invalid_param("hidden, batch_size and learning_rate must be positive"));
        }
        Ok(())
    }

    fn member_seed(&self, member: usize) -> u64 {
        self.seed ^ (member as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

fn train_member(data: &TransitionSet, dims: (usize, usize), config: &TrainConfig, member: usize) -> Result<Mlp> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.member_seed(member));
    let mut net = Mlp::new(dims.0, config.hidden, dims.1, &mut rng);
    let n = data.len();
    let mut indices: Vec<usize> =
        if config.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
    let mut adam = Adam::new(net.param_count(), config.learning_rate);
    for epoch in 0..config.epochs {
        // Cosine decay to a tenth of the initial rate.
        let progress = epoch as f64 / config.epochs.max(1) as f64;
        adam.lr = config.learning_rate * (0.1 + 0.45 * (1.0 + (PI * progress).cos()));
        indices.shuffle(&mut rng);
        for batch in indices.chunks(config.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| data.inputs[i].as_slice()).collect();
            let ts: Vec<&[f64]> = batch.iter().map(|&i| data.targets[i].as_slice()).collect();
            let (loss, grad) = net.loss_and_gradient(&xs, &ts);
            if !loss.is_finite() {
                return Err(Error::Training(format!("member {member} loss is {loss} at epoch {epoch}")));
            }
            adam.step(&mut net.params, &grad);
        }
    }
    Ok(net)
}

/// Checkpoint format version written by [`EnsembleModel::save_json`].
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub version: u32,
    pub members: Vec<Mlp>,
    /// Largest raw variance over the training inputs; `None` until trained.
    pub normalizer: Option<f64>,
    pub seeds: Vec<u64>,
}

impl EnsembleModel {
    /// Fit an ensemble to arbitrary transitions.
    pub fn fit(data: &TransitionSet, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let dims = data.dims()?;
        let members = (0..config.members)
            .into_par_iter()
            .map(|i| train_member(data, dims, config, i))
            .collect::<Result<Vec<_>>>()?;
        let mut model = EnsembleModel {
            version: CHECKPOINT_VERSION,
            members,
            normalizer: None,
            seeds: (0..config.members).map(|i| config.member_seed(i)).collect(),
        };
        let max_raw = data.inputs.iter().map(|x| model.raw_variance(x)).fold(0.0, f64::max);
        if !max_raw.is_finite() {
            return Err(Error::Training("non-finite ensemble variance".into()));
        }
        model.normalizer = Some(max_raw.max(VARIANCE_FLOOR));
        Ok(model)
    }

    /// Members with fresh random weights and no normalizer.
    pub fn untrained(input_dim: usize, output_dim: usize, config: &TrainConfig) -> Self {
        let members = (0..config.members)
            .map(|i| {
                Mlp::new(input_dim, config.hidden, output_dim, &mut ChaCha8Rng::seed_from_u64(config.member_seed(i)))
            })
            .collect();
        EnsembleModel {
            version: CHECKPOINT_VERSION,
            members,
            normalizer: None,
            seeds: (0..config.members).map(|i| config.member_seed(i)).collect(),
        }
    }

    pub fn predictions(&self, input: &[f64]) -> Vec<Vec<f64>> {
        self.members.iter().map(|m| m.forward(input)).collect()
    }

    pub fn mean_prediction(&self, input: &[f64]) -> Vec<f64> {
        let preds = self.predictions(input);
        let n = preds.len() as f64;
        (0..preds[0].len()).map(|k| preds.iter().map(|p| p[k]).sum::<f64>() / n).collect()
    }

    /// Variance across members, per output dimension.
    pub fn variance_per_output(&self, input: &[f64]) -> Vec<f64> {
        let preds = self.predictions(input);
        let n = preds.len() as f64;
        (0..preds[0].len())
            .map(|k| {
                // Deviations from the first member keep agreeing members at exactly zero.
                let d: Vec<f64> = preds.iter().map(|p| p[k] - preds[0][k]).collect();
                let mean = d.iter().sum::<f64>() / n;
                d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
            })
            .collect()
    }

    /// Mean over output dimensions of the across-member variance.
    pub fn raw_variance(&self, input: &[f64]) -> f64 {
        let v = self.variance_per_output(input);
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Raw variance relative to an explicit normalizer, clamped to `[0, 1]`.
    pub fn normalized(&self, input: &[f64], normalizer: f64) -> f64 {
        (self.raw_variance(input) / normalizer).clamp(0.0, 1.0)
    }

    pub fn normalizer(&self) -> Result<f64> {
        self.normalizer.ok_or_else(|| Error::State("model has not been trained".into()))
    }

    /// Normalized uncertainty for an arbitrary input vector.
    pub fn uncertainty_at(&self, input: &[f64]) -> Result<f64> {
        Ok(self.normalized(input, self.normalizer()?))
    }

    /// Normalized uncertainty at an arm state.
    pub fn uncertainty(&self, state: &ArmState) -> Result<f64> {
        self.uncertainty_at(&state.features())
    }

    pub fn save_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn load_json<R: std::io::Read>(input: R) -> Result<Self> {
        let model: EnsembleModel = serde_json::from_reader(input)?;
        if model.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!("unsupported checkpoint version {}", model.version)));
        }
        Ok(model)
    }
}

/// Train a behavior-cloning ensemble on demonstrations.
pub fn train(demos: &[Demonstration], config: &TrainConfig) -> Result<EnsembleModel> {
    if demos.is_empty() || demos.iter().all(|d| d.is_empty()) {
        return Err(Error::InvalidInput("no demonstrations to train on".into()));
    }
    for d in demos {
        d.validate()?;
    }
    EnsembleModel::fit(&TransitionSet::from_demos(demos)?, config)
}

/// Normalized uncertainty of a trained model at `state`.
pub fn uncertainty(model: &EnsembleModel, state: &ArmState) -> Result<f64> {
    model.uncertainty(state)
}

/// Welding features, in the order the display channels carry them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    EdgeDistance,
    Height,
    Orientation,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::EdgeDistance, Feature::Height, Feature::Orientation];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Feature> {
        Self::ALL.get(i).copied()
    }
}

/// One sample of a welding trajectory: position along the seam plus the
/// three feature values (edge distance m, height m, orientation rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeldSample {
    pub t: f64,
    pub seam: f64,
    pub features: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeldTrajectory {
    pub samples: Vec<WeldSample>,
}

impl WeldTrajectory {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Distance covered along the seam.
    pub fn seam_length(&self) -> f64 {
        self.samples.windows(2).map(|w| (w[1].seam - w[0].seam).abs()).sum()
    }
}

/// Signed deviation of each feature from its target, angle wrapped.
pub fn feature_errors(features: &[f64; 3], targets: &[f64; 3]) -> [f64; 3] {
    [features[0] - targets[0], features[1] - targets[1], wrap_angle(features[2] - targets[2])]
}

fn feature_scale(f: usize) -> (f64, f64) {
    // (input scale, action scale)
    if f == Feature::Orientation.index() {
        (PI, MAX_ANGULAR_SPEED * ACTION_DT)
    } else {
        (POSITION_SCALE, MAX_LINEAR_SPEED * ACTION_DT)
    }
}

/// One single-input ensemble per feature. Each head maps its feature's
/// deviation from target to the demonstrated correction of that feature, so a
/// feature whose corrections were never demonstrated reports high uncertainty
/// without affecting the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEnsemble {
    pub targets: [f64; 3],
    pub heads: Vec<EnsembleModel>,
}

impl FeatureEnsemble {
    pub fn train(trajectories: &[WeldTrajectory], targets: [f64; 3], config: &TrainConfig) -> Result<Self> {
        let mut sets = vec![TransitionSet::default(); 3];
        for traj in trajectories {
            for w in traj.samples.windows(2) {
                let dt = w[1].t - w[0].t;
                if !(dt > 0.0) {
                    return Err(Error::InvalidInput("weld trajectory timestamps must increase".into()));
                }
                let err = feature_errors(&w[0].features, &targets);
                let delta = feature_errors(&w[1].features, &w[0].features);
                for (f, set) in sets.iter_mut().enumerate() {
                    let (xs, ys) = feature_scale(f);
                    set.push(vec![err[f] / xs], vec![delta[f] * (ACTION_DT / dt) / ys]);
                }
            }
        }
        if sets[0].is_empty() {
            return Err(Error::InvalidInput("no weld transitions to train on".into()));
        }
        let heads = sets
            .iter()
            .enumerate()
            .map(|(f, set)| EnsembleModel::fit(set, &config.with_seed(config.seed.wrapping_add(f as u64 * 7919))))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureEnsemble { targets, heads })
    }

    pub fn uncertainty(&self, features: &[f64; 3]) -> Result<[f64; 3]> {
        let err = feature_errors(features, &self.targets);
        let mut out = [0.0; 3];
        for (f, head) in self.heads.iter().enumerate() {
            out[f] = head.uncertainty_at(&[err[f] / feature_scale(f).0])?;
        }
        Ok(out)
    }
}

/// Where per-feature uncertainty comes from.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureSource<'a> {
    pub learned: Option<&'a FeatureEnsemble>,
    pub schedule: Option<&'a UncertaintySchedule>,
}

/// Per-feature uncertainty for the current feature values, `progress` being
/// the fraction of the task completed. A schedule takes precedence over a
/// learned model.
pub fn feature_uncertainty(source: &FeatureSource<'_>, features: &[f64; 3], progress: f64) -> Result<[f64; 3]> {
    match (source.schedule, source.learned) {
        (Some(schedule), _) => Ok(schedule.emphasis_at(progress)),
        (None, Some(model)) => model.uncertainty(features),
        (None, None) => Err(Error::Configuration("no feature uncertainty source configured".into())),
    }
}
