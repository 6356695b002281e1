//! Pressure dynamics of a single display channel.
//!
//! Each channel (a sleeve or a ring) is an asymmetric first-order lag toward
//! the regulator command: inflation uses `tau_up`, deflation the faster
//! `tau_down`. Pressures are gauge psi. A channel counts as settled once it is
//! within 5% of the commanded step, so a settle time `t` corresponds to a time
//! constant `t / ln 20`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};

/// Fraction of the step magnitude that still separates a settled channel from
/// its target.
pub const SETTLE_BAND: f64 = 0.05;

/// Measured step-response times of the sleeve display, seconds.
pub const SLEEVE_INFLATE_1_TO_3: f64 = 0.72;
pub const SLEEVE_DEFLATE_3_TO_1: f64 = 0.18;
/// Measured step-response times of the ring display, seconds.
pub const RING_INFLATE_1_TO_3: f64 = 0.38;
pub const RING_DEFLATE_3_TO_1: f64 = 0.12;

/// Time for an empty display to exceed 1.5 psi. Volume filling, not used for
/// calibration.
pub const SLEEVE_FILL_FROM_EMPTY: f64 = 0.86;
pub const RING_FILL_FROM_EMPTY: f64 = 0.55;

pub const SLEEVE_MAX_PRESSURE: f64 = 3.5;
pub const RING_MAX_PRESSURE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// 1-DoF sleeve of three bags wrapped around the arm.
    Sleeve,
    /// Narrow ring display; three side by side form a 3-DoF group.
    Ring,
}

impl ChannelKind {
    pub fn max_pressure(self) -> f64 {
        match self {
            ChannelKind::Sleeve => SLEEVE_MAX_PRESSURE,
            ChannelKind::Ring => RING_MAX_PRESSURE,
        }
    }

    /// Measured (inflate 1→3 psi, deflate 3→1 psi) settle times.
    pub fn measured_transitions(self) -> (Transition, Transition) {
        let (up, down) = match self {
            ChannelKind::Sleeve => (SLEEVE_INFLATE_1_TO_3, SLEEVE_DEFLATE_3_TO_1),
            ChannelKind::Ring => (RING_INFLATE_1_TO_3, RING_DEFLATE_3_TO_1),
        };
        (Transition { from: 1.0, to: 3.0, settle_time: up }, Transition { from: 3.0, to: 1.0, settle_time: down })
    }
}

/// A measured step response: pressure moved `from` → `to` in `settle_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: f64,
    pub to: f64,
    pub settle_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub max_pressure: f64,
    pub tau_up: f64,
    pub tau_down: f64,
}

impl ChannelSpec {
    /// Spec calibrated to the measured step responses of `kind`.
    pub fn calibrated(kind: ChannelKind) -> Self {
        let (up, down) = kind.measured_transitions();
        // Both measured transitions are valid by construction.
        let tau_up = calibrate_tau(kind, up).expect("measured inflation transition");
        let tau_down = calibrate_tau(kind, down).expect("measured deflation transition");
        ChannelSpec { kind, max_pressure: kind.max_pressure(), tau_up, tau_down }
    }

    pub fn sleeve() -> Self {
        Self::calibrated(ChannelKind::Sleeve)
    }

    pub fn ring() -> Self {
        Self::calibrated(ChannelKind::Ring)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_down > 0.0 && self.tau_up > self.tau_down) {
            return Err(invalid_param(format!(
                "time constants must satisfy tau_up > tau_down > 0 (got {} / {})",
                self.tau_up, self.tau_down
            )));
        }
        if !(self.max_pressure > 0.0) {
            return Err(invalid_param("max_pressure must be positive"));
        }
        Ok(())
    }

    fn tau_for(&self, pressure: f64, commanded: f64) -> f64 {
        if commanded > pressure {
            self.tau_up
        } else {
            self.tau_down
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureChannelState {
    /// Gauge pressure, psi.
    pub pressure: f64,
    pub commanded: f64,
    pub time: f64,
}

impl PressureChannelState {
    /// Channel resting at `pressure` with an identical command.
    pub fn at_rest(pressure: f64) -> Self {
        PressureChannelState { pressure, commanded: pressure, time: 0.0 }
    }

    pub fn with_command(mut self, commanded: f64) -> Self {
        self.commanded = commanded;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub dt: f64,
    pub seed: u64,
    /// Standard deviation of the pressure sensor reading, psi. Only affects
    /// [`PressureSensor::read`], never the plant state.
    pub sensor_noise_sd: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig { dt: 1e-3, seed: 0, sensor_noise_sd: 0.0 }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid_param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.sensor_noise_sd >= 0.0) {
            return Err(invalid_param("sensor_noise_sd must be non-negative"));
        }
        Ok(())
    }
}

/// Time constant that makes a first-order response enter the settle band of
/// `transition` exactly at its settle time.
pub fn calibrate_tau(kind: ChannelKind, transition: Transition) -> Result<f64> {
    let Transition { from, to, settle_time } = transition;
    if !(settle_time > 0.0 && settle_time.is_finite()) {
        return Err(invalid_param(format!("settle_time must be positive, got {settle_time}")));
    }
    if from == to || !from.is_finite() || !to.is_finite() {
        return Err(invalid_param("transition endpoints must differ"));
    }
    let max = kind.max_pressure();
    if !(0.0..=max).contains(&from) || !(0.0..=max).contains(&to) {
        return Err(invalid_param(format!("transition outside 0..={max} psi")));
    }
    Ok(settle_time / (1.0 / SETTLE_BAND).ln())
}

/// Advance one channel by `config.dt`.
///
/// The command is clamped into `[0, max_pressure]` first. The lag is
/// integrated with its exact zero-order-hold solution, which equals the
/// forward-Euler update to first order in `dt/tau` and never overshoots.
pub fn step(state: PressureChannelState, spec: &ChannelSpec, config: &PlantConfig) -> PressureChannelState {
    let commanded = state.commanded.clamp(0.0, spec.max_pressure);
    let tau = spec.tau_for(state.pressure, commanded);
    let alpha = -(-config.dt / tau).exp_m1();
    let pressure = (state.pressure + alpha * (commanded - state.pressure)).clamp(0.0, spec.max_pressure);
    PressureChannelState { pressure, commanded, time: state.time + config.dt }
}

/// Simulated time for a channel at rest at `from` to settle at `to`.
pub fn settle_time(spec: &ChannelSpec, from: f64, to: f64, config: &PlantConfig) -> Result<f64> {
    config.validate()?;
    spec.validate()?;
    if from == to {
        return Err(invalid_param("settle_time needs distinct endpoints"));
    }
    for p in [from, to] {
        if !(0.0..=spec.max_pressure).contains(&p) {
            return Err(invalid_param(format!(
                "{p} psi is unreachable for a channel rated to {} psi",
                spec.max_pressure
            )));
        }
    }
    let band = SETTLE_BAND * (to - from).abs();
    let slowest = spec.tau_up.max(spec.tau_down);
    // Settling takes ln(20)·tau; allow a generous margin before giving up.
    let max_steps = ((20.0 * slowest) / config.dt).ceil() as u64 + 1;
    let mut state = PressureChannelState::at_rest(from).with_command(to);
    for n in 1..=max_steps {
        state = step(state, spec, config);
        if (state.pressure - to).abs() <= band {
            return Ok(n as f64 * config.dt);
        }
    }
    Err(invalid_param("channel did not settle"))
}

/// A channel bundled with its spec, stepped in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub spec: ChannelSpec,
    pub state: PressureChannelState,
}

impl Channel {
    pub fn new(spec: ChannelSpec, initial_pressure: f64) -> Self {
        let p = initial_pressure.clamp(0.0, spec.max_pressure);
        Channel { spec, state: PressureChannelState::at_rest(p) }
    }

    /// Set the regulator command, clamped to the channel's rating.
    pub fn command(&mut self, psi: f64) {
        self.state.commanded = psi.clamp(0.0, self.spec.max_pressure);
    }

    pub fn step(&mut self, config: &PlantConfig) {
        self.state = step(self.state, &self.spec, config);
    }

    /// Step until `duration` has elapsed (rounded to whole steps).
    pub fn advance(&mut self, duration: f64, config: &PlantConfig) {
        let steps = (duration / config.dt).round() as u64;
        for _ in 0..steps {
            self.step(config);
        }
    }

    pub fn pressure(&self) -> f64 {
        self.state.pressure
    }

    /// True once the pressure is within the settle band of a step of
    /// `step_magnitude` toward the current command.
    pub fn is_settled(&self, step_magnitude: f64) -> bool {
        (self.state.pressure - self.state.commanded).abs() <= SETTLE_BAND * step_magnitude.abs()
    }
}

/// Noisy pressure readings. Noise never feeds back into the plant.
#[derive(Debug, Clone)]
pub struct PressureSensor {
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl PressureSensor {
    pub fn new(config: &PlantConfig) -> Result<Self> {
        config.validate()?;
        let noise = if config.sensor_noise_sd > 0.0 {
            Some(Normal::new(0.0, config.sensor_noise_sd).map_err(|e| invalid_param(e.to_string()))?)
        } else {
            None
        };
        Ok(PressureSensor { rng: ChaCha8Rng::seed_from_u64(config.seed), noise })
    }

    pub fn read(&mut self, state: &PressureChannelState) -> f64 {
        match &self.noise {
            Some(n) => state.pressure + n.sample(&mut self.rng),
            None => state.pressure,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Forward-simulate with the plain Euler recurrence until the predicate
    /// holds; returns elapsed time.
    fn euler_until(tau: f64, from: f64, to: f64, dt: f64, done: impl Fn(f64) -> bool) -> f64 {
        let mut p = from;
        let mut t = 0.0;
        while !done(p) {
            p += dt * (to - p) / tau;
            t += dt;
        }
        t
    }

    #[test]
    fn calibrated_time_constants() {
        let ln20 = 20f64.ln();
        let sleeve = ChannelSpec::sleeve();
        let ring = ChannelSpec::ring();
        assert!((sleeve.tau_up - 0.2404).abs() < 1e-4);
        assert!((sleeve.tau_down - 0.0601).abs() < 1e-4);
        assert!((ring.tau_up - 0.1268).abs() < 1e-4);
        assert!((ring.tau_down - 0.12 / ln20).abs() < 1e-12);
        sleeve.validate().unwrap();
        ring.validate().unwrap();
        assert_eq!(sleeve.max_pressure, 3.5);
        assert_eq!(ring.max_pressure, 5.0);
    }

    #[test]
    fn calibration_agrees_with_euler_oracle() {
        let dt = 1e-3;
        let tau = calibrate_tau(ChannelKind::Sleeve, Transition { from: 1.0, to: 3.0, settle_time: 0.72 }).unwrap();
        let t = euler_until(tau, 1.0, 3.0, dt, |p| p >= 2.9);
        assert!((t - 0.72).abs() < 0.72 * 0.02, "euler oracle settled at {t}");
        let tau = calibrate_tau(ChannelKind::Sleeve, Transition { from: 3.0, to: 1.0, settle_time: 0.18 }).unwrap();
        let t = euler_until(tau, 3.0, 1.0, dt, |p| p <= 1.1);
        assert!((t - 0.18).abs() < 0.18 * 0.02, "euler oracle settled at {t}");
    }

    #[test]
    fn calibrate_rejects_bad_parameters() {
        let bad = |from, to, settle_time| calibrate_tau(ChannelKind::Ring, Transition { from, to, settle_time });
        assert!(bad(1.0, 3.0, 0.0).is_err());
        assert!(bad(1.0, 3.0, -0.2).is_err());
        assert!(bad(2.0, 2.0, 0.3).is_err());
        assert!(bad(1.0, 6.0, 0.3).is_err());
    }

    #[test]
    fn fixed_point_is_unchanged() {
        let spec = ChannelSpec::sleeve();
        let s = PressureChannelState::at_rest(2.2);
        let next = step(s, &spec, &PlantConfig::default());
        assert_eq!(next.pressure, 2.2);
        assert!((next.time - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn sleeve_step_responses() {
        let config = PlantConfig::default();
        let mut ch = Channel::new(ChannelSpec::sleeve(), 1.0);
        ch.command(3.0);
        ch.advance(0.72, &config);
        assert!(ch.pressure() >= 2.9 - 1e-9 && ch.pressure() <= 3.0, "{}", ch.pressure());

        let mut ch = Channel::new(ChannelSpec::sleeve(), 3.0);
        ch.command(1.0);
        ch.advance(0.18, &config);
        assert!(ch.pressure() >= 1.0 && ch.pressure() <= 1.1 + 1e-9, "{}", ch.pressure());
    }

    #[test]
    fn commands_are_clamped() {
        let spec = ChannelSpec::sleeve();
        let s = PressureChannelState::at_rest(3.4).with_command(9.0);
        let next = step(s, &spec, &PlantConfig::default());
        assert_eq!(next.commanded, 3.5);
        let s = PressureChannelState::at_rest(0.1).with_command(-4.0);
        assert_eq!(step(s, &spec, &PlantConfig::default()).commanded, 0.0);
    }

    #[test]
    fn settle_times_match_measurements() {
        let config = PlantConfig::default();
        let cases = [
            (ChannelSpec::sleeve(), 1.0, 3.0, 0.72),
            (ChannelSpec::sleeve(), 3.0, 1.0, 0.18),
            (ChannelSpec::ring(), 1.0, 3.0, 0.38),
            (ChannelSpec::ring(), 3.0, 1.0, 0.12),
        ];
        for (spec, from, to, expected) in cases {
            let t = settle_time(&spec, from, to, &config).unwrap();
            assert!((t - expected).abs() <= config.dt + 1e-12, "{spec:?} {from}->{to}: {t}");
        }
    }

    #[test]
    fn settle_time_errors() {
        let config = PlantConfig::default();
        let spec = ChannelSpec::sleeve();
        assert!(settle_time(&spec, 2.0, 2.0, &config).is_err());
        assert!(settle_time(&spec, 1.0, 4.0, &config).is_err());
        let bad_dt = PlantConfig { dt: 0.0, ..config };
        assert!(settle_time(&spec, 1.0, 2.0, &bad_dt).is_err());
    }

    #[test]
    fn fill_from_empty_sleeve_within_loose_band() {
        // Volume filling is a different regime; only a loose check applies.
        let t = settle_time(&ChannelSpec::sleeve(), 0.0, 1.5, &PlantConfig::default()).unwrap();
        assert!((t - SLEEVE_FILL_FROM_EMPTY).abs() <= 0.3 * SLEEVE_FILL_FROM_EMPTY, "{t}");
    }

    #[test]
    fn fill_from_empty_ring_is_faster_than_measured() {
        // The lag model fills the ring in ln(20)·tau_up = 0.38 s, about 31%
        // under the measured 0.55 s; the filling phase is not modeled.
        let t = settle_time(&ChannelSpec::ring(), 0.0, 1.5, &PlantConfig::default()).unwrap();
        assert!(t < RING_FILL_FROM_EMPTY);
        assert!((t - RING_INFLATE_1_TO_3).abs() <= PlantConfig::default().dt + 1e-9, "{t}");
    }

    #[test]
    fn sensor_noise_is_seeded_and_leaves_state_alone() {
        let config = PlantConfig { sensor_noise_sd: 0.05, seed: 7, ..Default::default() };
        let s = PressureChannelState::at_rest(2.0);
        let mut a = PressureSensor::new(&config).unwrap();
        let mut b = PressureSensor::new(&config).unwrap();
        let ra: Vec<f64> = (0..5).map(|_| a.read(&s)).collect();
        let rb: Vec<f64> = (0..5).map(|_| b.read(&s)).collect();
        assert_eq!(ra, rb);
        assert!(ra.iter().any(|r| *r != 2.0));
        let quiet = PlantConfig::default();
        assert_eq!(PressureSensor::new(&quiet).unwrap().read(&s), 2.0);
    }
}
