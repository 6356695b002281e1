use std::io::Write;

use serde::{Deserialize, Serialize};

use super::path::{NominalPath, PathRange};
use crate::error::{invalid_param, Error, Result};
use crate::learner::Demonstration;

/// End-effector speed below which the arm counts as idle, m/s.
pub const IDLE_SPEED: f64 = 1e-3;

/// Outcome measures of one session. Fields that do not apply to the task
/// are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Duration of the teaching demonstration including idle time, s.
    pub teaching_time: f64,
    pub idle_time: f64,
    pub correct_segment: Option<f64>,
    pub improvement_u: Option<f64>,
    pub u1: Option<f64>,
    pub u2: Option<f64>,
    pub improvement_weld: Option<f64>,
    pub e_init: Option<f64>,
    pub e: Option<f64>,
}

/// Header of the metrics CSV.
pub const METRICS_CSV_HEADER: [&str; 13] = [
    "session",
    "task",
    "feedback",
    "seed",
    "teaching_time",
    "idle_time",
    "correct_segment",
    "improvement_u",
    "u1",
    "u2",
    "improvement_weld",
    "e_init",
    "e",
];

/// One row of a metrics export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub session: String,
    pub task: String,
    pub feedback: String,
    pub seed: u64,
    pub metrics: Metrics,
}

/// Write metric rows as CSV; inapplicable fields are empty.
pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.session.clone(),
            r.task.clone(),
            r.feedback.clone(),
            r.seed.to_string(),
            m.teaching_time.to_string(),
            m.idle_time.to_string(),
            opt(m.correct_segment),
            opt(m.improvement_u),
            opt(m.u1),
            opt(m.u2),
            opt(m.improvement_weld),
            opt(m.e_init),
            opt(m.e),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Percent of the demonstration's arc length whose nominal progress lies in
/// `region`. Each sample-to-sample step is attributed by its midpoint.
pub fn correct_segment(demo: &Demonstration, region: &PathRange, path: &NominalPath) -> Result<f64> {
    if region.is_empty() {
        return Err(invalid_param("uncertain region is empty"));
    }
    let (mut inside, mut total) = (0.0, 0.0);
    for w in demo.samples.windows(2) {
        let (a, b) = (&w[0].state, &w[1].state);
        let d = a.distance(b);
        let mid = crate::learner::ArmState { x: 0.5 * (a.x + b.x), y: 0.5 * (a.y + b.y), theta: a.theta };
        if region.contains(path.project(&mid)) {
            inside += d;
        }
        total += d;
    }
    if !(total > 0.0) {
        return Err(Error::InvalidInput("demonstration has no arc length".into()));
    }
    Ok((100.0 * inside / total).clamp(0.0, 100.0))
}

/// Percent reduction from `u1` to `u2`.
pub fn improvement_uncertainty(u1: f64, u2: f64) -> Result<f64> {
    if !(u1 > 0.0) {
        return Err(invalid_param(format!("initial uncertainty must be positive, got {u1}")));
    }
    Ok((u1 - u2) / u1 * 100.0)
}

/// Total time spent in sample intervals slower than [`IDLE_SPEED`].
pub fn idle_time(demo: &Demonstration) -> f64 {
    demo.samples
        .windows(2)
        .filter(|w| {
            let dt = w[1].t - w[0].t;
            w[0].state.distance(&w[1].state) < IDLE_SPEED * dt
        })
        .map(|w| w[1].t - w[0].t)
        .fold(0.0, |a, b| a + b)
}
