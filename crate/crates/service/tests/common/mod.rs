#![allow(dead_code)]

use std::path::Path;
use std::sync::{Arc, OnceLock};

use wrapped_haptics::teaching::{TaskSpec, TeachingConfig, TeachingContext};
use wrapped_haptics_service::clock::{Clock, ManualClock};
use wrapped_haptics_service::sessions::{PoseSample, SampleBatch};
use wrapped_haptics_service::Service;

pub const TASK: &str = "cleaning-middle";

pub fn context() -> Arc<TeachingContext> {
    static CTX: OnceLock<Arc<TeachingContext>> = OnceLock::new();
    CTX.get_or_init(|| {
        Arc::new(TeachingContext::new(TaskSpec::builtin(TASK).unwrap(), TeachingConfig::default()).unwrap())
    })
    .clone()
}

pub fn service_with(dir: &Path, clock: Arc<dyn Clock>) -> Service {
    let service = Service::open(dir, clock).unwrap();
    service.insert_context(context());
    service
}

pub fn service(dir: &Path) -> (Service, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(1_000.0));
    (service_with(dir, clock.clone()), clock)
}

/// `n` samples along the whole nominal path, `dt` apart.
pub fn full_path(n: usize, dt: f64) -> Vec<PoseSample> {
    let path = &context().task.nominal_path;
    (0..n)
        .map(|i| {
            let p = path.point_at(i as f64 / (n - 1) as f64);
            PoseSample { t: i as f64 * dt, x: p.x, y: p.y, theta: p.theta }
        })
        .collect()
}

/// `n` samples over the withheld stretch, starting at `t0`.
pub fn withheld_stretch(n: usize, t0: f64) -> Vec<PoseSample> {
    let ctx = context();
    let region = ctx.task.uncertain_region().unwrap();
    (0..n)
        .map(|i| {
            let s = region.start + region.len() * i as f64 / (n - 1) as f64;
            let p = ctx.task.nominal_path.point_at(s);
            PoseSample { t: t0 + i as f64 * 0.05, x: p.x, y: p.y, theta: p.theta }
        })
        .collect()
}

pub fn batch(demo: u8, samples: &[PoseSample], end: bool, token: Option<&str>) -> SampleBatch {
    SampleBatch { demo, samples: samples.to_vec(), end, client_token: token.map(str::to_owned) }
}

pub fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}
