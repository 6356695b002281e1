//! Kinesthetic teaching sessions and the measures computed from them.
//!
//! A session has two demonstrations. During the first the teacher walks the
//! whole task while the robot's uncertainty is rendered; for the second the
//! teacher re-teaches only the stretch they judged uncertain. Welding tasks
//! instead guide the teacher toward feature targets.

mod metrics;
mod path;
mod session;
mod task;
mod teacher;
mod welding;

pub use metrics::{
    correct_segment, idle_time, improvement_uncertainty, write_metrics_csv, Metrics, MetricsRow, IDLE_SPEED,
    METRICS_CSV_HEADER,
};
pub use path::{NominalPath, PathRange};
pub use session::{
    FeedbackFrame, FeedbackMode, FeedbackRenderer, Phase, SessionEvent, SessionRecord, TeachingConfig, TeachingContext,
    GRASP_LOCATION, RENDER_RATE_HZ,
};
pub use task::{Segment, TaskSpec, WeldSpec, BUILTIN_TASKS};
pub use teacher::{
    traverse, FeedbackIgnoringTeacher, MotionProfile, Perception, TeacherPolicy, ThresholdTeacher, Traverser,
};
pub use welding::{
    improvement_weld, run_weld_session, uncertainty_schedule, weld_error, weld_idle_time, weld_metrics, welding_task,
    UncertaintySchedule, WeldRecord, WeldTeacher,
};
