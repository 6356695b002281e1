//! Desk-scale simulator for wrapped pneumatic haptic displays.
//!
//! The crate models the pressure dynamics of soft inflatable displays wrapped
//! around a robot arm, renders learner uncertainty as pressure, generates and
//! analyzes forced-choice psychophysics experiments, and runs scripted
//! kinesthetic teaching sessions whose metrics can be recomputed from logs.
//!
//! - [`pneumatics`]: asymmetric first-order pressure plant per channel.
//! - [`display`]: display geometry, Local/Global layouts and the
//!   uncertainty-to-pressure mapping.
//! - [`learner`]: ensemble behavior cloning and its uncertainty estimate.
//! - [`psychophysics`]: protocols, sigmoid fits, JND, bias, timing,
//!   confusion matrices and the Wilcoxon signed-rank test.
//! - [`teaching`]: tasks, scripted teachers, sessions and teaching metrics.
//!
//! See the `examples/` directory for one runnable program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod display;
pub mod error;
pub mod learner;
pub mod pneumatics;
pub mod psychophysics;
pub mod teaching;

pub use error::{Error, Result};
