//! Teach the middle-withheld cleaning task under each feedback mode and
//! compare a pressure-reactive teacher with one that ignores feedback.

use wrapped_haptics::teaching::{
    FeedbackIgnoringTeacher, FeedbackMode, TaskSpec, TeacherPolicy, TeachingConfig, TeachingContext, ThresholdTeacher,
};

fn main() -> wrapped_haptics::Result<()> {
    let task = TaskSpec::builtin("cleaning-middle")?;
    let ctx = TeachingContext::new(task, TeachingConfig::default())?;
    let (withheld, known) = ctx.segment_uncertainty()?;
    println!("initial uncertainty: withheld {withheld:.3}, known {known:.3}");

    for mode in FeedbackMode::ALL {
        let mut teacher = ThresholdTeacher::new(7);
        let record = ctx.run_session(&mut teacher, mode, 7)?;
        let region = teacher.region();
        let m = ctx.metrics(&record)?;
        println!(
            "{mode:>6}: re-taught [{:.2}, {:.2}]  teaching {:.2} s  correct {:.1}%  improvement {:.1}%  frames {}",
            region.start,
            region.end,
            m.teaching_time,
            m.correct_segment.unwrap_or(f64::NAN),
            m.improvement_u.unwrap_or(f64::NAN),
            record.frames.len()
        );
        if mode == FeedbackMode::Global {
            let budget = region.len();
            let mut blind = FeedbackIgnoringTeacher::random(budget, 7)?;
            let r = ctx.run_session(&mut blind, mode, 7)?;
            let b = ctx.metrics(&r)?;
            println!(
                "  blind, same budget [{:.2}, {:.2}]: correct {:.1}%  improvement {:.1}%",
                blind.range.start,
                blind.range.end,
                b.correct_segment.unwrap_or(f64::NAN),
                b.improvement_u.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
