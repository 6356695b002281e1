//! Welding sessions: per-feature uncertainty drives three channels and the
//! scripted welder corrects whatever feature it is told about.

use wrapped_haptics::learner::FeatureSource;
use wrapped_haptics::teaching::{
    run_weld_session, uncertainty_schedule, weld_metrics, welding_task, FeedbackMode, WeldTeacher,
};

fn main() -> wrapped_haptics::Result<()> {
    let seed = 4;
    let task = welding_task(seed)?;
    let schedule = uncertainty_schedule(&task, seed)?;
    println!("uncertain feature per third: {:?}", schedule.order);
    println!("e_max = {:.3}", task.e_max()?);

    let source = FeatureSource { learned: None, schedule: Some(&schedule) };
    for mode in FeedbackMode::ALL {
        let record = run_weld_session(&task, &source, &WeldTeacher::default(), mode, seed)?;
        let m = weld_metrics(&record, &task)?;
        println!(
            "{mode:>6}: e_init {:.4}  e {:.4}  improvement {:5.2}%  teaching {:.1} s  idle {:.1} s  frames {}",
            m.e_init.unwrap_or(f64::NAN),
            m.e.unwrap_or(f64::NAN),
            m.improvement_weld.unwrap_or(f64::NAN),
            m.teaching_time,
            m.idle_time,
            record.frames.len()
        );
    }
    Ok(())
}
