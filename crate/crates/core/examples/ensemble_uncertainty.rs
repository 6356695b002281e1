//! Train the behavior-cloning ensemble on expert demonstrations that skip the
//! middle of a task and print its uncertainty along the path.

use wrapped_haptics::learner::{train, EnsembleModel, TrainConfig};
use wrapped_haptics::teaching::{MotionProfile, TaskSpec};

fn main() -> wrapped_haptics::Result<()> {
    let task = TaskSpec::builtin("cleaning-middle")?;
    let experts = task.expert_demos(5, &MotionProfile::expert(), 0)?;
    let pieces = task.withhold(&experts);
    println!("{} expert demos cut into {} pieces around the withheld segment", experts.len(), pieces.len());

    let model = train(&pieces, &TrainConfig::default())?;
    println!("normalizer (max training variance): {:.2e}", model.normalizer()?);

    let path = &task.nominal_path;
    for state in path.sample(21) {
        let s = path.project(&state);
        let u = model.uncertainty(&state)?;
        let bar = "#".repeat((u * 40.0).round() as usize);
        let tag = if task.is_known(s) { "known   " } else { "withheld" };
        println!("{s:.2} {tag} {u:5.3} {bar}");
    }

    let mut checkpoint = Vec::new();
    model.save_json(&mut checkpoint)?;
    let restored = EnsembleModel::load_json(checkpoint.as_slice())?;
    println!("checkpoint: {} bytes, restores identically: {}", checkpoint.len(), restored == model);
    Ok(())
}
