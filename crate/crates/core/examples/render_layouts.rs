//! Render one uncertainty vector on the Local and Global layouts and let the
//! ring plant track it.

use wrapped_haptics::display::{apply_frame, render, DisplayPlant, Layout};
use wrapped_haptics::pneumatics::PlantConfig;

fn main() -> wrapped_haptics::Result<()> {
    let uncertainty = [0.1, 0.85, 0.4];
    println!("uncertainty per channel: {uncertainty:?}");
    for layout in [Layout::default_local(), Layout::default_global()] {
        let frame = render(&layout, &uncertainty, 0.0)?;
        println!("\n{:?} layout, {} rings:", layout.mode, layout.ring_count());
        println!("  {}", serde_json::to_string(&frame)?);

        let mut plant = DisplayPlant::for_layout(&layout, 1.0);
        apply_frame(&frame, &mut plant)?;
        for ms in [50, 150, 400, 1000] {
            plant.advance(ms as f64 / 1000.0 - plant.time, &PlantConfig::default());
            let felt = plant.snapshot();
            let at: Vec<String> = felt
                .locations
                .iter()
                .map(|l| {
                    format!(
                        "{}={:.2?}",
                        l.id,
                        l.pressures.iter().map(|p| (p * 100.0).round() / 100.0).collect::<Vec<_>>()
                    )
                })
                .collect();
            println!("  t={ms:>4} ms  {}", at.join("  "));
        }
    }
    Ok(())
}
