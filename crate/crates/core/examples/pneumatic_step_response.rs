//! Step responses of the sleeve and ring channels, plus a 1 Hz square wave
//! between the rendering limits.

use wrapped_haptics::pneumatics::{settle_time, Channel, ChannelSpec, PlantConfig};

fn main() -> wrapped_haptics::Result<()> {
    let config = PlantConfig::default();
    for (name, spec) in [("sleeve", ChannelSpec::sleeve()), ("ring", ChannelSpec::ring())] {
        println!(
            "{name}: tau_up {:.3} s, tau_down {:.3} s, 1->3 psi in {:.3} s, 3->1 psi in {:.3} s, 0->3 psi in {:.3} s",
            spec.tau_up,
            spec.tau_down,
            settle_time(&spec, 1.0, 3.0, &config)?,
            settle_time(&spec, 3.0, 1.0, &config)?,
            settle_time(&spec, 0.0, 3.0, &config)?,
        );
    }

    let mut sleeve = Channel::new(ChannelSpec::sleeve(), 1.0);
    println!("\nsleeve under a 1 Hz 1/3 psi square wave (sampled every 100 ms):");
    for cycle in 0..2 {
        for (command, label) in [(3.0, "high"), (1.0, "low")] {
            sleeve.command(command);
            let samples: Vec<String> = (0..5)
                .map(|_| {
                    sleeve.advance(0.1, &config);
                    format!("{:.2}", sleeve.pressure())
                })
                .collect();
            println!("  cycle {cycle} {label:>4}: {}", samples.join(" "));
        }
    }
    Ok(())
}
