//! Odd-one-out experiment on the Local and Global layouts with a simulated
//! participant: confusion matrices and response times per channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wrapped_haptics::psychophysics::{
    confusion_matrix, time_summary, MethodOrder, TrialResponse, TripletChannel, TripletObserver, TripletProtocol,
};

fn main() -> wrapped_haptics::Result<()> {
    let protocol = TripletProtocol::generate(3, MethodOrder::LocalFirst);
    println!("P_o = {} psi, P_H = {} psi, delta {} psi", protocol.reference, protocol.high, protocol.delta());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for block in &protocol.blocks {
        let mut observer = TripletObserver::new(0.93, 3);
        let responses: Vec<TrialResponse> = block
            .trials
            .iter()
            .map(|t| TrialResponse::triplet(t, observer.answer(t), rng.random_range(6.0..22.0)))
            .collect();
        let m = confusion_matrix(&responses)?;
        println!(
            "\n{} ({} trials), accuracy {:.1}%",
            block.method,
            responses.len(),
            m.overall_accuracy().unwrap_or(0.0)
        );
        println!("  target \\ answer   left center  right");
        for c in TripletChannel::ALL {
            let row = m.counts[c.index()];
            println!("  {c:>15} {:>6} {:>6} {:>6}", row[0], row[1], row[2]);
        }
        for (c, s) in time_summary(&responses)?.by_channel {
            println!("  {c:>6}: {:.2} s (sd {:.2})", s.mean, s.sd);
        }
    }
    Ok(())
}
