//! Run the pair protocol against a simulated participant, then fit the
//! psychometric curve and report JND, Weber fraction, bias and timing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wrapped_haptics::psychophysics::{
    bias, fit_sigmoid, time_summary, write_responses_csv, PairProtocol, PsychometricData, SigmoidObserver,
    TrialResponse, REFERENCE_PSI,
};

fn main() -> wrapped_haptics::Result<()> {
    let protocol = PairProtocol::generate(1);
    println!("{} pairs, {} identical", protocol.len(), protocol.identical_pairs());

    // Pool ten simulated participants with the overall steepness.
    let mut responses = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for participant in 0..10 {
        let mut observer = SigmoidObserver::new(4.678, REFERENCE_PSI, participant);
        for trial in &protocol.trials {
            let (first, second) = (rng.random_range(4.0..20.0), rng.random_range(3.0..16.0));
            let answer = observer.answer(trial);
            responses.push(TrialResponse::pair(trial, answer, first + second).with_slot_times(first, second));
        }
    }

    let fit = fit_sigmoid(&PsychometricData::from_pair_responses(REFERENCE_PSI, &responses))?;
    println!("k = {:.3}, JND = {:.3} psi, WF = {:.2}%, 75% point = {:.3} psi", fit.k, fit.jnd, fit.weber, fit.p75());
    for p in &fit.points {
        println!(
            "  {:.3} psi: observed {:5.1}%  modeled {:5.1}%",
            p.pressure,
            p.percent(),
            fit.modeled_percent(p.pressure)
        );
    }
    let b = bias(&responses)?;
    println!("identical pairs: Pressure 1 {:.0}%, Pressure 2 {:.0}% of {}", b.first_pct, b.second_pct, b.n);
    let t = time_summary(&responses)?;
    println!("time per pair {:.2} s (sd {:.2})", t.overall.mean, t.overall.sd);

    let mut csv = Vec::new();
    write_responses_csv(&mut csv, &responses[..3])?;
    print!("\nCSV excerpt:\n{}", String::from_utf8_lossy(&csv));
    Ok(())
}
