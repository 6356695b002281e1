//! Forced-choice psychophysics: protocol generation, response records and
//! the analyses run on them.

mod analysis;
mod fit;
mod protocol;
mod records;
mod wilcoxon;

pub use analysis::{bias, confusion_matrix, time_summary, Bias, ConfusionMatrix, Summary, TimeSummary};
pub use fit::{fit_sigmoid, jnd, sigmoid_percent, weber, PressurePoint, PsychometricData, PsychometricFit, K_BOUNDS};
pub use protocol::{
    Method, MethodOrder, PairProtocol, PairTrial, TripletBlock, TripletChannel, TripletProtocol, TripletTrial,
    HIGH_PSI, PAIR_REPS, REFERENCE_PSI, TEST_PRESSURES, TRIPLET_REPS_PER_CHANNEL,
};
pub use records::{read_responses_csv, write_responses_csv, Answer, Shown, Slot, TrialResponse, CSV_HEADER};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Simulated participant whose probability of calling the test pressure
/// higher follows the logistic psychometric curve.
#[derive(Debug, Clone)]
pub struct SigmoidObserver {
    pub k: f64,
    pub reference: f64,
    rng: ChaCha8Rng,
}

impl SigmoidObserver {
    pub fn new(k: f64, reference: f64, seed: u64) -> Self {
        SigmoidObserver { k, reference, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Slot the observer calls higher for a pair trial.
    pub fn answer(&mut self, trial: &PairTrial) -> Slot {
        let test_slot = trial.test_slot();
        let p_test = sigmoid_percent(trial.test, self.reference, self.k) / 100.0;
        if self.rng.random_bool(p_test.clamp(0.0, 1.0)) {
            test_slot
        } else {
            test_slot.other()
        }
    }
}

/// Simulated participant for odd-one-out trials: finds the target with
/// probability `accuracy`, otherwise picks one of the other channels.
#[derive(Debug, Clone)]
pub struct TripletObserver {
    pub accuracy: f64,
    rng: ChaCha8Rng,
}

impl TripletObserver {
    pub fn new(accuracy: f64, seed: u64) -> Self {
        TripletObserver { accuracy: accuracy.clamp(0.0, 1.0), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn answer(&mut self, trial: &TripletTrial) -> TripletChannel {
        if self.rng.random_bool(self.accuracy) {
            trial.target
        } else {
            let others: Vec<TripletChannel> = TripletChannel::ALL.into_iter().filter(|c| *c != trial.target).collect();
            others[self.rng.random_range(0..others.len())]
        }
    }
}
