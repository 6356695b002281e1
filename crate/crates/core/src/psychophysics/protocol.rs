use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::Slot;

/// Reference pressure of both forced-choice studies, psi.
pub const REFERENCE_PSI: f64 = 2.0;
/// Test pressures compared against the reference, psi.
pub const TEST_PRESSURES: [f64; 7] = [1.5, 1.75, 1.875, 2.0, 2.125, 2.25, 2.5];
pub const PAIR_REPS: usize = 10;
/// Odd-one-out pressure of the triplet study, psi.
pub const HIGH_PSI: f64 = 2.75;
pub const TRIPLET_REPS_PER_CHANNEL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTrial {
    pub id: usize,
    pub test: f64,
    /// Pressure shown as "Pressure 1".
    pub first: f64,
    /// Pressure shown as "Pressure 2".
    pub second: f64,
}

impl PairTrial {
    pub fn is_identical(&self) -> bool {
        self.first == self.second
    }

    /// Slot holding the test pressure. Identical pairs count the second slot
    /// as the test.
    pub fn test_slot(&self) -> Slot {
        if self.first == self.test && self.second != self.test {
            Slot::First
        } else {
            Slot::Second
        }
    }

    /// Slot holding the strictly higher pressure, if any.
    pub fn higher_slot(&self) -> Option<Slot> {
        if self.first > self.second {
            Some(Slot::First)
        } else if self.second > self.first {
            Some(Slot::Second)
        } else {
            None
        }
    }

    pub fn trial_id(&self) -> String {
        format!("pair-{:03}", self.id)
    }
}

/// Pairwise "which is higher" schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProtocol {
    pub seed: u64,
    pub reference: f64,
    pub test_pressures: Vec<f64>,
    pub reps: usize,
    pub trials: Vec<PairTrial>,
}

impl PairProtocol {
    /// Each test pressure `reps` times; presentation order and the order
    /// within each pair are shuffled by independent seeded streams.
    pub fn generate(seed: u64) -> Self {
        Self::generate_with(seed, REFERENCE_PSI, &TEST_PRESSURES, PAIR_REPS)
    }

    pub fn generate_with(seed: u64, reference: f64, test_pressures: &[f64], reps: usize) -> Self {
        let mut tests: Vec<f64> = test_pressures.iter().flat_map(|&p| std::iter::repeat_n(p, reps)).collect();
        let mut order_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut within_rng = ChaCha8Rng::seed_from_u64(seed);
        within_rng.set_stream(1);
        tests.shuffle(&mut order_rng);
        let trials = tests
            .into_iter()
            .enumerate()
            .map(|(id, test)| {
                let (first, second) = if within_rng.random_bool(0.5) { (reference, test) } else { (test, reference) };
                PairTrial { id, test, first, second }
            })
            .collect();
        PairProtocol { seed, reference, test_pressures: test_pressures.to_vec(), reps, trials }
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn count_of(&self, test: f64) -> usize {
        self.trials.iter().filter(|t| t.test == test).count()
    }

    pub fn identical_pairs(&self) -> usize {
        self.trials.iter().filter(|t| t.is_identical()).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("protocol serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletChannel {
    Left,
    Center,
    Right,
}

impl TripletChannel {
    pub const ALL: [TripletChannel; 3] = [TripletChannel::Left, TripletChannel::Center, TripletChannel::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for TripletChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            TripletChannel::Left => "left",
            TripletChannel::Center => "center",
            TripletChannel::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Local,
    Global,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Method::Local => "local",
            Method::Global => "global",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodOrder {
    LocalFirst,
    GlobalFirst,
}

impl MethodOrder {
    pub fn methods(self) -> [Method; 2] {
        match self {
            MethodOrder::LocalFirst => [Method::Local, Method::Global],
            MethodOrder::GlobalFirst => [Method::Global, Method::Local],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletTrial {
    pub id: usize,
    pub method: Method,
    pub target: TripletChannel,
    /// Pressures on (left, center, right).
    pub pressures: [f64; 3],
}

impl TripletTrial {
    pub fn trial_id(&self) -> String {
        format!("{}-{:03}", self.method, self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletBlock {
    pub method: Method,
    pub trials: Vec<TripletTrial>,
}

/// "Which one has the different pressure?" schedule for both layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletProtocol {
    pub seed: u64,
    pub reference: f64,
    pub high: f64,
    pub reps_per_channel: usize,
    pub method_order: MethodOrder,
    pub blocks: Vec<TripletBlock>,
}

impl TripletProtocol {
    pub fn generate(seed: u64, method_order: MethodOrder) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = method_order
            .methods()
            .into_iter()
            .map(|method| {
                let mut targets: Vec<TripletChannel> = TripletChannel::ALL
                    .into_iter()
                    .flat_map(|c| std::iter::repeat_n(c, TRIPLET_REPS_PER_CHANNEL))
                    .collect();
                targets.shuffle(&mut rng);
                let trials = targets
                    .into_iter()
                    .enumerate()
                    .map(|(id, target)| {
                        let mut pressures = [REFERENCE_PSI; 3];
                        pressures[target.index()] = HIGH_PSI;
                        TripletTrial { id, method, target, pressures }
                    })
                    .collect();
                TripletBlock { method, trials }
            })
            .collect();
        TripletProtocol {
            seed,
            reference: REFERENCE_PSI,
            high: HIGH_PSI,
            reps_per_channel: TRIPLET_REPS_PER_CHANNEL,
            method_order,
            blocks,
        }
    }

    pub fn block(&self, method: Method) -> Option<&TripletBlock> {
        self.blocks.iter().find(|b| b.method == method)
    }

    pub fn trials(&self) -> impl Iterator<Item = &TripletTrial> {
        self.blocks.iter().flat_map(|b| b.trials.iter())
    }

    pub fn delta(&self) -> f64 {
        self.high - self.reference
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("protocol serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_protocol_counts() {
        for seed in [0, 1, 99] {
            let p = PairProtocol::generate(seed);
            assert_eq!(p.len(), 70);
            assert_eq!(p.identical_pairs(), 10);
            for &t in &TEST_PRESSURES {
                assert_eq!(p.count_of(t), 10);
            }
            for trial in &p.trials {
                assert!(trial.first == REFERENCE_PSI || trial.second == REFERENCE_PSI);
                assert!(trial.first == trial.test || trial.second == trial.test);
            }
        }
    }

    #[test]
    fn pair_protocol_is_seeded() {
        assert_eq!(PairProtocol::generate(5).to_json(), PairProtocol::generate(5).to_json());
        assert_ne!(PairProtocol::generate(5).trials, PairProtocol::generate(6).trials);
    }

    #[test]
    fn within_pair_order_is_mixed() {
        let p = PairProtocol::generate(11);
        let test_first = p.trials.iter().filter(|t| !t.is_identical() && t.test_slot() == Slot::First).count();
        assert!(test_first > 15 && test_first < 45, "{test_first}");
    }

    #[test]
    fn triplet_protocol_counts() {
        let p = TripletProtocol::generate(3, MethodOrder::GlobalFirst);
        assert_eq!(p.blocks.len(), 2);
        assert_eq!(p.blocks[0].method, Method::Global);
        assert!((p.delta() - 0.75).abs() < 1e-12);
        for block in &p.blocks {
            assert_eq!(block.trials.len(), 48);
            for c in TripletChannel::ALL {
                assert_eq!(block.trials.iter().filter(|t| t.target == c).count(), 16);
            }
            for t in &block.trials {
                let highs = t.pressures.iter().filter(|&&p| p == HIGH_PSI).count();
                assert_eq!(highs, 1);
                assert_eq!(t.pressures[t.target.index()], HIGH_PSI);
            }
        }
    }

    #[test]
    fn higher_slot() {
        let t = PairTrial { id: 0, test: 2.5, first: 2.0, second: 2.5 };
        assert_eq!(t.higher_slot(), Some(Slot::Second));
        assert_eq!(t.test_slot(), Slot::Second);
        let t = PairTrial { id: 0, test: 1.5, first: 1.5, second: 2.0 };
        assert_eq!(t.higher_slot(), Some(Slot::Second));
        assert_eq!(t.test_slot(), Slot::First);
        let t = PairTrial { id: 0, test: 2.0, first: 2.0, second: 2.0 };
        assert_eq!(t.higher_slot(), None);
    }
}
