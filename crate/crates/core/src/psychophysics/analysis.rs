use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::protocol::{Method, TripletChannel};
use super::records::{Answer, TrialResponse};
use crate::error::{Error, Result};

/// How often "Pressure 1" vs "Pressure 2" was called higher on identical
/// pairs, percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bias {
    pub first_pct: f64,
    pub second_pct: f64,
    pub n: usize,
}

pub fn bias(responses: &[TrialResponse]) -> Result<Bias> {
    let identical: Vec<&TrialResponse> = responses.iter().filter(|r| r.is_identical_pair()).collect();
    if identical.is_empty() {
        return Err(Error::InvalidInput("no identical-pair responses".into()));
    }
    let n = identical.len();
    let first = identical.iter().filter(|r| r.answer == Answer::First).count();
    let first_pct = 100.0 * first as f64 / n as f64;
    Ok(Bias { first_pct, second_pct: 100.0 - first_pct, n })
}

/// Count, mean and sample standard deviation (0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let count = values.len();
        if count == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary { count, mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSummary {
    pub overall: Summary,
    pub correct: Option<Summary>,
    pub incorrect: Option<Summary>,
    /// Time on "Pressure 1" / "Pressure 2" where slot times were recorded.
    pub first_slot: Option<Summary>,
    pub second_slot: Option<Summary>,
    /// Triplet responses grouped by the channel that held the odd pressure.
    pub by_channel: BTreeMap<TripletChannel, Summary>,
    pub by_method: BTreeMap<Method, Summary>,
}

fn collapse<K: Ord>(groups: BTreeMap<K, Vec<f64>>) -> BTreeMap<K, Summary> {
    groups.into_iter().filter_map(|(k, v)| Summary::of(&v).map(|s| (k, s))).collect()
}

pub fn time_summary(responses: &[TrialResponse]) -> Result<TimeSummary> {
    let all: Vec<f64> = responses.iter().map(|r| r.response_time).collect();
    let overall = Summary::of(&all).ok_or_else(|| Error::InvalidInput("no responses".into()))?;
    let times_where = |pred: &dyn Fn(&TrialResponse) -> bool| -> Vec<f64> {
        responses.iter().filter(|r| pred(r)).map(|r| r.response_time).collect()
    };
    let correct = Summary::of(&times_where(&|r| r.correct == Some(true)));
    let incorrect = Summary::of(&times_where(&|r| r.correct == Some(false)));
    let slots: Vec<[f64; 2]> = responses.iter().filter_map(|r| r.slot_times).collect();
    let first_slot = Summary::of(&slots.iter().map(|s| s[0]).collect::<Vec<_>>());
    let second_slot = Summary::of(&slots.iter().map(|s| s[1]).collect::<Vec<_>>());

    let mut channels: BTreeMap<TripletChannel, Vec<f64>> = BTreeMap::new();
    let mut methods: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    for r in responses {
        if let Some(c) = r.target() {
            channels.entry(c).or_default().push(r.response_time);
        }
        if let Some(m) = r.method() {
            methods.entry(m).or_default().push(r.response_time);
        }
    }
    Ok(TimeSummary {
        overall,
        correct,
        incorrect,
        first_slot,
        second_slot,
        by_channel: collapse(channels),
        by_method: collapse(methods),
    })
}

/// Rows are the rendered target, columns the answer (left, center, right).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u32; 3]; 3],
}

impl ConfusionMatrix {
    pub fn row_total(&self, target: TripletChannel) -> u32 {
        self.counts[target.index()].iter().sum()
    }

    /// Percent correct for one target channel, `None` if it was never shown.
    pub fn accuracy(&self, target: TripletChannel) -> Option<f64> {
        let total = self.row_total(target);
        (total > 0).then(|| 100.0 * self.counts[target.index()][target.index()] as f64 / total as f64)
    }

    pub fn overall_accuracy(&self) -> Option<f64> {
        let total: u32 = self.counts.iter().flatten().sum();
        let diag: u32 = (0..3).map(|i| self.counts[i][i]).sum();
        (total > 0).then(|| 100.0 * diag as f64 / total as f64)
    }
}

pub fn confusion_matrix(responses: &[TrialResponse]) -> Result<ConfusionMatrix> {
    let mut counts = [[0u32; 3]; 3];
    for r in responses {
        let target =
            r.target().ok_or_else(|| Error::InvalidInput(format!("{} is not a triplet response", r.trial_id)))?;
        let answer = r
            .answer
            .channel()
            .ok_or_else(|| Error::InvalidInput(format!("{} has a non-channel answer", r.trial_id)))?;
        counts[target.index()][answer.index()] += 1;
    }
    Ok(ConfusionMatrix { counts })
}
