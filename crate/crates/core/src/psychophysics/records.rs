use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::protocol::{Method, PairTrial, TripletChannel, TripletTrial};
use crate::error::{Error, Result};

/// Header of the response log CSV.
pub const CSV_HEADER: [&str; 6] = ["trial_id", "shown_a", "shown_b_or_channels", "answer", "correct", "rt_seconds"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    First,
    Second,
}

impl Slot {
    pub fn other(self) -> Slot {
        match self {
            Slot::First => Slot::Second,
            Slot::Second => Slot::First,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    First,
    Second,
    Left,
    Center,
    Right,
}

impl Answer {
    pub fn as_str(self) -> &'static str {
        match self {
            Answer::First => "first",
            Answer::Second => "second",
            Answer::Left => "left",
            Answer::Center => "center",
            Answer::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Result<Answer> {
        Ok(match s {
            "first" => Answer::First,
            "second" => Answer::Second,
            "left" => Answer::Left,
            "center" => Answer::Center,
            "right" => Answer::Right,
            other => return Err(Error::Parse(format!("unknown answer {other:?}"))),
        })
    }

    pub fn slot(self) -> Option<Slot> {
        match self {
            Answer::First => Some(Slot::First),
            Answer::Second => Some(Slot::Second),
            _ => None,
        }
    }

    pub fn channel(self) -> Option<TripletChannel> {
        match self {
            Answer::Left => Some(TripletChannel::Left),
            Answer::Center => Some(TripletChannel::Center),
            Answer::Right => Some(TripletChannel::Right),
            _ => None,
        }
    }
}

impl From<Slot> for Answer {
    fn from(s: Slot) -> Self {
        match s {
            Slot::First => Answer::First,
            Slot::Second => Answer::Second,
        }
    }
}

impl From<TripletChannel> for Answer {
    fn from(c: TripletChannel) -> Self {
        match c {
            TripletChannel::Left => Answer::Left,
            TripletChannel::Center => Answer::Center,
            TripletChannel::Right => Answer::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shown {
    Pair { first: f64, second: f64 },
    Triplet { method: Method, pressures: [f64; 3] },
}

/// A timed answer to one trial. The timer starts when the display reaches
/// steady state and stops at the answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResponse {
    pub trial_id: String,
    pub shown: Shown,
    pub answer: Answer,
    /// `None` when no answer is correct (identical pairs).
    pub correct: Option<bool>,
    pub response_time: f64,
    /// Time spent on "Pressure 1" and "Pressure 2", when recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_times: Option<[f64; 2]>,
}

impl TrialResponse {
    pub fn pair(trial: &PairTrial, answer: Slot, response_time: f64) -> Self {
        TrialResponse {
            trial_id: trial.trial_id(),
            shown: Shown::Pair { first: trial.first, second: trial.second },
            answer: answer.into(),
            correct: trial.higher_slot().map(|h| h == answer),
            response_time,
            slot_times: None,
        }
    }

    pub fn triplet(trial: &TripletTrial, answer: TripletChannel, response_time: f64) -> Self {
        TrialResponse {
            trial_id: trial.trial_id(),
            shown: Shown::Triplet { method: trial.method, pressures: trial.pressures },
            answer: answer.into(),
            correct: Some(answer == trial.target),
            response_time,
            slot_times: None,
        }
    }

    pub fn with_slot_times(mut self, first: f64, second: f64) -> Self {
        self.slot_times = Some([first, second]);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.response_time > 0.0 && self.response_time.is_finite()) {
            return Err(Error::InvalidInput(format!("{}: response time must be positive", self.trial_id)));
        }
        let legal = match self.shown {
            Shown::Pair { .. } => self.answer.slot().is_some(),
            Shown::Triplet { .. } => self.answer.channel().is_some(),
        };
        if !legal {
            return Err(Error::InvalidInput(format!(
                "{}: answer {} is not a legal choice",
                self.trial_id,
                self.answer.as_str()
            )));
        }
        Ok(())
    }

    pub fn method(&self) -> Option<Method> {
        match self.shown {
            Shown::Triplet { method, .. } => Some(method),
            Shown::Pair { .. } => None,
        }
    }

    /// Channel holding the odd pressure of a triplet trial.
    pub fn target(&self) -> Option<TripletChannel> {
        let Shown::Triplet { pressures, .. } = self.shown else { return None };
        let max = pressures.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut hits = pressures.iter().enumerate().filter(|(_, &p)| p == max);
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => TripletChannel::from_index(i),
            _ => None,
        }
    }

    pub fn is_identical_pair(&self) -> bool {
        matches!(self.shown, Shown::Pair { first, second } if first == second)
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field.parse().map_err(|_| Error::Parse(format!("bad {what}: {field:?}")))
}

/// Write responses as CSV. Numbers use the shortest representation that
/// parses back to the same `f64`.
pub fn write_responses_csv<W: Write>(out: W, responses: &[TrialResponse]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in responses {
        let (a, b) = match r.shown {
            Shown::Pair { first, second } => (first.to_string(), second.to_string()),
            Shown::Triplet { pressures, .. } => {
                let max = pressures.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (max.to_string(), pressures.map(|p| p.to_string()).join("|"))
            }
        };
        let correct = match r.correct {
            Some(true) => "true",
            Some(false) => "false",
            None => "na",
        };
        w.write_record([r.trial_id.as_str(), &a, &b, r.answer.as_str(), correct, &r.response_time.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_responses_csv<R: Read>(input: R) -> Result<Vec<TrialResponse>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected header {:?}", header)));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let trial_id = rec[0].to_string();
        let shown = if rec[2].contains('|') {
            let parts: Vec<f64> = rec[2].split('|').map(|p| parse_f64(p, "channel pressure")).collect::<Result<_>>()?;
            let pressures: [f64; 3] =
                parts.try_into().map_err(|_| Error::Parse(format!("{trial_id}: expected three channel pressures")))?;
            let method = if trial_id.starts_with("local") {
                Method::Local
            } else if trial_id.starts_with("global") {
                Method::Global
            } else {
                return Err(Error::Parse(format!("{trial_id}: triplet id must name its method")));
            };
            Shown::Triplet { method, pressures }
        } else {
            Shown::Pair { first: parse_f64(&rec[1], "shown_a")?, second: parse_f64(&rec[2], "shown_b")? }
        };
        let correct = match &rec[4] {
            "true" => Some(true),
            "false" => Some(false),
            "na" => None,
            other => return Err(Error::Parse(format!("bad correct flag {other:?}"))),
        };
        let response = TrialResponse {
            trial_id,
            shown,
            answer: Answer::parse(&rec[3])?,
            correct,
            response_time: parse_f64(&rec[5], "rt_seconds")?,
            slot_times: None,
        };
        response.validate()?;
        out.push(response);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psychophysics::{MethodOrder, PairProtocol, TripletProtocol};

    #[test]
    fn csv_layout() {
        let trial = PairTrial { id: 4, test: 2.125, first: 2.125, second: 2.0 };
        let r = TrialResponse::pair(&trial, Slot::First, 3.25);
        let mut buf = Vec::new();
        write_responses_csv(&mut buf, &[r]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "trial_id,shown_a,shown_b_or_channels,answer,correct,rt_seconds\npair-004,2.125,2,first,true,3.25\n"
        );
    }

    #[test]
    fn empty_log_is_header_only() {
        let mut buf = Vec::new();
        write_responses_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "trial_id,shown_a,shown_b_or_channels,answer,correct,rt_seconds\n");
    }

    #[test]
    fn csv_roundtrip_mixed() {
        let pairs = PairProtocol::generate(1);
        let triplets = TripletProtocol::generate(1, MethodOrder::LocalFirst);
        let mut responses: Vec<TrialResponse> = pairs
            .trials
            .iter()
            .take(12)
            .map(|t| TrialResponse::pair(t, Slot::Second, 1.0 / 3.0 + t.id as f64))
            .collect();
        responses.extend(
            triplets
                .trials()
                .take(12)
                .map(|t| TrialResponse::triplet(t, TripletChannel::Center, 0.1 * t.id as f64 + 0.7)),
        );
        let mut buf = Vec::new();
        write_responses_csv(&mut buf, &responses).unwrap();
        let back = read_responses_csv(buf.as_slice()).unwrap();
        assert_eq!(back, responses);
    }

    #[test]
    fn identical_pair_has_no_correct_answer() {
        let trial = PairTrial { id: 0, test: 2.0, first: 2.0, second: 2.0 };
        let r = TrialResponse::pair(&trial, Slot::First, 1.0);
        assert_eq!(r.correct, None);
        assert!(r.is_identical_pair());
    }

    #[test]
    fn validation() {
        let trial = PairTrial { id: 0, test: 2.5, first: 2.5, second: 2.0 };
        let mut r = TrialResponse::pair(&trial, Slot::First, 1.0);
        r.validate().unwrap();
        r.response_time = 0.0;
        assert!(r.validate().is_err());
        r.response_time = 1.0;
        r.answer = Answer::Left;
        assert!(r.validate().is_err());
    }

    #[test]
    fn bad_header_rejected() {
        let text = "id,a,b,answer,correct,rt\n";
        assert!(read_responses_csv(text.as_bytes()).is_err());
    }
}
