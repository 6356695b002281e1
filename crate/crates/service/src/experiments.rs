//! Forced-choice experiments answered one trial at a time.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use wrapped_haptics::pneumatics::{settle_time, ChannelSpec, PlantConfig};
use wrapped_haptics::psychophysics::{
    Answer, Method, MethodOrder, PairProtocol, PairTrial, Shown, TrialResponse, TripletProtocol, TripletTrial,
};

use crate::error::{Result, ServiceError};
use crate::log::{EventEnvelope, EventLog, ExperimentKind, Payload};

/// Largest accepted gap between client and server response times, s.
pub const RT_TOLERANCE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum TrialSpec {
    Pair(PairTrial),
    Triplet(TripletTrial),
}

impl TrialSpec {
    fn id(&self) -> String {
        match self {
            TrialSpec::Pair(t) => t.trial_id(),
            TrialSpec::Triplet(t) => t.trial_id(),
        }
    }

    fn shown(&self) -> Shown {
        match self {
            TrialSpec::Pair(t) => Shown::Pair { first: t.first, second: t.second },
            TrialSpec::Triplet(t) => Shown::Triplet { method: t.method, pressures: t.pressures },
        }
    }

    /// Time for the display to fill from empty to the highest shown pressure.
    fn settle_delay(&self) -> Result<f64> {
        let (spec, peak) = match self {
            TrialSpec::Pair(t) => (ChannelSpec::sleeve(), t.first.max(t.second)),
            TrialSpec::Triplet(t) => (ChannelSpec::ring(), t.pressures.iter().copied().fold(0.0, f64::max)),
        };
        Ok(settle_time(&spec, 0.0, peak, &PlantConfig::default())?)
    }

    fn respond(&self, answer: Answer, rt: f64) -> Result<TrialResponse> {
        let response = match self {
            TrialSpec::Pair(t) => {
                let slot = answer
                    .slot()
                    .ok_or_else(|| ServiceError::Invalid(format!("{} is not a pair answer", answer.as_str())))?;
                TrialResponse::pair(t, slot, rt)
            }
            TrialSpec::Triplet(t) => {
                let channel = answer
                    .channel()
                    .ok_or_else(|| ServiceError::Invalid(format!("{} is not a triplet answer", answer.as_str())))?;
                TrialResponse::triplet(t, channel, rt)
            }
        };
        response.validate()?;
        Ok(response)
    }
}

fn schedule(kind: ExperimentKind, seed: u64, method: Option<Method>) -> Result<Vec<TrialSpec>> {
    match (kind, method) {
        (ExperimentKind::Pair, None) => {
            Ok(PairProtocol::generate(seed).trials.into_iter().map(TrialSpec::Pair).collect())
        }
        (ExperimentKind::Pair, Some(_)) => Err(ServiceError::Invalid("pair experiments take no method".into())),
        (ExperimentKind::Triplet, None) => Err(ServiceError::Invalid("triplet experiments need a method".into())),
        (ExperimentKind::Triplet, Some(m)) => {
            let order = match m {
                Method::Local => MethodOrder::LocalFirst,
                Method::Global => MethodOrder::GlobalFirst,
            };
            let protocol = TripletProtocol::generate(seed, order);
            let block = protocol.block(m).ok_or_else(|| ServiceError::Invalid(format!("no {m} block")))?;
            Ok(block.trials.iter().copied().map(TrialSpec::Triplet).collect())
        }
    }
}

/// Body of `POST /experiments`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateExperiment {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub client_token: Option<String>,
}

/// Body of `POST /experiments/{id}/responses`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub trial_id: String,
    pub answer: Answer,
    /// Response time measured by the client, s.
    pub rt: f64,
    #[serde(default)]
    pub client_token: Option<String>,
}

/// The trial currently on the display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingTrial {
    pub trial_id: String,
    pub index: usize,
    pub shown: Shown,
    /// Server time at which the display reaches steady state.
    pub ready_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentView {
    pub id: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub method: Option<Method>,
    pub created_at: f64,
    pub total: usize,
    pub answered: usize,
    pub pending: Option<PendingTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitReply {
    pub trial_id: String,
    pub correct: Option<bool>,
    pub server_rt: f64,
    pub flagged: bool,
    pub next: Option<PendingTrial>,
}

pub(crate) struct Experiment {
    id: String,
    kind: ExperimentKind,
    seed: u64,
    method: Option<Method>,
    created_at: f64,
    trials: Vec<TrialSpec>,
    log: EventLog,
    pending: Option<PendingTrial>,
    responses: Vec<TrialResponse>,
    replies: HashMap<String, SubmitReply>,
}

impl Experiment {
    pub fn create(id: String, mut log: EventLog, now: f64, req: &CreateExperiment) -> Result<Self> {
        let trials = schedule(req.kind, req.seed, req.method)?;
        let token = req.client_token.as_deref();
        log.append(now, token, Payload::ExperimentCreated { kind: req.kind, seed: req.seed, method: req.method })?;
        let mut e = Experiment {
            id,
            kind: req.kind,
            seed: req.seed,
            method: req.method,
            created_at: now,
            trials,
            log,
            pending: None,
            responses: Vec::new(),
            replies: HashMap::new(),
        };
        e.present(now, 0, token)?;
        Ok(e)
    }

    /// Rebuild from a log; the pending trial is the last one presented
    /// without a response.
    pub fn restore(id: String, log: EventLog, events: &[EventEnvelope]) -> Result<Self> {
        let Some(EventEnvelope { time, payload: Payload::ExperimentCreated { kind, seed, method }, .. }) =
            events.first()
        else {
            return Err(ServiceError::Invalid(format!("log of {id} does not start with experiment_created")));
        };
        let mut e = Experiment {
            id,
            kind: *kind,
            seed: *seed,
            method: *method,
            created_at: *time,
            trials: schedule(*kind, *seed, *method)?,
            log,
            pending: None,
            responses: Vec::new(),
            replies: HashMap::new(),
        };
        let mut last_reply: Option<String> = None;
        for ev in &events[1..] {
            match &ev.payload {
                Payload::Trial { trial_id, index, shown, ready_at } => {
                    let pending =
                        PendingTrial { trial_id: trial_id.clone(), index: *index, shown: *shown, ready_at: *ready_at };
                    if let Some(reply) = last_reply.take().and_then(|t| e.replies.get_mut(&t)) {
                        reply.next = Some(pending.clone());
                    }
                    e.pending = Some(pending);
                }
                Payload::Response { response, server_rt, flagged } => {
                    e.pending = None;
                    if let Some(token) = &ev.token {
                        let reply = SubmitReply {
                            trial_id: response.trial_id.clone(),
                            correct: response.correct,
                            server_rt: *server_rt,
                            flagged: *flagged,
                            next: None,
                        };
                        e.replies.insert(token.clone(), reply);
                        last_reply = Some(token.clone());
                    }
                    e.responses.push(response.clone());
                }
                _ => {}
            }
        }
        Ok(e)
    }

    fn present(&mut self, now: f64, index: usize, token: Option<&str>) -> Result<()> {
        let Some(trial) = self.trials.get(index) else {
            self.pending = None;
            return Ok(());
        };
        let pending =
            PendingTrial { trial_id: trial.id(), index, shown: trial.shown(), ready_at: now + trial.settle_delay()? };
        self.log.append(
            now,
            token,
            Payload::Trial {
                trial_id: pending.trial_id.clone(),
                index,
                shown: pending.shown,
                ready_at: pending.ready_at,
            },
        )?;
        self.pending = Some(pending);
        Ok(())
    }

    pub fn view(&self) -> ExperimentView {
        ExperimentView {
            id: self.id.clone(),
            kind: self.kind,
            seed: self.seed,
            method: self.method,
            created_at: self.created_at,
            total: self.trials.len(),
            answered: self.responses.len(),
            pending: self.pending.clone(),
        }
    }

    pub fn submit(&mut self, now: f64, req: &SubmitResponse) -> Result<SubmitReply> {
        let token = req.client_token.as_deref();
        if let Some(reply) = token.and_then(|t| self.replies.get(t)) {
            return Ok(reply.clone());
        }
        let pending = match &self.pending {
            Some(p) if p.trial_id == req.trial_id => p.clone(),
            Some(p) => {
                return Err(ServiceError::State(format!("trial {} is not pending; {} is", req.trial_id, p.trial_id)));
            }
            None => {
                return Err(ServiceError::State(format!(
                    "trial {} is not pending; the experiment is over",
                    req.trial_id
                )))
            }
        };
        if now < pending.ready_at {
            return Err(ServiceError::State(format!("trial {} is not at steady state yet", req.trial_id)));
        }
        let response = self.trials[pending.index].respond(req.answer, req.rt)?;
        let server_rt = now - pending.ready_at;
        let flagged = (req.rt - server_rt).abs() > RT_TOLERANCE;
        self.log.append(now, token, Payload::Response { response: response.clone(), server_rt, flagged })?;
        self.responses.push(response.clone());
        self.present(now, pending.index + 1, token)?;
        let reply = SubmitReply {
            trial_id: response.trial_id,
            correct: response.correct,
            server_rt,
            flagged,
            next: self.pending.clone(),
        };
        if let Some(t) = token {
            self.replies.insert(t.to_owned(), reply.clone());
        }
        Ok(reply)
    }

    pub fn responses(&self) -> &[TrialResponse] {
        &self.responses
    }
}

/// Responses recorded in an experiment log, in order.
pub fn logged_responses(events: &[EventEnvelope]) -> Vec<TrialResponse> {
    events
        .iter()
        .filter_map(|e| match &e.payload {
            Payload::Response { response, .. } => Some(response.clone()),
            _ => None,
        })
        .collect()
}
