//! Teaching sessions driven by streamed pose samples.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;
use wrapped_haptics::learner::ArmState;
use wrapped_haptics::teaching::{
    FeedbackFrame, FeedbackMode, FeedbackRenderer, Metrics, SessionRecord, TeachingContext,
};

use crate::error::{Result, ServiceError};
use crate::log::{EventEnvelope, EventLog, Payload, SessionStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    pub task: String,
    pub mode: FeedbackMode,
    pub seed: u64,
    pub created_at: f64,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Body of `POST /sessions/{id}/samples`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    /// 1 for the full-path demonstration, 2 for the re-teach.
    pub demo: u8,
    pub samples: Vec<PoseSample>,
    /// Close the demonstration after these samples.
    #[serde(default)]
    pub end: bool,
    #[serde(default)]
    pub client_token: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    /// Index of the sample within the session, counting both demonstrations.
    pub seq: u64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamReply {
    pub status: SessionStatus,
    pub acks: Vec<Ack>,
    /// Frames rendered while ingesting the batch.
    pub frames: usize,
}

pub(crate) struct Session {
    pub handle: SessionHandle,
    log: EventLog,
    context: Arc<TeachingContext>,
    renderer: FeedbackRenderer,
    last_t: Option<f64>,
    sample_count: u64,
    demo1_len: usize,
    replies: HashMap<String, StreamReply>,
    metrics: Option<Metrics>,
    frames: broadcast::Sender<FeedbackFrame>,
}

impl Session {
    pub fn create(
        handle: SessionHandle,
        mut log: EventLog,
        context: Arc<TeachingContext>,
        token: Option<&str>,
    ) -> Result<Self> {
        log.append(
            handle.created_at,
            token,
            Payload::SessionCreated { task: handle.task.clone(), feedback: handle.mode, seed: handle.seed },
        )?;
        Self::new(handle, log, context)
    }

    fn new(handle: SessionHandle, log: EventLog, context: Arc<TeachingContext>) -> Result<Self> {
        Ok(Session {
            renderer: FeedbackRenderer::new(handle.mode, 1)?,
            handle,
            log,
            context,
            last_t: None,
            sample_count: 0,
            demo1_len: 0,
            replies: HashMap::new(),
            metrics: None,
            frames: broadcast::channel(256).0,
        })
    }

    /// Rebuild a session from its log, re-rendering demonstration 1 so the
    /// renderer ends in the state it had before the restart.
    pub fn restore(id: String, log: EventLog, events: &[EventEnvelope], context: Arc<TeachingContext>) -> Result<Self> {
        let Some(EventEnvelope { time, payload: Payload::SessionCreated { task, feedback, seed }, .. }) =
            events.first()
        else {
            return Err(ServiceError::Invalid(format!("log of {id} does not start with session_created")));
        };
        let handle = SessionHandle {
            id,
            task: task.clone(),
            mode: *feedback,
            seed: *seed,
            created_at: *time,
            status: SessionStatus::Idle,
        };
        let mut s = Self::new(handle, log, context)?;
        for e in &events[1..] {
            match &e.payload {
                Payload::Status { status } => s.handle.status = *status,
                Payload::DemoSample { demo, t, x, y, theta } => {
                    if *demo == 1 {
                        s.context.frame_for(&mut s.renderer, *t, &ArmState { x: *x, y: *y, theta: *theta })?;
                        s.demo1_len += 1;
                    }
                    s.last_t = Some(*t);
                    s.sample_count += 1;
                }
                Payload::Metric { metrics } => s.metrics = Some(metrics.clone()),
                _ => {}
            }
            let Some(token) = &e.token else { continue };
            let status = s.handle.status;
            let reply =
                s.replies.entry(token.clone()).or_insert_with(|| StreamReply { status, acks: Vec::new(), frames: 0 });
            reply.status = status;
            match &e.payload {
                Payload::DemoSample { t, .. } => reply.acks.push(Ack { seq: s.sample_count - 1, t: *t }),
                Payload::Frame { .. } => reply.frames += 1,
                _ => {}
            }
        }
        Ok(s)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<FeedbackFrame> {
        self.frames.subscribe()
    }

    fn set_status(&mut self, now: f64, token: Option<&str>, status: SessionStatus) -> Result<()> {
        if status <= self.handle.status {
            return Err(ServiceError::State(format!("cannot move from {:?} to {status:?}", self.handle.status)));
        }
        self.log.append(now, token, Payload::Status { status })?;
        self.handle.status = status;
        Ok(())
    }

    pub fn stream(&mut self, now: f64, batch: &SampleBatch) -> Result<StreamReply> {
        let token = batch.client_token.as_deref();
        if let Some(reply) = token.and_then(|t| self.replies.get(t)) {
            return Ok(reply.clone());
        }
        let status = self.handle.status;
        let target = match (batch.demo, status) {
            (_, SessionStatus::Complete) => {
                return Err(ServiceError::State("session is complete".into()));
            }
            (1, SessionStatus::Idle | SessionStatus::Demo1) => SessionStatus::Demo1,
            (2, SessionStatus::Demo1 | SessionStatus::Demo2) => SessionStatus::Demo2,
            (1 | 2, _) => {
                return Err(ServiceError::State(format!("demonstration {} not accepted while {status:?}", batch.demo)));
            }
            (d, _) => return Err(ServiceError::Invalid(format!("unknown demonstration {d}"))),
        };
        if target == SessionStatus::Demo2 && self.demo1_len < 2 && status == SessionStatus::Demo1 {
            return Err(ServiceError::State("demonstration 1 has fewer than two samples".into()));
        }
        let mut last = self.last_t;
        for s in &batch.samples {
            let state = ArmState { x: s.x, y: s.y, theta: s.theta };
            if !s.t.is_finite() || last.is_some_and(|l| s.t <= l) {
                return Err(ServiceError::Invalid(format!("sample time {} must increase", s.t)));
            }
            if !state.in_workspace() {
                return Err(ServiceError::Invalid(format!("pose ({}, {}) is outside the workspace", s.x, s.y)));
            }
            last = Some(s.t);
        }
        let added = if batch.demo == 1 { batch.samples.len() } else { 0 };
        if batch.end && batch.demo == 1 && self.demo1_len + added < 2 {
            return Err(ServiceError::State("demonstration 1 has fewer than two samples".into()));
        }

        if target > status {
            self.set_status(now, token, target)?;
        }
        let mut reply = StreamReply { status: target, acks: Vec::with_capacity(batch.samples.len()), frames: 0 };
        for s in &batch.samples {
            let state = ArmState { x: s.x, y: s.y, theta: s.theta };
            self.log.append(
                now,
                token,
                Payload::DemoSample { demo: batch.demo, t: s.t, x: s.x, y: s.y, theta: s.theta },
            )?;
            reply.acks.push(Ack { seq: self.sample_count, t: s.t });
            self.sample_count += 1;
            self.last_t = Some(s.t);
            if batch.demo == 1 {
                self.demo1_len += 1;
                if let Some(frame) = self.context.frame_for(&mut self.renderer, s.t, &state)? {
                    self.log.append(now, token, Payload::Frame { frame: frame.clone() })?;
                    reply.frames += 1;
                    // No subscribers is fine.
                    let _ = self.frames.send(frame);
                }
            }
        }
        if batch.end {
            let next = if batch.demo == 1 { SessionStatus::Demo2 } else { SessionStatus::Complete };
            self.set_status(now, token, next)?;
            reply.status = next;
        }
        if let Some(t) = token {
            self.replies.insert(t.to_owned(), reply.clone());
        }
        Ok(reply)
    }

    pub fn record(&self) -> Result<SessionRecord> {
        session_record(&self.context, &self.log.read_all()?)
    }

    /// Metrics of a completed session; computed once and then logged.
    pub fn metrics(&mut self, now: f64) -> Result<Metrics> {
        if let Some(m) = &self.metrics {
            return Ok(m.clone());
        }
        if self.handle.status != SessionStatus::Complete {
            return Err(ServiceError::State(format!("session is {:?}, metrics need it complete", self.handle.status)));
        }
        let metrics = self.context.metrics(&self.record()?)?;
        self.log.append(now, None, Payload::Metric { metrics: metrics.clone() })?;
        self.metrics = Some(metrics.clone());
        Ok(metrics)
    }
}

/// Rebuild the teaching record from a session log. Frames are recomputed
/// from the demonstration 1 samples, so the result depends only on the
/// poses, the task, the mode and the seed.
pub fn session_record(context: &TeachingContext, events: &[EventEnvelope]) -> Result<SessionRecord> {
    let Some(Payload::SessionCreated { task, feedback, seed }) = events.first().map(|e| &e.payload) else {
        return Err(ServiceError::Invalid("log does not start with session_created".into()));
    };
    if *task != context.task.name {
        return Err(ServiceError::Invalid(format!("log is for {task}, not {}", context.task.name)));
    }
    let mut poses: [Vec<(f64, ArmState)>; 2] = [Vec::new(), Vec::new()];
    for e in events {
        if let Payload::DemoSample { demo: d @ (1 | 2), t, x, y, theta } = &e.payload {
            poses[*d as usize - 1].push((*t, ArmState { x: *x, y: *y, theta: *theta }));
        }
    }
    Ok(context.replay_session(&poses[0], &poses[1], *feedback, *seed)?)
}

/// Frames as they were logged, in order.
pub fn logged_frames(events: &[EventEnvelope]) -> Vec<FeedbackFrame> {
    events
        .iter()
        .filter_map(|e| match &e.payload {
            Payload::Frame { frame } => Some(frame.clone()),
            _ => None,
        })
        .collect()
}
