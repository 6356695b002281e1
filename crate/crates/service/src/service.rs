//! Registry of sessions and experiments backed by a data directory.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;
use wrapped_haptics::psychophysics::write_responses_csv;
use wrapped_haptics::teaching::{
    write_metrics_csv, FeedbackFrame, FeedbackMode, Metrics, MetricsRow, TaskSpec, TeachingConfig, TeachingContext,
};

use crate::clock::Clock;
use crate::error::{Result, ServiceError};
use crate::experiments::{CreateExperiment, Experiment, ExperimentView, SubmitReply, SubmitResponse};
use crate::log::{read_envelopes, EventEnvelope, EventLog, Payload};
use crate::sessions::{session_record, SampleBatch, Session, SessionHandle, StreamReply};

/// Environment variable naming the data directory.
pub const DATA_DIR_ENV: &str = "HAPTIC_DATA_DIR";

/// Body of `POST /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub task: String,
    pub feedback: FeedbackMode,
    pub seed: u64,
    #[serde(default)]
    pub client_token: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for ExportFormat {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" => Ok(ExportFormat::Jsonl),
            other => Err(ServiceError::Invalid(format!("unknown export format {other:?}"))),
        }
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// Metrics recomputed from a session log alone.
pub fn replay_metrics(context: &TeachingContext, events: &[EventEnvelope]) -> Result<Metrics> {
    Ok(context.metrics(&session_record(context, events)?)?)
}

pub struct Service {
    data_dir: PathBuf,
    clock: Arc<dyn Clock>,
    config: TeachingConfig,
    contexts: Mutex<HashMap<String, Arc<TeachingContext>>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    experiments: Mutex<HashMap<String, Arc<Mutex<Experiment>>>>,
    /// Client token of each create request, mapped to the id it produced.
    created: Mutex<HashMap<String, String>>,
}

impl Service {
    /// Open a data directory, creating it if needed. Logs are loaded lazily;
    /// only their first lines are read here to recover create tokens.
    pub fn open(data_dir: impl Into<PathBuf>, clock: Arc<dyn Clock>) -> Result<Self> {
        let data_dir = data_dir.into();
        fs::create_dir_all(&data_dir)?;
        let mut created = HashMap::new();
        for entry in fs::read_dir(&data_dir)? {
            let path = entry?.path();
            let Some(id) = log_id(&path) else { continue };
            let mut first = String::new();
            BufReader::new(fs::File::open(&path)?).read_line(&mut first)?;
            if let Ok(e) = serde_json::from_str::<EventEnvelope>(&first) {
                if let Some(token) = e.token {
                    created.insert(token, id);
                }
            }
        }
        Ok(Service {
            data_dir,
            clock,
            config: TeachingConfig::default(),
            contexts: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
            experiments: Mutex::new(HashMap::new()),
            created: Mutex::new(created),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    /// Register a trained context so sessions on its task skip training.
    pub fn insert_context(&self, context: Arc<TeachingContext>) {
        lock(&self.contexts).insert(context.task.name.clone(), context);
    }

    /// Trained context for a builtin task, built on first use.
    pub fn context(&self, task: &str) -> Result<Arc<TeachingContext>> {
        let mut contexts = lock(&self.contexts);
        if let Some(c) = contexts.get(task) {
            return Ok(c.clone());
        }
        let spec = TaskSpec::builtin(task).map_err(|_| ServiceError::NotFound(format!("task {task}")))?;
        if spec.is_welding() {
            return Err(ServiceError::Invalid(format!("{task} runs only through the simulate command")));
        }
        let c = Arc::new(TeachingContext::new(spec, self.config)?);
        contexts.insert(task.to_owned(), c.clone());
        Ok(c)
    }

    fn path_of(&self, id: &str) -> Result<PathBuf> {
        let valid = (id.starts_with("s-") || id.starts_with("e-"))
            && id.len() > 2
            && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-');
        if !valid {
            return Err(ServiceError::NotFound(id.to_owned()));
        }
        Ok(self.data_dir.join(format!("{id}.jsonl")))
    }

    fn fresh_id(prefix: &str) -> String {
        format!("{prefix}-{}", uuid::Uuid::new_v4().simple())
    }

    fn known_create(&self, token: Option<&str>) -> Option<String> {
        token.and_then(|t| lock(&self.created).get(t).cloned())
    }

    pub fn create_session(&self, req: &CreateSession) -> Result<SessionHandle> {
        if let Some(id) = self.known_create(req.client_token.as_deref()) {
            return self.session(&id);
        }
        let context = self.context(&req.task)?;
        let id = Self::fresh_id("s");
        let log = EventLog::create(&self.path_of(&id)?)?;
        let handle = SessionHandle {
            id: id.clone(),
            task: req.task.clone(),
            mode: req.feedback,
            seed: req.seed,
            created_at: self.clock.now(),
            status: crate::log::SessionStatus::Idle,
        };
        let session = Session::create(handle.clone(), log, context, req.client_token.as_deref())?;
        lock(&self.sessions).insert(id.clone(), Arc::new(Mutex::new(session)));
        if let Some(t) = &req.client_token {
            lock(&self.created).insert(t.clone(), id);
        }
        Ok(handle)
    }

    fn load_session(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        if let Some(s) = lock(&self.sessions).get(id) {
            return Ok(s.clone());
        }
        let path = self.path_of(id)?;
        if !id.starts_with("s-") || !path.exists() {
            return Err(ServiceError::NotFound(format!("session {id}")));
        }
        let (log, events) = EventLog::open(&path)?;
        let Some(Payload::SessionCreated { task, .. }) = events.first().map(|e| &e.payload) else {
            return Err(ServiceError::Invalid(format!("log of {id} does not start with session_created")));
        };
        let context = self.context(task)?;
        let session = Arc::new(Mutex::new(Session::restore(id.to_owned(), log, &events, context)?));
        Ok(lock(&self.sessions).entry(id.to_owned()).or_insert(session).clone())
    }

    pub fn session(&self, id: &str) -> Result<SessionHandle> {
        Ok(lock(&*self.load_session(id)?).handle.clone())
    }

    pub fn stream_demo(&self, id: &str, batch: &SampleBatch) -> Result<StreamReply> {
        let session = self.load_session(id)?;
        let mut s = lock(&session);
        s.stream(self.clock.now(), batch)
    }

    pub fn metrics(&self, id: &str) -> Result<Metrics> {
        let session = self.load_session(id)?;
        let mut s = lock(&session);
        s.metrics(self.clock.now())
    }

    /// Live frames of a session, as rendered.
    pub fn subscribe(&self, id: &str) -> Result<broadcast::Receiver<FeedbackFrame>> {
        Ok(lock(&*self.load_session(id)?).subscribe())
    }

    pub fn create_experiment(&self, req: &CreateExperiment) -> Result<ExperimentView> {
        if let Some(id) = self.known_create(req.client_token.as_deref()) {
            return self.experiment(&id);
        }
        let id = Self::fresh_id("e");
        let path = self.path_of(&id)?;
        let log = EventLog::create(&path)?;
        let experiment = match Experiment::create(id.clone(), log, self.clock.now(), req) {
            Ok(e) => e,
            Err(err) => {
                fs::remove_file(&path)?;
                return Err(err);
            }
        };
        let view = experiment.view();
        lock(&self.experiments).insert(id.clone(), Arc::new(Mutex::new(experiment)));
        if let Some(t) = &req.client_token {
            lock(&self.created).insert(t.clone(), id);
        }
        Ok(view)
    }

    fn load_experiment(&self, id: &str) -> Result<Arc<Mutex<Experiment>>> {
        if let Some(e) = lock(&self.experiments).get(id) {
            return Ok(e.clone());
        }
        let path = self.path_of(id)?;
        if !id.starts_with("e-") || !path.exists() {
            return Err(ServiceError::NotFound(format!("experiment {id}")));
        }
        let (log, events) = EventLog::open(&path)?;
        let experiment = Arc::new(Mutex::new(Experiment::restore(id.to_owned(), log, &events)?));
        Ok(lock(&self.experiments).entry(id.to_owned()).or_insert(experiment).clone())
    }

    pub fn experiment(&self, id: &str) -> Result<ExperimentView> {
        Ok(lock(&*self.load_experiment(id)?).view())
    }

    pub fn submit_response(&self, id: &str, req: &SubmitResponse) -> Result<SubmitReply> {
        let experiment = self.load_experiment(id)?;
        let mut e = lock(&experiment);
        e.submit(self.clock.now(), req)
    }

    /// Raw events of a session or experiment log.
    pub fn events(&self, id: &str) -> Result<Vec<EventEnvelope>> {
        let path = self.path_of(id)?;
        if !path.exists() {
            return Err(ServiceError::NotFound(id.to_owned()));
        }
        read_envelopes(BufReader::new(fs::File::open(path)?))
    }

    /// Session logs export as the raw JSONL or a metrics CSV; experiment
    /// logs as the raw JSONL or a responses CSV. CSVs of sessions that are
    /// not complete, or experiments without answers, hold only the header.
    pub fn export(&self, id: &str, format: ExportFormat) -> Result<Vec<u8>> {
        if format == ExportFormat::Jsonl {
            let path = self.path_of(id)?;
            if !path.exists() {
                return Err(ServiceError::NotFound(id.to_owned()));
            }
            return Ok(fs::read(path)?);
        }
        let mut out = Vec::new();
        if id.starts_with("s-") {
            let handle = self.session(id)?;
            let rows = if handle.status == crate::log::SessionStatus::Complete {
                vec![MetricsRow {
                    session: handle.id.clone(),
                    task: handle.task.clone(),
                    feedback: handle.mode.as_str().to_owned(),
                    seed: handle.seed,
                    metrics: self.metrics(id)?,
                }]
            } else {
                Vec::new()
            };
            write_metrics_csv(&mut out, &rows)?;
        } else {
            let experiment = self.load_experiment(id)?;
            write_responses_csv(&mut out, lock(&experiment).responses())?;
        }
        Ok(out)
    }
}

fn log_id(path: &Path) -> Option<String> {
    if path.extension()? != "jsonl" {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    (stem.starts_with("s-") || stem.starts_with("e-")).then(|| stem.to_owned())
}
