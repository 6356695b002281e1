//! The `wrapsim` command line.

use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use wrapped_haptics::learner::FeatureSource;
use wrapped_haptics::psychophysics::{
    bias, confusion_matrix, fit_sigmoid, read_responses_csv, time_summary, Method, MethodOrder, PairProtocol,
    PsychometricData, TrialResponse, TripletProtocol, REFERENCE_PSI,
};
use wrapped_haptics::teaching::{
    run_weld_session, uncertainty_schedule, weld_metrics, welding_task, FeedbackIgnoringTeacher, FeedbackMode,
    TaskSpec, TeacherPolicy, TeachingConfig, TeachingContext, ThresholdTeacher, WeldTeacher,
};

use crate::clock::SystemClock;
use crate::error::{Result, ServiceError};
use crate::service::{ExportFormat, Service, DATA_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "wrapsim", version, about = "Wrapped pneumatic haptic display simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TeacherKind {
    /// Re-teaches the stretch where felt pressure crossed its threshold.
    Threshold,
    /// Re-teaches a random stretch of the same length, ignoring feedback.
    Ignoring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Pair,
    Triplet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    LocalFirst,
    GlobalFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the HTTP and WebSocket API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory holding one JSONL log per session or experiment.
        #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Run a scripted closed-loop teaching session and print its metrics.
    Simulate {
        /// cleaning-first, cleaning-middle, cleaning-last or welding.
        #[arg(long)]
        task: String,
        /// none, gui, local or global.
        #[arg(long)]
        feedback: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = TeacherKind::Threshold)]
        teacher: TeacherKind,
        /// Re-teach length for the ignoring teacher, as a fraction of the path.
        #[arg(long, default_value_t = 0.25)]
        budget: f64,
        /// Write the session record here (JSONL for cleaning, JSON for welding).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a psychophysics protocol as JSON.
    Protocol {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        seed: u64,
        /// Block order of the triplet protocol.
        #[arg(long, value_enum, default_value_t = OrderArg::LocalFirst)]
        order: OrderArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze a responses CSV: psychometric fit for pairs, accuracy for triplets.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Reference pressure of the pair protocol, psi.
        #[arg(long, default_value_t = REFERENCE_PSI)]
        reference: f64,
    },
    /// Export a session or experiment log.
    Export {
        #[arg(long)]
        id: String,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Cli {
    /// Run the command, writing reports to `out`.
    pub fn run(self, out: &mut dyn Write) -> Result<()> {
        match self.command {
            Command::Serve { port, host, data_dir } => serve(SocketAddr::new(host, port), data_dir, out),
            Command::Simulate { task, feedback, seed, teacher, budget, out: path } => {
                let feedback: FeedbackMode = feedback.parse()?;
                let report = simulate(&task, feedback, seed, teacher, budget, path)?;
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
                Ok(())
            }
            Command::Protocol { kind, seed, order, out: path } => {
                let text = match kind {
                    KindArg::Pair => PairProtocol::generate(seed).to_json(),
                    KindArg::Triplet => {
                        let order = match order {
                            OrderArg::LocalFirst => MethodOrder::LocalFirst,
                            OrderArg::GlobalFirst => MethodOrder::GlobalFirst,
                        };
                        TripletProtocol::generate(seed, order).to_json()
                    }
                };
                emit(out, path, text.as_bytes())
            }
            Command::Fit { input, reference } => {
                let responses = read_responses_csv(fs::File::open(&input)?)?;
                let report = analyze(&responses, reference)?;
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
                Ok(())
            }
            Command::Export { id, format, data_dir, out: path } => {
                let service = Service::open(data_dir, Arc::new(SystemClock))?;
                let format = match format {
                    FormatArg::Csv => ExportFormat::Csv,
                    FormatArg::Jsonl => ExportFormat::Jsonl,
                };
                emit(out, path, &service.export(&id, format)?)
            }
        }
    }
}

fn emit(out: &mut dyn Write, path: Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => {
            out.write_all(bytes)?;
            if !bytes.ends_with(b"\n") {
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

fn serve(addr: SocketAddr, data_dir: PathBuf, out: &mut dyn Write) -> Result<()> {
    let service = Arc::new(Service::open(data_dir, Arc::new(SystemClock))?);
    writeln!(out, "listening on http://{addr}, data in {}", service.data_dir().display())?;
    out.flush()?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(crate::http::serve(service, addr))?;
    Ok(())
}

/// Scripted session report: metrics, frame count and the re-taught range.
pub fn simulate(
    task: &str,
    feedback: FeedbackMode,
    seed: u64,
    teacher: TeacherKind,
    budget: f64,
    out: Option<PathBuf>,
) -> Result<Value> {
    let spec = TaskSpec::builtin(task).map_err(|_| ServiceError::NotFound(format!("task {task}")))?;
    if spec.is_welding() {
        let task = welding_task(seed)?;
        let schedule = uncertainty_schedule(&task, seed)?;
        let source = FeatureSource { learned: None, schedule: Some(&schedule) };
        let record = run_weld_session(&task, &source, &WeldTeacher::default(), feedback, seed)?;
        let metrics = weld_metrics(&record, &task)?;
        if let Some(p) = out {
            fs::write(p, serde_json::to_vec(&record)?)?;
        }
        return Ok(json!({
            "task": task.name, "feedback": feedback, "seed": seed, "teacher": "weld",
            "frames": record.frames.len(), "metrics": metrics,
        }));
    }
    let ctx = TeachingContext::new(spec, TeachingConfig::default())?;
    let mut threshold;
    let mut ignoring;
    let policy: &mut dyn TeacherPolicy = match teacher {
        TeacherKind::Threshold => {
            threshold = ThresholdTeacher::new(seed);
            &mut threshold
        }
        TeacherKind::Ignoring => {
            ignoring = FeedbackIgnoringTeacher::random(budget, seed)?;
            &mut ignoring
        }
    };
    let record = ctx.run_session(policy, feedback, seed)?;
    let metrics = ctx.metrics(&record)?;
    let region = policy.region();
    if let Some(p) = out {
        let mut buf = Vec::new();
        record.write_jsonl(&mut buf)?;
        fs::write(p, buf)?;
    }
    Ok(json!({
        "task": ctx.task.name, "feedback": feedback, "seed": seed,
        "teacher": match teacher { TeacherKind::Threshold => "threshold", TeacherKind::Ignoring => "ignoring" },
        "retaught": [region.start, region.end], "frames": record.frames.len(), "metrics": metrics,
    }))
}

/// Fit and summary statistics of a response log.
pub fn analyze(responses: &[TrialResponse], reference: f64) -> Result<Value> {
    let (pairs, triplets): (Vec<TrialResponse>, Vec<TrialResponse>) =
        responses.iter().cloned().partition(|r| r.method().is_none());
    let mut report = serde_json::Map::new();
    if !pairs.is_empty() {
        let fit = fit_sigmoid(&PsychometricData::from_pair_responses(reference, &pairs))?;
        report.insert(
            "pair".into(),
            json!({
                "n": pairs.len(), "k": fit.k, "jnd": fit.jnd, "weber_pct": fit.weber, "p75": fit.p75(),
                "sse": fit.sse, "points": fit.points, "bias": bias(&pairs).ok(), "time": time_summary(&pairs)?,
            }),
        );
    }
    if !triplets.is_empty() {
        let mut by_method = serde_json::Map::new();
        for method in [Method::Local, Method::Global] {
            let block: Vec<TrialResponse> = triplets.iter().filter(|r| r.method() == Some(method)).cloned().collect();
            if block.is_empty() {
                continue;
            }
            let cm = confusion_matrix(&block)?;
            by_method.insert(
                method.to_string(),
                json!({
                    "n": block.len(), "accuracy_pct": cm.overall_accuracy(), "confusion": cm.counts,
                    "time": time_summary(&block)?,
                }),
            );
        }
        report.insert("triplet".into(), Value::Object(by_method));
    }
    Ok(Value::Object(report))
}
