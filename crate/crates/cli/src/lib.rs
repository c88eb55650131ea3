//! The `personamail` command line.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage, 3 configuration,
//! 4 validation, 5 illegal state, 6 not found, 7 provider failure,
//! 8 invalid agent output (schema, scope or segmentation), 9 storage.

pub mod fixtures;

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use personamail_core::agents::live::{ChatClient, HttpEmbedder};
use personamail_core::agents::{Gateway, LlmClient, MockClient, MockTranscript, NetworkGuard, Pipeline, RecordingClient, ScriptedClient, TemplateSet};
use personamail_core::catalog::Catalog;
use personamail_core::clock::{Clock, LogicalClock, SystemClock};
use personamail_core::config::Config;
use personamail_core::service::{run_script, ComposeService, RunReport, Script};
use personamail_core::store::ReuseStore;
use personamail_core::testkit::SyntheticClient;
use personamail_core::Error;

#[derive(Debug, Parser)]
#[command(name = "personamail", version, about = "Compose emails with explicit tone factors and a learned stylebook")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a session script and print the final email of each session.
    Run(RunArgs),
    /// Inspect or maintain a reuse store.
    Store {
        /// Store file; defaults to `store_path` from the configuration.
        #[arg(long)]
        store: Option<PathBuf>,
        #[command(subcommand)]
        action: StoreAction,
    },
    /// Built-in scenario scripts.
    Fixtures {
        #[command(subcommand)]
        action: FixtureAction,
    },
    /// Build mock transcripts for offline replay.
    Transcript {
        #[command(subcommand)]
        action: TranscriptAction,
    },
    /// Serve the JSON HTTP API.
    Serve(ServeArgs),
}

/// Where agent responses come from.
#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct Backend {
    /// Replay responses from a recorded transcript; network access is refused.
    #[arg(long, value_name = "TRANSCRIPT")]
    pub mock: Option<PathBuf>,
    /// Call the configured provider.
    #[arg(long)]
    pub live: bool,
    /// Use the built-in synthetic responder (for demos and testing).
    #[arg(long)]
    pub synthetic: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub script: PathBuf,
    #[command(flatten)]
    pub backend: Backend,
    /// Store file. Offline runs use an in-memory store when omitted.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Write the full run report (bodies, summaries, event logs) as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum StoreAction {
    ListAnchors,
    ListRecords,
    /// Print the whole store as JSON.
    Export,
    /// Replace the store contents with a validated JSON document.
    Import { file: PathBuf },
    /// Check every anchor and record; exits with 4 when issues are found.
    Verify,
}

#[derive(Debug, Subcommand)]
pub enum FixtureAction {
    List,
    /// Print the script of one scenario, by slug or title.
    Emit { name: String },
}

#[derive(Debug, Subcommand)]
pub enum TranscriptAction {
    /// Run a script against scripted responses and write the transcript.
    Record {
        script: PathBuf,
        /// JSON object mapping agent names to lists of responses.
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[command(flatten)]
    pub backend: Backend,
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn internal(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 3,
        Error::Validation { .. } | Error::NoOpEdit => 4,
        Error::State { .. } => 5,
        Error::NotFound { .. } => 6,
        Error::Gateway(_) => 7,
        Error::Schema { .. } | Error::Scope { .. } | Error::Segmentation(_) => 8,
        Error::Storage(_) => 9,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError {
            code: exit_code(&err),
            message: err.to_string(),
        }
    }
}

fn io_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError {
        code: 9,
        message: format!("{what} {}: {e}", path.display()),
    }
}

fn config(path: Option<&Path>) -> Result<Config, Error> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

/// Build the service. Offline backends use a logical clock so runs are
/// reproducible; the client is created before any step runs, so a missing
/// API key fails up front.
pub fn build_service(config: &Config, backend: &Backend, store: Option<&Path>) -> Result<ComposeService, Error> {
    let (client, clock, embedder): (Arc<dyn LlmClient>, Arc<dyn Clock>, _) = if let Some(path) = &backend.mock {
        let transcript = MockTranscript::load(path)?;
        let client = MockClient::new(&transcript).with_fallback(Arc::new(NetworkGuard::default()));
        (Arc::new(client), Arc::new(LogicalClock::new()), None)
    } else if backend.live {
        let settings = config.gateway.live_settings()?;
        let embedder = config.gateway.embedding_model.as_ref().map(|model| {
            let mut s = settings.clone();
            s.model = model.clone();
            Arc::new(HttpEmbedder::new(s))
        });
        (Arc::new(ChatClient::new(settings)), Arc::new(SystemClock), embedder)
    } else {
        (Arc::new(SyntheticClient::new()), Arc::new(LogicalClock::new()), None)
    };
    service_over(config, client, clock, embedder, open_store(config, backend, store)?)
}

fn open_store(config: &Config, backend: &Backend, store: Option<&Path>) -> Result<Arc<ReuseStore>, Error> {
    Ok(Arc::new(match store {
        Some(p) => ReuseStore::open(p)?,
        None if backend.live => ReuseStore::open(&config.store_path)?,
        None => ReuseStore::in_memory(),
    }))
}

fn service_over(
    config: &Config,
    client: Arc<dyn LlmClient>,
    clock: Arc<dyn Clock>,
    embedder: Option<Arc<HttpEmbedder>>,
    store: Arc<ReuseStore>,
) -> Result<ComposeService, Error> {
    let catalog = match &config.catalog_path {
        Some(p) => Catalog::load(p)?,
        None => Catalog::builtin(),
    };
    let templates = match &config.template_dir {
        Some(d) => TemplateSet::load_dir(d)?,
        None => TemplateSet::builtin(),
    };
    let gateway = Gateway::new(client, templates, config.gateway.settings.clone());
    let pipeline = Pipeline::new(Arc::new(gateway), Arc::new(catalog), config.pipeline.clone())?;
    let mut service = ComposeService::new(pipeline, store, clock).with_retrieval(config.retrieval.clone())?;
    if let Some(e) = embedder {
        service = service.with_embedder(e);
    }
    Ok(service)
}

fn execute(service: &ComposeService, script: &Script) -> Result<RunReport, CliError> {
    run_script(service, script).map_err(|f| CliError {
        code: exit_code(&f.error),
        message: f.to_string(),
    })
}

/// Final bodies separated by `-----` lines.
pub fn render_bodies(report: &RunReport) -> String {
    report
        .sessions
        .iter()
        .map(|s| s.body.clone().unwrap_or_default())
        .collect::<Vec<_>>()
        .join("\n-----\n")
}

fn run_command(config: &Config, args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let service = build_service(config, &args.backend, args.store.as_deref())?;
    let script = Script::load(&args.script)?;
    let report = execute(&service, &script)?;
    writeln!(out, "{}", render_bodies(&report)).map_err(|e| CliError::internal(e.to_string()))?;
    for s in &report.sessions {
        let _ = writeln!(err, "== {}\n{}", s.session_id, s.summary);
    }
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, json + "\n").map_err(|e| io_err("writing", path, e))?;
    }
    Ok(())
}

fn store_command(config: &Config, path: Option<&Path>, action: &StoreAction, out: &mut dyn Write) -> Result<(), CliError> {
    let store = ReuseStore::open(path.unwrap_or(&config.store_path))?;
    let catalog = match &config.catalog_path {
        Some(p) => Catalog::load(p)?,
        None => Catalog::builtin(),
    };
    let text = match action {
        StoreAction::ListAnchors => serde_json::to_string_pretty(&store.list_anchors()).expect("serializes"),
        StoreAction::ListRecords => serde_json::to_string_pretty(&store.list_records()).expect("serializes"),
        StoreAction::Export => store.export_json().trim_end().to_owned(),
        StoreAction::Import { file } => {
            let text = std::fs::read_to_string(file).map_err(|e| io_err("reading", file, e))?;
            store.import_json(&text, Some(&catalog))?;
            format!("imported {} anchors and {} records", store.list_anchors().len(), store.list_records().len())
        }
        StoreAction::Verify => {
            let report = store.verify(Some(&catalog));
            if !report.is_empty() {
                return Err(CliError {
                    code: 4,
                    message: format!(
                        "store has {} issue(s):\n{}",
                        report.issues.len(),
                        serde_json::to_string_pretty(&report).expect("serializes")
                    ),
                });
            }
            "ok".to_owned()
        }
    };
    writeln!(out, "{text}").map_err(|e| CliError::internal(e.to_string()))
}

fn fixtures_command(action: &FixtureAction, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match action {
        FixtureAction::List => fixtures::SCENARIOS
            .iter()
            .map(|s| format!("{}\t{}", s.slug(), s.title))
            .collect::<Vec<_>>()
            .join("\n"),
        FixtureAction::Emit { name } => {
            let scenario = fixtures::find(name).ok_or_else(|| CliError {
                code: 6,
                message: format!(
                    "unknown fixture `{name}`; available: {}",
                    fixtures::SCENARIOS.iter().map(|s| s.slug()).collect::<Vec<_>>().join(", ")
                ),
            })?;
            serde_json::to_string_pretty(&scenario.script()).expect("script serializes")
        }
    };
    writeln!(out, "{text}").map_err(|e| CliError::internal(e.to_string()))
}

/// Run `script` against scripted responses and return the recorded transcript.
pub fn record_transcript(config: &Config, script: &Script, responses: &str) -> Result<(MockTranscript, RunReport, usize), CliError> {
    let scripted = Arc::new(ScriptedClient::from_json(responses)?);
    let recorder = Arc::new(RecordingClient::new(scripted.clone()));
    let service = service_over(
        config,
        recorder.clone(),
        Arc::new(LogicalClock::new()),
        None,
        Arc::new(ReuseStore::in_memory()),
    )?;
    let report = execute(&service, script)?;
    Ok((recorder.transcript(), report, scripted.remaining()))
}

fn transcript_command(config: &Config, action: &TranscriptAction, err: &mut dyn Write) -> Result<(), CliError> {
    let TranscriptAction::Record { script, responses, out } = action;
    let script = Script::load(script)?;
    let responses = std::fs::read_to_string(responses).map_err(|e| io_err("reading", responses, e))?;
    let (transcript, _, left) = record_transcript(config, &script, &responses)?;
    if left > 0 {
        let _ = writeln!(err, "warning: {left} scripted response(s) were not used");
    }
    std::fs::write(out, transcript.to_json()).map_err(|e| io_err("writing", out, e))?;
    let _ = writeln!(err, "recorded {} entries to {}", transcript.entries.len(), out.display());
    Ok(())
}

fn serve_command(config: &Config, args: &ServeArgs) -> Result<(), CliError> {
    let service = Arc::new(build_service(config, &args.backend, args.store.as_deref())?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::internal(e.to_string()))?;
    runtime
        .block_on(personamail_server::serve(service, args.addr))
        .map_err(|e| CliError::internal(format!("server: {e}")))
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = config(cli.config.as_deref())?;
    match &cli.command {
        Command::Run(args) => run_command(&config, args, out, err),
        Command::Store { store, action } => store_command(&config, store.as_deref(), action, out),
        Command::Fixtures { action } => fixtures_command(action, out),
        Command::Transcript { action } => transcript_command(&config, action, err),
        Command::Serve(args) => serve_command(&config, args),
    }
}
