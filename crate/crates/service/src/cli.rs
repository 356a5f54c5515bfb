//! `srb` subcommands. Exit codes: 0 success, 1 runtime failure, 2 schema
//! error or missing input file, 3 infeasible scenario.

use crate::artifacts::{self, ArtifactError};
use crate::llm::HttpChatTransport;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use srb_core::agents::{AgentPolicy, ChatTransport, ExternalAgent};
use srb_core::kpi::SliceClass;
use srb_core::legislative::{bundled_corpus, load_corpus, Bm25Params, RetrievalIndex};
use srb_core::optimizer::{run_nsga2, select_offers, OptimizerError, Problem, SliceSpec};
use srb_core::runner::{self, ModeSelection, RunError, RunOptions};
use srb_core::scenario::{Scenario, ScenarioError, StakeholderSpec};
use srb_core::trust::{evaluate_transcript_text, NgdMode, TrustConfig, TrustWeights};
use std::cell::RefCell;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Debug, Parser)]
#[command(name = "srb", version, about = "Service & resource broker for RAN slice negotiation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Negotiate every phase, enforce, simulate and write the artifact directory.
    Run(RunArgs),
    /// Serve the HTTP/WebSocket session API.
    Serve(ServeArgs),
    /// Print the Pareto front and presented offers of one phase.
    Optimize(OptimizeArgs),
    /// Trust scoring of a transcript.
    Trust {
        #[command(subcommand)]
        command: TrustCommand,
    },
    /// Look up regulatory clauses.
    Retrieve(RetrieveArgs),
    /// Run the RAN simulation only and write its report.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Both,
    Dynamic,
    Static,
}

impl From<Mode> for ModeSelection {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Both => ModeSelection::Both,
            Mode::Dynamic => ModeSelection::Dynamic,
            Mode::Static => ModeSelection::Static,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub scenario: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: Mode,
    /// Logical timestamps and seed-derived keys; output is byte-identical across runs.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub no_arbitration: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Scenario supplying budgets, model and default stakeholders.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Append-only telemetry log; in memory when absent.
    #[arg(long)]
    pub telemetry_log: Option<PathBuf>,
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub scenario: PathBuf,
    /// Phase id; the first phase when absent.
    #[arg(long)]
    pub phase: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ngd {
    Nearest,
    FullGd,
}

#[derive(Debug, Subcommand)]
pub enum TrustCommand {
    /// Score every session in a transcript.jsonl file.
    Eval {
        transcript: PathBuf,
        /// Weights file (TOML).
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "nearest")]
        ngd: Ngd,
    },
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    pub query: String,
    #[arg(short, default_value_t = 3)]
    pub k: usize,
    /// Corpus directory with manifest.json; the bundled corpus when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: Mode,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// MCS trace CSV (`tti,mcs`) replacing the scenario's.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io(e) => CliError::Failed(e.to_string()),
            e => CliError::Schema(e.to_string()),
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Infeasible(m) => CliError::Infeasible(m),
            e => CliError::Failed(e.to_string()),
        }
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn missing(p: &Path) -> CliError {
    CliError::Schema(format!("missing file {}", p.display()))
}

/// Loads a scenario and checks that every file it references exists.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let s = Scenario::load(path)?;
    let f = &s.file;
    for p in [&f.netsim.trace, &f.judicial.lexicon, &f.trust.weights].into_iter().flatten() {
        let full = s.resolve(p);
        if !full.is_file() {
            return Err(missing(&full));
        }
    }
    Ok(s)
}

struct SharedTransport(Arc<HttpChatTransport>);

impl ChatTransport for SharedTransport {
    fn complete(&self, system: &str, user: &str, timeout: Duration) -> Result<String, String> {
        self.0.complete(system, user, timeout)
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(failed)?;
    writeln!(out).map_err(failed)
}

fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&a.scenario)?;
    let arbitration = !a.no_arbitration && scenario.file.negotiation.arbitration;
    let transports: RefCell<Vec<Arc<HttpChatTransport>>> = RefCell::new(Vec::new());
    let external = |s: &StakeholderSpec| -> Box<dyn AgentPolicy> {
        let cfg = s.external.clone().unwrap_or_default();
        let t = Arc::new(HttpChatTransport::from_env(&cfg.endpoint, &cfg.model_name));
        transports.borrow_mut().push(t.clone());
        Box::new(ExternalAgent::new(SharedTransport(t), cfg))
    };
    let policies = runner::build_policies(&scenario, arbitration, Some(&external))?;
    let started = Instant::now();
    let options = RunOptions { mode: a.mode.into(), deterministic: a.deterministic, arbitration: Some(arbitration) };
    let run = runner::run_scenario(&scenario, &policies, options)?;
    artifacts::write_run(&a.out, &scenario, &run, a.deterministic, Some(started.elapsed()))?;
    let exchanges: Vec<_> = transports.borrow().iter().flat_map(|t| t.exchanges()).collect();
    if !exchanges.is_empty() {
        let mut text = String::new();
        for e in &exchanges {
            text.push_str(&serde_json::to_string(e).map_err(failed)?);
            text.push('\n');
        }
        std::fs::write(a.out.join(artifacts::MODEL_EXCHANGES), text).map_err(failed)?;
    }
    for p in &run.phases {
        let consensus = p.consensus_offer.map_or_else(|| "none".to_string(), |o| format!("offer {o}"));
        eprintln!("{}: {} round(s), consensus {consensus}{}", p.phase, p.rounds, if p.degraded { " (degraded)" } else { "" });
    }
    if let Some(l) = &run.ledger {
        eprintln!("net PRB saving {:.2}%", l.cell.net_percent);
    }
    eprintln!("artifacts in {}", a.out.display());
    Ok(())
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&a.scenario)?;
    let f = &scenario.file;
    let phase = match &a.phase {
        Some(id) => f.phases.iter().find(|p| &p.id == id).ok_or_else(|| CliError::Schema(format!("no phase `{id}`")))?,
        None => f.phases.first().ok_or_else(|| CliError::Schema("scenario has no phases".into()))?,
    };
    let model = runner::kpi_model(&scenario)?;
    let intents: Vec<_> = scenario.agent_ids().iter().filter_map(|a| phase.intent(a)).collect();
    let classes: Vec<SliceClass> =
        SliceClass::ALL.iter().copied().filter(|c| intents.iter().any(|i| i.use_case == *c)).collect();
    let slices = classes.iter().map(|c| SliceSpec { class: *c, mcs: phase.mcs }).collect();
    let clauses = intents.iter().map(|i| i.clause()).collect();
    let problem = Problem::new(slices, f.budget, clauses, model).map_err(optimizer_error)?;
    let front = run_nsga2(&problem, &f.optimizer).map_err(optimizer_error)?;
    let sel = select_offers(&front, f.optimizer.top_k);
    print_json(&json!({
        "phase": phase.id,
        "mcs": phase.mcs,
        "front_size": front.len(),
        "generations": front.generations,
        "evaluations": front.evaluations,
        "short_front": sel.short_front,
        "presented": sel.offers,
        "presented_source_ids": sel.source_ids,
        "front": front.offers,
    }))
}

fn optimizer_error(e: OptimizerError) -> CliError {
    match e {
        OptimizerError::Infeasible { clause } => CliError::Infeasible(format!("infeasible: {clause}")),
        e => CliError::Schema(e.to_string()),
    }
}

fn cmd_trust(transcript: &Path, weights: Option<&Path>, ngd: Ngd) -> Result<(), CliError> {
    let text = std::fs::read_to_string(transcript).map_err(|_| missing(transcript))?;
    let weights = match weights {
        Some(p) => {
            let w = std::fs::read_to_string(p).map_err(|_| missing(p))?;
            TrustWeights::parse(&w).map_err(|e| CliError::Schema(format!("{}: {e}", p.display())))?
        }
        None => TrustWeights::default(),
    };
    let ngd_mode = match ngd {
        Ngd::Nearest => NgdMode::Nearest,
        Ngd::FullGd => NgdMode::FullGd,
    };
    let cfg = TrustConfig { weights, ngd_mode, ..TrustConfig::default() };
    let sessions = evaluate_transcript_text(&text, &cfg).map_err(|e| CliError::Schema(e.to_string()))?;
    print_json(&sessions)
}

fn cmd_retrieve(a: &RetrieveArgs) -> Result<(), CliError> {
    let corpus = match &a.corpus {
        Some(dir) => {
            if !dir.join("manifest.json").is_file() {
                return Err(missing(&dir.join("manifest.json")));
            }
            load_corpus(dir).map_err(|e| CliError::Schema(e.to_string()))?
        }
        None => bundled_corpus(),
    };
    let index = RetrievalIndex::build(corpus, Bm25Params::default()).map_err(|e| CliError::Schema(e.to_string()))?;
    let hits = index.retrieve(&a.query, a.k).map_err(failed)?;
    print_json(&hits)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut scenario = load_scenario(&a.scenario)?;
    if let Some(t) = &a.trace {
        if !t.is_file() {
            return Err(missing(t));
        }
        scenario.file.netsim.trace = Some(std::fs::canonicalize(t).map_err(failed)?);
    }
    let policies = runner::build_policies(&scenario, scenario.file.negotiation.arbitration, None)?;
    let options = RunOptions { mode: a.mode.into(), deterministic: true, arbitration: None };
    let run = runner::run_scenario(&scenario, &policies, options)?;
    artifacts::write_simulation(&a.out, &scenario, &run)?;
    if let Some(l) = &run.ledger {
        eprintln!("net PRB saving {:.2}%", l.cell.net_percent);
    }
    eprintln!("simulation report in {}", a.out.display());
    Ok(())
}

fn cmd_serve(a: &ServeArgs) -> Result<(), CliError> {
    let scenario = match &a.scenario {
        Some(p) => load_scenario(p)?,
        None => Scenario::bundled(),
    };
    let state = crate::api::AppState::new(scenario, a.telemetry_log.as_deref(), a.deterministic).map_err(failed)?;
    let rt = tokio::runtime::Runtime::new().map_err(failed)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.bind).await.map_err(failed)?;
        tracing::info!(addr = %a.bind, "listening");
        crate::api::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(failed)
    })
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Trust { command: TrustCommand::Eval { transcript, weights, ngd } } => {
            cmd_trust(transcript, weights.as_deref(), *ngd)
        }
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}
