//! `spatialkit`: generate benchmarks, score responses, run agents and serve
//! mock tools.

mod commands;
pub mod config;
mod serve;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use spatial_core::agent::Paradigm;
use spatial_core::prompts::hex_sha256;
use spatial_core::qagen::TOOL_VERSION;
use thiserror::Error;

pub use config::Settings;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

pub(crate) fn runtime(context: impl std::fmt::Display) -> impl FnOnce(std::io::Error) -> CliError {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "spatialkit", version, about = "Spatial reasoning benchmark toolkit")]
pub struct Cli {
    /// TOML settings file; environment variables and flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulator benchmark or a corpus from scene files.
    Generate(GenerateArgs),
    /// Score responses against a manifest and report accuracy.
    Evaluate(EvaluateArgs),
    /// Run a tool-using agent over a manifest.
    Agent(AgentArgs),
    /// Print manifest statistics.
    Stats(StatsArgs),
    /// Serve fixture-backed tools over the wire protocol.
    ServeMockTools(ServeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Directory that relative media paths resolve against.
    #[arg(long)]
    pub media_root: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Judgment,
    MultiChoice,
    OpenEnded,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "sim-mini")]
    pub name: String,
    /// Number of simulator items.
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    /// Comma-separated task names; defaults to every task of the chosen mode.
    #[arg(long, value_delimiter = ',')]
    pub tasks: Vec<String>,
    /// Scene metadata files or directories of them; switches to scene mode.
    #[arg(long, num_args = 1..)]
    pub scenes: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [FormatArg::MultiChoice])]
    pub formats: Vec<FormatArg>,
    /// Length unit for scene answers.
    #[arg(long, default_value = "m")]
    pub unit: String,
    /// Skip writing PNG images (sidecar JSON is still written).
    #[arg(long)]
    pub no_render: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSONL of `{"id", "response"}` records.
    #[arg(long, conflicts_with_all = ["random_baseline", "core_script"])]
    pub responses: Option<PathBuf>,
    /// Answer with the chance-level baseline.
    #[arg(long, conflicts_with = "core_script")]
    pub random_baseline: bool,
    /// JSON object mapping sample ids to lists of scripted core outputs.
    #[arg(long)]
    pub core_script: Option<PathBuf>,
    #[arg(long)]
    pub core_endpoint: Option<String>,
    #[arg(long)]
    pub core_model: Option<String>,
    /// Score open-ended answers with the judge endpoint as well.
    #[arg(long)]
    pub judge: bool,
    #[arg(long)]
    pub judge_endpoint: Option<String>,
    /// JSON object mapping sample ids to scripted judge replies.
    #[arg(long)]
    pub judge_script: Option<PathBuf>,
    /// Strip media from core prompts.
    #[arg(long)]
    pub blind: bool,
    #[arg(long)]
    pub mra_start: Option<f64>,
    #[arg(long)]
    pub mra_end: Option<f64>,
    #[arg(long)]
    pub mra_interval: Option<f64>,
    /// Directory for scores.jsonl, report.json and report.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the machine-readable report instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParadigmArg {
    PlanExecute,
    React,
}

impl From<ParadigmArg> for Paradigm {
    fn from(p: ParadigmArg) -> Self {
        match p {
            ParadigmArg::PlanExecute => Paradigm::PlanExecute,
            ParadigmArg::React => Paradigm::React,
        }
    }
}

#[derive(Debug, Args)]
pub struct AgentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub paradigm: Option<ParadigmArg>,
    #[arg(long)]
    pub max_turns: Option<usize>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
    /// JSON object mapping sample ids to lists of scripted core outputs.
    #[arg(long)]
    pub core_script: Option<PathBuf>,
    #[arg(long)]
    pub core_endpoint: Option<String>,
    #[arg(long)]
    pub core_model: Option<String>,
    /// Base URL of a tool server.
    #[arg(long)]
    pub tools_endpoint: Option<String>,
    /// Fixture file for in-process mock tools.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Only run the first N samples.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub bind: String,
}

/// Provenance written at the top of every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    /// Effective settings plus command parameters, minus output paths.
    pub config: Value,
}

impl RunHeader {
    pub fn new(command: &str, settings: &Settings, params: Value) -> Self {
        let config = serde_json::json!({ "settings": settings, "params": params });
        Self {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            seed: settings.seed(),
            config_hash: hex_sha256(&config.to_string()),
            config,
        }
    }

    /// `{"run": header}`, the first line of JSONL artifacts.
    pub fn jsonl_line(&self) -> String {
        serde_json::json!({ "run": self }).to_string() + "\n"
    }
}

fn common_layer(c: &CommonArgs) -> Settings {
    Settings {
        seed: c.seed,
        parallelism: c.parallelism,
        media_root: c.media_root.clone(),
        ..Default::default()
    }
}

fn flag_layer(command: &Command) -> Settings {
    match command {
        Command::Generate(a) => common_layer(&a.common),
        Command::Evaluate(a) => {
            let mut s = common_layer(&a.common);
            s.blind = a.blind.then_some(true);
            s.core.endpoint = a.core_endpoint.clone();
            s.core.model = a.core_model.clone();
            s.judge.endpoint = a.judge_endpoint.clone();
            s.mra.start = a.mra_start;
            s.mra.end = a.mra_end;
            s.mra.interval = a.mra_interval;
            s
        }
        Command::Agent(a) => {
            let mut s = common_layer(&a.common);
            s.core.endpoint = a.core_endpoint.clone();
            s.core.model = a.core_model.clone();
            s.tools.endpoint = a.tools_endpoint.clone();
            s.tools.fixtures = a.fixtures.clone();
            s.agent.paradigm = a.paradigm.map(Paradigm::from);
            s.agent.max_turns = a.max_turns;
            s.agent.max_attempts = a.max_attempts;
            s
        }
        Command::Stats(_) => Settings::default(),
        Command::ServeMockTools(a) => {
            let mut s = Settings::default();
            s.tools.fixtures = a.fixtures.clone();
            s
        }
    }
}

/// Effective settings for a command line under the given environment.
pub fn resolve_settings(cli: &Cli, var: impl Fn(&str) -> Option<String>) -> Result<Settings, CliError> {
    let file = match &cli.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    Ok(file.overlay(&Settings::from_env(var)?).overlay(&flag_layer(&cli.command)))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let settings = resolve_settings(&cli, |k| std::env::var(k).ok())?;
    match &cli.command {
        Command::Generate(a) => commands::generate(a, &settings),
        Command::Evaluate(a) => commands::evaluate(a, &settings),
        Command::Agent(a) => commands::agent(a, &settings),
        Command::Stats(a) => commands::stats(a),
        Command::ServeMockTools(a) => serve::serve(a, &settings),
    }
}
