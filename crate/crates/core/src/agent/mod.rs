//! Plan-Execute and ReAct orchestration over a chat core and a toolbox.

mod plan_execute;
mod react;

use std::path::PathBuf;
use std::sync::{Arc, LazyLock};
use std::time::Instant;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::Sample;
use crate::eval::{answer_span, format_prompt, media_refs};
use crate::llmclient::{ChatClient, ChatTurn};
use crate::prompts;
use crate::toolproto::{ToolCall, ToolResult, Toolbox};

pub use plan_execute::{parse_plan, run_plan_execute, Plan};
pub use react::{parse_observer_output, run_react, ObserverOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Paradigm {
    PlanExecute,
    React,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub paradigm: Paradigm,
    pub max_attempts: usize,
    pub max_turns: usize,
    pub max_frames: usize,
    /// Directory that relative media paths are joined onto.
    pub media_root: Option<PathBuf>,
    /// Adds wall-clock timings to traces, which makes them nondeterministic.
    pub record_timings: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            paradigm: Paradigm::PlanExecute,
            max_attempts: 3,
            max_turns: 10,
            max_frames: crate::corpus::DEFAULT_FRAME_COUNT,
            media_root: None,
            record_timings: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_attempts == 0 || self.max_turns == 0 {
            return Err(AgentError::Config("max_attempts and max_turns must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("plan parse error: {0}")]
    Plan(String),
    #[error("core error: {0}")]
    Core(String),
    #[error("summarize error: {0}")]
    Summarize(String),
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentStatus {
    Ok,
    FallbackDirect,
    DowngradedCore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Planner,
    Executor,
    Summarizer,
    Observer,
    ReactSummary,
    Direct,
    BareCore,
}

/// One observer decision and what executing it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub thought: String,
    pub actions: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ToolResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    Chat {
        stage: Stage,
        messages: Vec<ChatTurn>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        output: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        elapsed_ms: Option<u64>,
    },
    Tool {
        call: ToolCall,
        result: ToolResult,
    },
    Failure {
        attempt: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub sample_id: String,
    pub paradigm: Paradigm,
    pub events: Vec<TraceEvent>,
    pub attempts: usize,
    pub turns: usize,
    pub memory: Vec<MemoryEntry>,
    pub fallback: bool,
    pub downgraded: bool,
    pub warnings: Vec<String>,
    pub final_answer: String,
    pub status: AgentStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResult {
    pub answer: String,
    pub status: AgentStatus,
    pub trace: AgentTrace,
}

/// Per-run state shared by both paradigms.
pub(crate) struct Run<'a> {
    pub sample: &'a Sample,
    pub cfg: &'a AgentConfig,
    pub core: &'a dyn ChatClient,
    pub tools: &'a Toolbox,
    pub media: Vec<String>,
    pub trace: AgentTrace,
}

impl<'a> Run<'a> {
    pub fn new(sample: &'a Sample, cfg: &'a AgentConfig, core: &'a dyn ChatClient, tools: &'a Toolbox) -> Self {
        let media = media_refs(sample, cfg.media_root.as_deref(), cfg.max_frames);
        let trace = AgentTrace {
            sample_id: sample.id.clone(),
            paradigm: cfg.paradigm,
            events: Vec::new(),
            attempts: 0,
            turns: 0,
            memory: Vec::new(),
            fallback: false,
            downgraded: false,
            warnings: Vec::new(),
            final_answer: String::new(),
            status: AgentStatus::Ok,
        };
        Self { sample, cfg, core, tools, media, trace }
    }

    /// Sends a chat and records it.
    pub fn chat(&mut self, stage: Stage, messages: Vec<ChatTurn>) -> Result<String, AgentError> {
        let start = Instant::now();
        let out = self.core.chat(&messages);
        let elapsed_ms = self.cfg.record_timings.then(|| start.elapsed().as_millis() as u64);
        let (output, error) = match &out {
            Ok(s) => (Some(s.clone()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.trace.events.push(TraceEvent::Chat { stage, messages, output, error, elapsed_ms });
        out.map_err(|e| AgentError::Core(e.to_string()))
    }

    pub fn invoke(&mut self, call: &ToolCall) -> ToolResult {
        let mut result = self.tools.invoke(call, &self.media);
        if !self.cfg.record_timings {
            result.latency_ms = None;
        }
        self.trace.events.push(TraceEvent::Tool { call: call.clone(), result: result.clone() });
        result
    }

    pub fn question(&self) -> String {
        self.sample.prompt_question()
    }

    pub fn user_with_media(&self, text: String) -> ChatTurn {
        ChatTurn::user(text).with_media(self.media.clone())
    }

    pub fn finish(mut self, answer: String, status: AgentStatus) -> AgentResult {
        self.trace.final_answer = answer.clone();
        self.trace.status = status;
        AgentResult { answer, status, trace: self.trace }
    }
}

static FENCED_JSON: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)```(?:json|JSON)\s*(.*?)```").unwrap());

/// Content of the first ```json fenced block.
pub fn fenced_json(text: &str) -> Option<&str> {
    FENCED_JSON.captures(text).map(|c| c.get(1).unwrap().as_str())
}

/// Parses JSON that may carry trailing commas before a closing bracket.
pub fn lenient_json(text: &str) -> Result<Value, String> {
    let text = text.trim();
    if let Ok(v) = serde_json::from_str(text) {
        return Ok(v);
    }
    let mut out = String::with_capacity(text.len());
    let mut in_str = false;
    let mut escaped = false;
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            out.push(c);
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        if c == '"' {
            in_str = true;
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some(']') | Some('}')) {
                continue;
            }
        }
        out.push(c);
    }
    serde_json::from_str(&out).map_err(|e| e.to_string())
}

static REFUSAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)cannot be determined|can(?:no|')t be determined|none of the above|unable to (?:determine|answer)|not possible to determine|i can(?:no|')t (?:answer|determine|tell)")
        .unwrap()
});

pub fn is_refusal(answer: &str) -> bool {
    REFUSAL.is_match(answer)
}

/// Answer span when present, otherwise the trimmed text.
fn extract_direct(output: &str) -> String {
    answer_span(output).unwrap_or(output.trim()).trim().to_string()
}

const DIRECT_REMINDER: &str = "**CRITICAL: You MUST always provide a reasonable answer. Never respond with 'cannot be determined', 'none of the above', or similar phrases.**\nNow, output **your thinking** between <thinking> and </thinking>, and **your answer** between <answer> and </answer>.";

/// Answers without tools, re-asking once on a refusal or empty answer.
/// Returns an empty string when both tries fail.
pub(crate) fn fallback_direct(run: &mut Run<'_>) -> String {
    run.trace.fallback = true;
    let mut messages = vec![
        ChatTurn::system(prompts::render_named("direct", &[])),
        run.user_with_media(format!("Question: {}", run.question())),
    ];
    for attempt in 0..2 {
        let output = match run.chat(Stage::Direct, messages.clone()) {
            Ok(o) => o,
            Err(_) => return String::new(),
        };
        let answer = extract_direct(&output);
        if !answer.is_empty() && !is_refusal(&answer) {
            return answer;
        }
        if attempt == 0 {
            run.trace.warnings.push("direct answer refused or empty; re-asking once".into());
            messages.push(ChatTurn::assistant(output));
            messages.push(ChatTurn::user(DIRECT_REMINDER));
        }
    }
    String::new()
}

/// Replaces an empty answer with a bare-core answer to the evaluation prompt.
pub(crate) fn finalize(mut run: Run<'_>, answer: String, status: AgentStatus) -> AgentResult {
    if !answer.trim().is_empty() {
        return run.finish(answer.trim().to_string(), status);
    }
    run.trace.downgraded = true;
    let prompt = run.user_with_media(format_prompt(run.sample));
    let answer = match run.chat(Stage::BareCore, vec![prompt]) {
        Ok(out) => extract_direct(&out),
        Err(_) => String::new(),
    };
    run.finish(answer, AgentStatus::DowngradedCore)
}

/// Runs the configured paradigm on one sample.
pub fn run_agent(sample: &Sample, cfg: &AgentConfig, core: &dyn ChatClient, tools: &Toolbox) -> AgentResult {
    match cfg.paradigm {
        Paradigm::PlanExecute => run_plan_execute(sample, cfg, core, tools),
        Paradigm::React => run_react(sample, cfg, core, tools),
    }
}

/// Runs samples with bounded parallelism; results keep sample order.
pub fn run_batch<F>(
    samples: &[Sample],
    cfg: &AgentConfig,
    tools: &Toolbox,
    parallelism: usize,
    core_for: F,
) -> Result<Vec<AgentResult>, AgentError>
where
    F: Fn(&Sample) -> Arc<dyn ChatClient> + Sync,
{
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| AgentError::Config(e.to_string()))?;
    Ok(pool.install(|| {
        samples
            .par_iter()
            .map(|s| {
                let core = core_for(s);
                run_agent(s, cfg, core.as_ref(), tools)
            })
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lenient_parsing() {
        let v = lenient_json(r#"[{"a": [1, 2,], "b": "x,]"},]"#).unwrap();
        assert_eq!(v, serde_json::json!([{"a": [1, 2], "b": "x,]"}]));
        assert!(lenient_json("[1, 2").is_err());
    }

    #[test]
    fn refusals() {
        assert!(is_refusal("The distance cannot be determined."));
        assert!(is_refusal("None of the above"));
        assert!(!is_refusal("(A)"));
    }

    #[test]
    fn fences() {
        assert_eq!(fenced_json("x ```json\n[1]\n``` y").map(str::trim), Some("[1]"));
        assert_eq!(fenced_json("no fence"), None);
    }
}
