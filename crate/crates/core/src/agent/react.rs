use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{finalize, lenient_json, AgentConfig, AgentResult, AgentStatus, MemoryEntry, Run, Stage};
use crate::corpus::Sample;
use crate::eval::answer_span;
use crate::llmclient::{ChatClient, ChatTurn};
use crate::prompts;
use crate::toolproto::{py_json, render_toolbox_text, ToolCall, Toolbox};

/// One observer step: a thought and at most one action to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverOutput {
    #[serde(default)]
    pub thought: String,
    pub actions: Vec<ToolCall>,
}

/// Parses `{"thought": ..., "actions": [...]}`, tolerating code fences and
/// text around the object.
pub fn parse_observer_output(text: &str) -> Result<ObserverOutput, String> {
    let body = super::fenced_json(text).unwrap_or(text);
    let start = body.find('{').ok_or("no JSON object")?;
    let end = body.rfind('}').ok_or("no JSON object")?;
    if end < start {
        return Err("no JSON object".into());
    }
    let value = lenient_json(&body[start..=end])?;
    if !value.get("actions").is_some_and(Value::is_array) {
        return Err("missing \"actions\" list".into());
    }
    serde_json::from_value(value).map_err(|e| e.to_string())
}

const CORRECTION: &str = "Your previous response could not be parsed. Reply again with ONLY the strict JSON format {\"thought\": \"...\", \"actions\": [...]} and nothing else.";

fn terminate_answer(call: &ToolCall) -> Option<String> {
    match call.arguments.get("answer")? {
        Value::String(s) => Some(s.trim().to_string()),
        other => Some(other.to_string()),
    }
}

fn all_observations(memory: &[MemoryEntry]) -> String {
    let entries: Vec<Value> = memory
        .iter()
        .enumerate()
        .map(|(i, m)| {
            json!({
                "step": i + 1,
                "thought": m.thought,
                "actions": m.actions,
                "observation": m.result.as_ref().map_or(json!({}), |r| r.observation()),
            })
        })
        .collect();
    py_json(&Value::Array(entries))
}

/// Observer loop: one action per turn until Terminate or the turn budget
/// runs out, then a summary over all observations.
pub fn run_react(sample: &Sample, cfg: &AgentConfig, core: &dyn ChatClient, tools: &Toolbox) -> AgentResult {
    let mut run = Run::new(sample, cfg, core, tools);
    let observer = prompts::render_named(
        "observer",
        &[
            ("USER REQUEST", &run.question()),
            ("actions", &render_toolbox_text(tools.registry())),
            ("demo_examples", prompts::template("react_demos")),
        ],
    );
    let mut messages = vec![run.user_with_media(observer)];

    while run.trace.turns < cfg.max_turns.max(1) {
        run.trace.turns += 1;
        let output = match run.chat(Stage::Observer, messages.clone()) {
            Ok(o) => o,
            Err(e) => {
                run.trace.warnings.push(format!("turn {}: {e}", run.trace.turns));
                break;
            }
        };
        messages.push(ChatTurn::assistant(output.clone()));
        let parsed = match parse_observer_output(&output) {
            Ok(p) => Ok(p),
            Err(first) => {
                run.trace.warnings.push(format!("turn {}: malformed observer output ({first}); reprompting", run.trace.turns));
                messages.push(ChatTurn::user(CORRECTION));
                match run.chat(Stage::Observer, messages.clone()) {
                    Ok(retry) => {
                        messages.push(ChatTurn::assistant(retry.clone()));
                        parse_observer_output(&retry)
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
        };
        let observation = match parsed {
            Err(e) => {
                run.trace.warnings.push(format!("turn {}: observer output unusable after reprompt", run.trace.turns));
                json!({"error": format!("could not parse response: {e}")})
            }
            Ok(step) => {
                if step.actions.len() > 1 {
                    run.trace.warnings.push(format!(
                        "turn {}: {} actions requested; running only the first",
                        run.trace.turns,
                        step.actions.len()
                    ));
                }
                match step.actions.into_iter().next() {
                    None => {
                        run.trace.memory.push(MemoryEntry { thought: step.thought, actions: vec![], result: None });
                        json!({})
                    }
                    Some(action) if action.name == "Terminate" => {
                        let result = run.invoke(&action);
                        if result.is_ok() {
                            let answer = terminate_answer(&action).unwrap_or_default();
                            return finalize(run, answer, AgentStatus::Ok);
                        }
                        result.observation()
                    }
                    Some(action) => {
                        let result = run.invoke(&action);
                        let obs = result.observation();
                        run.trace.memory.push(MemoryEntry {
                            thought: step.thought,
                            actions: vec![action],
                            result: Some(result),
                        });
                        obs
                    }
                }
            }
        };
        if run.trace.turns < cfg.max_turns.max(1) {
            messages.push(ChatTurn::user(prompts::render_named("react_step", &[("OBSERVATION", &py_json(&observation))])));
        }
    }

    messages.push(ChatTurn::user(prompts::render_named(
        "react_summary",
        &[("ALL_OBSERVATION", &all_observations(&run.trace.memory))],
    )));
    let answer = match run.chat(Stage::ReactSummary, messages) {
        Ok(out) => match parse_observer_output(&out) {
            Ok(step) => step
                .actions
                .iter()
                .find(|a| a.name == "Terminate")
                .and_then(terminate_answer)
                .or_else(|| answer_span(&out).map(str::to_string))
                .unwrap_or_default(),
            Err(_) => answer_span(&out).map(str::to_string).unwrap_or_default(),
        },
        Err(_) => String::new(),
    };
    finalize(run, answer, AgentStatus::Ok)
}
