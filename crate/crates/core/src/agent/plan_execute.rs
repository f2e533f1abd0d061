use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{fallback_direct, fenced_json, finalize, lenient_json, AgentError, AgentResult, AgentStatus, Run, Stage, TraceEvent};
use crate::corpus::Sample;
use crate::eval::answer_span;
use crate::llmclient::{ChatClient, ChatTurn};
use crate::prompts;
use crate::toolproto::{py_json, render_toolbox_text, Registry, ToolCall, ToolResult, Toolbox};

/// Ordered tool calls proposed by the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<ToolCall>,
}

/// Extracts and validates the fenced plan from planner output.
pub fn parse_plan(output: &str, registry: &Registry) -> Result<Plan, AgentError> {
    let block = fenced_json(output).ok_or_else(|| AgentError::Plan("no ```json block in planner output".into()))?;
    let value = lenient_json(block).map_err(|e| AgentError::Plan(format!("invalid JSON: {e}")))?;
    let items = match value {
        Value::Array(items) => items,
        Value::Object(_) => vec![value],
        _ => return Err(AgentError::Plan("plan is not a list of tool calls".into())),
    };
    let mut steps = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let call: ToolCall =
            serde_json::from_value(item).map_err(|e| AgentError::Plan(format!("step {}: {e}", i + 1)))?;
        let spec = registry
            .get(&call.name)
            .ok_or_else(|| AgentError::Plan(format!("step {}: unknown tool {:?}", i + 1, call.name)))?;
        spec.validate_args(&call.arguments).map_err(|e| AgentError::Plan(format!("step {}: {e}", i + 1)))?;
        steps.push(call);
    }
    Ok(Plan { steps })
}

fn planner_messages(run: &Run<'_>) -> Vec<ChatTurn> {
    let toolbox = render_toolbox_text(run.tools.registry());
    vec![
        ChatTurn::system(prompts::render_named("planner", &[("action_details", &toolbox)])),
        run.user_with_media(format!("Question: {}", run.question())),
    ]
}

/// Asks the core for a plan.
pub(crate) fn make_plan(run: &mut Run<'_>) -> Result<Plan, AgentError> {
    let output = run.chat(Stage::Planner, planner_messages(run))?;
    parse_plan(&output, run.tools.registry())
}

/// Runs every step, then asks the core for a chain of thought over the
/// results. Tool failures are recorded and execution continues.
pub(crate) fn execute_plan(run: &mut Run<'_>, plan: &Plan) -> Result<(Vec<ToolResult>, String), AgentError> {
    let results: Vec<ToolResult> = plan.steps.iter().map(|s| run.invoke(s)).collect();
    if plan.steps.is_empty() {
        return Ok((results, String::new()));
    }
    let tool_plan = py_json(&serde_json::to_value(&plan.steps).expect("serializable"));
    let tool_results =
        py_json(&Value::Array(plan.steps.iter().zip(&results).map(|(s, r)| {
            serde_json::json!({"name": s.name, "result": r.observation()})
        }).collect()));
    let messages = vec![
        ChatTurn::system(prompts::render_named(
            "executor",
            &[("tool_plan", &tool_plan), ("tool_results", &tool_results)],
        )),
        run.user_with_media(format!("Question: {}", run.question())),
    ];
    let cot = run.chat(Stage::Executor, messages)?;
    Ok((results, cot))
}

/// Asks the core for the final answer; the answer span must be nonempty.
pub(crate) fn summarize(run: &mut Run<'_>, cot: &str) -> Result<String, AgentError> {
    let messages = vec![
        ChatTurn::system(prompts::render_named("summarizer", &[("cot_steps", cot)])),
        run.user_with_media(format!("Question: {}", run.question())),
    ];
    let output = run.chat(Stage::Summarizer, messages)?;
    match answer_span(&output) {
        Some(a) if !a.is_empty() => Ok(a.to_string()),
        Some(_) => Err(AgentError::Summarize("empty answer span".into())),
        None => Err(AgentError::Summarize("no <answer> span".into())),
    }
}

fn attempt(run: &mut Run<'_>) -> Result<String, AgentError> {
    let plan = make_plan(run)?;
    if plan.steps.is_empty() {
        return Err(AgentError::Plan("empty plan".into()));
    }
    let (_, cot) = execute_plan(run, &plan)?;
    if cot.trim().is_empty() {
        return Err(AgentError::Core("empty chain of thought".into()));
    }
    summarize(run, &cot)
}

/// Plan, execute, summarize; retried up to `max_attempts`, then a direct answer.
pub fn run_plan_execute(sample: &Sample, cfg: &super::AgentConfig, core: &dyn ChatClient, tools: &Toolbox) -> AgentResult {
    let mut run = Run::new(sample, cfg, core, tools);
    for n in 1..=cfg.max_attempts.max(1) {
        run.trace.attempts = n;
        match attempt(&mut run) {
            Ok(answer) => return finalize(run, answer, AgentStatus::Ok),
            Err(e) => run.trace.events.push(TraceEvent::Failure { attempt: n, reason: e.to_string() }),
        }
    }
    let answer = fallback_direct(&mut run);
    finalize(run, answer, AgentStatus::FallbackDirect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolproto::register_catalog;

    #[test]
    fn plan_parsing() {
        let reg = register_catalog();
        let out = "Plan:\n```json\n[\n    {\"name\": \"LocalizeObjects\", \"arguments\": {\"image\": \"image-0\", \"objects\": [\"dog\", \"cat\"]}},\n    {\"name\": \"EstimateObjectDepth\", \"arguments\": {\"image\": \"image-0\", \"objects\": [\"dog\", \"cat\"], \"indoor_or_outdoor\": \"outdoor\"}},\n]\n```";
        let plan = parse_plan(out, &reg).unwrap();
        assert_eq!(plan.steps.len(), 2);
        assert_eq!(plan.steps[1].name, "EstimateObjectDepth");
        assert!(matches!(parse_plan("I would localize the dog.", &reg), Err(AgentError::Plan(_))));
        let err = parse_plan("```json\n[{\"name\": \"FlyDrone\", \"arguments\": {}}]\n```", &reg).unwrap_err();
        assert!(err.to_string().contains("FlyDrone"));
        let err = parse_plan("```json\n[{\"name\": \"LocalizeObjects\", \"arguments\": {\"image\": \"/abs/x.png\", \"objects\": [\"a\"]}}]\n```", &reg).unwrap_err();
        assert!(err.to_string().contains("image"));
    }
}
