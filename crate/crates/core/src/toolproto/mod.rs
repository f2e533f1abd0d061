//! Tool catalog, argument validation, prompt rendering and dispatch to
//! native, remote or fixture-backed implementations.

mod backends;
mod catalog;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, LazyLock};
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use backends::{
    canonical_json, HealthInfo, MediaTransfer, MockBackend, MockFixture, MockFixtures, NativeBackend,
    RemoteBackend, WireMedia, WireRequest,
};
pub use catalog::catalog_specs;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ToolError {
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("argument {arg:?} of {tool}: {message}")]
    InvalidArgument { tool: String, arg: String, message: String },
    #[error("duplicate tool name {0:?}")]
    Duplicate(String),
    #[error("no backend configured for {0}")]
    NoBackend(String),
    #[error("{0}")]
    Fixture(String),
}

/// Accepted shapes for a tool argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    /// One `image-N` placeholder.
    Image,
    /// A placeholder or a nonempty list of them.
    ImageOrList,
    /// Exactly two placeholders.
    ImagePair,
    /// A nonempty list of placeholders.
    ImageList,
    Text,
    TextList,
    TextOrList,
    /// A final answer: string or number.
    Answer,
    PositiveInt,
    PositiveNumber,
    /// A number in (0, 1].
    UnitInterval,
    /// `[x, y]`.
    Point,
    /// `[l, t, r, b]` or a nonempty list of those.
    BoxOrBoxes,
    /// `[[[x1, y1], [x2, y2]], ...]`.
    Matches,
    Choice(&'static [&'static str]),
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^image-(\d+)$").unwrap());

/// Index named by an `image-N` placeholder.
pub fn placeholder_index(s: &str) -> Option<usize> {
    PLACEHOLDER.captures(s.trim()).and_then(|c| c[1].parse().ok())
}

fn numbers(v: &Value, n: usize) -> bool {
    v.as_array().is_some_and(|a| a.len() == n && a.iter().all(|x| x.as_f64().is_some_and(f64::is_finite)))
}

fn nonempty_list(v: &Value, item: impl Fn(&Value) -> bool) -> bool {
    v.as_array().is_some_and(|a| !a.is_empty() && a.iter().all(item))
}

impl ArgKind {
    /// Checks a value; returns a message on mismatch.
    pub fn check(self, v: &Value) -> Result<(), String> {
        let is_image = |v: &Value| v.as_str().and_then(placeholder_index).is_some();
        let is_text = |v: &Value| v.as_str().is_some_and(|s| !s.trim().is_empty());
        let ok = match self {
            ArgKind::Image => is_image(v),
            ArgKind::ImageOrList => is_image(v) || nonempty_list(v, is_image),
            ArgKind::ImagePair => v.as_array().is_some_and(|a| a.len() == 2 && a.iter().all(is_image)),
            ArgKind::ImageList => nonempty_list(v, is_image),
            ArgKind::Text => is_text(v),
            ArgKind::TextList => nonempty_list(v, is_text),
            ArgKind::TextOrList => is_text(v) || nonempty_list(v, is_text),
            ArgKind::Answer => is_text(v) || v.is_number(),
            ArgKind::PositiveInt => v.as_u64().is_some_and(|n| n > 0),
            ArgKind::PositiveNumber => v.as_f64().is_some_and(|x| x.is_finite() && x > 0.0),
            ArgKind::UnitInterval => v.as_f64().is_some_and(|x| x > 0.0 && x <= 1.0),
            ArgKind::Point => numbers(v, 2),
            ArgKind::BoxOrBoxes => numbers(v, 4) || nonempty_list(v, |b| numbers(b, 4)),
            ArgKind::Matches => v.as_array().is_some_and(|a| {
                a.iter().all(|m| m.as_array().is_some_and(|p| p.len() == 2 && p.iter().all(|q| numbers(q, 2))))
            }),
            ArgKind::Choice(options) => v.as_str().is_some_and(|s| options.contains(&s)),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("expected {}, got {v}", self.expectation()))
        }
    }

    fn expectation(self) -> String {
        match self {
            ArgKind::Image => "an image placeholder such as \"image-0\"".into(),
            ArgKind::ImageOrList => "an image placeholder or a list of them".into(),
            ArgKind::ImagePair => "a list of exactly two image placeholders".into(),
            ArgKind::ImageList => "a nonempty list of image placeholders".into(),
            ArgKind::Text => "a nonempty string".into(),
            ArgKind::TextList => "a nonempty list of strings".into(),
            ArgKind::TextOrList => "a string or a list of strings".into(),
            ArgKind::Answer => "a string or number".into(),
            ArgKind::PositiveInt => "a positive integer".into(),
            ArgKind::PositiveNumber => "a positive number".into(),
            ArgKind::UnitInterval => "a number in (0, 1]".into(),
            ArgKind::Point => "[x, y]".into(),
            ArgKind::BoxOrBoxes => "[left, top, right, bottom] or a list of such boxes".into(),
            ArgKind::Matches => "a list of [[x1, y1], [x2, y2]] pairs".into(),
            ArgKind::Choice(o) => format!("one of {o:?}"),
        }
    }

    fn is_media(self) -> bool {
        matches!(self, ArgKind::Image | ArgKind::ImageOrList | ArgKind::ImagePair | ArgKind::ImageList)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgSpec {
    pub name: String,
    pub description: String,
    pub required: bool,
    pub default: Option<Value>,
    pub kind: ArgKind,
    /// Accepted but left out of rendered prompts.
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub args: Vec<ArgSpec>,
    pub rets: Vec<(String, String)>,
    pub examples: Vec<Value>,
    /// Alternative argument names rewritten before validation.
    pub aliases: Vec<(String, String)>,
}

impl ToolSpec {
    /// Validates an argument map, applying aliases and defaults. Unknown and
    /// missing required arguments are errors.
    pub fn validate_args(&self, args: &Map<String, Value>) -> Result<Map<String, Value>, ToolError> {
        let bad = |arg: &str, message: String| ToolError::InvalidArgument {
            tool: self.name.clone(),
            arg: arg.to_string(),
            message,
        };
        let mut given: Map<String, Value> = Map::new();
        for (k, v) in args {
            let key = self.aliases.iter().find(|(a, _)| a == k).map_or(k.as_str(), |(_, c)| c.as_str());
            if given.insert(key.to_string(), v.clone()).is_some() {
                return Err(bad(key, "given more than once".into()));
            }
        }
        let mut out = Map::new();
        for spec in &self.args {
            match given.remove(&spec.name) {
                Some(v) => {
                    spec.kind.check(&v).map_err(|m| bad(&spec.name, m))?;
                    out.insert(spec.name.clone(), v);
                }
                None if spec.required => return Err(bad(&spec.name, "missing required argument".into())),
                None => {
                    if let Some(d) = &spec.default {
                        out.insert(spec.name.clone(), d.clone());
                    }
                }
            }
        }
        if let Some(k) = given.keys().next() {
            return Err(bad(k, "unknown argument".into()));
        }
        Ok(out)
    }

    /// Placeholders referenced by media-typed arguments, in argument order.
    pub fn media_placeholders(&self, args: &Map<String, Value>) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for spec in self.args.iter().filter(|a| a.kind.is_media()) {
            let vals = match args.get(&spec.name) {
                Some(Value::String(s)) => vec![s.clone()],
                Some(Value::Array(a)) => a.iter().filter_map(|v| v.as_str().map(String::from)).collect(),
                _ => vec![],
            };
            for v in vals {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Prompt text for one tool.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "### {}", self.name);
        let _ = writeln!(s, "description = \"\"\"");
        for line in self.description.lines() {
            let _ = writeln!(s, "    {line}");
        }
        let _ = writeln!(s, "\"\"\"");
        let visible: Vec<_> = self.args.iter().filter(|a| !a.hidden).collect();
        let _ = writeln!(s, "args_spec = {{");
        for (i, a) in visible.iter().enumerate() {
            let sep = if i + 1 < visible.len() { "," } else { "" };
            let _ = writeln!(s, "    {}: {}{sep}", py_json(&Value::from(a.name.clone())), py_json(&Value::from(a.description.clone())));
        }
        let _ = writeln!(s, "}}");
        let _ = writeln!(s, "rets_spec = {{");
        for (i, (k, v)) in self.rets.iter().enumerate() {
            let sep = if i + 1 < self.rets.len() { "," } else { "" };
            let _ = writeln!(s, "    {}: {}{sep}", py_json(&Value::from(k.clone())), py_json(&Value::from(v.clone())));
        }
        let _ = writeln!(s, "}}");
        let _ = writeln!(s, "examples = [");
        for (i, e) in self.examples.iter().enumerate() {
            let sep = if i + 1 < self.examples.len() { "," } else { "" };
            let _ = writeln!(s, "    {}{sep}", py_json(e));
        }
        let _ = writeln!(s, "]");
        s
    }
}

/// JSON with `", "` and `": "` separators, keys in insertion order.
pub fn py_json(v: &Value) -> String {
    match v {
        Value::Array(a) => format!("[{}]", a.iter().map(py_json).collect::<Vec<_>>().join(", ")),
        Value::Object(o) => format!(
            "{{{}}}",
            o.iter()
                .map(|(k, v)| format!("{}: {}", Value::from(k.clone()), py_json(v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        other => other.to_string(),
    }
}

/// Immutable set of tool specs keyed by name, in registration order.
#[derive(Debug, Clone)]
pub struct Registry {
    specs: Vec<ToolSpec>,
}

impl Registry {
    pub fn new(specs: Vec<ToolSpec>) -> Result<Self, ToolError> {
        for (i, s) in specs.iter().enumerate() {
            if specs[..i].iter().any(|t| t.name == s.name) {
                return Err(ToolError::Duplicate(s.name.clone()));
            }
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[ToolSpec] {
        &self.specs
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.specs.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Restricts the registry to the named tools, keeping catalog order.
    pub fn subset(&self, names: &[&str]) -> Result<Self, ToolError> {
        if let Some(missing) = names.iter().find(|n| self.get(n).is_none()) {
            return Err(ToolError::UnknownTool(missing.to_string()));
        }
        Ok(Self { specs: self.specs.iter().filter(|s| names.contains(&s.name.as_str())).cloned().collect() })
    }
}

/// Registry preloaded with the full catalog.
pub fn register_catalog() -> Registry {
    Registry::new(catalog_specs()).expect("catalog names are unique")
}

/// Toolbox text spliced into planner and observer prompts.
pub fn render_toolbox_text(registry: &Registry) -> String {
    registry.specs().iter().map(ToolSpec::render).collect::<Vec<_>>().join("\n")
}

/// A tool invocation as emitted by the agent core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
}

impl ToolCall {
    pub fn new(name: impl Into<String>, arguments: Value) -> Self {
        let arguments = match arguments {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Self { name: name.into(), arguments }
    }
}

/// A validated call with its placeholders bound to media paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedCall {
    pub name: String,
    pub arguments: Map<String, Value>,
    /// `(placeholder, path)` for every placeholder the call references.
    pub media: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub status: ToolStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

impl ToolResult {
    pub fn ok(result: Value) -> Self {
        Self { status: ToolStatus::Ok, result: Some(result), error: None, latency_ms: None }
    }

    pub fn err(message: impl Into<String>) -> Self {
        Self { status: ToolStatus::Error, result: None, error: Some(message.into()), latency_ms: None }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ToolStatus::Ok
    }

    /// What the agent sees: the payload, or `{"error": ...}`.
    pub fn observation(&self) -> Value {
        match (&self.result, &self.error) {
            (Some(r), _) if self.is_ok() => r.clone(),
            (_, Some(e)) => serde_json::json!({ "error": e }),
            _ => Value::Null,
        }
    }
}

/// Something that can execute validated tool calls.
pub trait ToolBackend: Send + Sync {
    fn call(&self, call: &ResolvedCall) -> Result<Value, String>;
}

/// Registry plus routing table. Invocation never panics into the caller.
#[derive(Clone)]
pub struct Toolbox {
    registry: Registry,
    routes: HashMap<String, Arc<dyn ToolBackend>>,
    fallback: Option<Arc<dyn ToolBackend>>,
    record_latency: bool,
}

impl Toolbox {
    pub fn new(registry: Registry) -> Self {
        Self { registry, routes: HashMap::new(), fallback: None, record_latency: false }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn route(mut self, name: &str, backend: Arc<dyn ToolBackend>) -> Self {
        self.routes.insert(name.to_string(), backend);
        self
    }

    /// Routes the tools the native backend implements.
    pub fn route_native(mut self, native: Arc<NativeBackend>) -> Self {
        for name in NativeBackend::SERVED {
            self.routes.insert(name.to_string(), native.clone());
        }
        self
    }

    /// Backend for every tool without an explicit route.
    pub fn fallback(mut self, backend: Arc<dyn ToolBackend>) -> Self {
        self.fallback = Some(backend);
        self
    }

    pub fn record_latency(mut self, on: bool) -> Self {
        self.record_latency = on;
        self
    }

    /// Validates and binds a call without dispatching it.
    pub fn resolve(&self, call: &ToolCall, media: &[String]) -> Result<ResolvedCall, ToolError> {
        let spec = self.registry.get(&call.name).ok_or_else(|| ToolError::UnknownTool(call.name.clone()))?;
        let arguments = spec.validate_args(&call.arguments)?;
        let mut bound = Vec::new();
        for p in spec.media_placeholders(&arguments) {
            let idx = placeholder_index(&p).expect("validated placeholder");
            let path = media.get(idx).ok_or_else(|| ToolError::InvalidArgument {
                tool: call.name.clone(),
                arg: "image".into(),
                message: format!("{p} does not exist; {} media item(s) provided", media.len()),
            })?;
            bound.push((p, path.clone()));
        }
        Ok(ResolvedCall { name: call.name.clone(), arguments, media: bound })
    }

    pub fn invoke(&self, call: &ToolCall, media: &[String]) -> ToolResult {
        let start = Instant::now();
        let mut result = match self.resolve(call, media) {
            Err(e) => ToolResult::err(e.to_string()),
            Ok(resolved) => match self.routes.get(&resolved.name).or(self.fallback.as_ref()) {
                None => ToolResult::err(ToolError::NoBackend(resolved.name).to_string()),
                Some(backend) => match catch_unwind(AssertUnwindSafe(|| backend.call(&resolved))) {
                    Ok(Ok(v)) => ToolResult::ok(v),
                    Ok(Err(e)) => ToolResult::err(e),
                    Err(_) => ToolResult::err(format!("{} backend panicked", resolved.name)),
                },
            },
        };
        if self.record_latency {
            result.latency_ms = Some(start.elapsed().as_millis() as u64);
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::prompts::hex_sha256;

    #[test]
    fn catalog_shape() {
        let reg = register_catalog();
        assert_eq!(reg.len(), 15);
        assert_eq!(reg.names()[0], "LocalizeObjects");
        assert_eq!(reg.names()[14], "SelfThinking");
        assert!(reg.get("EstimateRegionDepth").unwrap().description.contains("indoor (0-20m) and outdoor (0-80m)"));
        assert!(reg
            .get("EstimateOpticalFlow")
            .unwrap()
            .description
            .contains("mean_flow_x > 0: objects move left / camera moves right."));
        for spec in reg.specs() {
            assert!(!spec.examples.is_empty());
            for e in &spec.examples {
                assert_eq!(e["name"], spec.name.as_str());
                let args = e["arguments"].as_object().unwrap();
                spec.validate_args(args).unwrap_or_else(|err| panic!("{}: {err}", spec.name));
            }
        }
    }

    #[test]
    fn validation_rules() {
        let reg = register_catalog();
        let spec = reg.get("EstimateHomographyMatrix").unwrap();
        let out = spec.validate_args(json!({"image": ["image-0", "image-1"]}).as_object().unwrap()).unwrap();
        assert_eq!(out["num_keypoints"], 1200);
        assert_eq!(out["ransac_reproj_threshold"], 5.0);
        let err = spec.validate_args(json!({"image": ["image-0"]}).as_object().unwrap()).unwrap_err();
        assert!(matches!(err, ToolError::InvalidArgument { ref arg, .. } if arg == "image"));
        let err = spec
            .validate_args(json!({"image": ["image-0", "image-1"], "bogus": 1}).as_object().unwrap())
            .unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let flow = reg.get("EstimateOpticalFlow").unwrap();
        let out = flow.validate_args(json!({"images": ["image-0", "image-1"]}).as_object().unwrap()).unwrap();
        assert!(out.contains_key("image"));
    }

    #[test]
    fn rendering() {
        let reg = register_catalog();
        let one = reg.subset(&["Terminate"]).unwrap();
        let text = render_toolbox_text(&one);
        assert_eq!(text.matches("### Terminate").count(), 1);
        let full = render_toolbox_text(&reg);
        for n in reg.names() {
            assert!(full.contains(&format!("### {n}\n")));
        }
        assert!(!full.contains("\"matches\": \"Precomputed"));
        assert_eq!(hex_sha256(&full), hex_sha256(&render_toolbox_text(&register_catalog())));
        assert!(full.contains(r#"{"name": "LocalizeObjects", "arguments": {"image": "image-0", "objects": ["dog", "cat"]}}"#));
    }

    #[test]
    fn invoke_errors_are_results() {
        let tb = Toolbox::new(register_catalog()).route_native(Arc::new(NativeBackend::new()));
        let r = tb.invoke(&ToolCall::new("Nope", json!({})), &[]);
        assert_eq!(r.status, ToolStatus::Error);
        assert!(r.error.unwrap().contains("unknown tool"));
        let r = tb.invoke(&ToolCall::new("Terminate", json!({"answer": "A. Yes."})), &[]);
        assert_eq!(r.result, Some(json!({"answer": "A. Yes."})));
        let r = tb.invoke(&ToolCall::new("LocalizeObjects", json!({"image": "image-0", "objects": ["x"]})), &["a.png".into()]);
        assert!(r.error.unwrap().contains("no backend"));
        let r = tb.invoke(&ToolCall::new("LocalizeObjects", json!({"image": "image-3", "objects": ["x"]})), &["a.png".into()]);
        assert!(r.error.unwrap().contains("image-3 does not exist"));
    }
}
