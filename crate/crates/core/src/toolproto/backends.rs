use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{Registry, ResolvedCall, ToolBackend, ToolError, ToolResult, ToolStatus};
use crate::geometry::{ransac_homography, PointMatch, RansacConfig};
use crate::llmclient::{ChatClient, ChatTurn};

/// In-process tools: Terminate, SelfThinking and RANSAC homography.
#[derive(Default)]
pub struct NativeBackend {
    chat: Option<Arc<dyn ChatClient>>,
    matcher: Option<Arc<dyn ToolBackend>>,
    ransac: RansacConfig,
}

impl NativeBackend {
    pub const SERVED: [&'static str; 3] = ["Terminate", "SelfThinking", "EstimateHomographyMatrix"];

    pub fn new() -> Self {
        Self::default()
    }

    /// Chat client answering SelfThinking queries.
    pub fn with_chat(mut self, chat: Arc<dyn ChatClient>) -> Self {
        self.chat = Some(chat);
        self
    }

    /// Backend serving MatchImagesSIFT, used when no matches are supplied.
    pub fn with_matcher(mut self, matcher: Arc<dyn ToolBackend>) -> Self {
        self.matcher = Some(matcher);
        self
    }

    pub fn with_ransac_seed(mut self, seed: u64) -> Self {
        self.ransac.seed = seed;
        self
    }

    fn homography(&self, call: &ResolvedCall) -> Result<Value, String> {
        let matches = match call.arguments.get("matches") {
            Some(m) => parse_matches(m)?,
            None => {
                let matcher = self
                    .matcher
                    .as_ref()
                    .ok_or("no matches supplied and no MatchImagesSIFT backend configured")?;
                let mut arguments = Map::new();
                for k in ["image", "num_keypoints", "ratio_th"] {
                    if let Some(v) = call.arguments.get(k) {
                        arguments.insert(k.into(), v.clone());
                    }
                }
                let sift = ResolvedCall { name: "MatchImagesSIFT".into(), arguments, media: call.media.clone() };
                let out = matcher.call(&sift)?;
                parse_matches(out.get("matches").ok_or("matcher returned no matches")?)?
            }
        };
        let cfg = RansacConfig {
            reproj_threshold: call.arguments.get("ransac_reproj_threshold").and_then(Value::as_f64).unwrap_or(5.0),
            ..self.ransac
        };
        let fit = ransac_homography(&matches, &cfg).map_err(|e| e.to_string())?;
        Ok(json!({
            "homography_matrix": fit.homography.to_rows(),
            "inliers_count": fit.inlier_count,
            "total_matches": matches.len(),
            "status": "success",
        }))
    }
}

fn parse_matches(v: &Value) -> Result<Vec<PointMatch>, String> {
    serde_json::from_value::<Vec<[[f64; 2]; 2]>>(v.clone())
        .map(|pairs| pairs.into_iter().map(|[s, d]| PointMatch::new(s, d)).collect())
        .map_err(|e| format!("bad matches: {e}"))
}

impl ToolBackend for NativeBackend {
    fn call(&self, call: &ResolvedCall) -> Result<Value, String> {
        match call.name.as_str() {
            "Terminate" => Ok(json!({ "answer": call.arguments["answer"] })),
            "SelfThinking" => {
                let chat = self.chat.as_ref().ok_or("SelfThinking needs a chat client")?;
                let query = call.arguments["query"].as_str().unwrap_or_default();
                let media = call.media.iter().map(|(_, p)| p.clone()).collect();
                let text = chat.chat(&[ChatTurn::user(query).with_media(media)]).map_err(|e| e.to_string())?;
                Ok(json!({ "response": text }))
            }
            "EstimateHomographyMatrix" => self.homography(call),
            other => Err(format!("{other} is not a native tool")),
        }
    }
}

/// How media reaches a remote tool server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaTransfer {
    /// File contents inline, base64 encoded.
    Base64,
    /// Paths on a filesystem shared with the server.
    Path,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMedia {
    #[serde(rename = "ref")]
    pub reference: String,
    pub transfer: MediaTransfer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// Body of `POST /invoke`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
    #[serde(default)]
    pub media: Vec<WireMedia>,
}

/// Body of `GET /healthz`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthInfo {
    pub tools: Vec<String>,
    #[serde(default)]
    pub media_transfer: Vec<MediaTransfer>,
}

/// Client side of the tool wire protocol.
pub struct RemoteBackend {
    base_url: String,
    transfer: MediaTransfer,
    http: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(base_url: &str, transfer: MediaTransfer, timeout: Duration) -> Result<Self, String> {
        let http = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| e.to_string())?;
        Ok(Self { base_url: base_url.trim_end_matches('/').to_string(), transfer, http })
    }

    /// Probes `/healthz` and picks `prefer` if the server supports it,
    /// otherwise any supported transfer mode.
    pub fn negotiate(base_url: &str, prefer: MediaTransfer, timeout: Duration) -> Result<Self, String> {
        let mut me = Self::new(base_url, prefer, timeout)?;
        let info = me.health()?;
        me.transfer = if info.media_transfer.is_empty() || info.media_transfer.contains(&prefer) {
            prefer
        } else {
            info.media_transfer[0]
        };
        Ok(me)
    }

    pub fn transfer(&self) -> MediaTransfer {
        self.transfer
    }

    pub fn health(&self) -> Result<HealthInfo, String> {
        let resp = self
            .http
            .get(format!("{}/healthz", self.base_url))
            .send()
            .map_err(|e| format!("transport error: {e}"))?;
        if !resp.status().is_success() {
            return Err(format!("healthz returned HTTP {}", resp.status()));
        }
        resp.json().map_err(|e| format!("bad healthz body: {e}"))
    }

    pub fn wire_request(&self, call: &ResolvedCall) -> Result<WireRequest, String> {
        let media = call
            .media
            .iter()
            .map(|(reference, path)| {
                Ok(match self.transfer {
                    MediaTransfer::Path => WireMedia {
                        reference: reference.clone(),
                        transfer: MediaTransfer::Path,
                        content: None,
                        path: Some(path.clone()),
                    },
                    MediaTransfer::Base64 => {
                        let bytes = std::fs::read(Path::new(path)).map_err(|e| format!("reading {path}: {e}"))?;
                        WireMedia {
                            reference: reference.clone(),
                            transfer: MediaTransfer::Base64,
                            content: Some(base64::engine::general_purpose::STANDARD.encode(bytes)),
                            path: None,
                        }
                    }
                })
            })
            .collect::<Result<_, String>>()?;
        Ok(WireRequest { name: call.name.clone(), arguments: call.arguments.clone(), media })
    }
}

impl ToolBackend for RemoteBackend {
    fn call(&self, call: &ResolvedCall) -> Result<Value, String> {
        let body = self.wire_request(call)?;
        let resp = self
            .http
            .post(format!("{}/invoke", self.base_url))
            .json(&body)
            .send()
            .map_err(|e| format!("transport error: {e}"))?;
        let code = resp.status();
        let text = resp.text().map_err(|e| format!("transport error: {e}"))?;
        match serde_json::from_str::<ToolResult>(&text) {
            Ok(r) if r.status == ToolStatus::Ok => r.result.ok_or_else(|| "ok response without result".to_string()),
            Ok(r) => Err(r.error.unwrap_or_else(|| format!("error response (HTTP {code})"))),
            Err(_) => Err(format!("protocol error: HTTP {code}: {text}")),
        }
    }
}

/// Sorted-key compact JSON with integral floats written as integers.
pub fn canonical_json(v: &Value) -> String {
    fn canon(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let sorted: BTreeMap<&String, Value> = m.iter().map(|(k, v)| (k, canon(v))).collect();
                Value::Object(sorted.into_iter().map(|(k, v)| (k.clone(), v)).collect())
            }
            Value::Array(a) => Value::Array(a.iter().map(canon).collect()),
            Value::Number(n) => match n.as_f64() {
                Some(f) if n.is_f64() && f.fract() == 0.0 && f.abs() < 9.0e15 => json!(f as i64),
                _ => v.clone(),
            },
            other => other.clone(),
        }
    }
    canon(v).to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockFixture {
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn default_strict() -> bool {
    true
}

/// Fixture file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockFixtures {
    /// Unmatched calls fail when set; otherwise they get `default`.
    #[serde(default = "default_strict")]
    pub strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
    pub fixtures: Vec<MockFixture>,
}

/// Deterministic fixture lookup keyed by tool name and canonical arguments.
pub struct MockBackend {
    strict: bool,
    default: Value,
    table: HashMap<(String, String), Result<Value, String>>,
    registry: Option<Registry>,
}

impl MockBackend {
    /// With a registry, fixture and call arguments are both normalized
    /// (aliases, defaults) before keying.
    pub fn new(fixtures: MockFixtures, registry: Option<Registry>) -> Result<Self, ToolError> {
        let mut me = Self {
            strict: fixtures.strict,
            default: fixtures.default.unwrap_or_else(|| json!({})),
            table: HashMap::new(),
            registry,
        };
        for (i, f) in fixtures.fixtures.into_iter().enumerate() {
            let outcome = match (f.result, f.error) {
                (Some(r), None) => Ok(r),
                (None, Some(e)) => Err(e),
                _ => return Err(ToolError::Fixture(format!("fixture {i} needs exactly one of result/error"))),
            };
            let key = me.key(&f.name, &f.arguments).map_err(|e| ToolError::Fixture(format!("fixture {i}: {e}")))?;
            if me.table.insert(key, outcome).is_some() {
                return Err(ToolError::Fixture(format!("fixture {i} duplicates an earlier entry for {}", f.name)));
            }
        }
        Ok(me)
    }

    pub fn load(path: &Path, registry: Option<Registry>) -> Result<Self, ToolError> {
        let text = std::fs::read_to_string(path).map_err(|e| ToolError::Fixture(format!("{}: {e}", path.display())))?;
        let fixtures: MockFixtures =
            serde_json::from_str(&text).map_err(|e| ToolError::Fixture(format!("{}: {e}", path.display())))?;
        Self::new(fixtures, registry)
    }

    fn key(&self, name: &str, args: &Map<String, Value>) -> Result<(String, String), ToolError> {
        let args = match self.registry.as_ref().and_then(|r| r.get(name)) {
            Some(spec) => spec.validate_args(args)?,
            None => args.clone(),
        };
        Ok((name.to_string(), canonical_json(&Value::Object(args))))
    }

    pub fn tool_names(&self) -> Vec<String> {
        self.table.keys().map(|(n, _)| n.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn lookup(&self, name: &str, args: &Map<String, Value>) -> Result<Value, String> {
        let key = self.key(name, args).map_err(|e| e.to_string())?;
        match self.table.get(&key) {
            Some(outcome) => outcome.clone(),
            None if self.strict => Err(format!("no fixture for {name} with arguments {}", key.1)),
            None => Ok(self.default.clone()),
        }
    }

    /// Wire-level handling for a mock server.
    pub fn handle(&self, req: &WireRequest) -> ToolResult {
        match self.lookup(&req.name, &req.arguments) {
            Ok(v) => ToolResult::ok(v),
            Err(e) => ToolResult::err(e),
        }
    }
}

impl ToolBackend for MockBackend {
    fn call(&self, call: &ResolvedCall) -> Result<Value, String> {
        self.lookup(&call.name, &call.arguments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Homography;
    use crate::toolproto::{register_catalog, ToolCall, Toolbox};

    fn fixtures(strict: bool) -> MockFixtures {
        serde_json::from_value(json!({
            "strict": strict,
            "fixtures": [
                {"name": "EstimateObjectDepth",
                 "arguments": {"image": "image-0", "objects": ["dog", "cat"], "indoor_or_outdoor": "outdoor"},
                 "result": {"results": [{"object": "dog", "depth": 1.0, "error": null}]}},
                {"name": "CountObjects", "arguments": {"image": "image-0", "objects": ["bed"]}, "error": "model down"}
            ]
        }))
        .unwrap()
    }

    #[test]
    fn canonical_keys() {
        assert_eq!(canonical_json(&json!({"b": 1.0, "a": [2.5, {"d": 3, "c": 4.0}]})), r#"{"a":[2.5,{"c":4,"d":3}],"b":1}"#);
    }

    #[test]
    fn mock_lookup() {
        let mock = MockBackend::new(fixtures(true), Some(register_catalog())).unwrap();
        let permuted = json!({"indoor_or_outdoor": "outdoor", "objects": ["dog", "cat"], "image": "image-0"});
        let hit = mock.lookup("EstimateObjectDepth", permuted.as_object().unwrap()).unwrap();
        assert_eq!(hit["results"][0]["depth"], 1.0);
        assert_eq!(mock.lookup("CountObjects", json!({"image": "image-0", "objects": ["bed"]}).as_object().unwrap()), Err("model down".into()));
        assert!(mock.lookup("CountObjects", json!({"image": "image-0", "objects": ["cup"]}).as_object().unwrap()).is_err());
        let lax = MockBackend::new(fixtures(false), None).unwrap();
        assert_eq!(lax.lookup("Anything", &Map::new()), Ok(json!({})));
        assert_eq!(mock.tool_names(), vec!["CountObjects", "EstimateObjectDepth"]);
    }

    #[test]
    fn native_homography_matches_geometry() {
        let h = Homography::new(nalgebra::Matrix3::new(1.1, 0.05, 3.0, -0.02, 0.95, -4.0, 1e-4, 2e-4, 1.0)).unwrap();
        let pairs: Vec<[[f64; 2]; 2]> = (0..30)
            .map(|i| {
                let p = [(i * 37 % 200) as f64, (i * 53 % 150) as f64];
                [p, h.apply(p)]
            })
            .collect();
        let tb = Toolbox::new(register_catalog()).route_native(Arc::new(NativeBackend::new()));
        let r = tb.invoke(
            &ToolCall::new("EstimateHomographyMatrix", json!({"image": ["image-0", "image-1"], "matches": pairs})),
            &["a.png".into(), "b.png".into()],
        );
        let payload = r.result.unwrap();
        let direct = ransac_homography(
            &pairs.iter().map(|[s, d]| PointMatch::new(*s, *d)).collect::<Vec<_>>(),
            &RansacConfig::default(),
        )
        .unwrap();
        assert_eq!(payload["homography_matrix"], json!(direct.homography.to_rows()));
        assert_eq!(payload["inliers_count"], 30);
    }
}
