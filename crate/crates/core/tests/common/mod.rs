//! Scripted scenarios shared by integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use serde_json::json;
use spatial_core::agent::{run_agent, AgentConfig, AgentResult, Paradigm};
use spatial_core::corpus::{Category, Format, Media, Sample};
use spatial_core::llmclient::ScriptedClient;
use spatial_core::toolproto::{register_catalog, MockBackend, MockFixtures, NativeBackend, Toolbox};

pub fn mcq(id: &str, question: &str, options: &[&str], answer: &str, images: &[&str]) -> Sample {
    Sample {
        id: id.into(),
        question: question.into(),
        format: Format::MultiChoice,
        options: options.iter().map(|s| s.to_string()).collect(),
        answer: answer.into(),
        open_subtype: None,
        media: Media { images: images.iter().map(|s| s.to_string()).collect(), ..Default::default() },
        task: "rel_depth".into(),
        category: Category::DepthEstimation,
        source: "fixture".into(),
        meta: None,
    }
}

pub fn toolbox() -> Toolbox {
    let fixtures: MockFixtures = serde_json::from_value(json!({
        "strict": true,
        "fixtures": [
            {"name": "LocalizeObjects",
             "arguments": {"image": "image-0", "objects": ["dog", "cat"]},
             "result": {"regions": [
                 {"label": "dog", "bbox": [320, 360, 384, 480], "confidence": 0.95},
                 {"label": "cat", "bbox": [256, 300, 288, 420], "confidence": 0.87}]}},
            {"name": "EstimateObjectDepth",
             "arguments": {"image": "image-0", "objects": ["dog", "cat"], "indoor_or_outdoor": "outdoor"},
             "result": {"results": [
                 {"object": "dog", "depth": 1.0, "error": null},
                 {"object": "cat", "depth": 1.2, "error": null}]}},
            {"name": "EstimateOpticalFlow",
             "arguments": {"image": ["image-0", "image-1"]},
             "result": {"output": {"mean_flow_x": 2.5, "mean_flow_y": -0.3}}},
            {"name": "CountObjects",
             "arguments": {"image": "image-0", "objects": ["dog"]},
             "error": "detector unavailable"}
        ]
    }))
    .unwrap();
    let reg = register_catalog();
    let mock = Arc::new(MockBackend::new(fixtures, Some(reg.clone())).unwrap());
    Toolbox::new(reg).fallback(mock).route_native(Arc::new(NativeBackend::new()))
}

pub const DOG_CAT_PLAN: &str = r#"To compare the distances I will localize both animals and then estimate their depth.
```json
[
    {"name": "LocalizeObjects", "arguments": {"image": "image-0", "objects": ["dog", "cat"]}},
    {"name": "EstimateObjectDepth", "arguments": {"image": "image-0", "objects": ["dog", "cat"], "indoor_or_outdoor": "outdoor"}},
]
```"#;

pub const DOG_CAT_COT: &str = r#"<thinking> To determine which object is closer to the camera, I need first localize the dog and cat in the image. </thinking>
<tool> {"name": "LocalizeObjects", "arguments": {"image": "image-0", "objects": ["dog", "cat"]}} </tool>
<observation> {"regions": [{"label": "dog", "bbox": [320, 360, 384, 480], "confidence": 0.95}, {"label": "cat", "bbox": [256, 300, 288, 420], "confidence": 0.87}]} </observation>
<thinking> Then, I need estimate the depth of them to reflect their distances to the camera. </thinking>
<tool> {"name": "EstimateObjectDepth", "arguments": {"image": "image-0", "objects": ["dog", "cat"], "indoor_or_outdoor": "outdoor"}} </tool>
<observation> {"results": [{"object": "dog", "depth": 1.0, "error": null}, {"object": "cat", "depth": 1.2, "error": null}]} </observation>"#;

pub const DOG_CAT_SUMMARY: &str =
    "<thinking> The dog is at 1.0 m and the cat at 1.2 m, so the dog is closer. </thinking>\n<answer> (A) </answer>";

pub fn dog_cat_sample() -> Sample {
    mcq(
        "pe-dog-cat",
        "Which is closer to the camera, the dog or the cat?",
        &["The dog", "The cat"],
        "A",
        &["media/park.jpg"],
    )
}

pub fn run_dog_cat() -> (AgentResult, ScriptedClient) {
    let core = ScriptedClient::new([DOG_CAT_PLAN, DOG_CAT_COT, DOG_CAT_SUMMARY]);
    let cfg = AgentConfig { paradigm: Paradigm::PlanExecute, ..Default::default() };
    let r = run_agent(&dog_cat_sample(), &cfg, &core, &toolbox());
    (r, core)
}

pub const FLOW_TURN_1: &str = r#"{"thought": "To determine the camera's movement direction, I need to compute the average optical flow between the two images using RAFT. The average optical flow indicates pixel offsets, where positive mean_flow_x suggests camera movement to the right, negative to the left, positive mean_flow_y downward, and negative upward.", "actions": [{"name": "EstimateOpticalFlow", "arguments": {"images": ["image-0", "image-1"]}}]}"#;

pub const FLOW_TURN_2: &str = r#"{"thought": "The optical flow results show mean_flow_x = 2.5 (positive, indicating camera moved right) and mean_flow_y = -0.3 (negative, indicating camera moved up). Since the absolute value of mean_flow_x (2.5) is much larger than mean_flow_y (0.3), the primary camera movement is to the right.", "actions": [{"name": "Terminate", "arguments": {"answer": "(A)"}}]}"#;

pub fn flow_sample() -> Sample {
    let mut s = mcq(
        "react-optical-flow",
        "Between image-0 and image-1, what is the primary direction of the camera's movement?",
        &[
            "The camera moved to the right",
            "The camera moved to the left",
            "The camera moved downward",
            "The camera moved upward",
        ],
        "A",
        &["media/frame_000.jpg", "media/frame_001.jpg"],
    );
    s.task = "camera_motion".into();
    s.category = Category::Camera;
    s
}

pub fn run_flow() -> (AgentResult, ScriptedClient) {
    let core = ScriptedClient::new([FLOW_TURN_1, FLOW_TURN_2]);
    let cfg = AgentConfig { paradigm: Paradigm::React, ..Default::default() };
    let r = run_agent(&flow_sample(), &cfg, &core, &toolbox());
    (r, core)
}

/// Planner output that never yields a fenced plan.
pub const NO_PLAN: &str = "The dog looks closer to me.";

pub fn run_triple_failure() -> (AgentResult, ScriptedClient) {
    let core = ScriptedClient::new([NO_PLAN, NO_PLAN, NO_PLAN, "<thinking> direct </thinking>\n<answer> (A) </answer>"]);
    let cfg = AgentConfig::default();
    let r = run_agent(&dog_cat_sample(), &cfg, &core, &toolbox());
    (r, core)
}

pub const NEVER_TERMINATE: &str = r#"{"thought": "I should look again.", "actions": []}"#;

pub fn run_never_terminating() -> (AgentResult, ScriptedClient) {
    let mut script = vec![NEVER_TERMINATE.to_string(); 10];
    script.push(r#"{"thought": "Out of turns.", "actions": [{"name": "Terminate", "arguments": {"answer": "(B)"}}]}"#.into());
    let core = ScriptedClient::new(script);
    let cfg = AgentConfig { paradigm: Paradigm::React, ..Default::default() };
    let r = run_agent(&flow_sample(), &cfg, &core, &toolbox());
    (r, core)
}

pub fn run_downgraded() -> (AgentResult, ScriptedClient) {
    let core = ScriptedClient::new([
        NO_PLAN,
        NO_PLAN,
        NO_PLAN,
        "<answer> cannot be determined </answer>",
        "<answer> none of the above </answer>",
        "(A)",
    ]);
    let r = run_agent(&dog_cat_sample(), &AgentConfig::default(), &core, &toolbox());
    (r, core)
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against a pinned file; `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{} differs from the produced trace", path.display()))
    }
}
