use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use spatial_core::agent::{run_batch, AgentConfig, AgentStatus, Paradigm};
use spatial_core::corpus::{self, load_manifest, load_manifest_with, Format, LoadOptions, Manifest};
use spatial_core::eval::{
    aggregate, build_eval_turns, random_baseline, score_sample_with, to_jsonl, Judge, PromptOptions, ResponseRecord,
    ScoreRecord,
};
use spatial_core::geometry::LengthUnit;
use spatial_core::llmclient::{ChatClient, ChatConfig, OpenAiClient, ScriptedClient, TokenTier};
use spatial_core::prompts::hex_sha256;
use spatial_core::qagen::{
    generate_mini_benchmark, generate_scene_corpus, item_seed, write_benchmark, write_ledger, BenchConfig,
    GenOptions, SceneMeta, Task,
};
use spatial_core::toolproto::{register_catalog, MediaTransfer, MockBackend, NativeBackend, RemoteBackend, Toolbox};

use crate::config::EndpointSettings;
use crate::{
    runtime, AgentArgs, CliError, EvaluateArgs, FormatArg, GenerateArgs, RunHeader, Settings, StatsArgs,
};

/// Sample id to scripted core outputs, consumed in order.
type Script = BTreeMap<String, Vec<String>>;

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(runtime(parent.display()))?;
    }
    std::fs::write(path, text).map_err(runtime(path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    write_file(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

fn read_script(path: &Path) -> Result<Script, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn file_sha256(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
    Ok(hex_sha256(&text))
}

/// Errors listing ids that the manifest does not contain.
fn check_ids<'a>(ids: impl Iterator<Item = &'a String>, manifest: &Manifest, what: &str) -> Result<(), CliError> {
    let known: HashSet<&str> = manifest.samples.iter().map(|s| s.id.as_str()).collect();
    let unknown: Vec<&str> = ids.map(String::as_str).filter(|id| !known.contains(id)).collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(validation(format!("{what} ids not in manifest: {}", unknown.join(", "))))
    }
}

fn load(path: &Path, settings: &Settings) -> Result<Manifest, CliError> {
    settings.check_media_root()?;
    let opts = LoadOptions { check_media: settings.media_root.is_some(), media_root: settings.media_root.clone() };
    load_manifest_with(path, &opts).map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn chat_config(e: &EndpointSettings, seed: u64, tier: TokenTier) -> Result<ChatConfig, CliError> {
    let d = ChatConfig::default();
    Ok(ChatConfig {
        endpoint: e.endpoint.clone().ok_or_else(|| CliError::Usage("no endpoint configured".into()))?,
        model: e.model.clone().unwrap_or(d.model),
        max_tokens: e.max_tokens.unwrap_or(tier.max_tokens()),
        seed: Some(seed),
        timeout_secs: e.timeout_secs.unwrap_or(d.timeout_secs),
        retry_budget: e.retry_budget.unwrap_or(d.retry_budget),
        ..d
    })
}

/// Fails fast when nothing listens at the endpoint.
fn probe(endpoint: &str) -> Result<(), CliError> {
    let http = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(5))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    match http.get(format!("{}/models", endpoint.trim_end_matches('/'))).send() {
        Err(e) if e.is_connect() || e.is_timeout() => {
            Err(CliError::Runtime(format!("core endpoint {endpoint} is unreachable: {e}")))
        }
        _ => Ok(()),
    }
}

fn endpoint_client(e: &EndpointSettings, seed: u64, tier: TokenTier) -> Result<Arc<OpenAiClient>, CliError> {
    let cfg = chat_config(e, seed, tier)?;
    probe(&cfg.endpoint)?;
    Ok(Arc::new(OpenAiClient::new(cfg).map_err(validation)?))
}

fn pool(settings: &Settings) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(settings.parallelism())
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

/// Scene documents from files and directories (non-recursive, `*.json`).
fn scene_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| validation(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn load_scenes(paths: &[PathBuf]) -> Result<Vec<SceneMeta>, CliError> {
    let mut scenes = Vec::new();
    let mut errors = Vec::new();
    for f in scene_files(paths)? {
        let parsed = std::fs::read_to_string(&f)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<SceneMeta>(&t).map_err(|e| e.to_string()))
            .and_then(|s| s.validate().map(|_| s).map_err(|e| e.to_string()));
        match parsed {
            Ok(s) => scenes.push(s),
            Err(e) => errors.push(format!("{}: {e}", f.display())),
        }
    }
    if !errors.is_empty() {
        return Err(validation(format!("invalid scene documents:\n  {}", errors.join("\n  "))));
    }
    if scenes.is_empty() {
        return Err(validation("no scene documents found"));
    }
    Ok(scenes)
}

fn parse_tasks(names: &[String], allowed: &[Task]) -> Result<Vec<Task>, CliError> {
    if names.is_empty() {
        return Ok(allowed.to_vec());
    }
    names
        .iter()
        .map(|n| {
            let t: Task = n.parse().map_err(validation)?;
            if allowed.contains(&t) {
                Ok(t)
            } else {
                Err(validation(format!("task {n} is not available in this mode")))
            }
        })
        .collect()
}

fn format_of(f: FormatArg) -> Format {
    match f {
        FormatArg::Judgment => Format::Judgment,
        FormatArg::MultiChoice => Format::MultiChoice,
        FormatArg::OpenEnded => Format::OpenEnded,
    }
}

pub fn generate(args: &GenerateArgs, settings: &Settings) -> Result<(), CliError> {
    settings.check_media_root()?;
    let seed = settings.seed();
    let (manifest, header) = if args.scenes.is_empty() {
        let cfg = BenchConfig {
            name: args.name.clone(),
            seed,
            count: args.count,
            tasks: parse_tasks(&args.tasks, &Task::SIM_TASKS)?,
        };
        let params = json!({"mode": "simulator", "bench": cfg, "render": !args.no_render});
        let header = RunHeader::new("generate", settings, params);
        let bench = generate_mini_benchmark(&cfg).map_err(validation)?;
        write_benchmark(&bench, &args.out, !args.no_render).map_err(|e| CliError::Runtime(e.to_string()))?;
        (bench.manifest, header)
    } else {
        let scenes = load_scenes(&args.scenes)?;
        let tasks = parse_tasks(&args.tasks, &Task::SCENE_TASKS)?;
        let formats: Vec<Format> = args.formats.iter().copied().map(format_of).collect();
        let unit: LengthUnit = args.unit.parse().map_err(validation)?;
        let opts = GenOptions { unit, ..Default::default() };
        let params = json!({
            "mode": "scene",
            "name": args.name,
            "scenes": scenes.iter().map(|s| &s.scene_id).collect::<Vec<_>>(),
            "tasks": tasks,
            "formats": formats,
            "unit": unit.symbol(),
        });
        let header = RunHeader::new("generate", settings, params);
        let (manifest, ledger) = generate_scene_corpus(&scenes, &tasks, &formats, seed, &opts, &args.name);
        std::fs::create_dir_all(&args.out).map_err(runtime(args.out.display()))?;
        manifest.write(&args.out.join("manifest.jsonl")).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_ledger(&ledger, &args.out.join("ledger.json")).map_err(|e| CliError::Runtime(e.to_string()))?;
        (manifest, header)
    };
    write_json(&args.out.join("run.json"), &header)?;
    println!("wrote {} samples to {}", manifest.len(), args.out.display());
    Ok(())
}

fn judges(args: &EvaluateArgs, settings: &Settings, manifest: &Manifest) -> Result<BTreeMap<String, Judge>, CliError> {
    let cfg = settings.mra_config()?;
    if let Some(path) = &args.judge_script {
        let script = read_script(path)?;
        check_ids(script.keys(), manifest, "judge script")?;
        return Ok(script
            .into_iter()
            .map(|(id, replies)| (id, Judge { client: Arc::new(ScriptedClient::new(replies)), cfg }))
            .collect());
    }
    if !args.judge {
        return Ok(BTreeMap::new());
    }
    if settings.judge.endpoint.is_none() {
        return Err(CliError::Usage("--judge needs a judge endpoint".into()));
    }
    let client: Arc<dyn ChatClient> = endpoint_client(&settings.judge, settings.seed(), TokenTier::Standard)?;
    Ok(manifest.samples.iter().map(|s| (s.id.clone(), Judge { client: client.clone(), cfg })).collect())
}

fn collect_responses(
    args: &EvaluateArgs,
    settings: &Settings,
    manifest: &Manifest,
    root: &Path,
) -> Result<BTreeMap<String, String>, CliError> {
    let seed = settings.seed();
    if let Some(path) = &args.responses {
        let records: Vec<ResponseRecord> = read_records(path)?;
        check_ids(records.iter().map(|r| &r.id), manifest, "response")?;
        let mut out = BTreeMap::new();
        for r in records {
            if out.insert(r.id.clone(), r.response).is_some() {
                return Err(validation(format!("duplicate response for {}", r.id)));
            }
        }
        return Ok(out);
    }
    if args.random_baseline {
        return Ok(manifest
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng = ChaCha8Rng::seed_from_u64(item_seed(seed, i as u64));
                (s.id.clone(), random_baseline(s, &mut rng))
            })
            .collect());
    }
    let opts = PromptOptions { blind: settings.blind.unwrap_or(false), ..Default::default() };
    let core_for: Box<dyn Fn(&str) -> Arc<dyn ChatClient> + Sync> = if let Some(path) = &args.core_script {
        let script = read_script(path)?;
        check_ids(script.keys(), manifest, "core script")?;
        Box::new(move |id| Arc::new(ScriptedClient::new(script.get(id).cloned().unwrap_or_default())))
    } else if settings.core.endpoint.is_some() {
        let client: Arc<dyn ChatClient> = endpoint_client(&settings.core, seed, TokenTier::Standard)?;
        Box::new(move |_| client.clone())
    } else {
        return Err(CliError::Usage(
            "evaluate needs --responses, --random-baseline, --core-script or a core endpoint".into(),
        ));
    };
    Ok(pool(settings)?.install(|| {
        manifest
            .samples
            .par_iter()
            .map(|s| {
                let turns = build_eval_turns(s, Some(root), &opts);
                let out = core_for(&s.id).chat(&turns).unwrap_or_else(|e| {
                    log::warn!("{}: {e}", s.id);
                    String::new()
                });
                (s.id.clone(), out)
            })
            .collect()
    }))
}

/// JSONL records, skipping `{"run": ...}` header lines.
fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).map_err(|e| validation(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if v.get("run").is_some() {
            continue;
        }
        out.push(serde_json::from_value(v).map_err(|e| validation(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}

pub fn evaluate(args: &EvaluateArgs, settings: &Settings) -> Result<(), CliError> {
    let manifest = load(&args.manifest, settings)?;
    let mra = settings.mra_config()?;
    let root = corpus::media_root(settings.media_root.as_deref(), &args.manifest);
    let judges = judges(args, settings, &manifest)?;
    let responses = collect_responses(args, settings, &manifest, &root)?;
    let mode = if args.responses.is_some() {
        "responses"
    } else if args.random_baseline {
        "random-baseline"
    } else if args.core_script.is_some() {
        "core-script"
    } else {
        "core-endpoint"
    };
    let mut params = json!({
        "manifest_sha256": file_sha256(&args.manifest)?,
        "mode": mode,
        "judge": args.judge || args.judge_script.is_some(),
        "mra": mra,
    });
    if let Some(p) = &args.responses {
        params["responses_sha256"] = json!(file_sha256(p)?);
    }
    let header = RunHeader::new("evaluate", settings, params);

    let records: Vec<ScoreRecord> = pool(settings)?.install(|| {
        manifest
            .samples
            .par_iter()
            .filter_map(|s| responses.get(&s.id).map(|r| score_sample_with(s, r, judges.get(&s.id), &mra)))
            .collect()
    });
    let report = aggregate(&records, &manifest).map_err(validation)?;
    let table = report.render_table();
    if let Some(out) = &args.out {
        let answers: Vec<ResponseRecord> =
            responses.iter().map(|(id, r)| ResponseRecord { id: id.clone(), response: r.clone() }).collect();
        write_file(&out.join("responses.jsonl"), &(header.jsonl_line() + &to_jsonl(&answers)))?;
        write_file(&out.join("scores.jsonl"), &(header.jsonl_line() + &to_jsonl(&records)))?;
        write_json(&out.join("report.json"), &json!({"run": header, "report": report}))?;
        write_file(&out.join("report.txt"), &table)?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&json!({"run": header, "report": report})).expect("json"));
    } else {
        print!("{table}");
    }
    Ok(())
}

fn toolbox(settings: &Settings, core: Option<Arc<dyn ChatClient>>) -> Result<Toolbox, CliError> {
    let registry = register_catalog();
    let mut native = NativeBackend::new();
    if let Some(c) = core {
        native = native.with_chat(c);
    }
    let tb = Toolbox::new(registry.clone()).route_native(Arc::new(native));
    Ok(if let Some(url) = &settings.tools.endpoint {
        let remote = RemoteBackend::negotiate(url, MediaTransfer::Path, Duration::from_secs(120))
            .map_err(|e| CliError::Runtime(format!("tool server {url}: {e}")))?;
        tb.fallback(Arc::new(remote))
    } else if let Some(path) = &settings.tools.fixtures {
        tb.fallback(Arc::new(MockBackend::load(path, Some(registry)).map_err(validation)?))
    } else {
        tb
    })
}

pub fn agent(args: &AgentArgs, settings: &Settings) -> Result<(), CliError> {
    let mut manifest = load(&args.manifest, settings)?;
    if let Some(n) = args.limit {
        manifest.samples.truncate(n);
    }
    let d = AgentConfig::default();
    let cfg = AgentConfig {
        paradigm: settings.agent.paradigm.unwrap_or(Paradigm::PlanExecute),
        max_turns: settings.agent.max_turns.unwrap_or(d.max_turns),
        max_attempts: settings.agent.max_attempts.unwrap_or(d.max_attempts),
        max_frames: settings.agent.max_frames.unwrap_or(d.max_frames),
        media_root: Some(corpus::media_root(settings.media_root.as_deref(), &args.manifest)),
        record_timings: false,
    };
    cfg.validate().map_err(validation)?;

    let seed = settings.seed();
    let (core_for, shared): (Box<dyn Fn(&str) -> Arc<dyn ChatClient> + Sync>, _) = if let Some(path) = &args.core_script
    {
        let script = read_script(path)?;
        check_ids(script.keys(), &manifest, "core script")?;
        (Box::new(move |id| Arc::new(ScriptedClient::new(script.get(id).cloned().unwrap_or_default()))), None)
    } else if settings.core.endpoint.is_some() {
        let client: Arc<dyn ChatClient> = endpoint_client(&settings.core, seed, TokenTier::Agent)?;
        let c = client.clone();
        (Box::new(move |_| c.clone()), Some(client))
    } else {
        return Err(CliError::Usage("agent needs --core-script or a core endpoint".into()));
    };
    let tools = toolbox(settings, shared)?;

    let mut params = json!({
        "manifest_sha256": file_sha256(&args.manifest)?,
        "agent": {"paradigm": cfg.paradigm, "max_turns": cfg.max_turns, "max_attempts": cfg.max_attempts},
        "limit": args.limit,
    });
    if let Some(p) = &args.core_script {
        params["core_script_sha256"] = json!(file_sha256(p)?);
    }
    let header = RunHeader::new("agent", settings, params);

    let results = run_batch(&manifest.samples, &cfg, &tools, settings.parallelism(), |s| core_for(&s.id))
        .map_err(validation)?;

    let answers: Vec<ResponseRecord> =
        results.iter().map(|r| ResponseRecord { id: r.trace.sample_id.clone(), response: r.answer.clone() }).collect();
    write_file(&args.out.join("answers.jsonl"), &(header.jsonl_line() + &to_jsonl(&answers)))?;
    let mut statuses: BTreeMap<String, usize> = BTreeMap::new();
    for r in &results {
        let name = serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        *statuses.entry(name).or_default() += 1;
        let file = args.out.join("traces").join(format!("{}.json", r.trace.sample_id));
        write_json(&file, &json!({"run": header, "trace": r.trace}))?;
    }
    write_json(&args.out.join("summary.json"), &json!({"run": header, "total": results.len(), "statuses": statuses}))?;
    let ok = results.iter().filter(|r| r.status == AgentStatus::Ok).count();
    println!("ran {} samples ({ok} ok); outputs in {}", results.len(), args.out.display());
    Ok(())
}

pub fn stats(args: &StatsArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest).map_err(|e| validation(format!("{}: {e}", args.manifest.display())))?;
    let report = corpus::stats(&manifest);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    } else {
        print!("{}", report.render_table());
    }
    Ok(())
}
