//! Helpers shared by the CLI, HTTP and acceptance suites.
#![allow(dead_code)]

use assassin_core::advisor::LoadedModel;
use assassin_core::game::assassin_view;
use assassin_core::ingest::{parse_game_bytes, Strictness};
use assassin_core::GameLog;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_assassin")
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn fixture_games() -> Vec<GameLog> {
    let bytes = std::fs::read(fixtures_dir().join("games.jsonl")).unwrap();
    parse_game_bytes(&bytes, Strictness::Strict, "fixtures")
        .unwrap()
        .games
}

/// Runs the binary in `dir` and returns its output.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .stdin(Stdio::null())
        .output()
        .expect("binary runs")
}

pub fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Trains a linear model on simulated games and returns its path.
pub fn train_model(dir: &Path) -> PathBuf {
    run_ok(
        dir,
        &[
            "simulate",
            "--games",
            "600",
            "--leak",
            "0.8",
            "--seed",
            "21",
            "--out",
            "train-games.jsonl",
        ],
    );
    run_ok(
        dir,
        &["train", "--in", "train-games.jsonl", "--out", "model.json"],
    );
    dir.join("model.json")
}

/// Drops the wall-clock field so manifests can be compared.
fn strip_duration(bytes: &[u8]) -> Vec<u8> {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).expect("manifest is JSON");
    v.as_object_mut().unwrap().remove("duration_ms");
    serde_json::to_vec(&v).unwrap()
}

/// Runs every subcommand except `serve` inside `dir` and collects stdout,
/// exit codes and every file written, keyed by a label.
pub fn run_pipeline(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let g1 = std::fs::read_to_string(fixtures_dir().join("games.jsonl")).unwrap();
    std::fs::write(dir.join("g1.json"), g1.lines().next().unwrap()).unwrap();
    let steps: Vec<(&str, Vec<&str>)> = vec![
        (
            "simulate",
            vec![
                "simulate",
                "--games",
                "300",
                "--leak",
                "0.6",
                "--seed",
                "5",
                "--out",
                "games.jsonl",
            ],
        ),
        (
            "validate",
            vec!["validate", "--in", "games.jsonl", "--out", "validate.json"],
        ),
        (
            "filter",
            vec!["filter", "--in", "games.jsonl", "--out", "eligible.jsonl"],
        ),
        (
            "featurize",
            vec![
                "featurize",
                "--in",
                "eligible.jsonl",
                "--out",
                "features.csv",
            ],
        ),
        (
            "featurize-general",
            vec![
                "featurize",
                "--features",
                "general",
                "--in",
                "eligible.jsonl",
                "--out",
                "general.csv",
            ],
        ),
        (
            "train",
            vec!["train", "--in", "games.jsonl", "--out", "linear.json"],
        ),
        (
            "train-rbf",
            vec![
                "train",
                "--model",
                "rbf-svc",
                "--in",
                "eligible.jsonl",
                "--out",
                "rbf.json",
            ],
        ),
        (
            "train-mlp",
            vec![
                "train",
                "--model",
                "mlp",
                "--epochs",
                "20",
                "--lr",
                "1e-3",
                "--in",
                "eligible.jsonl",
                "--out",
                "mlp.json",
                "--curve",
                "curve.csv",
            ],
        ),
        (
            "cv",
            vec![
                "cv",
                "--folds",
                "5",
                "--seed",
                "3",
                "--in",
                "eligible.jsonl",
                "--out",
                "cv.json",
            ],
        ),
        (
            "cv-mlp",
            vec![
                "cv",
                "--model",
                "mlp",
                "--epochs",
                "5",
                "--repeats",
                "2",
                "--folds",
                "3",
                "--in",
                "eligible.jsonl",
                "--out",
                "cv-mlp.json",
            ],
        ),
        (
            "cv-holdout",
            vec!["cv", "--holdout", "0.25", "--in", "eligible.jsonl"],
        ),
        (
            "select-features",
            vec![
                "select-features",
                "--candidates",
                "f1,f2,f3,f5",
                "--folds",
                "3",
                "--in",
                "eligible.jsonl",
                "--out",
                "select.csv",
            ],
        ),
        (
            "predict",
            vec![
                "predict",
                "--model",
                "linear.json",
                "--game",
                "g1.json",
                "--out",
                "predict.json",
            ],
        ),
        (
            "predict-mlp",
            vec!["predict", "--model", "mlp.json", "--game", "g1.json"],
        ),
        (
            "analyze",
            vec![
                "analyze",
                "--model",
                "linear.json",
                "--in",
                "eligible.jsonl",
                "--out",
                "analyze.json",
            ],
        ),
    ];
    let mut collected = BTreeMap::new();
    for (label, args) in steps {
        let out = run_ok(dir, &args);
        collected.insert(format!("{label}:stdout"), out.stdout);
        if let Some(i) = args.iter().position(|a| *a == "--out") {
            let path = dir.join(args[i + 1]);
            collected.insert(
                format!("{label}:{}", args[i + 1]),
                std::fs::read(&path).unwrap(),
            );
            let manifest =
                std::fs::read(dir.join(format!("{}.manifest.json", args[i + 1]))).unwrap();
            collected.insert(format!("{label}:manifest"), strip_duration(&manifest));
        }
    }
    collected.insert(
        "curve.csv".into(),
        std::fs::read(dir.join("curve.csv")).unwrap(),
    );
    collected
}

/// A `serve` child process that is killed on drop.
pub struct Server {
    child: std::process::Child,
    pub addr: SocketAddr,
}

impl Server {
    pub fn start(dir: &Path, model: &str) -> Server {
        let mut child = Command::new(bin())
            .args(["serve", "--model", model, "--port", "0"])
            .current_dir(dir)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .expect("serve starts");
        let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
        let first = lines.next().expect("listening line").unwrap();
        let v: serde_json::Value = serde_json::from_str(&first).unwrap();
        let addr = v["addr"].as_str().unwrap().parse().unwrap();
        // keep draining the request log so the child never blocks on a full pipe
        std::thread::spawn(move || for _ in lines.by_ref() {});
        Server { child, addr }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into()
}

/// `(status, body)` of a request; `body` of `None` means GET.
pub fn request(addr: SocketAddr, method: &str, path: &str, body: Option<&str>) -> (u16, String) {
    let url = format!("http://{addr}{path}");
    let agent = agent();
    let mut resp = match (method, body) {
        ("GET", _) => agent.get(&url).call(),
        ("POST", Some(b)) => agent
            .post(&url)
            .header("content-type", "application/json")
            .send(b),
        ("POST", None) => agent.post(&url).send_empty(),
        ("PUT", b) => agent.put(&url).send(b.unwrap_or("")),
        ("DELETE", _) => agent.delete(&url).call(),
        _ => panic!("unsupported method {method}"),
    }
    .expect("request completes");
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_string().unwrap())
}

pub fn start_in_process(model_path: &Path) -> SocketAddr {
    let model = LoadedModel::load(model_path).unwrap();
    assassin_cli::server::spawn_background(model).unwrap()
}

pub struct ParityReport {
    pub games: usize,
    pub mismatches: Vec<String>,
}

/// Compares `predict` on each fixture log against `/api/v1/advise` on its view.
pub fn cli_http_parity(dir: &Path, model_path: &Path) -> ParityReport {
    let addr = start_in_process(model_path);
    let model = model_path.to_str().unwrap();
    let mut mismatches = Vec::new();
    let games = fixture_games();
    for g in &games {
        let file = dir.join(format!("{}.json", g.game_id));
        std::fs::write(&file, serde_json::to_string(g).unwrap()).unwrap();
        let cli = run_ok(
            dir,
            &[
                "predict",
                "--model",
                model,
                "--game",
                file.to_str().unwrap(),
            ],
        );
        let cli_text = String::from_utf8(cli.stdout).unwrap();
        let view = serde_json::to_string(&assassin_view(g)).unwrap();
        let (status, http_text) = request(addr, "POST", "/api/v1/advise", Some(&view));
        let a: serde_json::Value = serde_json::from_str(&cli_text).unwrap();
        let b: serde_json::Value = serde_json::from_str(&http_text).unwrap();
        if status != 200
            || a["target"] != b["target"]
            || a["scores"] != b["scores"]
            || cli_text.trim_end() != http_text
        {
            mismatches.push(format!(
                "{}: cli {cli_text} http {status} {http_text}",
                g.game_id
            ));
        }
    }
    ParityReport {
        games: games.len(),
        mismatches,
    }
}
