use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

use hiliter_cli::server::{router, ServerOptions};
use hiliter_core::service::ModelSet;

const DRAFT: &str = "You should call getValue() before the loop and close() it after.";
const WIDE_DRAFT: &str = "调用 getValue() 之后 🎉 then call close() again.";

fn hiliter(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_hiliter"))
        .args(args)
        .env_remove("HILITER_MODEL_DIR")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "hiliter {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn models(&self) -> PathBuf {
        self.path("models")
    }
}

/// Synthetic corpus and a small Code model, built once through the binary.
fn workspace() -> &'static Workspace {
    static WS: OnceLock<Workspace> = OnceLock::new();
    WS.get_or_init(|| {
        let ws = Workspace {
            dir: TempDir::new().unwrap(),
        };
        let train = ws.path("train.jsonl");
        let test = ws.path("test.jsonl");
        hiliter(&["synthetic", "--n", "200", "--seed", "1", "--out", p(&train)]);
        hiliter(&["synthetic", "--n", "60", "--seed", "2", "--out", p(&test)]);
        hiliter(&[
            "train", "--type", "code", "--train", p(&train), "--epochs", "8", "--lr", "0.005",
            "--embed-dim", "32", "--layers", "2", "--seed", "42",
            "--out", p(&ws.models().join("code.hlm")),
        ]);
        fs::write(ws.path("draft.md"), DRAFT).unwrap();
        fs::write(ws.path("wide.md"), WIDE_DRAFT).unwrap();
        ws
    })
}

fn cli_suggest(draft: &Path, policy: &str) -> String {
    let ws = workspace();
    let out = hiliter(&["suggest", "--models", p(&ws.models()), "--input", p(draft), "--policy", policy]);
    let text = String::from_utf8(out.stdout).unwrap();
    text.strip_suffix('\n').unwrap_or(&text).to_string()
}

fn cli_render(draft: &Path, ids: &[&str]) -> String {
    let ws = workspace();
    let accept = ids.join(",");
    let out = hiliter(&["render", "--models", p(&ws.models()), "--input", p(draft), "--accept", &accept]);
    String::from_utf8(out.stdout).unwrap()
}

fn loaded() -> ModelSet {
    ModelSet::load_dir(workspace().models()).unwrap()
}

async fn call(app: axum::Router, method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn post(app: axum::Router, uri: &str, body: &Value) -> (StatusCode, String) {
    call(app, "POST", uri, serde_json::to_vec(body).unwrap()).await
}

fn ids(suggest_json: &str) -> Vec<String> {
    let v: Value = serde_json::from_str(suggest_json).unwrap();
    v["suggestions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["id"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn pipeline_trains_evaluates_and_suggests() {
    let ws = workspace();
    let report = ws.path("eval.json");
    hiliter(&[
        "evaluate", "--model", p(&ws.models().join("code.hlm")), "--test", p(&ws.path("test.jsonl")),
        "--report", p(&report),
    ]);
    let v: Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    let f1 = v["metrics"]["f1"]["value"].as_f64().unwrap();
    assert!(f1 >= 0.9, "held-out F1 {f1}");

    let out = cli_suggest(&ws.path("draft.md"), "highest");
    let v: Value = serde_json::from_str(&out).unwrap();
    let contents: Vec<&str> = v["suggestions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["content"].as_str().unwrap())
        .collect();
    assert_eq!(contents, ["getValue()", "close()"]);

    let all = ids(&out);
    assert_eq!(
        cli_render(&ws.path("draft.md"), &[&all[1]]),
        "You should call getValue() before the loop and `close()` it after."
    );

    let applied = hiliter(&["suggest", "--models", p(&ws.models()), "--input", p(&ws.path("draft.md")), "--mode", "apply"]);
    assert_eq!(
        String::from_utf8(applied.stdout).unwrap().trim_end(),
        "You should call `getValue()` before the loop and `close()` it after."
    );
}

#[test]
fn analyze_failures_writes_report_and_csv() {
    let ws = workspace();
    let out = ws.path("failures.json");
    let csv = ws.path("freq.csv");
    hiliter(&[
        "analyze-failures", "--target", "code", "--models", p(&ws.models()), "--test", p(&ws.path("test.jsonl")),
        "--train", p(&ws.path("train.jsonl")), "--out", p(&out), "--freq-csv", p(&csv),
    ]);
    let v: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["failures"]["format"], "code");
    assert!(v["frequency"].is_object());
    assert!(fs::read_to_string(&csv).unwrap().starts_with("word,train_frequency,correct,missed\n"));
}

#[tokio::test]
async fn service_output_is_byte_identical_to_cli() {
    let ws = workspace();
    for (file, draft) in [("draft.md", DRAFT), ("wide.md", WIDE_DRAFT)] {
        for policy in ["highest", "all"] {
            let cli = cli_suggest(&ws.path(file), policy);
            let app = router(loaded(), &ServerOptions::default());
            let (status, body) = post(app, "/api/suggest", &json!({"body": draft, "policy": policy})).await;
            assert_eq!(status, StatusCode::OK);
            assert_eq!(body, cli, "{file} {policy}");
        }

        let all = ids(&cli_suggest(&ws.path(file), "highest"));
        assert!(!all.is_empty(), "{file}");
        // every non-empty subset, accepted in reverse order
        for mask in 1..(1u32 << all.len()) {
            let chosen: Vec<&str> = all
                .iter()
                .enumerate()
                .rev()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| s.as_str())
                .collect();
            let cli = cli_render(&ws.path(file), &chosen);
            let app = router(loaded(), &ServerOptions::default());
            let (status, body) = post(app, "/api/render", &json!({"body": draft, "accepted_ids": chosen})).await;
            assert_eq!(status, StatusCode::OK);
            let v: Value = serde_json::from_str(&body).unwrap();
            assert_eq!(v["markdown"].as_str().unwrap(), cli, "{file} {chosen:?}");
        }
    }
}

#[test]
fn multibyte_offsets_count_code_points() {
    let ws = workspace();
    let v: Value = serde_json::from_str(&cli_suggest(&ws.path("wide.md"), "highest")).unwrap();
    let chars: Vec<char> = WIDE_DRAFT.chars().collect();
    let suggestions = v["suggestions"].as_array().unwrap();
    assert!(!suggestions.is_empty());
    for s in suggestions {
        let start = s["char_start"].as_u64().unwrap() as usize;
        let end = s["char_end"].as_u64().unwrap() as usize;
        let slice: String = chars[start..end].iter().collect();
        assert_eq!(slice, s["content"].as_str().unwrap());
    }
    let first = &suggestions[0];
    assert_eq!(first["content"], "getValue()");
    assert_eq!(first["char_start"], 3);
}

#[tokio::test]
async fn error_statuses() {
    let small = ServerOptions {
        max_body_bytes: 64,
        ..ServerOptions::default()
    };
    let big = json!({"body": "x".repeat(200)});
    let (status, body) = post(router(loaded(), &small), "/api/suggest", &big).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert!(serde_json::from_str::<Value>(&body).unwrap()["error"].is_string());

    let opts = ServerOptions::default();
    let (status, _) = call(router(loaded(), &opts), "POST", "/api/suggest", b"{not json".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(router(loaded(), &opts), "/api/suggest", &json!({"body": DRAFT, "policy": "best"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(router(loaded(), &opts), "/api/suggest", &json!({"body": DRAFT, "types": ["strike"]})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = post(router(ModelSet::default(), &opts), "/api/suggest", &json!({"body": DRAFT})).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);

    let req = json!({"body": DRAFT, "accepted_ids": ["0000000000000000"]});
    let (status, _) = post(router(loaded(), &opts), "/api/render", &req).await;
    assert_eq!(status, StatusCode::CONFLICT);

    // ids issued for one body are stale for another
    let id = ids(&cli_suggest(&workspace().path("draft.md"), "highest")).remove(0);
    let req = json!({"body": format!("{DRAFT} More."), "accepted_ids": [id]});
    let (status, _) = post(router(loaded(), &opts), "/api/render", &req).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn models_endpoint_lists_files_and_warnings() {
    let opts = ServerOptions::default();
    let empty = TempDir::new().unwrap();
    let (status, body) = call(router(ModelSet::load_dir(empty.path()).unwrap(), &opts), "GET", "/api/models", vec![]).await;
    assert_eq!((status, body.as_str()), (StatusCode::OK, "[]"));

    let dir = TempDir::new().unwrap();
    fs::copy(workspace().models().join("code.hlm"), dir.path().join("a-code.hlm")).unwrap();
    fs::copy(workspace().models().join("code.hlm"), dir.path().join("b-code.hlm")).unwrap();
    fs::write(dir.path().join("c-broken.hlm"), b"HILITER\0garbage").unwrap();
    fs::write(dir.path().join("notes.txt"), b"ignored").unwrap();
    let (_, body) = call(router(ModelSet::load_dir(dir.path()).unwrap(), &opts), "GET", "/api/models", vec![]).await;
    let rows: Vec<Value> = serde_json::from_str(&body).unwrap();
    let files: Vec<&str> = rows.iter().map(|r| r["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["a-code.hlm", "b-code.hlm", "c-broken.hlm"]);
    assert!(rows[0]["warning"].is_null());
    assert_eq!(rows[0]["format"], "code");
    assert_eq!(rows[0]["training"]["epochs"], 8);
    assert!(rows[1]["warning"].is_string());
    assert!(rows[2]["warning"].is_string());
    assert!(rows[2]["format"].is_null());
}

#[tokio::test]
async fn health_and_static_files() {
    let site = TempDir::new().unwrap();
    fs::write(site.path().join("index.html"), "<p>review</p>").unwrap();
    let opts = ServerOptions {
        static_dir: Some(site.path().to_path_buf()),
        ..ServerOptions::default()
    };
    let (status, body) = call(router(ModelSet::default(), &opts), "GET", "/healthz", vec![]).await;
    assert_eq!((status, body.as_str()), (StatusCode::OK, "ok"));
    let (status, body) = call(router(ModelSet::default(), &opts), "GET", "/", vec![]).await;
    assert_eq!((status, body.as_str()), (StatusCode::OK, "<p>review</p>"));
    let (status, _) = call(router(ModelSet::default(), &opts), "GET", "/missing.js", vec![]).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let bare = ServerOptions::default();
    let (status, _) = call(router(ModelSet::default(), &bare), "GET", "/", vec![]).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
