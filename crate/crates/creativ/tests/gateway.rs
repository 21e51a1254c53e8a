use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use creativ::gateway::{
    generate, record_session, replay_keys, trim_response, ApiMode, Backend, GatewayError,
    HttpBackend, HttpConfig, PromptJob, ReplayStore, SamplingParams,
};
use creativ::Experiment;

fn fixture_replay() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/replay/desk.jsonl")
}

// ---------------------------------------------------------------- trimming

#[test]
fn trim_cuts_at_first_whole_word_endmodule() {
    let raw = "assign y = a;\nendmodule\n\nmodule junk();\nendmodule\n";
    let (text, trimmed) = trim_response(raw);
    assert!(trimmed);
    assert_eq!(text, "assign y = a;\nendmodule");
}

#[test]
fn trim_keeps_raw_when_no_endmodule() {
    let raw = "I would implement this with an adder.";
    let (text, trimmed) = trim_response(raw);
    assert!(!trimmed);
    assert_eq!(text, raw);
}

#[test]
fn trim_ignores_identifier_containing_endmodule() {
    let raw = "wire my_endmodule;\nwire endmodule2;\nassign y = a;\nendmodule\ntail";
    let (text, trimmed) = trim_response(raw);
    assert!(trimmed);
    assert_eq!(text, "wire my_endmodule;\nwire endmodule2;\nassign y = a;\nendmodule");
}

#[test]
fn trim_accepts_punctuation_boundaries() {
    let (text, trimmed) = trim_response("endmodule;");
    assert!(trimmed);
    assert_eq!(text, "endmodule");

    let (text, trimmed) = trim_response("x\nendmodule");
    assert!(trimmed);
    assert_eq!(text, "x\nendmodule");
}

// ---------------------------------------------------------------- replay

#[test]
fn replay_store_serves_fixture_samples() {
    let store = ReplayStore::load(&fixture_replay()).unwrap();
    assert_eq!(store.len(), 42);
    assert!(store.contains("add2", Experiment::Completion, 0));
    assert!(!store.contains("add2", Experiment::Completion, 3));

    let mut backend = ReplayStore::load(&fixture_replay()).unwrap();
    let params = SamplingParams::default();
    let raw = backend
        .sample("mux2", Experiment::Completion, 0, "ignored", &params)
        .unwrap();
    assert_eq!(raw, "assign y = sel ? b : a;\nendmodule\n");
    assert_eq!(backend.id(), "replay");
}

#[test]
fn replay_miss_reports_key() {
    let mut backend = ReplayStore::load(&fixture_replay()).unwrap();
    let err = backend
        .sample("mux2", Experiment::Completion, 99, "ignored", &SamplingParams::default())
        .unwrap_err();
    match err {
        GatewayError::ReplayMiss {
            case_id,
            experiment,
            sample_index,
        } => {
            assert_eq!(case_id, "mux2");
            assert_eq!(experiment, Experiment::Completion);
            assert_eq!(sample_index, 99);
        }
        other => panic!("expected ReplayMiss, got {other}"),
    }
}

fn entry_line(case_id: &str, index: u32, raw: &str) -> String {
    format!(
        r#"{{"case_id":"{case_id}","experiment":"completion","sample_index":{index},"raw_text":"{raw}","params":{{}}}}"#
    )
}

#[test]
fn replay_duplicates_keep_first_entry() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    let text = format!("{}\n{}\n", entry_line("a", 0, "first"), entry_line("a", 0, "second"));
    std::fs::write(&path, text).unwrap();
    let mut store = ReplayStore::load(&path).unwrap();
    assert_eq!(store.len(), 1);
    let raw = store
        .sample("a", Experiment::Completion, 0, "", &SamplingParams::default())
        .unwrap();
    assert_eq!(raw, "first");
}

#[test]
fn replay_tolerates_torn_final_line_only() {
    let dir = tempfile::tempdir().unwrap();

    let path = dir.path().join("torn.jsonl");
    let text = format!("{}\n{{\"case_id\":\"b\",\"exp", entry_line("a", 0, "ok"));
    std::fs::write(&path, text).unwrap();
    let store = ReplayStore::load(&path).unwrap();
    assert_eq!(store.len(), 1);

    let path = dir.path().join("corrupt.jsonl");
    let text = format!("{{broken}}\n{}\n", entry_line("a", 0, "ok"));
    std::fs::write(&path, text).unwrap();
    match ReplayStore::load(&path) {
        Err(GatewayError::BadStore { line, .. }) => assert_eq!(line, 1),
        Err(other) => panic!("expected BadStore, got {other}"),
        Ok(_) => panic!("interior malformed line must not load"),
    }
}

// ---------------------------------------------------------------- generate

struct CountingBackend {
    calls: u32,
}

impl Backend for CountingBackend {
    fn id(&self) -> String {
        "counting".to_string()
    }

    fn sample(
        &mut self,
        case_id: &str,
        _experiment: Experiment,
        sample_index: u32,
        _prompt: &str,
        _params: &SamplingParams,
    ) -> Result<String, GatewayError> {
        self.calls += 1;
        Ok(format!("// {case_id} take {sample_index}\nendmodule\nextra"))
    }
}

#[test]
fn generate_returns_exactly_t_trimmed_records() {
    let mut backend = CountingBackend { calls: 0 };
    let params = SamplingParams {
        t: 4,
        ..SamplingParams::default()
    };
    let records = generate("prompt", "inv", Experiment::Completion, &params, &mut backend).unwrap();
    assert_eq!(records.len(), 4);
    assert_eq!(backend.calls, 4);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.sample_index, i as u32);
        assert!(r.trimmed);
        assert!(r.trimmed_text.ends_with("endmodule"));
        assert!(r.raw_text.ends_with("extra"));
        assert_eq!(r.backend_id, "counting");
    }
}

#[test]
fn record_session_resumes_without_resampling() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rec.jsonl");
    let jobs = vec![
        PromptJob {
            case_id: "inv".to_string(),
            experiment: Experiment::Completion,
            prompt: "p".to_string(),
        },
        PromptJob {
            case_id: "buf".to_string(),
            experiment: Experiment::Rewrite,
            prompt: "q".to_string(),
        },
    ];
    let params = SamplingParams {
        t: 3,
        ..SamplingParams::default()
    };

    let mut backend = CountingBackend { calls: 0 };
    let summary = record_session(&jobs, &params, &mut backend, &path).unwrap();
    assert_eq!((summary.sampled, summary.skipped), (6, 0));
    assert_eq!(backend.calls, 6);

    // Tear the final line as a crashed writer would, then resume: only the
    // torn sample is redone.
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();

    let mut backend = CountingBackend { calls: 0 };
    let summary = record_session(&jobs, &params, &mut backend, &path).unwrap();
    assert_eq!((summary.sampled, summary.skipped), (1, 5));
    assert_eq!(backend.calls, 1);

    let keys = replay_keys(&path).unwrap();
    assert_eq!(keys.len(), 6);
    let store = ReplayStore::load(&path).unwrap();
    assert_eq!(store.len(), 6);
}

// ---------------------------------------------------------------- http

struct StubServer {
    addr: String,
    requests: Arc<Mutex<Vec<String>>>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl StubServer {
    /// Serves the canned (status, body) responses in order, one per
    /// connection, recording each request (head + body) for assertions.
    fn start(responses: Vec<(u16, String)>) -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = format!("http://{}/v1/completions", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = match listener.accept() {
                    Ok(s) => s,
                    Err(_) => return,
                };
                let mut buf = Vec::new();
                let mut chunk = [0u8; 4096];
                let request = loop {
                    match stream.read(&mut chunk) {
                        Ok(0) => break String::from_utf8_lossy(&buf).into_owned(),
                        Ok(n) => {
                            buf.extend_from_slice(&chunk[..n]);
                            let text = String::from_utf8_lossy(&buf).into_owned();
                            if let Some(head_end) = text.find("\r\n\r\n") {
                                let head = &text[..head_end];
                                let len = head
                                    .lines()
                                    .find_map(|l| {
                                        let l = l.to_ascii_lowercase();
                                        l.strip_prefix("content-length:")
                                            .map(|v| v.trim().parse::<usize>().unwrap_or(0))
                                    })
                                    .unwrap_or(0);
                                if text.len() >= head_end + 4 + len {
                                    break text;
                                }
                            }
                        }
                        Err(_) => break String::from_utf8_lossy(&buf).into_owned(),
                    }
                };
                seen.lock().unwrap().push(request);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        StubServer {
            addr,
            requests,
            handle: Some(handle),
        }
    }

    fn requests(&self) -> Vec<String> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn http_config(endpoint: &str, mode: ApiMode) -> HttpConfig {
    HttpConfig {
        endpoint: endpoint.to_string(),
        model: "desk-model".to_string(),
        mode,
        retry_base_ms: 1,
        ..HttpConfig::default()
    }
}

fn completion_body(text: &str) -> String {
    serde_json::json!({"choices": [{"text": text}]}).to_string()
}

#[test]
fn http_completion_mode_round_trip() {
    let server = StubServer::start(vec![(200, completion_body("assign y = a;\nendmodule"))]);
    let mut backend = HttpBackend::new(http_config(&server.addr, ApiMode::Completion));
    let params = SamplingParams::default();
    let raw = backend
        .sample("inv", Experiment::Completion, 0, "// prompt", &params)
        .unwrap();
    assert_eq!(raw, "assign y = a;\nendmodule");

    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    let body: serde_json::Value =
        serde_json::from_str(reqs[0].split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["model"], "desk-model");
    assert_eq!(body["prompt"], "// prompt");
    assert_eq!(body["temperature"], 0.3);
    assert_eq!(body["max_tokens"], 1024);
    assert_eq!(body["top_k"], 10);
    assert_eq!(body["top_p"], 0.95);
    assert_eq!(body["n"], 1);
    assert!(body.get("messages").is_none());
}

#[test]
fn http_chat_mode_uses_messages() {
    let reply = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": "module inv();\nendmodule"}}]
    })
    .to_string();
    let server = StubServer::start(vec![(200, reply)]);
    let mut backend = HttpBackend::new(http_config(&server.addr, ApiMode::Chat));
    let raw = backend
        .sample("inv", Experiment::Rewrite, 0, "rewrite it", &SamplingParams::default())
        .unwrap();
    assert_eq!(raw, "module inv();\nendmodule");

    let reqs = server.requests();
    let body: serde_json::Value =
        serde_json::from_str(reqs[0].split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "rewrite it");
    assert!(body.get("prompt").is_none());
}

#[test]
fn http_retries_rate_limit_then_succeeds() {
    let server = StubServer::start(vec![
        (429, r#"{"error":"slow down"}"#.to_string()),
        (500, r#"{"error":"hiccup"}"#.to_string()),
        (200, completion_body("ok\nendmodule")),
    ]);
    let mut backend = HttpBackend::new(http_config(&server.addr, ApiMode::Completion));
    let raw = backend
        .sample("inv", Experiment::Completion, 0, "p", &SamplingParams::default())
        .unwrap();
    assert_eq!(raw, "ok\nendmodule");
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn http_rate_limit_exhaustion_reported() {
    let server = StubServer::start(vec![
        (429, "{}".to_string()),
        (429, "{}".to_string()),
        (429, "{}".to_string()),
        (429, "{}".to_string()),
    ]);
    let mut cfg = http_config(&server.addr, ApiMode::Completion);
    cfg.retries = 3;
    let mut backend = HttpBackend::new(cfg);
    let err = backend
        .sample("inv", Experiment::Completion, 0, "p", &SamplingParams::default())
        .unwrap_err();
    assert!(matches!(err, GatewayError::RateLimited { attempts: 4, .. }), "got {err}");
}

#[test]
fn http_drops_top_k_after_rejection_and_notes_it() {
    let server = StubServer::start(vec![
        (400, r#"{"error":"unknown parameter: top_k"}"#.to_string()),
        (200, completion_body("first\nendmodule")),
        (200, completion_body("second\nendmodule")),
    ]);
    let mut backend = HttpBackend::new(http_config(&server.addr, ApiMode::Completion));
    let params = SamplingParams::default();

    let raw = backend
        .sample("inv", Experiment::Completion, 0, "p", &params)
        .unwrap();
    assert_eq!(raw, "first\nendmodule");
    let raw = backend
        .sample("inv", Experiment::Completion, 1, "p", &params)
        .unwrap();
    assert_eq!(raw, "second\nendmodule");

    let notes = backend.drain_notes();
    assert_eq!(notes.len(), 1);
    assert!(notes[0].contains("top_k"), "got {notes:?}");
    assert!(backend.drain_notes().is_empty(), "draining clears notes");

    let reqs = server.requests();
    assert_eq!(reqs.len(), 3);
    assert!(reqs[0].contains("top_k"));
    let second: serde_json::Value =
        serde_json::from_str(reqs[1].split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert!(second.get("top_k").is_none(), "top_k dropped after rejection");
    let third: serde_json::Value =
        serde_json::from_str(reqs[2].split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert!(third.get("top_k").is_none(), "drop persists for the session");
}

#[test]
fn http_other_client_error_fails_immediately() {
    let server = StubServer::start(vec![(400, r#"{"error":"model not found"}"#.to_string())]);
    let mut backend = HttpBackend::new(http_config(&server.addr, ApiMode::Completion));
    let err = backend
        .sample("inv", Experiment::Completion, 0, "p", &SamplingParams::default())
        .unwrap_err();
    assert!(matches!(err, GatewayError::Protocol(_)), "got {err}");
    assert_eq!(server.requests().len(), 1, "no retry on a non-top_k 4xx");
}

#[test]
fn http_unreachable_endpoint_reported() {
    // Bind then drop to get a port nobody listens on.
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let mut cfg = http_config(&format!("http://127.0.0.1:{port}/v1/completions"), ApiMode::Completion);
    cfg.retries = 1;
    let mut backend = HttpBackend::new(cfg);
    let err = backend
        .sample("inv", Experiment::Completion, 0, "p", &SamplingParams::default())
        .unwrap_err();
    assert!(
        matches!(err, GatewayError::BackendUnreachable { attempts: 2, .. }),
        "got {err}"
    );
}

#[test]
fn http_sends_bearer_token_from_env() {
    let server = StubServer::start(vec![(200, completion_body("ok\nendmodule"))]);
    let mut cfg = http_config(&server.addr, ApiMode::Completion);
    cfg.api_key_env = "CREATIV_GATEWAY_TEST_KEY".to_string();
    std::env::set_var("CREATIV_GATEWAY_TEST_KEY", "sekrit");
    let mut backend = HttpBackend::new(cfg);
    backend
        .sample("inv", Experiment::Completion, 0, "p", &SamplingParams::default())
        .unwrap();
    let reqs = server.requests();
    assert!(
        reqs[0].to_ascii_lowercase().contains("authorization: bearer sekrit"),
        "got {}",
        reqs[0]
    );
}
