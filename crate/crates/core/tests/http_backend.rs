use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use masgram_core::backend::{BackendError, HttpBackend, HttpConfig, LlmBackend, RetryPolicy};
use masgram_core::components::TaskContext;
use masgram_core::executor::Executor;
use masgram_core::grammar::base_mas;

const OK_BODY: &str = r#"{"choices":[{"message":{"role":"assistant","content":"It is \\boxed{4}."}}],"usage":{"prompt_tokens":20,"completion_tokens":5}}"#;

/// Serves canned (status, body) replies in order, one per connection, and
/// records each request body.
fn serve(replies: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&bodies);
    thread::spawn(move || {
        for (status, body) in replies {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            seen.lock().unwrap().push(String::from_utf8(buf).unwrap());
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1/chat/completions"), bodies)
}

fn backend(endpoint: &str, attempts: u32) -> HttpBackend {
    let mut config = HttpConfig::new(endpoint, "test-key");
    config.retry = RetryPolicy {
        max_attempts: attempts,
        base: Duration::from_millis(5),
        cap: Duration::from_millis(20),
    };
    HttpBackend::new(config)
}

fn task() -> TaskContext {
    TaskContext::new("What is 2+2?").unwrap()
}

#[test]
fn rate_limit_is_retried_and_billed_once() {
    let (endpoint, bodies) = serve(vec![(429, "{}"), (503, "{}"), (200, OK_BODY)]);
    let http = backend(&endpoint, 5);
    let result = Executor::new(&http, "gpt-4o-mini")
        .execute(&base_mas("CoT").unwrap(), &task(), None)
        .unwrap();
    assert_eq!(result.final_answer.content, "It is \\boxed{4}.");
    assert_eq!(result.ledger.calls(), 1);
    let entry = &result.ledger.entries()[0];
    assert_eq!((entry.prompt_tokens, entry.completion_tokens), (20, 5));
    let bodies = bodies.lock().unwrap();
    assert_eq!(bodies.len(), 3);
    let sent: serde_json::Value = serde_json::from_str(&bodies[2]).unwrap();
    assert_eq!(sent["temperature"], serde_json::json!(0.5));
    assert_eq!(sent["messages"][0]["content"], "You are a helpful assistant.");
}

#[test]
fn client_errors_are_not_retried() {
    let (endpoint, bodies) = serve(vec![(401, r#"{"error":"bad key"}"#)]);
    let http = backend(&endpoint, 5);
    let err = Executor::new(&http, "gpt-4o-mini")
        .execute(&base_mas("CoT").unwrap(), &task(), None)
        .unwrap_err();
    assert!(matches!(
        err.error,
        masgram_core::components::RunError::Backend(BackendError::Status { status: 401, .. })
    ));
    assert!(err.ledger.entries().is_empty());
    assert_eq!(bodies.lock().unwrap().len(), 1);
}

#[test]
fn persistent_overload_exhausts_attempts() {
    let (endpoint, _) = serve(vec![(500, "{}"), (500, "{}")]);
    let http = backend(&endpoint, 2);
    let request = masgram_core::backend::ChatRequest {
        model: "gpt-4o-mini".into(),
        system_text: "s".into(),
        user_text: "u".into(),
        temperature: 0.1,
        request_tag: "probe".into(),
    };
    match http.complete(&request) {
        Err(BackendError::Exhausted { attempts, timed_out, .. }) => {
            assert_eq!(attempts, 2);
            assert!(!timed_out);
        }
        other => panic!("{other:?}"),
    }
}
