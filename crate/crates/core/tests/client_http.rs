//! Wire-level behavior of the chat client against a scripted local HTTP
//! server: success, retry on transient failures, fatal client errors, and
//! transport faults.
//!
//! [DERIVED] The oracle is the retry contract itself (attempt counts and
//! error classes), checked against a server whose responses we script.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use udstep_core::llm::{ChatClient, ChatMessage, ChatRequest, LlmError, RetryPolicy, Role};

fn fast_retry(max_attempts: u32) -> RetryPolicy {
    RetryPolicy {
        max_attempts,
        base_delay: Duration::from_millis(1),
        max_delay: Duration::from_millis(4),
    }
}

fn request() -> ChatRequest {
    ChatRequest {
        model: "parser-1".into(),
        messages: vec![
            ChatMessage { role: Role::System, content: "You are a test.".into() },
            ChatMessage { role: Role::User, content: "Annotate this.".into() },
        ],
        max_tokens: 64,
        temperature: 0.0,
    }
}

fn chat_body(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]})
        .to_string()
}

fn read_http_request(stream: &mut TcpStream) -> (String, Vec<u8>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut head = String::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
            break;
        }
        head.push_str(&line);
    }
    let content_length = head
        .lines()
        .find_map(|l| {
            let (name, value) = l.split_once(':')?;
            if name.eq_ignore_ascii_case("content-length") { value.trim().parse().ok() } else { None }
        })
        .unwrap_or(0usize);
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).unwrap();
    (head, body)
}

struct Stub {
    endpoint: String,
    handle: JoinHandle<Vec<(String, Vec<u8>)>>,
}

impl Stub {
    /// Serves one scripted (status, body) response per connection, in
    /// order, recording each request it saw.
    fn serve(responses: Vec<(u16, String)>) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!("http://{}", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                seen.push(read_http_request(&mut stream));
                let reason = match status {
                    200 => "OK",
                    401 => "Unauthorized",
                    429 => "Too Many Requests",
                    _ => "Error",
                };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
            seen
        });
        Stub { endpoint, handle }
    }
}

#[test]
fn success_extracts_text_and_sends_expected_wire_shape() {
    let stub = Stub::serve(vec![(200, chat_body("1\tGo\tVERB\t0\troot"))]);
    let client = ChatClient::new(&stub.endpoint, Some("sk-test".into()), fast_retry(3));
    let done = client.complete(&request()).unwrap();
    assert_eq!(done.text, "1\tGo\tVERB\t0\troot");
    assert_eq!(done.attempts, 1);

    let seen = stub.handle.join().unwrap();
    assert_eq!(seen.len(), 1);
    let (head, body) = &seen[0];
    assert!(head.starts_with("POST /v1/chat/completions HTTP/1.1\r\n"), "got: {head}");
    assert!(
        head.to_ascii_lowercase().contains("authorization: bearer sk-test"),
        "api key must travel as a bearer token"
    );
    let sent: serde_json::Value = serde_json::from_slice(body).unwrap();
    assert_eq!(sent["model"], "parser-1");
    assert_eq!(sent["temperature"], 0.0);
    assert_eq!(sent["max_tokens"], 64);
    assert_eq!(sent["messages"][0]["role"], "system");
    assert_eq!(sent["messages"][1]["role"], "user");
}

#[test]
fn rate_limiting_is_retried_until_success() {
    let stub = Stub::serve(vec![
        (429, r#"{"error":"slow down"}"#.into()),
        (429, r#"{"error":"slow down"}"#.into()),
        (200, chat_body("ok")),
    ]);
    let client = ChatClient::new(&stub.endpoint, None, fast_retry(5));
    let done = client.complete(&request()).unwrap();
    assert_eq!(done.text, "ok");
    assert_eq!(done.attempts, 3);
    assert_eq!(stub.handle.join().unwrap().len(), 3);
}

#[test]
fn persistent_server_errors_exhaust_the_attempt_budget() {
    let stub = Stub::serve(vec![
        (500, "boom".into()),
        (500, "boom".into()),
        (500, "boom".into()),
    ]);
    let client = ChatClient::new(&stub.endpoint, None, fast_retry(3));
    let err = client.complete(&request()).unwrap_err();
    match err {
        LlmError::RetriesExhausted { attempts, last } => {
            assert_eq!(attempts, 3);
            assert!(matches!(*last, LlmError::Endpoint { status: 500, .. }));
        }
        other => panic!("expected exhausted retries, got {other:?}"),
    }
    assert_eq!(stub.handle.join().unwrap().len(), 3);
}

#[test]
fn client_errors_fail_fast_without_retrying() {
    let stub = Stub::serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let client = ChatClient::new(&stub.endpoint, Some("sk-wrong".into()), fast_retry(5));
    let err = client.complete(&request()).unwrap_err();
    match err {
        LlmError::Endpoint { status, body } => {
            assert_eq!(status, 401);
            assert!(body.contains("bad key"));
        }
        other => panic!("expected an endpoint error, got {other:?}"),
    }
    // The script held exactly one response, so a second attempt would
    // have hung; joining proves there was no retry.
    assert_eq!(stub.handle.join().unwrap().len(), 1);
}

#[test]
fn malformed_success_bodies_are_fatal() {
    let stub = Stub::serve(vec![(200, "this is not json".into())]);
    let client = ChatClient::new(&stub.endpoint, None, fast_retry(5));
    let err = client.complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::MalformedResponse(_)), "got {err:?}");
    stub.handle.join().unwrap();
}

#[test]
fn connection_refused_counts_as_transport_and_exhausts() {
    // Bind, note the port, and drop the listener so nothing is there.
    let port = {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let client =
        ChatClient::new(format!("http://127.0.0.1:{port}"), None, fast_retry(2));
    let err = client.complete(&request()).unwrap_err();
    match err {
        LlmError::RetriesExhausted { attempts, last } => {
            assert_eq!(attempts, 2);
            assert!(matches!(*last, LlmError::Transport(_)), "got {last:?}");
        }
        other => panic!("expected exhausted retries, got {other:?}"),
    }
}
