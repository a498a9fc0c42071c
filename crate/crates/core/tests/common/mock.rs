//! Minimal OpenAI-compatible HTTP server for tests.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

type Handler = dyn Fn(&str, &Value) -> Value + Send + Sync;

pub struct MockServer {
    pub base: String,
    requests: Arc<Mutex<Vec<(String, Value)>>>,
}

impl MockServer {
    /// Serves every POST with `handler(path, body)`; runs until the process exits.
    pub fn start(handler: impl Fn(&str, &Value) -> Value + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let log = Arc::clone(&requests);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let handler = Arc::clone(&handler);
                let log = Arc::clone(&log);
                thread::spawn(move || serve(stream, &*handler, &log));
            }
        });
        Self { base, requests }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn requests(&self) -> Vec<(String, Value)> {
        self.requests.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<(String, Value)>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_owned();
        let mut length = 0usize;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((name, value)) = line.split_once(':') {
                if name.eq_ignore_ascii_case("content-length") {
                    length = value.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let value: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
        log.lock().unwrap().push((path.clone(), value.clone()));
        let response = handler(&path, &value);
        let (status, payload) = match response.get("__status").and_then(Value::as_u64) {
            Some(code) => (code, response["body"].to_string()),
            None => (200, response.to_string()),
        };
        let head = format!(
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
            payload.len()
        );
        if out.write_all(head.as_bytes()).and_then(|_| out.write_all(payload.as_bytes())).is_err() {
            return;
        }
    }
}

/// Prompt text of a chat or completions request body.
pub fn prompt_of(body: &Value) -> String {
    body["messages"][0]["content"]
        .as_str()
        .or_else(|| body["prompt"].as_str())
        .unwrap_or_default()
        .to_owned()
}

pub fn completion(text: &str) -> Value {
    json!({"choices": [{"index": 0, "text": text, "message": {"role": "assistant", "content": text}}]})
}

pub fn embeddings(vectors: &[Vec<f32>]) -> Value {
    json!({"data": vectors.iter().enumerate().map(|(i, v)| json!({"index": i, "embedding": v})).collect::<Vec<_>>()})
}

pub fn error(code: u64) -> Value {
    json!({"__status": code, "body": {"error": "mock failure"}})
}
