#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread;

use mdsbench::corpus::{Dataset, Document, Example, Split};

/// Marker for document `doc` of example `ex`.
pub fn marker(ex: usize, doc: usize) -> String {
    format!("<<ACU:e{ex}d{doc}>>")
}

const FILLER: [&str; 12] = [
    "officials", "reported", "the", "river", "council", "market", "storm", "season", "vote", "harbor",
    "bridge", "report",
];

/// Deterministic filler of `words` words seeded by `seed`.
pub fn filler(seed: usize, words: usize) -> String {
    (0..words)
        .map(|i| FILLER[(seed * 7 + i * 5 + i / 3) % FILLER.len()])
        .collect::<Vec<_>>()
        .join(" ")
}

/// An example whose documents each carry one distinct marker mid-text.
pub fn marker_example(ex: usize, docs: usize, words_per_doc: usize) -> Example {
    let half = words_per_doc / 2;
    let documents: Vec<Document> = (0..docs)
        .map(|d| {
            let text = format!("{} {} {}", filler(d, half), marker(ex, d), filler(d + 1, half));
            Document::new(format!("e{ex}d{d}"), text)
        })
        .collect();
    let markers: Vec<String> = (0..docs).map(|d| marker(ex, d)).collect();
    Example {
        id: format!("ex{ex:03}"),
        query: None,
        dataset_tag: "synthetic".into(),
        documents,
        references: vec![format!("{} {}", filler(ex, 20), markers.join(" "))],
        acus: Some(markers),
    }
}

pub fn marker_dataset(examples: usize, docs: usize, words_per_doc: usize) -> Dataset {
    Dataset {
        examples: (0..examples).map(|e| marker_example(e, docs, words_per_doc)).collect(),
        split: Split::Test,
    }
}

pub fn write_dataset(path: &Path, dataset: &Dataset) {
    dataset.write_jsonl(path).expect("fixture dataset writes");
}

/// One captured HTTP request.
#[derive(Debug, Clone)]
pub struct Captured {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Captured {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).expect("request body is JSON")
    }
}

pub type Responder = Box<dyn Fn(usize, &Captured) -> (u16, String) + Send + Sync>;

/// Minimal HTTP/1.1 server answering every connection with one response
/// chosen by `respond(request_number, request)`.
pub struct StubServer {
    pub base_url: String,
    pub requests: Arc<Mutex<Vec<Captured>>>,
}

impl StubServer {
    pub fn start(respond: Responder) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let base_url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        let respond = Arc::new(respond);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let log = Arc::clone(&log);
                let respond = Arc::clone(&respond);
                thread::spawn(move || handle(stream, &log, respond.as_ref()));
            }
        });
        Self { base_url, requests }
    }

    pub fn requests(&self) -> Vec<Captured> {
        self.requests.lock().unwrap().clone()
    }
}

fn handle(stream: TcpStream, log: &Mutex<Vec<Captured>>, respond: &Responder) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    let mut headers = Vec::new();
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).unwrap();
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let len: usize = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).unwrap();
    let captured = Captured {
        method,
        path,
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    let n = {
        let mut log = log.lock().unwrap();
        log.push(captured.clone());
        log.len() - 1
    };
    let (status, payload) = respond(n, &captured);
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = stream.flush();
}

pub fn chat_reply(content: &str) -> String {
    serde_json::json!({
        "id": "stub",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    })
    .to_string()
}
