//! Shared fixtures: a minimal OpenAI-compatible mock server over a raw
//! TcpListener, synthetic images and manifests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use corruptbench::determinism::make_rng;
use corruptbench::Image;
use serde_json::{json, Value};

pub type Handler = dyn Fn(&Value) -> Reply + Send + Sync;

pub enum Reply {
    Text(String),
    Status(u16, String),
}

pub struct MockServer {
    pub base_url: String,
    pub hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    addr: std::net::SocketAddr,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(handler: impl Fn(&Value) -> Reply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let addr = listener.local_addr().unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let hits = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = {
            let (stop, hits) = (stop.clone(), hits.clone());
            std::thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(conn) = conn else { continue };
                    let (handler, hits) = (handler.clone(), hits.clone());
                    std::thread::spawn(move || serve(conn, &*handler, &hits));
                }
            })
        };
        Self {
            base_url: format!("http://{addr}/v1"),
            hits,
            stop,
            addr,
            thread: Some(thread),
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Serves requests on one connection until the peer closes it.
fn serve(conn: TcpStream, handler: &Handler, hits: &AtomicUsize) {
    let mut reader = BufReader::new(conn.try_clone().expect("clone stream"));
    let mut writer = conn;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let mut content_length = 0usize;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; content_length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        hits.fetch_add(1, Ordering::SeqCst);
        let (status, payload) = match serde_json::from_slice::<Value>(&body) {
            Ok(req) => match handler(&req) {
                Reply::Text(t) => (
                    200,
                    json!({
                        "choices": [{"index": 0, "message": {"role": "assistant", "content": t}, "finish_reason": "stop"}],
                        "usage": {"prompt_tokens": 10, "completion_tokens": 1}
                    })
                    .to_string(),
                ),
                Reply::Status(code, msg) => (code, json!({"error": msg}).to_string()),
            },
            Err(e) => (400, json!({"error": e.to_string()}).to_string()),
        };
        let reason = if status == 200 { "OK" } else { "Error" };
        let resp = format!(
            "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
            payload.len()
        );
        if writer.write_all(resp.as_bytes()).is_err() {
            return;
        }
    }
}

/// Image data URLs in the request, in order.
pub fn image_urls(req: &Value) -> Vec<String> {
    let mut out = Vec::new();
    for msg in req["messages"].as_array().into_iter().flatten() {
        for part in msg["content"].as_array().into_iter().flatten() {
            if part["type"] == "image_url" {
                out.push(part["image_url"]["url"].as_str().unwrap_or_default().to_string());
            }
        }
    }
    out
}

pub fn prompt_text(req: &Value) -> String {
    let mut out = String::new();
    for msg in req["messages"].as_array().into_iter().flatten() {
        match &msg["content"] {
            Value::String(s) => out.push_str(s),
            Value::Array(parts) => {
                for p in parts {
                    if let Some(t) = p["text"].as_str() {
                        out.push_str(t);
                    }
                }
            }
            _ => {}
        }
    }
    out
}

pub fn data_url(img: &Image) -> String {
    use base64::Engine;
    format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(img.encode_png().unwrap())
    )
}

/// A random image with every sample in `[20, 200]` plus one pixel at 200,
/// so that every catalog entry changes at least one byte.
pub fn synthetic_image(seed: u32, w: u32, h: u32) -> Image {
    let mut rng = make_rng(seed);
    let mut img = Image::from_fn(w, h, |_, _| {
        let mut v = || (20 + rng.next_below(181)) as u8;
        [v(), v(), v()]
    });
    img.set_pixel(0, 0, [200, 200, 200]);
    img
}

pub struct Manifest {
    pub path: PathBuf,
    /// `(id, answer, clean image)` per sample.
    pub samples: Vec<(String, char, Image)>,
}

/// Writes `n` four-option samples with images under `dir`. Answers cycle
/// through `answers`.
pub fn write_manifest(dir: &Path, n: usize, answers: &[char], strata: usize) -> Manifest {
    std::fs::create_dir_all(dir.join("img")).unwrap();
    let mut lines = Vec::new();
    let mut samples = Vec::new();
    for i in 0..n {
        let id = format!("q{i:03}");
        let img = synthetic_image(1000 + i as u32, 40, 32);
        img.save_png(dir.join("img").join(format!("{id}.png"))).unwrap();
        let answer = answers[i % answers.len()];
        lines.push(
            json!({
                "id": id,
                "images": [format!("img/{id}.png")],
                "question": format!("Which shape is shown in picture {i}?"),
                "options": [
                    {"letter": "A", "text": "circle"},
                    {"letter": "B", "text": "square"},
                    {"letter": "C", "text": "triangle"},
                    {"letter": "D", "text": "star"}
                ],
                "answer": answer.to_string(),
                "stratum": format!("s{}", i % strata.max(1)),
            })
            .to_string(),
        );
        samples.push((id, answer, img));
    }
    let path = dir.join("synthetic.jsonl");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    Manifest { path, samples }
}

pub fn run_config(manifest: &Path, base_url: &str, out_dir: &Path) -> corruptbench::RunConfig {
    serde_json::from_value(json!({
        "manifest": manifest,
        "fraction": 1.0,
        "endpoint": {
            "base_url": base_url,
            "model_name": "mock-vlm",
            "timeout_secs": 10,
            "max_retries": 2,
            "backoff_ms": 1,
            "max_concurrent": 4
        },
        "out_dir": out_dir,
    }))
    .expect("valid run config")
}
