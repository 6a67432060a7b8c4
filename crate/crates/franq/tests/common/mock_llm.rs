//! A deterministic in-process HTTP server that speaks the two backend
//! protocols: the OpenAI-compatible LLM surface (`/v1/chat/completions`,
//! `/v1/completions` with echo) and the alignment scorer (`/score`).
//!
//! Every response is a pure function of the request body (hashes seed the
//! numeric values), so warm-cache replays and repeated runs are bit-exact.
//! The canonical greedy answer is always "Paris is the capital of France.";
//! sampled choices mix in a "Lyon" variant for cluster diversity.

use serde_json::{json, Value};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

pub const ANSWER_TOKENS: [&str; 7] = [" Paris", " is", " the", " capital", " of", " France", "."];
pub const VARIANT_TOKENS: [&str; 7] = [" Lyon", " is", " the", " capital", " of", " France", "."];

/// Canonical greedy answer surface (leading space included, as tokenized).
pub fn canonical_answer() -> String {
    ANSWER_TOKENS.concat()
}

/// FNV-1a, fixed constants: deterministic across processes and runs.
pub fn fnv(text: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn unit(h: u64) -> f64 {
    (h % 10_000) as f64 / 10_000.0
}

fn token_logprob(seed: &str, index: usize) -> f64 {
    -(0.05 + 0.4 * unit(fnv(&format!("{seed}#{index}"))))
}

fn token_value(text: &str, logprob: f64) -> Value {
    json!({
        "token": text,
        "logprob": logprob,
        "top_logprobs": [
            {"token": text, "logprob": logprob},
            {"token": " perhaps", "logprob": logprob - 2.0},
        ],
    })
}

fn answer_choice(tokens: &[&str], seed: &str) -> Value {
    let content: Vec<Value> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| token_value(t, token_logprob(seed, i)))
        .collect();
    json!({"logprobs": {"content": content}})
}

/// One whole-response-in-one-token choice, used for text-shaped replies
/// (claim lists, annotation tuples, judge words, rewrites).
fn text_choice(text: &str) -> Value {
    json!({"logprobs": {"content": [token_value(text, -0.05)]}})
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let to = text[from..].find(end)? + from;
    Some(&text[from..to])
}

fn chat_response(body: &Value) -> Value {
    let prompt = body
        .pointer("/messages/0/content")
        .and_then(Value::as_str)
        .unwrap_or_default();
    let n = body.get("n").and_then(Value::as_u64).unwrap_or(1) as usize;
    let temperature = body
        .get("temperature")
        .and_then(Value::as_f64)
        .unwrap_or(0.0);

    let choices: Vec<Value> = if prompt.contains("decompose(\"") {
        vec![text_choice(
            r#"["Paris is the capital of France.", "France has a capital city."]"#,
        )]
    } else if prompt.contains("Now analyze the following text") {
        let claim = between(prompt, "\nClaim: ", "\nAnswer:").unwrap_or_default();
        let words = if claim.contains("has a capital") {
            r#""capital", "France""#
        } else {
            r#""Paris", "is", "the", "capital", "of", "France""#
        };
        vec![text_choice(&format!(
            "Sentence: \"Paris is the capital of France.\"\nRelated words from this sentence (same order they appear in the sentence): {words}"
        ))]
    } else if prompt.contains("Evaluate the given claim") {
        let h = fnv(prompt);
        let label = if h % 4 == 0 {
            "(\"unfaithful-neutral\", \"False\")"
        } else {
            "(\"faithful\", \"True\")"
        };
        vec![text_choice(label)]
    } else if prompt.contains("Grade the following proposed answer") {
        let gold = between(prompt, "\nGold answer: ", "\n").unwrap_or_default();
        let proposed = between(prompt, "\nProposed answer: ", "\nGrade:").unwrap_or_default();
        let verdict = if proposed.trim().is_empty() {
            "not_attempted"
        } else if proposed.trim() == gold.trim() {
            "correct"
        } else {
            "incorrect"
        };
        vec![text_choice(verdict)]
    } else if prompt.contains("Is the proposed answer true?") {
        let p = 0.25 + 0.5 * unit(fnv(prompt));
        vec![json!({"logprobs": {"content": [{
            "token": " True",
            "logprob": p.ln(),
            "top_logprobs": [
                {"token": " True", "logprob": p.ln()},
                {"token": " False", "logprob": (1.0 - p).ln()},
            ],
        }]}})]
    } else if prompt.contains("Rewritten passage:") {
        let passage = between(prompt, "\nPassage: ", "\nRewritten passage:").unwrap_or_default();
        vec![text_choice(&format!(
            "A different account {} with altered names and dates.",
            fnv(passage) % 100_000
        ))]
    } else {
        // Generation prompt (short- or long-form, with or without passages).
        (0..n)
            .map(|i| {
                let tokens: &[&str] = if temperature > 0.0 && i % 3 == 2 {
                    &VARIANT_TOKENS
                } else {
                    &ANSWER_TOKENS
                };
                answer_choice(tokens, &format!("{prompt}|choice{i}"))
            })
            .collect()
    };
    json!({"choices": choices})
}

fn echo_response(body: &Value) -> Value {
    let text = body.get("prompt").and_then(Value::as_str).unwrap_or_default();
    let answer = canonical_answer();
    let (prefix, answer_tokens): (&str, &[&str]) = match text.strip_suffix(answer.as_str()) {
        Some(prefix) => (prefix, &ANSWER_TOKENS),
        None => (text, &[]),
    };
    let mut tokens: Vec<Value> = vec![Value::String(prefix.to_string())];
    let mut logprobs: Vec<Value> = vec![Value::Null];
    for (i, t) in answer_tokens.iter().enumerate() {
        tokens.push(Value::String((*t).to_string()));
        logprobs.push(json!(token_logprob(&format!("echo|{text}"), i)));
    }
    json!({"choices": [{"logprobs": {"tokens": tokens, "token_logprobs": logprobs}}]})
}

fn align_response(body: &Value) -> Value {
    let context = body
        .get("context")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_lowercase();
    let claim = body.get("claim").and_then(Value::as_str).unwrap_or_default();
    let words: Vec<String> = claim
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect();
    let hit = words.iter().filter(|w| context.contains(w.as_str())).count();
    let score = if words.is_empty() {
        0.5
    } else {
        (hit as f64 / words.len() as f64).clamp(0.02, 0.98)
    };
    json!({"score": score})
}

fn respond(path: &str, body: &Value) -> (u16, Value) {
    match path {
        "/v1/chat/completions" => (200, chat_response(body)),
        "/v1/completions" => (200, echo_response(body)),
        "/score" => (200, align_response(body)),
        _ => (404, json!({"error": format!("no handler for {path}")})),
    }
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

fn read_request(stream: &mut TcpStream) -> Option<(String, Vec<u8>)> {
    let mut buf = Vec::new();
    let mut tmp = [0u8; 4096];
    let header_end = loop {
        let k = stream.read(&mut tmp).ok()?;
        if k == 0 {
            return None;
        }
        buf.extend_from_slice(&tmp[..k]);
        if let Some(pos) = find_subslice(&buf, b"\r\n\r\n") {
            break pos + 4;
        }
        if buf.len() > (1 << 22) {
            return None;
        }
    };
    let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let path = head.split_whitespace().nth(1)?.to_string();
    let content_length: usize = head
        .lines()
        .find_map(|l| {
            let (k, v) = l.split_once(':')?;
            k.eq_ignore_ascii_case("content-length")
                .then(|| v.trim().parse().ok())
                .flatten()
        })
        .unwrap_or(0);
    let mut body = buf[header_end..].to_vec();
    while body.len() < content_length {
        let k = stream.read(&mut tmp).ok()?;
        if k == 0 {
            break;
        }
        body.extend_from_slice(&tmp[..k]);
    }
    Some((path, body))
}

fn write_response(stream: &mut TcpStream, status: u16, body: &str) {
    let reason = match status {
        200 => "OK",
        404 => "Not Found",
        429 => "Too Many Requests",
        _ => "Internal Server Error",
    };
    let _ = write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.flush();
}

/// Failure injection for retry tests.
#[derive(Clone, Copy)]
pub struct Behavior {
    /// Respond with `fail_status` to this many requests before succeeding.
    pub fail_first: usize,
    pub fail_status: u16,
}

impl Default for Behavior {
    fn default() -> Self {
        Behavior {
            fail_first: 0,
            fail_status: 500,
        }
    }
}

pub struct MockServer {
    pub base_url: String,
    hits: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start() -> Self {
        Self::with_behavior(Behavior::default())
    }

    pub fn with_behavior(behavior: Behavior) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let addr = listener.local_addr().expect("local addr");
        listener.set_nonblocking(true).expect("nonblocking listener");
        let hits = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));
        let handle = {
            let hits = Arc::clone(&hits);
            let shutdown = Arc::clone(&shutdown);
            std::thread::spawn(move || loop {
                match listener.accept() {
                    Ok((mut stream, _)) => {
                        let _ = stream.set_nonblocking(false);
                        if let Some((path, body)) = read_request(&mut stream) {
                            let hit = hits.fetch_add(1, Ordering::SeqCst);
                            if hit < behavior.fail_first {
                                write_response(
                                    &mut stream,
                                    behavior.fail_status,
                                    r#"{"error":"injected transient failure"}"#,
                                );
                                continue;
                            }
                            let parsed: Value =
                                serde_json::from_slice(&body).unwrap_or(Value::Null);
                            let (status, reply) = respond(&path, &parsed);
                            write_response(&mut stream, status, &reply.to_string());
                        }
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        if shutdown.load(Ordering::SeqCst) {
                            break;
                        }
                        std::thread::sleep(std::time::Duration::from_millis(2));
                    }
                    Err(_) => break,
                }
            })
        };
        MockServer {
            base_url: format!("http://{addr}"),
            hits,
            shutdown,
            handle: Some(handle),
        }
    }

    /// Requests served so far (including injected failures).
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}
