//! An in-process HTTP server that serves fixed pages in the layout
//! [`super::HttpCollector`] expects, for tests and offline demos.
//!
//! Responses look like `{"data": [...], "meta": {"next_cursor": "p2"}}`.
//! The first page is served when no cursor is given; page `n` (1-based) is
//! addressed by cursor `p<n>`. Unknown cursors yield an empty final page.
//! Scripted faults are served, in order, before any regular response.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Instant;

use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    /// 429 with a `Retry-After` header in seconds.
    RateLimited { retry_after_secs: u64 },
    /// 503 with an empty body.
    Unavailable,
    /// 200 with a body that is not valid JSON.
    Malformed,
}

#[derive(Debug, Clone)]
pub struct LoggedRequest {
    pub target: String,
    pub authorization: Option<String>,
    pub at: Instant,
}

#[derive(Default)]
struct State {
    faults: VecDeque<Fault>,
    log: Vec<LoggedRequest>,
}

pub struct FixtureServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    state: Arc<Mutex<State>>,
    handle: Option<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn start(pages: Vec<Vec<Value>>) -> std::io::Result<Self> {
        Self::with_faults(pages, Vec::new())
    }

    pub fn with_faults(pages: Vec<Vec<Value>>, faults: Vec<Fault>) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let state = Arc::new(Mutex::new(State {
            faults: faults.into(),
            log: Vec::new(),
        }));
        let handle = {
            let stop = Arc::clone(&stop);
            let state = Arc::clone(&state);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    if let Ok(stream) = stream {
                        // A broken client connection only affects that request.
                        let _ = serve(stream, &pages, &state);
                    }
                }
            })
        };
        Ok(FixtureServer {
            addr,
            stop,
            state,
            handle: Some(handle),
        })
    }

    /// `n_pages` pages of `per_page` records `{"id": "r<k>", "text": ...}`,
    /// numbered from 1 across pages.
    pub fn uniform(n_pages: usize, per_page: usize) -> std::io::Result<Self> {
        Self::start(uniform_pages(n_pages, per_page))
    }

    pub fn url(&self) -> String {
        format!("http://{}/search", self.addr)
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.state.lock().unwrap().log.clone()
    }
}

pub fn uniform_pages(n_pages: usize, per_page: usize) -> Vec<Vec<Value>> {
    (0..n_pages)
        .map(|p| {
            (0..per_page)
                .map(|i| {
                    let k = p * per_page + i + 1;
                    json!({"id": format!("r{k}"), "text": format!("record {k} on page {}", p + 1)})
                })
                .collect()
        })
        .collect()
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, pages: &[Vec<Value>], state: &Mutex<State>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("authorization") {
                authorization = Some(value.trim().to_owned());
            }
        }
    }
    let target = request_line
        .split_whitespace()
        .nth(1)
        .unwrap_or("/")
        .to_owned();

    let fault = {
        let mut st = state.lock().unwrap();
        st.log.push(LoggedRequest {
            target: target.clone(),
            authorization,
            at: Instant::now(),
        });
        st.faults.pop_front()
    };

    let (status, extra_header, body) = match fault {
        Some(Fault::RateLimited { retry_after_secs }) => (
            "429 Too Many Requests",
            format!("Retry-After: {retry_after_secs}\r\n"),
            String::from("{\"error\":\"rate limited\"}"),
        ),
        Some(Fault::Unavailable) => ("503 Service Unavailable", String::new(), String::new()),
        Some(Fault::Malformed) => ("200 OK", String::new(), String::from("{\"data\": [ {\"id\": ")),
        None => ("200 OK", String::new(), page_body(pages, cursor_param(&target))),
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n{extra_header}Connection: close\r\n\r\n{body}",
        body.len()
    )?;
    out.flush()
}

fn cursor_param(target: &str) -> Option<String> {
    let query = target.split_once('?')?.1;
    query
        .split('&')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == "cursor")
        .map(|(_, v)| v.to_owned())
}

fn page_body(pages: &[Vec<Value>], cursor: Option<String>) -> String {
    let index = match cursor {
        None => Some(0),
        Some(c) => c
            .strip_prefix('p')
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(|n| n.checked_sub(1)),
    };
    let (records, next) = match index.and_then(|i| pages.get(i).map(|p| (i, p))) {
        Some((i, page)) => {
            let next = (i + 1 < pages.len()).then(|| format!("p{}", i + 2));
            (page.clone(), next)
        }
        None => (Vec::new(), None),
    };
    json!({"data": records, "meta": {"next_cursor": next}}).to_string()
}
