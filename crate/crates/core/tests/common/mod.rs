//! Test helpers shared by integration targets: a minimal HTTP/1.1
//! chat-completion endpoint and small instance builders.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use sense_forge::{Coord, Participant, ParticipantProfile, Schedule};

#[derive(Debug, Clone)]
pub struct Request {
    /// Header names lower-cased.
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        let name = name.to_ascii_lowercase();
        self.headers.iter().find(|(k, _)| *k == name).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correlation {
    Echo,
    Mismatch,
    Omit,
}

#[derive(Debug, Clone)]
pub struct Reply {
    pub status: u16,
    pub body: String,
    pub correlation: Correlation,
    pub delay: Duration,
}

impl Reply {
    pub fn ok(body: impl Into<String>) -> Self {
        Self {
            status: 200,
            body: body.into(),
            correlation: Correlation::Echo,
            delay: Duration::ZERO,
        }
    }

    /// A chat-completion body whose assistant message is `content`.
    pub fn chat(content: &str) -> Self {
        Self::ok(chat_body(content))
    }
}

pub fn chat_body(content: &str) -> String {
    serde_json::json!({
        "id": "chatcmpl-test",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
    })
    .to_string()
}

type Handler = dyn Fn(usize, &Request) -> Reply + Send + Sync;

pub struct MockServer {
    addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    requests: Arc<Mutex<Vec<Request>>>,
    connections: Arc<AtomicUsize>,
    peak: Arc<AtomicUsize>,
    accept: Option<thread::JoinHandle<()>>,
}

impl MockServer {
    /// Serves every request with `handler(n, request)`, where `n` counts
    /// requests from 0.
    pub fn start(handler: impl Fn(usize, &Request) -> Reply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let addr = listener.local_addr().unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let connections = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let active = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let accept = {
            let (stop, requests, connections, peak) =
                (stop.clone(), requests.clone(), connections.clone(), peak.clone());
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    connections.fetch_add(1, Ordering::SeqCst);
                    let (requests, handler, active, peak) =
                        (requests.clone(), handler.clone(), active.clone(), peak.clone());
                    thread::spawn(move || serve(stream, &requests, handler.as_ref(), &active, &peak));
                }
            })
        };
        Self {
            addr,
            stop,
            requests,
            connections,
            peak,
            accept: Some(accept),
        }
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    pub fn requests(&self) -> Vec<Request> {
        self.requests.lock().unwrap().clone()
    }

    pub fn connections(&self) -> usize {
        self.connections.load(Ordering::SeqCst)
    }

    /// Largest number of requests handled at the same time.
    pub fn peak_concurrency(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn read_request(stream: &TcpStream) -> Option<Request> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    if line.trim().is_empty() {
        return None;
    }
    let mut headers = Vec::new();
    loop {
        line.clear();
        reader.read_line(&mut line).ok()?;
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        let (k, v) = l.split_once(':')?;
        headers.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    let get = |k: &str| headers.iter().find(|(n, _)| n == k).map(|(_, v)| v.clone());
    let mut body = Vec::new();
    if let Some(n) = get("content-length").and_then(|v| v.parse::<usize>().ok()) {
        body.resize(n, 0);
        reader.read_exact(&mut body).ok()?;
    } else if get("transfer-encoding").is_some_and(|v| v.eq_ignore_ascii_case("chunked")) {
        loop {
            line.clear();
            reader.read_line(&mut line).ok()?;
            let size = usize::from_str_radix(line.trim(), 16).ok()?;
            let mut chunk = vec![0; size + 2];
            reader.read_exact(&mut chunk).ok()?;
            if size == 0 {
                break;
            }
            body.extend_from_slice(&chunk[..size]);
        }
    }
    Some(Request {
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    })
}

fn serve(
    mut stream: TcpStream,
    requests: &Mutex<Vec<Request>>,
    handler: &Handler,
    active: &AtomicUsize,
    peak: &AtomicUsize,
) {
    let Some(req) = read_request(&stream) else { return };
    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
    peak.fetch_max(now, Ordering::SeqCst);
    let n = {
        let mut all = requests.lock().unwrap();
        all.push(req.clone());
        all.len() - 1
    };
    let reply = handler(n, &req);
    thread::sleep(reply.delay);
    let mut head = format!(
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n",
        reply.status,
        if reply.status < 400 { "OK" } else { "Error" },
        reply.body.len()
    );
    let id = req.header("x-correlation-id").unwrap_or_default();
    match reply.correlation {
        Correlation::Echo => head.push_str(&format!("X-Correlation-Id: {id}\r\n")),
        Correlation::Mismatch => head.push_str(&format!("X-Correlation-Id: {id}-other\r\n")),
        Correlation::Omit => {}
    }
    head.push_str("\r\n");
    active.fetch_sub(1, Ordering::SeqCst);
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(reply.body.as_bytes());
    let _ = stream.flush();
}

pub fn participant(id: &str, o: (u32, u32), d: (u32, u32), depart: u32, arrive: u32, speed: u32) -> Participant {
    let s = Schedule::new(Coord::new(o.0, o.1), Coord::new(d.0, d.1), depart, arrive, speed).unwrap();
    Participant::new(id, s, 1.0, [1.0 / 6.0; 6], 0, ParticipantProfile::neutral(30)).unwrap()
}

pub mod wire {
    //! Replays recorded endpoint replies against the remote policy.

    use std::path::{Path, PathBuf};
    use std::time::Duration;

    use serde::Deserialize;
    use serde_json::{json, Value};

    use super::{participant, Correlation, MockServer, Reply};
    use sense_forge::policy::{
        FeedbackPolicy, FeedbackRequest, NegotiationParty, ProposalRequest, ProposePolicy, RefinePolicy, RefineRequest,
        RemoteClient, RemoteConfig, RemotePolicy, TieBreakPolicy, TieBreakRequest, TieCandidate,
    };
    use sense_forge::routing::baseline_route;
    use sense_forge::{GridMap, ParticipantProfile, Route, TaskSpec};

    #[derive(Debug, Deserialize)]
    pub struct Fixture {
        pub kind: String,
        pub status: u16,
        pub correlation: String,
        pub content: Option<String>,
        pub raw_body: Option<String>,
        pub expect: Option<Value>,
        pub expect_error: Option<String>,
    }

    pub fn fixture_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/remote")
    }

    pub fn load_fixtures() -> Vec<(String, Fixture)> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(fixture_dir())
            .expect("fixture directory")
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths
            .into_iter()
            .map(|p| {
                let name = p.file_stem().unwrap().to_string_lossy().into_owned();
                let f: Fixture = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
                (name, f)
            })
            .collect()
    }

    fn points(r: &Route) -> Value {
        Value::Array(r.points.iter().map(|p| json!([p.x, p.y, p.t])).collect())
    }

    fn spec() -> TaskSpec {
        TaskSpec::new(GridMap::uniform(4, 4).unwrap(), 4, 15, 10.0).unwrap()
    }

    /// Sends the fixture's request kind to a server replaying its reply and
    /// returns the response summarized as JSON, or the error code.
    fn call(kind: &str, policy: &RemotePolicy) -> Result<Value, String> {
        let spec = spec();
        let u = participant("w0001", (0, 0), (2, 0), 0, 4, 1);
        let v = participant("w0002", (3, 3), (3, 3), 0, 4, 1);
        let ru = baseline_route(u.schedule(), &spec).unwrap().route;
        let rv = baseline_route(v.schedule(), &spec).unwrap().route;
        let code = |e: sense_forge::Error| e.code().to_string();
        match kind {
            "refine" => {
                let req = RefineRequest {
                    participant: u.clone(),
                    initial_route: ru,
                    residual_steps: 2,
                    instructions: String::new(),
                };
                let r = policy.refine(&req, &spec).map_err(code)?;
                Ok(json!({"final_path": points(&r.final_path), "explanation": r.explanation}))
            }
            "tiebreak" => {
                let candidates = ["w0001", "w0002", "w0003"]
                    .iter()
                    .enumerate()
                    .map(|(i, id)| TieCandidate {
                        id: id.to_string(),
                        profile: ParticipantProfile::neutral(25 + 10 * i as u32),
                        history_count: i as u32,
                    })
                    .collect();
                let r = policy.tiebreak(&TieBreakRequest { candidates }, &spec).map_err(code)?;
                Ok(json!({"chosen": r.chosen}))
            }
            "propose" => {
                let req = ProposalRequest {
                    u: NegotiationParty {
                        participant: u,
                        route: ru,
                        feedback: vec![],
                    },
                    v: NegotiationParty {
                        participant: v,
                        route: rv,
                        feedback: vec!["round 1: rejected: too far from home".into()],
                    },
                    context_routes: vec![],
                };
                let r = policy.propose(&req, &spec).map_err(code)?;
                Ok(json!({
                    "route_u": points(&r.route_u),
                    "route_v": points(&r.route_v),
                    "incentive_u": r.incentive_u,
                    "incentive_v": r.incentive_v,
                }))
            }
            "feedback" => {
                let req = FeedbackRequest {
                    participant: u,
                    proposed: ru.clone(),
                    original: ru,
                    incentive: "bonus 1 credit".into(),
                    feedback_memory: vec![],
                };
                let r = policy.feedback(&req, &spec).map_err(code)?;
                Ok(json!({"agreement": r.agreement, "feedback": r.feedback}))
            }
            other => panic!("unknown fixture kind {other}"),
        }
    }

    /// Runs one fixture; `Err` describes the mismatch.
    pub fn check(f: &Fixture) -> Result<(), String> {
        let reply = Reply {
            status: f.status,
            body: match (&f.content, &f.raw_body) {
                (Some(c), _) => super::chat_body(c),
                (None, Some(b)) => b.clone(),
                (None, None) => return Err("fixture has neither content nor raw_body".into()),
            },
            correlation: match f.correlation.as_str() {
                "echo" => Correlation::Echo,
                "mismatch" => Correlation::Mismatch,
                _ => Correlation::Omit,
            },
            delay: Duration::ZERO,
        };
        let server = MockServer::start(move |_, _| reply.clone());
        let mut config = RemoteConfig::new(server.url());
        config.key = Some("test-key".into());
        config.max_retries = 0;
        config.timeout = Duration::from_secs(5);
        let policy = RemotePolicy::new(RemoteClient::new(config).map_err(|e| e.to_string())?);
        let got = call(&f.kind, &policy);

        let reqs = server.requests();
        if reqs.len() != 1 {
            return Err(format!("expected one request, saw {}", reqs.len()));
        }
        let req = &reqs[0];
        if req.header("authorization") != Some("Bearer test-key") {
            return Err("missing bearer token".into());
        }
        if req.header("x-correlation-id").is_none_or(str::is_empty) {
            return Err("missing correlation id".into());
        }
        let body: Value = serde_json::from_str(&req.body).map_err(|e| format!("request body: {e}"))?;
        let roles: Vec<&str> = body["messages"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|m| m["role"].as_str())
            .collect();
        if body["model"].as_str().is_none() || roles != ["system", "user"] {
            return Err(format!("unexpected request body {body}"));
        }

        match (&f.expect, &f.expect_error, got) {
            (Some(want), None, Ok(v)) if *want == v => Ok(()),
            (None, Some(want), Err(code)) if *want == code => Ok(()),
            (want, want_err, got) => Err(format!("expected {want:?} / {want_err:?}, got {got:?}")),
        }
    }
}
