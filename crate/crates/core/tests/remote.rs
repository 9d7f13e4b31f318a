mod common;

use std::net::TcpListener;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use common::{MockServer, Reply};
use sense_forge::policy::{
    RemoteClient, RemoteConfig, RemotePolicy, RenderedPrompt, TieBreakPolicy, TieBreakRequest, TieCandidate,
};
use sense_forge::{GridMap, ParticipantProfile, TaskSpec};

fn config(url: String) -> RemoteConfig {
    let mut c = RemoteConfig::new(url);
    c.timeout = Duration::from_secs(5);
    c
}

fn prompt() -> RenderedPrompt {
    RenderedPrompt {
        system: "sys".into(),
        user: "hello".into(),
    }
}

fn tie_request() -> TieBreakRequest {
    TieBreakRequest {
        candidates: ["w0001", "w0002"]
            .iter()
            .map(|id| TieCandidate {
                id: id.to_string(),
                profile: ParticipantProfile::neutral(40),
                history_count: 0,
            })
            .collect(),
    }
}

fn spec() -> TaskSpec {
    TaskSpec::new(GridMap::uniform(2, 2).unwrap(), 2, 15, 1.0).unwrap()
}

#[test]
fn every_fixture_replays() {
    for (name, f) in common::wire::load_fixtures() {
        if let Err(e) = common::wire::check(&f) {
            panic!("{name}: {e}");
        }
    }
}

#[test]
fn bad_reply_is_retried() {
    let server = MockServer::start(|n, _| {
        if n == 0 {
            Reply::chat("let me think about it")
        } else {
            Reply::chat(r#"{"selected_ids": ["w0002"]}"#)
        }
    });
    let policy = RemotePolicy::new(RemoteClient::new(config(server.url())).unwrap());
    let r = policy.tiebreak(&tie_request(), &spec()).unwrap();
    assert_eq!(r.chosen, "w0002");
    assert_eq!(server.requests().len(), 2);
}

#[test]
fn retries_are_bounded() {
    let server = MockServer::start(|_, _| Reply::chat(r#"{"selected_ids": ["nobody"]}"#));
    let mut c = config(server.url());
    c.max_retries = 2;
    let policy = RemotePolicy::new(RemoteClient::new(c).unwrap());
    let err = policy.tiebreak(&tie_request(), &spec()).unwrap_err();
    assert_eq!(err.code(), "contract_violation");
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn closed_port_is_unavailable() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let client = RemoteClient::new(config(format!("http://127.0.0.1:{port}/v1/chat/completions"))).unwrap();
    assert_eq!(client.complete(&prompt()).unwrap_err().code(), "endpoint_unavailable");
}

#[test]
fn slow_endpoint_times_out() {
    let server = MockServer::start(|_, _| Reply {
        delay: Duration::from_millis(800),
        ..Reply::chat("late")
    });
    let mut c = config(server.url());
    c.timeout = Duration::from_millis(150);
    let client = RemoteClient::new(c).unwrap();
    assert_eq!(client.complete(&prompt()).unwrap_err().code(), "endpoint_unavailable");
}

#[test]
fn server_error_is_not_retried() {
    let server = MockServer::start(|_, _| Reply {
        status: 500,
        ..Reply::ok("{}")
    });
    let policy = RemotePolicy::new(RemoteClient::new(config(server.url())).unwrap());
    assert_eq!(
        policy.tiebreak(&tie_request(), &spec()).unwrap_err().code(),
        "endpoint_unavailable"
    );
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn in_flight_calls_are_capped() {
    let server = MockServer::start(|_, _| Reply {
        delay: Duration::from_millis(60),
        ..Reply::chat("ok")
    });
    let mut c = config(server.url());
    c.concurrency = 2;
    let client = Arc::new(RemoteClient::new(c).unwrap());
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let client = client.clone();
            thread::spawn(move || client.complete(&prompt()).unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), "ok");
    }
    assert_eq!(server.requests().len(), 8);
    assert!(server.peak_concurrency() <= 2, "peak {}", server.peak_concurrency());
}

#[test]
fn request_carries_model_and_optional_fields() {
    let server = MockServer::start(|_, _| Reply::chat("fine"));
    let mut c = config(server.url());
    c.model = "local-model".into();
    c.temperature = Some(0.2);
    let client = RemoteClient::new(c).unwrap();
    assert_eq!(client.complete(&prompt()).unwrap(), "fine");
    let req = &server.requests()[0];
    let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
    assert_eq!(body["model"], "local-model");
    assert_eq!(body["temperature"], 0.2);
    assert_eq!(body["messages"][1]["content"], "hello");
    assert!(req.header("authorization").is_none());

    let plain = MockServer::start(|_, _| Reply::chat("fine"));
    RemoteClient::new(config(plain.url()))
        .unwrap()
        .complete(&prompt())
        .unwrap();
    let body: serde_json::Value = serde_json::from_str(&plain.requests()[0].body).unwrap();
    assert!(body.get("temperature").is_none());
}

#[test]
fn distinct_calls_get_distinct_correlation_ids() {
    let server = MockServer::start(|_, _| Reply::chat("x"));
    let client = RemoteClient::new(config(server.url())).unwrap();
    client.complete(&prompt()).unwrap();
    client.complete(&prompt()).unwrap();
    let ids: Vec<String> = server
        .requests()
        .iter()
        .map(|r| r.header("x-correlation-id").unwrap().to_string())
        .collect();
    assert_ne!(ids[0], ids[1]);
}
