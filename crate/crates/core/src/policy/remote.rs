//! Chat-completion backend for all four decision points.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::extract::{parse_feedback, parse_proposal, parse_refine, parse_tiebreak};
use super::prompt::{feedback_prompt, propose_prompt, refine_prompt, tiebreak_prompt};
use super::{
    FeedbackPolicy, FeedbackRequest, FeedbackResponse, ProposalRequest, ProposalResponse, ProposePolicy, RefinePolicy,
    RefineRequest, RefineResponse, RenderedPrompt, TieBreakPolicy, TieBreakRequest, TieBreakResponse,
};
use crate::domain::TaskSpec;
use crate::error::{Error, Result};

pub const CORRELATION_HEADER: &str = "X-Correlation-Id";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub url: String,
    pub key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    /// Maximum calls in flight at once.
    pub concurrency: usize,
    /// Extra attempts after an unparseable or contract-violating reply.
    pub max_retries: u32,
    /// Sent only when set.
    pub temperature: Option<f64>,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            key: None,
            model: "gpt-4o".into(),
            timeout: Duration::from_secs(60),
            concurrency: 4,
            max_retries: 2,
            temperature: None,
        }
    }

    /// Reads SF_LLM_URL (required), SF_LLM_KEY, SF_LLM_MODEL,
    /// SF_LLM_TIMEOUT_MS, SF_LLM_CONCURRENCY, SF_LLM_MAX_RETRIES and
    /// SF_LLM_TEMPERATURE.
    pub fn from_env() -> Result<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let url = get("SF_LLM_URL")
            .filter(|u| !u.trim().is_empty())
            .ok_or_else(|| Error::Invalid("SF_LLM_URL is not set".into()))?;
        let mut c = Self::new(url);
        c.key = get("SF_LLM_KEY").filter(|k| !k.is_empty());
        if let Some(m) = get("SF_LLM_MODEL") {
            c.model = m;
        }
        fn number<T: std::str::FromStr>(name: &str, v: Option<String>) -> Result<Option<T>> {
            v.map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|_| Error::Invalid(format!("{name}: cannot parse `{s}`")))
            })
            .transpose()
        }
        if let Some(ms) = number::<u64>("SF_LLM_TIMEOUT_MS", get("SF_LLM_TIMEOUT_MS"))? {
            c.timeout = Duration::from_millis(ms);
        }
        if let Some(n) = number::<usize>("SF_LLM_CONCURRENCY", get("SF_LLM_CONCURRENCY"))? {
            c.concurrency = n;
        }
        if let Some(n) = number::<u32>("SF_LLM_MAX_RETRIES", get("SF_LLM_MAX_RETRIES"))? {
            c.max_retries = n;
        }
        c.temperature = number::<f64>("SF_LLM_TEMPERATURE", get("SF_LLM_TEMPERATURE"))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.concurrency == 0 {
            return Err(Error::Invalid("concurrency must be at least 1".into()));
        }
        if self.timeout.is_zero() {
            return Err(Error::Invalid("timeout must be positive".into()));
        }
        Ok(())
    }
}

/// Counting semaphore bounding in-flight calls.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Blocking chat-completion client, safe to share across threads.
pub struct RemoteClient {
    config: RemoteConfig,
    agent: ureq::Agent,
    slots: Slots,
    next_id: AtomicU64,
}

impl std::fmt::Debug for RemoteClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteClient")
            .field("url", &self.config.url)
            .field("model", &self.config.model)
            .finish_non_exhaustive()
    }
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let slots = Slots {
            free: Mutex::new(config.concurrency),
            cv: Condvar::new(),
        };
        Ok(Self {
            config,
            agent,
            slots,
            next_id: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn correlation_id(&self) -> String {
        format!(
            "sf-{}-{}",
            std::process::id(),
            self.next_id.fetch_add(1, Ordering::Relaxed)
        )
    }

    /// Sends one chat-completion call and returns the assistant text.
    /// A reply that echoes a different correlation id is rejected.
    pub fn complete(&self, prompt: &RenderedPrompt) -> Result<String> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        let id = self.correlation_id();
        let _slot = self.slots.acquire();
        let mut req = self
            .agent
            .post(&self.config.url)
            .header("Content-Type", "application/json")
            .header(CORRELATION_HEADER, &id);
        if let Some(key) = &self.config.key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        log::debug!("chat call {id} to {}", self.config.url);
        let mut resp = req
            .send(body.to_string())
            .map_err(|e| Error::EndpointUnavailable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::EndpointUnavailable(format!("HTTP {status}")));
        }
        if let Some(echo) = resp.headers().get(CORRELATION_HEADER) {
            if echo.to_str().ok() != Some(id.as_str()) {
                return Err(Error::MalformedResponse(format!(
                    "reply for another request (expected {id})"
                )));
            }
        }
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::EndpointUnavailable(e.to_string()))?;
        Ok(message_content(&text))
    }

    /// Calls until `parse` accepts the reply or the retries run out. Network
    /// failures are returned at once.
    fn call<T>(&self, prompt: &RenderedPrompt, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            let text = self.complete(prompt)?;
            match parse(&text) {
                Ok(v) => return Ok(v),
                Err(e) if attempt < self.config.max_retries => {
                    log::warn!("retrying after bad reply: {e}");
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// `choices[0].message.content` of a chat-completion body, or the body itself
/// when it has no such field.
fn message_content(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| {
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
        })
        .unwrap_or_else(|| body.to_string())
}

#[derive(Debug)]
pub struct RemotePolicy {
    client: RemoteClient,
}

impl RemotePolicy {
    pub fn new(client: RemoteClient) -> Self {
        Self { client }
    }
}

impl RefinePolicy for RemotePolicy {
    fn refine(&self, req: &RefineRequest, spec: &TaskSpec) -> Result<RefineResponse> {
        self.client.call(&refine_prompt(req, spec)?, parse_refine)
    }
}

impl TieBreakPolicy for RemotePolicy {
    fn tiebreak(&self, req: &TieBreakRequest, _spec: &TaskSpec) -> Result<TieBreakResponse> {
        if req.candidates.is_empty() {
            return Err(Error::NoCandidates);
        }
        let ids: Vec<String> = req.candidates.iter().map(|c| c.id.clone()).collect();
        let chosen = self.client.call(&tiebreak_prompt(req)?, |t| parse_tiebreak(t, &ids))?;
        Ok(TieBreakResponse { chosen })
    }
}

impl ProposePolicy for RemotePolicy {
    fn propose(&self, req: &ProposalRequest, spec: &TaskSpec) -> Result<ProposalResponse> {
        let (u, v) = (&req.u.participant.id, &req.v.participant.id);
        self.client
            .call(&propose_prompt(req, spec)?, |t| parse_proposal(t, u, v))
    }
}

impl FeedbackPolicy for RemotePolicy {
    fn feedback(&self, req: &FeedbackRequest, spec: &TaskSpec) -> Result<FeedbackResponse> {
        self.client.call(&feedback_prompt(req, spec)?, parse_feedback)
    }
}
