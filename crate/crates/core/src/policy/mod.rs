//! Decision points that can be served by a deterministic heuristic or a
//! remote chat-completion endpoint.
//!
//! Policies propose; callers validate. No response is trusted to produce a
//! feasible route: the pipeline checks every route before accepting it.

mod extract;
mod heuristic;
mod prompt;
mod remote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Participant, ParticipantProfile, Route, TaskSpec};
use crate::error::Result;

pub use extract::{extract_json_object, parse_feedback, parse_proposal, parse_refine, parse_tiebreak, repair_json};
pub use heuristic::{
    route_utility, HeuristicFeedback, HeuristicPropose, HeuristicRefine, HeuristicTieBreak, DEFAULT_FEEDBACK_TOLERANCE,
};
pub use prompt::{render, PromptKind, RenderedPrompt};
pub use remote::{RemoteClient, RemoteConfig, RemotePolicy, CORRELATION_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineRequest {
    pub participant: Participant,
    pub initial_route: Route,
    pub residual_steps: u32,
    /// Free-text coordinator instructions.
    pub instructions: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResponse {
    pub final_path: Route,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieCandidate {
    pub id: String,
    pub profile: ParticipantProfile,
    pub history_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieBreakRequest {
    pub candidates: Vec<TieCandidate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieBreakResponse {
    pub chosen: String,
}

/// One side of a negotiation pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationParty {
    pub participant: Participant,
    pub route: Route,
    /// Feedback accumulated over earlier rounds, oldest first.
    pub feedback: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRequest {
    pub u: NegotiationParty,
    pub v: NegotiationParty,
    /// Routes of the other selected participants, so a proposal can avoid
    /// shifting overlap onto them.
    pub context_routes: Vec<Route>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalResponse {
    pub route_u: Route,
    pub route_v: Route,
    pub incentive_u: String,
    pub incentive_v: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub participant: Participant,
    pub proposed: Route,
    pub original: Route,
    pub incentive: String,
    pub feedback_memory: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub agreement: bool,
    pub feedback: String,
}

pub trait RefinePolicy: Send + Sync {
    fn refine(&self, req: &RefineRequest, spec: &TaskSpec) -> Result<RefineResponse>;
}

pub trait TieBreakPolicy: Send + Sync {
    fn tiebreak(&self, req: &TieBreakRequest, spec: &TaskSpec) -> Result<TieBreakResponse>;
}

pub trait ProposePolicy: Send + Sync {
    fn propose(&self, req: &ProposalRequest, spec: &TaskSpec) -> Result<ProposalResponse>;
}

pub trait FeedbackPolicy: Send + Sync {
    fn feedback(&self, req: &FeedbackRequest, spec: &TaskSpec) -> Result<FeedbackResponse>;
}

/// One backend per decision point; backends may be mixed freely.
#[derive(Clone)]
pub struct Policies {
    pub refine: Arc<dyn RefinePolicy>,
    pub tiebreak: Arc<dyn TieBreakPolicy>,
    pub propose: Arc<dyn ProposePolicy>,
    pub feedback: Arc<dyn FeedbackPolicy>,
}

impl Policies {
    pub fn heuristic() -> Self {
        Self {
            refine: Arc::new(HeuristicRefine),
            tiebreak: Arc::new(HeuristicTieBreak),
            propose: Arc::new(HeuristicPropose),
            feedback: Arc::new(HeuristicFeedback::default()),
        }
    }

    pub fn remote(client: RemoteClient) -> Self {
        let p = Arc::new(RemotePolicy::new(client));
        Self {
            refine: p.clone(),
            tiebreak: p.clone(),
            propose: p.clone(),
            feedback: p,
        }
    }
}

impl std::fmt::Debug for Policies {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Policies")
    }
}
