//! Stage 3: pairwise negotiation over the most overlapping routes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{is_valid_route, Participant, Route, TaskSpec};
use crate::error::{Error, Result};
use crate::metrics::route_overlap;
use crate::policy::{FeedbackPolicy, FeedbackRequest, NegotiationParty, ProposalRequest, ProposePolicy};

/// One negotiation round between `u` and `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRow {
    pub u: String,
    pub v: String,
    pub round: u32,
    pub overlap_before: f64,
    /// Proposed routes; `None` when the proposer failed or made no change.
    pub proposal_u: Option<Route>,
    pub proposal_v: Option<Route>,
    pub incentive_u: String,
    pub incentive_v: String,
    pub accept_u: bool,
    pub accept_v: bool,
    pub feedback_u: String,
    pub feedback_v: String,
    pub committed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NegotiationState {
    pub routes: BTreeMap<String, Route>,
    /// Pairs that exhausted their rounds, as (smaller id, larger id).
    pub failed_pairs: BTreeSet<(String, String)>,
    pub transcript: Vec<TranscriptRow>,
}

impl NegotiationState {
    pub fn new(routes: BTreeMap<String, Route>) -> Self {
        Self {
            routes,
            ..Self::default()
        }
    }

    /// Highest-overlap pair not yet failed; ties go to the first pair in id
    /// order.
    pub fn max_overlap_pair(&self) -> Result<Option<(String, String, f64)>> {
        let ids: Vec<&String> = self.routes.keys().collect();
        let mut best: Option<(String, String, f64)> = None;
        for (a, &u) in ids.iter().enumerate() {
            for &v in &ids[a + 1..] {
                if self.failed_pairs.contains(&(u.clone(), v.clone())) {
                    continue;
                }
                let o = route_overlap(&self.routes[u], &self.routes[v])?;
                if best.as_ref().is_none_or(|b| o > b.2) {
                    best = Some((u.clone(), v.clone(), o));
                }
            }
        }
        Ok(best)
    }
}

/// Runs up to `spec.pair_attempts(n)` pair negotiations. Each picks the most
/// overlapping pair outside the failed set and stops once that overlap is
/// below `spec.overlap_threshold`. A proposal is committed only when both
/// sides accept and both routes are valid; a pair that fails all
/// `spec.max_negotiation_rounds` rounds joins the failed set.
pub fn negotiate(
    mut state: NegotiationState,
    participants: &[Participant],
    spec: &TaskSpec,
    propose: &dyn ProposePolicy,
    feedback: &dyn FeedbackPolicy,
) -> Result<NegotiationState> {
    let by_id: BTreeMap<&str, &Participant> = participants.iter().map(|p| (p.id.as_str(), p)).collect();
    let lookup = |id: &str| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::Invalid(format!("no participant record for {id}")))
    };
    let attempts = spec.pair_attempts(state.routes.len());
    for _ in 0..attempts {
        let Some((u, v, overlap)) = state.max_overlap_pair()? else {
            break;
        };
        if overlap < spec.overlap_threshold {
            break;
        }
        let (pu, pv) = (lookup(&u)?, lookup(&v)?);
        let mut memory_u: Vec<String> = Vec::new();
        let mut memory_v: Vec<String> = Vec::new();
        let mut success = false;
        for round in 1..=spec.max_negotiation_rounds {
            let (ru, rv) = (state.routes[&u].clone(), state.routes[&v].clone());
            let req = ProposalRequest {
                u: NegotiationParty {
                    participant: pu.clone(),
                    route: ru.clone(),
                    feedback: memory_u.clone(),
                },
                v: NegotiationParty {
                    participant: pv.clone(),
                    route: rv.clone(),
                    feedback: memory_v.clone(),
                },
                context_routes: state
                    .routes
                    .iter()
                    .filter(|(id, _)| **id != u && **id != v)
                    .map(|(_, r)| r.clone())
                    .collect(),
            };
            let mut row = TranscriptRow {
                u: u.clone(),
                v: v.clone(),
                round,
                overlap_before: overlap,
                proposal_u: None,
                proposal_v: None,
                incentive_u: String::new(),
                incentive_v: String::new(),
                accept_u: false,
                accept_v: false,
                feedback_u: String::new(),
                feedback_v: String::new(),
                committed: false,
            };
            match propose.propose(&req, spec) {
                Err(e) => {
                    row.feedback_u = format!("no proposal: {e}");
                    row.feedback_v = row.feedback_u.clone();
                }
                Ok(p) if p.route_u == ru && p.route_v == rv => {
                    row.feedback_u = "no proposal: routes unchanged".into();
                    row.feedback_v = row.feedback_u.clone();
                }
                Ok(p) => {
                    let ask =
                        |who: &Participant, proposed: &Route, original: &Route, incentive: &str, mem: &[String]| {
                            let req = FeedbackRequest {
                                participant: who.clone(),
                                proposed: proposed.clone(),
                                original: original.clone(),
                                incentive: incentive.to_string(),
                                feedback_memory: mem.to_vec(),
                            };
                            match feedback.feedback(&req, spec) {
                                Ok(r) => (r.agreement, r.feedback),
                                Err(e) => (false, format!("no answer: {e}")),
                            }
                        };
                    (row.accept_u, row.feedback_u) = ask(pu, &p.route_u, &ru, &p.incentive_u, &memory_u);
                    (row.accept_v, row.feedback_v) = ask(pv, &p.route_v, &rv, &p.incentive_v, &memory_v);
                    let valid = is_valid_route(&p.route_u, pu.schedule(), &spec.grid)
                        && is_valid_route(&p.route_v, pv.schedule(), &spec.grid);
                    row.committed = row.accept_u && row.accept_v && valid;
                    row.incentive_u = p.incentive_u;
                    row.incentive_v = p.incentive_v;
                    if row.committed {
                        state.routes.insert(u.clone(), p.route_u.clone());
                        state.routes.insert(v.clone(), p.route_v.clone());
                    }
                    row.proposal_u = Some(p.route_u);
                    row.proposal_v = Some(p.route_v);
                }
            }
            let committed = row.committed;
            if !committed {
                let verdict = |a: bool| if a { "accepted" } else { "rejected" };
                memory_u.push(format!("round {round}: {}: {}", verdict(row.accept_u), row.feedback_u));
                memory_v.push(format!("round {round}: {}: {}", verdict(row.accept_v), row.feedback_v));
            }
            state.transcript.push(row);
            if committed {
                success = true;
                break;
            }
        }
        if !success {
            state.failed_pairs.insert((u, v));
        }
    }
    Ok(state)
}
