//! Stage 2: greedy selection on a blend of coverage gain and fairness.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Participant, Route, TaskSpec};
use crate::error::{Error, Result};
use crate::metrics::CoverageState;
use crate::policy::{HeuristicTieBreak, TieBreakPolicy, TieBreakRequest, TieBreakResponse, TieCandidate};

/// Selection counts per participant id, persisted across tasks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTable {
    counts: BTreeMap<String, u32>,
}

impl HistoryTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seeds the table from each participant's recorded history.
    pub fn from_participants<'a>(ps: impl IntoIterator<Item = &'a Participant>) -> Self {
        Self {
            counts: ps.into_iter().map(|p| (p.id.clone(), p.history_count)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> u32 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn record(&mut self, ids: &[String]) {
        for id in ids {
            *self.counts.entry(id.clone()).or_insert(0) += 1;
        }
    }

    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }
}

/// One selection step: the winner and its raw gain, fairness and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub id: String,
    pub gain: f64,
    pub fairness: f64,
    pub score: f64,
    /// Size of the tie set the winner came from.
    pub tied: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    pub selected: Vec<String>,
    pub remaining_budget: f64,
    pub steps: Vec<SelectionStep>,
}

/// A candidate entering selection with its stage-1 route.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub participant: &'a Participant,
    pub route: &'a Route,
}

/// Takes the first tied candidate in input order.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstListed;

impl TieBreakPolicy for FirstListed {
    fn tiebreak(&self, req: &TieBreakRequest, _spec: &TaskSpec) -> Result<TieBreakResponse> {
        req.candidates
            .first()
            .map(|c| TieBreakResponse { chosen: c.id.clone() })
            .ok_or(Error::NoCandidates)
    }
}

/// Min-max normalization; a constant vector maps to all ones.
pub fn min_max_normalize(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![1.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Greedy selection under the budget. Each step scores every affordable
/// candidate by J = β·Δφ̃ + (1−β)·F̃ with F = 1/(1+h), and picks the best;
/// candidates within `spec.tie_epsilon` of the best go to `tiebreak`. A
/// failing tie-break call falls back to the least-selected, smallest-id rule.
pub fn select_participants(
    candidates: &[Candidate<'_>],
    history: &HistoryTable,
    spec: &TaskSpec,
    tiebreak: &dyn TieBreakPolicy,
) -> Result<SelectionState> {
    let mut state = CoverageState::new(spec);
    let mut taken = vec![false; candidates.len()];
    let mut out = SelectionState {
        selected: Vec::new(),
        remaining_budget: spec.budget,
        steps: Vec::new(),
    };
    loop {
        let feasible: Vec<usize> = (0..candidates.len())
            .filter(|&i| !taken[i] && candidates[i].participant.cost <= out.remaining_budget)
            .collect();
        if feasible.is_empty() {
            break;
        }
        let gains = feasible
            .iter()
            .map(|&i| state.gain(candidates[i].route))
            .collect::<Result<Vec<f64>>>()?;
        let fairness: Vec<f64> = feasible
            .iter()
            .map(|&i| 1.0 / (1.0 + f64::from(history.get(&candidates[i].participant.id))))
            .collect();
        let (g, f) = (min_max_normalize(&gains), min_max_normalize(&fairness));
        let scores: Vec<f64> = (0..feasible.len())
            .map(|k| spec.beta * g[k] + (1.0 - spec.beta) * f[k])
            .collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..feasible.len())
            .filter(|&k| scores[k] >= best - spec.tie_epsilon)
            .collect();

        let pick = if ties.len() == 1 {
            ties[0]
        } else {
            let req = TieBreakRequest {
                candidates: ties
                    .iter()
                    .map(|&k| {
                        let p = candidates[feasible[k]].participant;
                        TieCandidate {
                            id: p.id.clone(),
                            profile: p.profile.clone(),
                            history_count: history.get(&p.id),
                        }
                    })
                    .collect(),
            };
            let chosen = tiebreak.tiebreak(&req, spec).or_else(|e| {
                log::warn!("tie-break failed ({e}); using the least-selected rule");
                HeuristicTieBreak.tiebreak(&req, spec)
            })?;
            ties.iter()
                .copied()
                .find(|&k| candidates[feasible[k]].participant.id == chosen.chosen)
                .unwrap_or(ties[0])
        };

        let i = feasible[pick];
        let c = candidates[i];
        state.add(c.route)?;
        taken[i] = true;
        out.remaining_budget = (out.remaining_budget - c.participant.cost).max(0.0);
        out.selected.push(c.participant.id.clone());
        out.steps.push(SelectionStep {
            id: c.participant.id.clone(),
            gain: gains[pick],
            fairness: fairness[pick],
            score: scores[pick],
            tied: ties.len(),
        });
    }
    Ok(out)
}
