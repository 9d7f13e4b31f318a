//! Deterministic stand-ins for every decision point. Pure functions of
//! (request, spec): identical inputs give identical responses.

use std::collections::BTreeSet;

use super::{
    FeedbackPolicy, FeedbackRequest, FeedbackResponse, NegotiationParty, ProposalRequest, ProposalResponse,
    ProposePolicy, RefinePolicy, RefineRequest, RefineResponse, TieBreakPolicy, TieBreakRequest, TieBreakResponse,
};
use crate::baselines::reachable_cells;
use crate::domain::{validate_route, Coord, CoverageTensor, Participant, Route, TaskSpec};
use crate::error::{Error, Result};
use crate::metrics::{entropy, pairwise_overlap_stats, path_satisfaction, route_overlap, CoverageState};
use crate::routing::{insert_detour, reroute_segment_with};

/// PSS drop a participant tolerates before rejecting a proposal.
pub const DEFAULT_FEEDBACK_TOLERANCE: f64 = 0.05;

const MIN_GAIN: f64 = 1e-12;

/// Alg. 1 utility of a single route: λ·φ({r}) + (1−λ)·PSS(r).
pub fn route_utility(route: &Route, p: &Participant, spec: &TaskSpec) -> Result<f64> {
    let phi = CoverageState::from_routes(spec, [route])?.phi();
    let pss = path_satisfaction(route, p, &spec.grid, spec.mu);
    Ok(spec.lambda * phi + (1.0 - spec.lambda) * pss)
}

/// Spends residual steps on the detours that most improve the route utility.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicRefine;

impl RefinePolicy for HeuristicRefine {
    fn refine(&self, req: &RefineRequest, spec: &TaskSpec) -> Result<RefineResponse> {
        let p = &req.participant;
        let mut route = req.initial_route.clone();
        let mut current = route_utility(&route, p, spec)?;
        let cells = reachable_cells(p, spec);
        let mut chosen: Vec<Coord> = Vec::new();
        for _ in 0..req.residual_steps {
            let mut best: Option<(f64, Coord, Route)> = None;
            for &c in &cells {
                if route.visits(c) {
                    continue;
                }
                let Some(cand) = insert_detour(&route, c, p.schedule(), &spec.grid)? else {
                    continue;
                };
                let u = route_utility(&cand, p, spec)?;
                if u > current + MIN_GAIN && best.as_ref().is_none_or(|b| u > b.0) {
                    best = Some((u, c, cand));
                }
            }
            let Some((u, c, cand)) = best else { break };
            current = u;
            route = cand;
            chosen.push(c);
        }
        let explanation = if chosen.is_empty() {
            "no detour improves the route".to_string()
        } else {
            let list: Vec<String> = chosen.iter().map(|c| c.to_string()).collect();
            format!("added waypoints {}", list.join(", "))
        };
        Ok(RefineResponse {
            final_path: route,
            explanation,
        })
    }
}

/// Least-selected candidate first; ties by smallest id.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicTieBreak;

impl TieBreakPolicy for HeuristicTieBreak {
    fn tiebreak(&self, req: &TieBreakRequest, _spec: &TaskSpec) -> Result<TieBreakResponse> {
        req.candidates
            .iter()
            .min_by(|a, b| a.history_count.cmp(&b.history_count).then_with(|| a.id.cmp(&b.id)))
            .map(|c| TieBreakResponse { chosen: c.id.clone() })
            .ok_or(Error::NoCandidates)
    }
}

/// Accepts iff the proposal is feasible and costs at most `tolerance` PSS.
#[derive(Debug, Clone, Copy)]
pub struct HeuristicFeedback {
    pub tolerance: f64,
}

impl Default for HeuristicFeedback {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_FEEDBACK_TOLERANCE,
        }
    }
}

impl FeedbackPolicy for HeuristicFeedback {
    fn feedback(&self, req: &FeedbackRequest, spec: &TaskSpec) -> Result<FeedbackResponse> {
        let p = &req.participant;
        let verdict = match validate_route(&req.proposed, p.schedule(), &spec.grid) {
            Err(e) => Some(format!("infeasible: {}", e.code())),
            Ok(v) if !v.is_valid() => {
                let codes: Vec<&str> = v.violations.iter().map(|x| x.kind.code()).collect();
                Some(format!("infeasible: {}", codes.join(", ")))
            }
            Ok(_) => None,
        };
        if let Some(feedback) = verdict {
            return Ok(FeedbackResponse {
                agreement: false,
                feedback,
            });
        }
        let new = path_satisfaction(&req.proposed, p, &spec.grid, spec.mu);
        let old = path_satisfaction(&req.original, p, &spec.grid, spec.mu);
        let delta = new - old;
        Ok(if new >= old - self.tolerance {
            FeedbackResponse {
                agreement: true,
                feedback: format!("satisfaction change {delta:+.3} is acceptable"),
            }
        } else {
            FeedbackResponse {
                agreement: false,
                feedback: format!(
                    "satisfaction drop {:.3} exceeds tolerance {:.3}",
                    -delta, self.tolerance
                ),
            }
        })
    }
}

/// Reroutes one side of an overlapping pair around the shared cells.
///
/// The side with the smaller preference stake in the shared cells moves
/// first. A candidate is only proposed if it strictly lowers the pair's
/// overlap without raising mean or max overlap across all selected routes
/// and without lowering coverage entropy; otherwise the originals are echoed.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicPropose;

/// Preference weights tried in order; later ones follow a rejection.
const PREFERENCE_WEIGHTS: [f64; 3] = [0.5, 2.0, 8.0];

fn rejections(party: &NegotiationParty) -> usize {
    party.feedback.iter().filter(|f| f.contains("rejected")).count()
}

fn stake(p: &Participant, cells: &BTreeSet<Coord>, spec: &TaskSpec) -> f64 {
    cells.iter().map(|&c| p.preference[spec.grid.category(c).index()]).sum()
}

fn entropy_increment(c: f64) -> f64 {
    let n = c + 1.0;
    n * n.ln() - if c > 0.0 { c * c.ln() } else { 0.0 }
}

struct Pair<'a> {
    req: &'a ProposalRequest,
    spec: &'a TaskSpec,
    shared: BTreeSet<Coord>,
}

impl Pair<'_> {
    fn all_routes<'r>(&'r self, u: &'r Route, v: &'r Route) -> Vec<&'r Route> {
        let mut all: Vec<&Route> = self.req.context_routes.iter().collect();
        all.push(u);
        all.push(v);
        all
    }

    fn union_entropy(&self, u: &Route, v: &Route) -> Result<f64> {
        let g = &self.spec.grid;
        let t = CoverageTensor::from_routes(g.width(), g.height(), self.spec.horizon, self.all_routes(u, v))?;
        entropy(&t, self.spec.log_base)
    }

    /// Candidate reroute of `owner` away from the shared cells.
    fn reroute(&self, owner: &NegotiationParty, other: &NegotiationParty, weight: f64) -> Result<Option<Route>> {
        let spec = self.spec;
        let p = &owner.participant;
        let forbidden: BTreeSet<Coord> = self
            .shared
            .iter()
            .copied()
            .filter(|&c| c != p.origin() && c != p.destination())
            .collect();
        let route = &owner.route;
        let hits: Vec<usize> = (0..route.len())
            .filter(|&i| forbidden.contains(&route.points[i].coord()))
            .collect();
        let (Some(&first), Some(&last)) = (hits.first(), hits.last()) else {
            return Ok(None);
        };
        let g = &spec.grid;
        let others: Vec<&Route> = self.req.context_routes.iter().chain([&other.route]).collect();
        let counts = CoverageTensor::from_routes(g.width(), g.height(), spec.horizon, others.iter().copied())?;
        let mut holders = vec![0u32; g.cell_count()];
        for r in &others {
            for c in r.cells() {
                holders[g.index(c)] += 1;
            }
        }
        let own = route.cells();
        let original = route.points.clone();
        let cost = |c: Coord, t: u32| {
            if forbidden.contains(&c) {
                return None;
            }
            let spread = if own.contains(&c) {
                0.0
            } else {
                2.0 * f64::from(holders[g.index(c)])
            };
            let balance = entropy_increment(counts.get(c.x, c.y, t));
            let taste = weight * (1.0 - p.preference[g.category(c).index()] + spec.mu * g.normalized_crime(c));
            let moved = if original.iter().any(|q| q.t == t && q.coord() == c) {
                0.0
            } else {
                0.01
            };
            Some(spread + balance + taste + moved)
        };
        // Widen the segment around the shared cells until a way around exists.
        let n = route.len();
        for extra in 0..n {
            let from = first.saturating_sub(1 + extra);
            let to = (last + 1 + extra).min(n - 1);
            if let Some(r) = reroute_segment_with(route, from, to, p.speed(), g, cost)? {
                return Ok(Some(r));
            }
            if from == 0 && to == n - 1 {
                break;
            }
        }
        Ok(None)
    }

    /// Guards every proposal must pass before it is sent.
    fn acceptable(&self, u: &Route, v: &Route) -> Result<bool> {
        let spec = self.spec;
        let (pu, pv) = (&self.req.u.participant, &self.req.v.participant);
        let valid = |r: &Route, p: &Participant| validate_route(r, p.schedule(), &spec.grid).map(|x| x.is_valid());
        if !valid(u, pu)? || !valid(v, pv)? {
            return Ok(false);
        }
        let (ou, ov) = (&self.req.u.route, &self.req.v.route);
        if route_overlap(u, v)? >= route_overlap(ou, ov)? {
            return Ok(false);
        }
        let (mean_old, max_old) = pairwise_overlap_stats(&self.all_routes(ou, ov))?;
        let (mean_new, max_new) = pairwise_overlap_stats(&self.all_routes(u, v))?;
        if mean_new > mean_old || max_new > max_old {
            return Ok(false);
        }
        Ok(self.union_entropy(u, v)? >= self.union_entropy(ou, ov)?)
    }
}

fn incentive(moved: &Participant, partner: &Participant, before: f64, after: f64) -> (String, String) {
    (
        format!(
            "Your adjusted route stops sharing cells with {}; overlap falls from {:.0}% to {:.0}% while keeping your origin, destination and timing.",
            partner.id,
            before * 100.0,
            after * 100.0
        ),
        format!("Your route is unchanged; {} adjusts instead.", moved.id),
    )
}

impl ProposePolicy for HeuristicPropose {
    fn propose(&self, req: &ProposalRequest, spec: &TaskSpec) -> Result<ProposalResponse> {
        let echo = ProposalResponse {
            route_u: req.u.route.clone(),
            route_v: req.v.route.clone(),
            incentive_u: String::new(),
            incentive_v: String::new(),
        };
        let shared: BTreeSet<Coord> = req
            .u
            .route
            .cells()
            .intersection(&req.v.route.cells())
            .copied()
            .collect();
        if shared.is_empty() {
            return Ok(echo);
        }
        let pair = Pair { req, spec, shared };
        let before = route_overlap(&req.u.route, &req.v.route)?;

        // (rejections, stake, side): fewer rejections first, then smaller stake.
        let mut order = [
            (
                rejections(&req.u),
                stake(&req.u.participant, &pair.shared, spec),
                0usize,
            ),
            (
                rejections(&req.v),
                stake(&req.v.participant, &pair.shared, spec),
                1usize,
            ),
        ];
        order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

        for (rejected, _, side) in order {
            let (owner, other) = if side == 0 { (&req.u, &req.v) } else { (&req.v, &req.u) };
            for &w in &PREFERENCE_WEIGHTS[rejected.min(PREFERENCE_WEIGHTS.len() - 1)..] {
                let Some(new) = pair.reroute(owner, other, w)? else {
                    continue;
                };
                let (ru, rv) = if side == 0 {
                    (&new, &req.v.route)
                } else {
                    (&req.u.route, &new)
                };
                if !pair.acceptable(ru, rv)? {
                    continue;
                }
                let after = route_overlap(ru, rv)?;
                let (moved_msg, kept_msg) = incentive(&owner.participant, &other.participant, before, after);
                let (incentive_u, incentive_v) = if side == 0 {
                    (moved_msg, kept_msg)
                } else {
                    (kept_msg, moved_msg)
                };
                return Ok(ProposalResponse {
                    route_u: ru.clone(),
                    route_v: rv.clone(),
                    incentive_u,
                    incentive_v,
                });
            }
        }
        Ok(echo)
    }
}
