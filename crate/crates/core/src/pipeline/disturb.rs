//! Replanning after broadcast disturbances: blocked cells and priority
//! regions. The selected set stays fixed; only routes change.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{is_valid_route, DisturbanceEvent, DisturbanceKind, Participant, Route, TaskSpec};
use crate::error::{Error, Result};
use crate::policy::{route_utility, RefinePolicy, RefineRequest};
use crate::routing::{insert_detour_within, reroute_segment_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Unaffected,
    Rerouted,
    Stuck,
    DestinationBlocked,
    Detoured,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Unaffected => "unaffected",
            Decision::Rerouted => "rerouted",
            Decision::Stuck => "stuck",
            Decision::DestinationBlocked => "destination_blocked",
            Decision::Detoured => "detoured",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub id: String,
    pub decision: Decision,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceOutcome {
    pub routes: BTreeMap<String, Route>,
    pub log: Vec<DecisionLog>,
}

fn hits_block(route: &Route, events: &[DisturbanceEvent]) -> bool {
    route.points.iter().any(|q| {
        events
            .iter()
            .any(|e| e.kind == DisturbanceKind::CellBlocked && e.covers(q.coord(), q.t))
    })
}

/// Route utility plus the bonus of every priority region the route visits
/// inside its window.
pub fn disturbance_utility(
    route: &Route,
    p: &Participant,
    spec: &TaskSpec,
    events: &[DisturbanceEvent],
) -> Result<f64> {
    let bonus: f64 = events
        .iter()
        .filter(|e| e.kind == DisturbanceKind::PriorityRegion)
        .filter(|e| route.points.iter().any(|q| e.covers(q.coord(), q.t)))
        .filter_map(|e| e.bonus)
        .sum();
    Ok(route_utility(route, p, spec)? + bonus)
}

/// Applies `events` to every route in `routes`.
///
/// A route that passes through a blocked (cell, window) is rerouted around
/// it with as few changed points as possible; if that fails the refine
/// policy is asked once, and the route is kept and marked stuck if neither
/// works. A route whose destination is the blocked cell is kept as is.
/// Unblocked routes take a detour through a reachable priority region when
/// that raises their utility.
pub fn apply_disturbance(
    routes: &BTreeMap<String, Route>,
    events: &[DisturbanceEvent],
    participants: &[Participant],
    spec: &TaskSpec,
    refine: &dyn RefinePolicy,
) -> Result<DisturbanceOutcome> {
    for e in events {
        e.validate(spec)?;
    }
    let blocks: Vec<&DisturbanceEvent> = events
        .iter()
        .filter(|e| e.kind == DisturbanceKind::CellBlocked)
        .collect();
    let mut out = DisturbanceOutcome {
        routes: routes.clone(),
        log: Vec::new(),
    };
    for (id, route) in routes {
        let p = participants
            .iter()
            .find(|p| &p.id == id)
            .ok_or_else(|| Error::Invalid(format!("no participant record for {id}")))?;
        let blocked_at = |c, t| blocks.iter().any(|e| e.covers(c, t));
        let hits: Vec<usize> = (0..route.len())
            .filter(|&i| blocked_at(route.points[i].coord(), route.points[i].t))
            .collect();

        let (decision, detail) = if let (Some(&first), Some(&last)) = (hits.first(), hits.last()) {
            if last == route.len() - 1 && route.points[last].coord() == p.destination() {
                (
                    Decision::DestinationBlocked,
                    format!("destination {} is blocked; keeping the route", p.destination()),
                )
            } else if first == 0 {
                (Decision::Stuck, format!("origin {} is blocked", p.origin()))
            } else {
                let original = route.points.clone();
                let n = route.len();
                // Widen the segment one step at a time until a way around exists.
                let mut rerouted = None;
                for extra in 0..n {
                    let (from, to) = ((first - 1).saturating_sub(extra), (last + 1 + extra).min(n - 1));
                    rerouted = reroute_segment_with(route, from, to, p.speed(), &spec.grid, |c, t| {
                        if blocked_at(c, t) {
                            None
                        } else if original.iter().any(|q| q.t == t && q.coord() == c) {
                            Some(0.0)
                        } else {
                            Some(1.0)
                        }
                    })?;
                    if rerouted.is_some() || (from == 0 && to == n - 1) {
                        break;
                    }
                }
                match rerouted.or_else(|| ask_policy(route, p, spec, events, refine)) {
                    Some(r) => {
                        let changed = r.points.iter().zip(&route.points).filter(|(a, b)| a != b).count();
                        out.routes.insert(id.clone(), r);
                        (
                            Decision::Rerouted,
                            format!("{changed} point(s) changed to avoid the blocked cell"),
                        )
                    }
                    None => (Decision::Stuck, "no feasible way around the blocked cell".to_string()),
                }
            }
        } else {
            match best_priority_detour(route, p, spec, events)? {
                Some((r, gain)) => {
                    out.routes.insert(id.clone(), r);
                    (Decision::Detoured, format!("utility gain {gain:.4}"))
                }
                None => (Decision::Unaffected, String::new()),
            }
        };
        out.log.push(DecisionLog {
            id: id.clone(),
            decision,
            detail,
        });
    }
    Ok(out)
}

fn ask_policy(
    route: &Route,
    p: &Participant,
    spec: &TaskSpec,
    events: &[DisturbanceEvent],
    refine: &dyn RefinePolicy,
) -> Option<Route> {
    let avoid: Vec<String> = events
        .iter()
        .filter(|e| e.kind == DisturbanceKind::CellBlocked)
        .map(|e| format!("{} during t={}..{}", e.cell, e.time_window[0], e.time_window[1]))
        .collect();
    let req = RefineRequest {
        participant: p.clone(),
        initial_route: route.clone(),
        residual_steps: p.schedule().residual_steps(),
        instructions: format!("Avoid the blocked cells: {}.", avoid.join(", ")),
    };
    let r = refine.refine(&req, spec).ok()?.final_path;
    (is_valid_route(&r, p.schedule(), &spec.grid) && !hits_block(&r, events)).then_some(r)
}

fn best_priority_detour(
    route: &Route,
    p: &Participant,
    spec: &TaskSpec,
    events: &[DisturbanceEvent],
) -> Result<Option<(Route, f64)>> {
    let base = disturbance_utility(route, p, spec, events)?;
    let mut best: Option<(Route, f64)> = None;
    for e in events.iter().filter(|e| e.kind == DisturbanceKind::PriorityRegion) {
        let window = Some((e.time_window[0], e.time_window[1]));
        let Some(r) = insert_detour_within(route, e.cell, p.schedule(), &spec.grid, window)? else {
            continue;
        };
        if r == *route || hits_block(&r, events) {
            continue;
        }
        let gain = disturbance_utility(&r, p, spec, events)? - base;
        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.1) {
            best = Some((r, gain));
        }
    }
    Ok(best)
}
