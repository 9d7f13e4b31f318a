//! The six comparison planners. Each maps an instance to a budget-feasible
//! selection plus one route per selected participant.
//!
//! Every planner emits routes spanning `depart..=arrive` exactly, so a
//! participant's sensing volume is fixed and only route shape varies.

mod anneal;
mod graphdp;
mod greedy;
mod random;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Coord, Instance, Participant, Route, TaskSpec};
use crate::error::{Error, Result};
use crate::metrics::{path_satisfaction, CoverageReport, CoverageState};
use crate::routing::{insert_detour, travel_steps};

pub use anneal::{acceptance_probability, plan_msa, plan_msagi, SaSchedule};
pub use graphdp::{best_route, plan_graphdp, plan_graphdp_with, GraphDpOptions, DEFAULT_STATE_CAP};
pub use greedy::{plan_tcpg, plan_tvpg};
pub use random::plan_rn;

/// Registered planner keys, in CLI listing order.
pub const METHOD_KEYS: [&str; 6] = ["rn", "tvpg", "tcpg", "msa", "msagi", "graphdp"];

/// Gains at or below this are treated as no improvement.
pub(crate) const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Selected participant ids in selection order.
    pub selected: Vec<String>,
    pub routes: BTreeMap<String, Route>,
    /// `None` for the zero plan (nothing selected).
    pub report: Option<CoverageReport>,
    pub mean_pss: f64,
}

impl PlanResult {
    pub fn new(instance: &Instance, selected: Vec<String>, routes: BTreeMap<String, Route>) -> Result<Self> {
        let spec = &instance.spec;
        let mut tensor = instance.empty_tensor();
        let mut pss = 0.0;
        for id in &selected {
            let p = instance
                .participant(id)
                .ok_or_else(|| Error::Invalid(format!("unknown participant {id}")))?;
            let r = routes
                .get(id)
                .ok_or_else(|| Error::Invalid(format!("no route for {id}")))?;
            tensor.add_route(r)?;
            pss += path_satisfaction(r, p, &spec.grid, spec.mu);
        }
        let report = match CoverageReport::from_tensor(&tensor, spec) {
            Ok(r) => Some(r),
            Err(Error::EmptyCoverage) => None,
            Err(e) => return Err(e),
        };
        let mean_pss = if selected.is_empty() {
            0.0
        } else {
            pss / selected.len() as f64
        };
        Ok(Self {
            selected,
            routes,
            report,
            mean_pss,
        })
    }

    pub fn empty() -> Self {
        Self {
            selected: Vec::new(),
            routes: BTreeMap::new(),
            report: None,
            mean_pss: 0.0,
        }
    }

    /// φ of the plan; 0 for the zero plan.
    pub fn phi(&self) -> f64 {
        self.report.as_ref().map_or(0.0, |r| r.phi)
    }

    pub fn total_cost(&self, instance: &Instance) -> f64 {
        self.selected
            .iter()
            .filter_map(|id| instance.participant(id))
            .map(|p| p.cost)
            .sum()
    }
}

/// Dispatches a registered planner by key with default options.
pub fn plan_by_key(key: &str, instance: &Instance, seed: u64) -> Result<PlanResult> {
    match key {
        "rn" => plan_rn(instance, seed),
        "tvpg" => plan_tvpg(instance),
        "tcpg" => plan_tcpg(instance),
        "msa" => plan_msa(instance, seed, &SaSchedule::default()),
        "msagi" => plan_msagi(instance, seed, &SaSchedule::default()),
        "graphdp" => plan_graphdp(instance),
        other => Err(Error::UnknownMethod(other.to_string())),
    }
}

/// Participants whose itinerary fits the task.
pub(crate) fn eligible(instance: &Instance) -> Vec<&Participant> {
    instance
        .participants
        .iter()
        .filter(|p| crate::pipeline::accept_task(p, &instance.spec))
        .collect()
}

/// Cells a participant can reach and still arrive in time.
pub(crate) fn reachable_cells(p: &Participant, spec: &TaskSpec) -> Vec<Coord> {
    let s = p.schedule();
    spec.grid
        .coords()
        .filter(|&c| travel_steps(s.origin, c, s.speed) + travel_steps(c, s.destination, s.speed) <= s.window())
        .collect()
}

/// Best single-waypoint insertion for one route: maximal Δφ, ties toward the
/// lowest cell index. Cells already on the route are skipped.
pub(crate) fn best_insertion(
    state: &CoverageState,
    route: &Route,
    p: &Participant,
    spec: &TaskSpec,
    cells: &[Coord],
) -> Result<Option<(f64, Coord, Route)>> {
    let mut best: Option<(f64, Coord, Route)> = None;
    for &c in cells {
        if route.visits(c) {
            continue;
        }
        let Some(new) = insert_detour(route, c, p.schedule(), &spec.grid)? else {
            continue;
        };
        let gain = state.replacement_gain(route, &new)?;
        if best.as_ref().is_none_or(|b| gain > b.0) {
            best = Some((gain, c, new));
        }
    }
    Ok(best)
}
