//! The three-stage pipeline: preference-aware route generation,
//! fairness-aware selection and negotiated refinement, plus replanning
//! under disturbances.

mod disturb;
mod generate;
mod negotiate;
mod select;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{plan_tvpg, PlanResult};
use crate::domain::{Instance, Participant, Route, TaskSpec};
use crate::error::Result;
use crate::metrics::pairwise_overlap_stats;
use crate::policy::Policies;
use crate::routing::baseline_route;

pub use disturb::{apply_disturbance, disturbance_utility, Decision, DecisionLog, DisturbanceOutcome};
pub use generate::{generate_route, route_utility};
pub use negotiate::{negotiate, NegotiationState, TranscriptRow};
pub use select::{
    min_max_normalize, select_participants, Candidate, FirstListed, HistoryTable, SelectionState, SelectionStep,
};

/// True iff the itinerary fits inside the task horizon and grid.
pub fn accept_task(p: &Participant, spec: &TaskSpec) -> bool {
    p.arrive() <= spec.horizon
        && p.schedule().check().is_ok()
        && spec.grid.contains(p.origin())
        && spec.grid.contains(p.destination())
}

/// Where stage-1 routes come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteSource {
    /// Baseline plus refine-policy iterations.
    #[default]
    Refined,
    /// Routes of the coverage-greedy baseline planner; participants it did
    /// not select keep their baseline route.
    Tvpg,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub route_source: RouteSource,
    /// Coordinator instructions passed to every refine call.
    pub instructions: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    /// Stage-1 routes of every participant that accepted the task.
    pub generated: BTreeMap<String, Route>,
    pub selection: SelectionState,
    /// The selected routes before negotiation.
    pub pre_negotiation: PlanResult,
    pub negotiation: NegotiationState,
    pub plan: PlanResult,
}

/// Runs all three stages with histories taken from the instance.
pub fn run_pipeline(instance: &Instance, policies: &Policies) -> Result<PipelineOutput> {
    let history = HistoryTable::from_participants(&instance.participants);
    run_pipeline_with(instance, policies, &history, &PipelineOptions::default())
}

pub fn run_pipeline_with(
    instance: &Instance,
    policies: &Policies,
    history: &HistoryTable,
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    let spec = &instance.spec;
    let accepted: Vec<&Participant> = instance.participants.iter().filter(|p| accept_task(p, spec)).collect();
    let routes: Vec<Route> = match opts.route_source {
        RouteSource::Refined => accepted
            .par_iter()
            .map(|p| generate_route(p, spec, policies.refine.as_ref(), &opts.instructions))
            .collect::<Result<_>>()?,
        RouteSource::Tvpg => {
            let greedy = plan_tvpg(instance)?;
            accepted
                .iter()
                .map(|p| match greedy.routes.get(&p.id) {
                    Some(r) => Ok(r.clone()),
                    None => baseline_route(p.schedule(), spec).map(|b| b.route),
                })
                .collect::<Result<_>>()?
        }
    };

    let candidates: Vec<Candidate<'_>> = accepted
        .iter()
        .zip(&routes)
        .map(|(&participant, route)| Candidate { participant, route })
        .collect();
    let selection = select_participants(&candidates, history, spec, policies.tiebreak.as_ref())?;
    let generated: BTreeMap<String, Route> = accepted.iter().map(|p| p.id.clone()).zip(routes).collect();

    let chosen: BTreeMap<String, Route> = selection
        .selected
        .iter()
        .map(|id| (id.clone(), generated[id].clone()))
        .collect();
    let pre_negotiation = PlanResult::new(instance, selection.selected.clone(), chosen.clone())?;
    let negotiation = negotiate(
        NegotiationState::new(chosen),
        &instance.participants,
        spec,
        policies.propose.as_ref(),
        policies.feedback.as_ref(),
    )?;
    let plan = PlanResult::new(instance, selection.selected.clone(), negotiation.routes.clone())?;
    Ok(PipelineOutput {
        generated,
        selection,
        pre_negotiation,
        negotiation,
        plan,
    })
}

/// Summary metrics of one plan, as compared before and after negotiation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetrics {
    /// Mean pairwise route overlap, in percent.
    pub overlap_pct: f64,
    pub coverage: f64,
    pub entropy: f64,
    /// Total sensed (cell, time) points, Q.
    pub count: f64,
    pub pss: f64,
}

impl PhaseMetrics {
    pub fn of(plan: &PlanResult) -> Result<Self> {
        let routes: Vec<&Route> = plan.routes.values().collect();
        let (mean, _) = pairwise_overlap_stats(&routes)?;
        let (coverage, entropy, count) = plan
            .report
            .as_ref()
            .map_or((0.0, 0.0, 0.0), |r| (r.phi, r.entropy, r.q));
        Ok(Self {
            overlap_pct: 100.0 * mean,
            coverage,
            entropy,
            count,
            pss: plan.mean_pss,
        })
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
