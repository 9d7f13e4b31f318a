//! Stage 1: baseline route plus policy refinements kept only when they
//! strictly improve the route utility.

use crate::domain::{is_valid_route, Participant, Route, TaskSpec};
use crate::error::{Error, Result};
use crate::policy::{RefinePolicy, RefineRequest};
use crate::routing::baseline_route;

pub use crate::policy::route_utility;

/// Runs up to `spec.max_refine_iters` refinement calls from the baseline
/// route. Invalid or non-improving candidates are discarded, and a failing
/// policy call counts as a discarded candidate.
pub fn generate_route(
    p: &Participant,
    spec: &TaskSpec,
    refine: &dyn RefinePolicy,
    instructions: &str,
) -> Result<Route> {
    if !super::accept_task(p, spec) {
        return Err(Error::InfeasibleSchedule(format!(
            "participant {} cannot complete the task",
            p.id
        )));
    }
    let base = baseline_route(p.schedule(), spec)?;
    let mut best = base.route;
    let mut best_u = route_utility(&best, p, spec)?;
    for i in 0..spec.max_refine_iters {
        let req = RefineRequest {
            participant: p.clone(),
            initial_route: best.clone(),
            residual_steps: base.residual_steps,
            instructions: instructions.to_string(),
        };
        let cand = match refine.refine(&req, spec) {
            Ok(r) => r.final_path,
            Err(e) => {
                log::warn!("refine call {} for {} failed: {e}", i + 1, p.id);
                continue;
            }
        };
        if !is_valid_route(&cand, p.schedule(), &spec.grid) {
            log::debug!("refine call {} for {} returned an invalid route", i + 1, p.id);
            continue;
        }
        let u = route_utility(&cand, p, spec)?;
        if u > best_u {
            best = cand;
            best_u = u;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Coord, GridMap, ParticipantProfile, RoutePoint, Schedule};
    use crate::policy::{HeuristicRefine, RefineResponse};

    struct Garbage;
    impl RefinePolicy for Garbage {
        fn refine(&self, _: &RefineRequest, _: &TaskSpec) -> Result<RefineResponse> {
            Ok(RefineResponse {
                final_path: Route::new(vec![RoutePoint::new(9, 9, 0)]),
                explanation: String::new(),
            })
        }
    }

    fn setup(iters: u32) -> (Participant, TaskSpec) {
        let mut spec = TaskSpec::new(GridMap::uniform(3, 3).unwrap(), 6, 15, 10.0).unwrap();
        spec.max_refine_iters = iters;
        let s = Schedule::new(Coord::new(0, 0), Coord::new(2, 0), 0, 5, 1).unwrap();
        let p = Participant::new("a", s, 1.0, [1.0 / 6.0; 6], 0, ParticipantProfile::neutral(30)).unwrap();
        (p, spec)
    }

    #[test]
    fn zero_iterations_give_baseline() {
        let (p, spec) = setup(0);
        let base = baseline_route(p.schedule(), &spec).unwrap().route;
        assert_eq!(generate_route(&p, &spec, &HeuristicRefine, "").unwrap(), base);
    }

    #[test]
    fn invalid_candidates_are_ignored() {
        let (p, spec) = setup(3);
        let base = baseline_route(p.schedule(), &spec).unwrap().route;
        assert_eq!(generate_route(&p, &spec, &Garbage, "").unwrap(), base);
    }

    #[test]
    fn horizon_violation_is_rejected() {
        let (p, mut spec) = setup(3);
        spec.horizon = 4;
        assert_eq!(
            generate_route(&p, &spec, &HeuristicRefine, "").unwrap_err().code(),
            "infeasible_schedule"
        );
    }
}
