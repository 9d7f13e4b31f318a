//! Random baseline: random selection under budget and random detours.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{eligible, reachable_cells, PlanResult};
use crate::domain::{Instance, Participant, Route, TaskSpec};
use crate::error::Result;
use crate::routing::{baseline_route, insert_detour};

pub fn plan_rn(instance: &Instance, seed: u64) -> Result<PlanResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (selected, routes) = random_plan(instance, &mut rng)?;
    PlanResult::new(instance, selected, routes)
}

/// Selection and routes of a random plan; shared with the annealing planner.
pub(crate) fn random_plan(instance: &Instance, rng: &mut ChaCha8Rng) -> Result<(Vec<String>, BTreeMap<String, Route>)> {
    let spec = &instance.spec;
    let mut pool = eligible(instance);
    pool.shuffle(rng);
    let mut remaining = spec.budget;
    let mut selected = Vec::new();
    let mut routes = BTreeMap::new();
    for p in pool {
        if p.cost > remaining {
            continue;
        }
        remaining -= p.cost;
        routes.insert(p.id.clone(), random_route(p, spec, rng)?);
        selected.push(p.id.clone());
    }
    Ok((selected, routes))
}

/// Baseline route with up to `residual_steps` random feasible detours.
pub(crate) fn random_route(p: &Participant, spec: &TaskSpec, rng: &mut ChaCha8Rng) -> Result<Route> {
    let base = baseline_route(p.schedule(), spec)?;
    let mut route = base.route;
    let mut cells = reachable_cells(p, spec);
    for _ in 0..base.residual_steps {
        cells.shuffle(rng);
        let mut inserted = false;
        for &c in &cells {
            if route.visits(c) {
                continue;
            }
            if let Some(r) = insert_detour(&route, c, p.schedule(), &spec.grid)? {
                route = r;
                inserted = true;
                break;
            }
        }
        if !inserted {
            break;
        }
    }
    Ok(route)
}
