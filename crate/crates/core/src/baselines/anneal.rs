//! Multi-start simulated annealing over plans, with random (MSA) or greedy
//! (MSAGI) initialization.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::random::random_plan;
use super::{eligible, plan_tvpg, reachable_cells, PlanResult, GAIN_EPS};
use crate::domain::{Coord, Instance, Participant, Route};
use crate::error::{Error, Result};
use crate::metrics::CoverageState;
use crate::routing::{baseline_route, insert_detour, reverse_segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaSchedule {
    pub t0: f64,
    pub cooling: f64,
    pub iters: u32,
    pub restarts: u32,
}

impl Default for SaSchedule {
    fn default() -> Self {
        Self {
            t0: 1.0,
            cooling: 0.95,
            iters: 500,
            restarts: 5,
        }
    }
}

impl SaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return Err(Error::BadSaSchedule(format!("t0 must be positive, got {}", self.t0)));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::BadSaSchedule(format!(
                "cooling must lie in (0, 1), got {}",
                self.cooling
            )));
        }
        if self.restarts == 0 {
            return Err(Error::BadSaSchedule("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Metropolis rule: 1 for non-worsening moves, exp(−loss/temp) otherwise.
pub fn acceptance_probability(loss: f64, temp: f64) -> f64 {
    if loss <= 0.0 {
        1.0
    } else if temp <= 0.0 {
        0.0
    } else {
        (-loss / temp).exp()
    }
}

pub fn plan_msa(instance: &Instance, seed: u64, schedule: &SaSchedule) -> Result<PlanResult> {
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let search = Search::new(instance)?;
    let mut best: Option<(f64, Plan)> = None;
    for _ in 0..schedule.restarts {
        let (ids, routes) = random_plan(instance, &mut rng)?;
        let init = search.plan_from(&ids, routes)?;
        search.anneal(init, schedule, &mut rng, &mut best)?;
    }
    let (_, plan) = best.expect("at least one restart");
    search.finish(&plan)
}

/// Annealing from the TVPG plan; never returns a plan worse than it.
pub fn plan_msagi(instance: &Instance, seed: u64, schedule: &SaSchedule) -> Result<PlanResult> {
    schedule.validate()?;
    let greedy = plan_tvpg(instance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let search = Search::new(instance)?;
    let init = search.plan_from(&greedy.selected, greedy.routes.clone())?;
    let mut best: Option<(f64, Plan)> = None;
    for _ in 0..schedule.restarts {
        search.anneal(init.clone(), schedule, &mut rng, &mut best)?;
    }
    let (_, plan) = best.expect("at least one restart");
    let found = search.finish(&plan)?;
    // Compare from-scratch utilities so round-off in the incremental
    // bookkeeping can never make the result worse than its seed.
    Ok(if found.phi() > greedy.phi() { found } else { greedy })
}

#[derive(Debug, Clone)]
struct Plan {
    /// (pool index, route) in selection order.
    members: Vec<(usize, Route)>,
    cost: f64,
}

struct Search<'a> {
    instance: &'a Instance,
    pool: Vec<&'a Participant>,
    cells: Vec<Vec<Coord>>,
}

impl<'a> Search<'a> {
    fn new(instance: &'a Instance) -> Result<Self> {
        let pool = eligible(instance);
        let cells = pool.iter().map(|p| reachable_cells(p, &instance.spec)).collect();
        Ok(Self { instance, pool, cells })
    }

    fn plan_from(&self, ids: &[String], mut routes: BTreeMap<String, Route>) -> Result<Plan> {
        let mut members = Vec::new();
        let mut cost = 0.0;
        for id in ids {
            let k = self
                .pool
                .iter()
                .position(|p| &p.id == id)
                .ok_or_else(|| Error::Invalid(format!("participant {id} not eligible")))?;
            let r = routes
                .remove(id)
                .ok_or_else(|| Error::Invalid(format!("no route for {id}")))?;
            cost += self.pool[k].cost;
            members.push((k, r));
        }
        Ok(Plan { members, cost })
    }

    fn finish(&self, plan: &Plan) -> Result<PlanResult> {
        let selected: Vec<String> = plan.members.iter().map(|(k, _)| self.pool[*k].id.clone()).collect();
        let routes = plan
            .members
            .iter()
            .map(|(k, r)| (self.pool[*k].id.clone(), r.clone()))
            .collect();
        PlanResult::new(self.instance, selected, routes)
    }

    fn anneal(
        &self,
        mut plan: Plan,
        sched: &SaSchedule,
        rng: &mut ChaCha8Rng,
        best: &mut Option<(f64, Plan)>,
    ) -> Result<()> {
        let spec = &self.instance.spec;
        let mut state = CoverageState::from_routes(spec, plan.members.iter().map(|(_, r)| r))?;
        let mut current = state.phi();
        if best.as_ref().is_none_or(|(b, _)| current > *b + GAIN_EPS) {
            *best = Some((current, plan.clone()));
        }
        let costs: Vec<f64> = self.pool.iter().map(|p| p.cost).collect();
        let mut temp = sched.t0;
        for _ in 0..sched.iters {
            if let Some(mut mv) = self.propose(&plan, rng)? {
                mv.apply(&mut plan, &mut state, &costs)?;
                let next = state.phi();
                let loss = current - next;
                if rng.random::<f64>() < acceptance_probability(loss, temp) {
                    current = next;
                    if best.as_ref().is_none_or(|(b, _)| current > *b + GAIN_EPS) {
                        *best = Some((current, plan.clone()));
                    }
                } else {
                    mv.revert(&mut plan, &mut state, &costs)?;
                }
            }
            temp *= sched.cooling;
        }
        Ok(())
    }

    fn propose(&self, plan: &Plan, rng: &mut ChaCha8Rng) -> Result<Option<Move>> {
        let spec = &self.instance.spec;
        let n = plan.members.len();
        match rng.random_range(0..4u8) {
            0 if n > 0 => {
                let slot = rng.random_range(0..n);
                let (k, route) = &plan.members[slot];
                let Some(&c) = self.cells[*k].choose(rng) else {
                    return Ok(None);
                };
                if route.visits(c) {
                    return Ok(None);
                }
                Ok(insert_detour(route, c, self.pool[*k].schedule(), &spec.grid)?
                    .map(|r| Move::Routes(vec![(slot, r)])))
            }
            1 if n > 1 => {
                // Exchange one visited cell between two routes.
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                let (ka, ra) = &plan.members[a];
                let (kb, rb) = &plan.members[b];
                let ca = ra.points.choose(rng).map(|p| p.coord());
                let cb = rb.points.choose(rng).map(|p| p.coord());
                let (Some(ca), Some(cb)) = (ca, cb) else {
                    return Ok(None);
                };
                if ra.visits(cb) || rb.visits(ca) {
                    return Ok(None);
                }
                let na = insert_detour(ra, cb, self.pool[*ka].schedule(), &spec.grid)?;
                let nb = insert_detour(rb, ca, self.pool[*kb].schedule(), &spec.grid)?;
                Ok(match (na, nb) {
                    (Some(na), Some(nb)) => Some(Move::Routes(vec![(a, na), (b, nb)])),
                    _ => None,
                })
            }
            2 if n > 0 => {
                let slot = rng.random_range(0..n);
                let (k, route) = &plan.members[slot];
                if route.len() < 4 {
                    return Ok(None);
                }
                let i = rng.random_range(1..route.len() - 2);
                let j = rng.random_range(i + 1..route.len() - 1);
                Ok(reverse_segment(route, i, j, self.pool[*k].speed())?.map(|r| Move::Routes(vec![(slot, r)])))
            }
            _ => self.propose_member_change(plan, rng),
        }
    }

    /// Adds an unselected participant if the budget allows, otherwise swaps
    /// one in for a selected participant.
    fn propose_member_change(&self, plan: &Plan, rng: &mut ChaCha8Rng) -> Result<Option<Move>> {
        let spec = &self.instance.spec;
        let out: Vec<usize> = (0..self.pool.len())
            .filter(|k| !plan.members.iter().any(|(m, _)| m == k))
            .collect();
        let Some(&w) = out.choose(rng) else { return Ok(None) };
        let route = baseline_route(self.pool[w].schedule(), spec)?.route;
        if plan.cost + self.pool[w].cost <= spec.budget {
            return Ok(Some(Move::Add { member: w, route }));
        }
        if plan.members.is_empty() {
            return Ok(None);
        }
        let slot = rng.random_range(0..plan.members.len());
        let (u, _) = plan.members[slot];
        if plan.cost - self.pool[u].cost + self.pool[w].cost > spec.budget {
            return Ok(None);
        }
        Ok(Some(Move::Swap { slot, member: w, route }))
    }
}

enum Move {
    /// Replacement routes per member slot; holds the previous routes once applied.
    Routes(Vec<(usize, Route)>),
    Add {
        member: usize,
        route: Route,
    },
    /// Incoming member and route; holds the outgoing pair once applied.
    Swap {
        slot: usize,
        member: usize,
        route: Route,
    },
}

impl Move {
    fn apply(&mut self, plan: &mut Plan, state: &mut CoverageState, costs: &[f64]) -> Result<()> {
        match self {
            Move::Routes(changes) => {
                for (slot, r) in changes.iter_mut() {
                    std::mem::swap(&mut plan.members[*slot].1, r);
                    state.replace(r, &plan.members[*slot].1)?;
                }
            }
            Move::Add { member, route } => {
                state.add(route)?;
                plan.members.push((*member, route.clone()));
                plan.cost += costs[*member];
            }
            Move::Swap { slot, member, route } => {
                let (out, old) = std::mem::replace(&mut plan.members[*slot], (*member, route.clone()));
                state.replace(&old, route)?;
                plan.cost += costs[*member] - costs[out];
                *member = out;
                *route = old;
            }
        }
        Ok(())
    }

    fn revert(mut self, plan: &mut Plan, state: &mut CoverageState, costs: &[f64]) -> Result<()> {
        match &mut self {
            Move::Routes(changes) => {
                for (slot, r) in changes.iter_mut().rev() {
                    std::mem::swap(&mut plan.members[*slot].1, r);
                    state.replace(r, &plan.members[*slot].1)?;
                }
                Ok(())
            }
            Move::Add { member, route } => {
                state.remove(route)?;
                plan.members.pop();
                plan.cost -= costs[*member];
                Ok(())
            }
            Move::Swap { .. } => self.apply(plan, state, costs),
        }
    }
}
