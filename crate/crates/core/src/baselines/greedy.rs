//! Greedy insertion planners: TVPG ranks by coverage gain, TCPG by cost.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{best_insertion, eligible, reachable_cells, PlanResult, GAIN_EPS};
use crate::domain::{Coord, Instance, Participant, Route};
use crate::error::Result;
use crate::metrics::CoverageState;
use crate::routing::{baseline_route, travel_steps};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Priority {
    Gain,
    Cost,
}

/// Greedy by coverage gain: selection by gain per unit cost, then repeated
/// best-Δφ detour insertion (ties to the cheaper participant).
pub fn plan_tvpg(instance: &Instance) -> Result<PlanResult> {
    plan_greedy(instance, Priority::Gain)
}

/// Greedy by cost: cheapest participants and their insertions first, with
/// coverage gain as the secondary key.
pub fn plan_tcpg(instance: &Instance) -> Result<PlanResult> {
    plan_greedy(instance, Priority::Cost)
}

/// Returns `Less` when `a` should be preferred over `b`.
fn rank(priority: Priority, a: (f64, &Participant), b: (f64, &Participant), ratio: bool) -> Ordering {
    let (ga, pa) = a;
    let (gb, pb) = b;
    let by_id = || pa.id.cmp(&pb.id);
    match priority {
        Priority::Gain => {
            let (ka, kb) = if ratio { (ga / pa.cost, gb / pb.cost) } else { (ga, gb) };
            kb.total_cmp(&ka).then(pa.cost.total_cmp(&pb.cost)).then_with(by_id)
        }
        Priority::Cost => pa.cost.total_cmp(&pb.cost).then(gb.total_cmp(&ga)).then_with(by_id),
    }
}

fn plan_greedy(instance: &Instance, priority: Priority) -> Result<PlanResult> {
    let spec = &instance.spec;
    let pool: Vec<(&Participant, Route)> = eligible(instance)
        .into_iter()
        .map(|p| Ok((p, baseline_route(p.schedule(), spec)?.route)))
        .collect::<Result<_>>()?;

    let mut state = CoverageState::new(spec);
    let mut remaining = spec.budget;
    let mut taken = vec![false; pool.len()];
    let mut order: Vec<usize> = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (i, (p, r)) in pool.iter().enumerate() {
            if taken[i] || p.cost > remaining {
                continue;
            }
            let g = state.gain(r)?;
            if g <= GAIN_EPS {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bg)) => rank(priority, (g, p), (bg, pool[bi].0), true) == Ordering::Less,
            };
            if better {
                best = Some((i, g));
            }
        }
        let Some((i, _)) = best else { break };
        state.add(&pool[i].1)?;
        remaining -= pool[i].0.cost;
        taken[i] = true;
        order.push(i);
    }

    let mut routes: Vec<Route> = order.iter().map(|&i| pool[i].1.clone()).collect();
    let members: Vec<&Participant> = order.iter().map(|&i| pool[i].0).collect();
    improve_by_insertion(&mut state, &members, &mut routes, instance, priority)?;

    let selected: Vec<String> = members.iter().map(|p| p.id.clone()).collect();
    let map: BTreeMap<String, Route> = selected.iter().cloned().zip(routes).collect();
    PlanResult::new(instance, selected, map)
}

/// Slots (x, y, t) a participant could ever occupy.
fn reach_mask(p: &Participant, state: &CoverageState) -> Vec<bool> {
    let tensor = state.tensor();
    let mut mask = vec![false; tensor.counts().len()];
    let s = p.schedule();
    let (w, h, _) = tensor.dims();
    for t in s.depart..=s.arrive {
        for y in 0..h {
            for x in 0..w {
                let c = Coord::new(x, y);
                if travel_steps(s.origin, c, s.speed) <= t - s.depart
                    && travel_steps(c, s.destination, s.speed) <= s.arrive - t
                {
                    if let Some(i) = tensor.slot(x, y, t) {
                        mask[i] = true;
                    }
                }
            }
        }
    }
    mask
}

/// Repeatedly applies the best detour insertion over all routes until none
/// improves φ. Per-participant best moves are cached and recomputed only
/// when a committed change touches slots the participant can reach.
fn improve_by_insertion(
    state: &mut CoverageState,
    members: &[&Participant],
    routes: &mut [Route],
    instance: &Instance,
    priority: Priority,
) -> Result<()> {
    let spec = &instance.spec;
    let cells: Vec<Vec<Coord>> = members.iter().map(|p| reachable_cells(p, spec)).collect();
    let masks: Vec<Vec<bool>> = members.iter().map(|p| reach_mask(p, state)).collect();
    let mut cache: Vec<Option<Option<(f64, Coord, Route)>>> = vec![None; members.len()];
    loop {
        for k in 0..members.len() {
            if cache[k].is_none() {
                cache[k] = Some(best_insertion(state, &routes[k], members[k], spec, &cells[k])?);
            }
        }
        let mut best: Option<usize> = None;
        for k in 0..members.len() {
            let Some(Some((g, _, _))) = &cache[k] else { continue };
            if *g <= GAIN_EPS {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let Some(Some((bg, _, _))) = &cache[b] else {
                        unreachable!()
                    };
                    rank(priority, (*g, members[k]), (*bg, members[b]), false) == Ordering::Less
                }
            };
            if better {
                best = Some(k);
            }
        }
        let Some(k) = best else { return Ok(()) };
        let Some(Some((_, _, new))) = cache[k].take() else {
            unreachable!()
        };
        let old = std::mem::replace(&mut routes[k], new);
        state.replace(&old, &routes[k])?;
        let touched: Vec<usize> = old
            .points
            .iter()
            .chain(&routes[k].points)
            .filter_map(|p| state.tensor().slot(p.x, p.y, p.t))
            .collect();
        for (j, mask) in masks.iter().enumerate() {
            if touched.iter().any(|&s| mask[s]) {
                cache[j] = None;
            }
        }
    }
}
