//! Dynamic programming over the time-expanded grid, followed by worker
//! replacement.
//!
//! Every route spans `depart..=arrive`, so adding it raises Q by a fixed
//! amount and φ is maximized by minimizing the growth of S = Σ c·ln c. Each
//! occupied slot with current count c adds (c+1)·ln(c+1) − c·ln(c), which is
//! additive along the path and therefore exact under DP.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{eligible, PlanResult, GAIN_EPS};
use crate::domain::{Instance, Participant, Route, TaskSpec};
use crate::error::{Error, Result};
use crate::metrics::CoverageState;
use crate::routing::{baseline_route, reroute_segment_with};

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDpOptions {
    pub replacement: bool,
    /// Maximum (cell, t) states per participant.
    pub state_cap: usize,
}

impl Default for GraphDpOptions {
    fn default() -> Self {
        Self {
            replacement: true,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

fn entropy_increment(c: f64) -> f64 {
    let next = c + 1.0;
    let a = next * next.ln();
    let b = if c > 0.0 { c * c.ln() } else { 0.0 };
    a - b
}

/// The route maximizing φ(committed + route) for one participant.
pub fn best_route(p: &Participant, committed: &CoverageState, spec: &TaskSpec, state_cap: usize) -> Result<Route> {
    let s = p.schedule();
    let states = spec.grid.cell_count() * (s.window() as usize + 1);
    if states > state_cap {
        return Err(Error::InstanceTooLarge { states, cap: state_cap });
    }
    let skeleton = baseline_route(s, spec)?.route;
    let last = skeleton.len() - 1;
    let best = reroute_segment_with(&skeleton, 0, last, s.speed, &spec.grid, |c, t| {
        Some(entropy_increment(committed.count_at(c.x, c.y, t)))
    })?;
    Ok(best.unwrap_or(skeleton))
}

pub fn plan_graphdp(instance: &Instance) -> Result<PlanResult> {
    plan_graphdp_with(instance, &GraphDpOptions::default())
}

pub fn plan_graphdp_with(instance: &Instance, opts: &GraphDpOptions) -> Result<PlanResult> {
    let spec = &instance.spec;
    let mut pool = eligible(instance);
    pool.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.id.cmp(&b.id)));

    let mut state = CoverageState::new(spec);
    let mut remaining = spec.budget;
    let mut members: Vec<(usize, Route)> = Vec::new();
    for (k, p) in pool.iter().enumerate() {
        if p.cost > remaining {
            continue;
        }
        let r = best_route(p, &state, spec, opts.state_cap)?;
        if state.gain(&r)? > GAIN_EPS {
            state.add(&r)?;
            remaining -= p.cost;
            members.push((k, r));
        }
    }

    if opts.replacement {
        replace_workers(&pool, &mut members, &mut state, spec, opts.state_cap)?;
    }

    let selected: Vec<String> = members.iter().map(|(k, _)| pool[*k].id.clone()).collect();
    let routes: BTreeMap<String, Route> = members.into_iter().map(|(k, r)| (pool[k].id.clone(), r)).collect();
    PlanResult::new(instance, selected, routes)
}

/// Applies the best improving (selected, unselected) swap until none is left.
fn replace_workers(
    pool: &[&Participant],
    members: &mut [(usize, Route)],
    state: &mut CoverageState,
    spec: &TaskSpec,
    cap: usize,
) -> Result<()> {
    loop {
        let spent: f64 = members.iter().map(|(k, _)| pool[*k].cost).sum();
        let current = state.phi();
        let mut best: Option<(f64, usize, usize, Route)> = None;
        for (slot, (u, ru)) in members.iter().enumerate() {
            let mut without = state.clone();
            without.remove(ru)?;
            for (w, pw) in pool.iter().enumerate() {
                if members.iter().any(|(m, _)| *m == w) || spent - pool[*u].cost + pw.cost > spec.budget {
                    continue;
                }
                let rw = best_route(pw, &without, spec, cap)?;
                let improvement = without.phi() + without.gain(&rw)? - current;
                if improvement > GAIN_EPS && best.as_ref().is_none_or(|b| improvement > b.0) {
                    best = Some((improvement, slot, w, rw));
                }
            }
        }
        let Some((_, slot, w, rw)) = best else { return Ok(()) };
        let (_, old) = std::mem::replace(&mut members[slot], (w, rw));
        state.replace(&old, &members[slot].1)?;
    }
}
