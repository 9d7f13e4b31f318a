//! Feasible seed routes and the route-editing primitives shared by every
//! planner: waypoint insertion, segment rerouting and segment reversal.

use std::collections::BTreeSet;

use crate::domain::{manhattan, Coord, GridMap, Route, RoutePoint, Schedule, TaskSpec};
use crate::error::{Error, Result};

/// A seed route and its spare timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRoute {
    pub route: Route,
    pub residual_steps: u32,
}

/// One timestep of full-speed travel toward `to`, spending the x-leg first.
pub fn step_toward(from: Coord, to: Coord, speed: u32) -> Coord {
    let mut budget = speed;
    let mut c = from;
    let dx = c.x.abs_diff(to.x).min(budget);
    c.x = if to.x >= c.x { c.x + dx } else { c.x - dx };
    budget -= dx;
    let dy = c.y.abs_diff(to.y).min(budget);
    c.y = if to.y >= c.y { c.y + dy } else { c.y - dy };
    c
}

/// Timesteps needed to travel between two cells.
pub fn travel_steps(a: Coord, b: Coord, speed: u32) -> u32 {
    manhattan(a, b).div_ceil(speed)
}

/// Points visited after `from` (exclusive) when moving at full speed to `to`,
/// starting at timestep `t0`.
fn full_speed_leg(from: Coord, to: Coord, t0: u32, speed: u32) -> Vec<RoutePoint> {
    let mut out = Vec::new();
    let mut c = from;
    let mut t = t0;
    while c != to {
        c = step_toward(c, to, speed);
        t += 1;
        out.push(RoutePoint::at(c, t));
    }
    out
}

/// L-shaped full-speed path from O to D, padded with waits at D until `arrive`.
pub fn baseline_route(schedule: &Schedule, spec: &TaskSpec) -> Result<BaselineRoute> {
    schedule.check()?;
    if schedule.arrive > spec.horizon {
        return Err(Error::InfeasibleSchedule(format!(
            "arrive {} exceeds horizon {}",
            schedule.arrive, spec.horizon
        )));
    }
    spec.grid.check_contains(schedule.origin)?;
    spec.grid.check_contains(schedule.destination)?;
    let mut points = vec![RoutePoint::at(schedule.origin, schedule.depart)];
    points.extend(full_speed_leg(
        schedule.origin,
        schedule.destination,
        schedule.depart,
        schedule.speed,
    ));
    let mut t = points.last().map_or(schedule.depart, |p| p.t);
    while t < schedule.arrive {
        t += 1;
        points.push(RoutePoint::at(schedule.destination, t));
    }
    Ok(BaselineRoute {
        route: Route::new(points),
        residual_steps: schedule.residual_steps(),
    })
}

fn visits_within(route: &Route, via: Coord, window: Option<(u32, u32)>) -> bool {
    route
        .points
        .iter()
        .any(|p| p.coord() == via && window.is_none_or(|(a, b)| (a..=b).contains(&p.t)))
}

/// Earliest timestep at which `via` can be occupied on a detour between
/// points `i` and `j`, honoring an optional visit window.
fn detour_visit(
    route: &Route,
    i: usize,
    j: usize,
    via: Coord,
    speed: u32,
    window: Option<(u32, u32)>,
) -> Option<(u32, u32)> {
    let (pi, pj) = (route.points[i], route.points[j]);
    let arrive = pi.t + travel_steps(pi.coord(), via, speed);
    let back = travel_steps(via, pj.coord(), speed);
    if arrive + back > pj.t {
        return None;
    }
    let leave = pj.t - back;
    let (lo, hi) = match window {
        Some((a, b)) => (arrive.max(a), leave.min(b)),
        None => (arrive, leave),
    };
    (lo <= hi).then_some((arrive, leave))
}

/// Re-routes the smallest span of `route` so that it passes through `via`.
///
/// The replaced span moves to `via` at full speed, waits there, then moves
/// on to rejoin the route at its original point and time. Returns `None`
/// when no span has enough slack.
pub fn insert_detour(route: &Route, via: Coord, schedule: &Schedule, grid: &GridMap) -> Result<Option<Route>> {
    insert_detour_within(route, via, schedule, grid, None)
}

/// As [`insert_detour`], but `via` must be occupied at some timestep inside
/// `window` (inclusive).
pub fn insert_detour_within(
    route: &Route,
    via: Coord,
    schedule: &Schedule,
    grid: &GridMap,
    window: Option<(u32, u32)>,
) -> Result<Option<Route>> {
    grid.check_contains(via)?;
    if route.is_empty() {
        return Err(Error::EmptyRoute);
    }
    if visits_within(route, via, window) {
        return Ok(Some(route.clone()));
    }
    let n = route.len();
    if n < 2 {
        return Ok(None);
    }
    let v = schedule.speed;
    // Slack only shrinks on sub-spans, so the full span decides feasibility.
    if detour_visit(route, 0, n - 1, via, v, window).is_none() {
        return Ok(None);
    }
    for span in 1..n {
        for i in 0..n - span {
            let j = i + span;
            let Some((arrive, leave)) = detour_visit(route, i, j, via, v, window) else {
                continue;
            };
            let pi = route.points[i];
            let pj = route.points[j];
            let mut points: Vec<RoutePoint> = route.points[..=i].to_vec();
            points.extend(full_speed_leg(pi.coord(), via, pi.t, v));
            for t in arrive + 1..=leave {
                points.push(RoutePoint::at(via, t));
            }
            points.extend(full_speed_leg(via, pj.coord(), leave, v));
            points.extend_from_slice(&route.points[j + 1..]);
            debug_assert_eq!(points.len(), n);
            return Ok(Some(Route::new(points)));
        }
    }
    Ok(None)
}

fn check_segment(route: &Route, from: usize, to: usize) -> Result<()> {
    if from >= to || to >= route.len() {
        return Err(Error::BadSegment {
            from,
            to,
            len: route.len(),
        });
    }
    Ok(())
}

/// Replaces the interior of `route[from..=to]` with a path that avoids
/// `forbidden`, keeping both boundary points and all timestamps. Among
/// feasible paths, the one changing the fewest points is returned.
pub fn reroute_segment(
    route: &Route,
    from: usize,
    to: usize,
    forbidden: &BTreeSet<Coord>,
    speed: u32,
    grid: &GridMap,
) -> Result<Option<Route>> {
    check_segment(route, from, to)?;
    let original = route.points.clone();
    reroute_segment_with(route, from, to, speed, grid, |c, t| {
        if forbidden.contains(&c) {
            None
        } else {
            let keep = original.iter().any(|p| p.t == t && p.coord() == c);
            Some(if keep { 0.0 } else { 1.0 })
        }
    })
}

/// Layered shortest path over (cell, t) states for the interior of a
/// segment. `cost(cell, t)` prices occupying a cell; `None` forbids it.
/// Ties resolve toward the lowest row-major cell index at each layer.
pub fn reroute_segment_with<F>(
    route: &Route,
    from: usize,
    to: usize,
    speed: u32,
    grid: &GridMap,
    mut cost: F,
) -> Result<Option<Route>>
where
    F: FnMut(Coord, u32) -> Option<f64>,
{
    check_segment(route, from, to)?;
    let start = route.points[from];
    let end = route.points[to];
    if to == from + 1 {
        return Ok((manhattan(start.coord(), end.coord()) <= speed).then(|| route.clone()));
    }
    let n_cells = grid.cell_count();
    let layers = to - from - 1;
    let mut dist = vec![f64::INFINITY; n_cells];
    let mut parents: Vec<Vec<u32>> = Vec::with_capacity(layers);
    let mut frontier = vec![(grid.index(start.coord()), 0.0)];
    let r = speed as i64;
    for k in 0..layers {
        let t = start.t + 1 + k as u32;
        let remaining = (to - from - 1 - k) as u32;
        let mut next = vec![f64::INFINITY; n_cells];
        let mut parent = vec![u32::MAX; n_cells];
        let mut priced: Vec<Option<Option<f64>>> = vec![None; n_cells];
        for &(ci, d) in &frontier {
            let c = grid.coord(ci);
            for dy in -r..=r {
                let span = r - dy.abs();
                for dx in -span..=span {
                    let (nx, ny) = (c.x as i64 + dx, c.y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= grid.width() as i64 || ny >= grid.height() as i64 {
                        continue;
                    }
                    let nc = Coord::new(nx as u32, ny as u32);
                    // Prune states that cannot rejoin the end point in time.
                    if travel_steps(nc, end.coord(), speed) > remaining {
                        continue;
                    }
                    let ni = grid.index(nc);
                    let price = *priced[ni].get_or_insert_with(|| cost(nc, t));
                    let Some(p) = price else { continue };
                    let nd = d + p;
                    if nd < next[ni] || (nd == next[ni] && (ci as u32) < parent[ni]) {
                        next[ni] = nd;
                        parent[ni] = ci as u32;
                    }
                }
            }
        }
        frontier = (0..n_cells)
            .filter(|&i| next[i].is_finite())
            .map(|i| (i, next[i]))
            .collect();
        parents.push(parent);
        dist = next;
        if frontier.is_empty() {
            return Ok(None);
        }
    }
    let best = frontier.iter().fold(None::<(usize, f64)>, |acc, &(i, d)| match acc {
        Some((_, bd)) if bd <= d => acc,
        _ => Some((i, d)),
    });
    let Some((mut ci, _)) = best else {
        return Ok(None);
    };
    debug_assert!(dist[ci].is_finite());
    let mut interior = vec![RoutePoint::new(0, 0, 0); layers];
    for k in (0..layers).rev() {
        let c = grid.coord(ci);
        interior[k] = RoutePoint::at(c, start.t + 1 + k as u32);
        ci = parents[k][ci] as usize;
    }
    let mut points = route.points[..=from].to_vec();
    points.extend(interior);
    points.extend_from_slice(&route.points[to..]);
    Ok(Some(Route::new(points)))
}

/// Reverses the cell order of `route[from..=to]` keeping timestamps. Only
/// interior spans are allowed; returns `None` if the joins exceed `speed`.
pub fn reverse_segment(route: &Route, from: usize, to: usize, speed: u32) -> Result<Option<Route>> {
    check_segment(route, from, to)?;
    if from == 0 || to + 1 >= route.len() {
        return Err(Error::BadSegment {
            from,
            to,
            len: route.len(),
        });
    }
    let mut points = route.points.clone();
    let cells: Vec<Coord> = points[from..=to].iter().rev().map(|p| p.coord()).collect();
    for (p, c) in points[from..=to].iter_mut().zip(cells) {
        p.x = c.x;
        p.y = c.y;
    }
    let ok = manhattan(points[from - 1].coord(), points[from].coord()) <= speed
        && manhattan(points[to].coord(), points[to + 1].coord()) <= speed;
    Ok(ok.then(|| Route::new(points)))
}
