use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::grid::{manhattan, Coord, GridMap};
use super::participant::Schedule;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RoutePoint {
    pub x: u32,
    pub y: u32,
    pub t: u32,
}

impl RoutePoint {
    pub const fn new(x: u32, y: u32, t: u32) -> Self {
        Self { x, y, t }
    }

    pub fn at(c: Coord, t: u32) -> Self {
        Self { x: c.x, y: c.y, t }
    }

    pub fn coord(&self) -> Coord {
        Coord::new(self.x, self.y)
    }
}

/// An ordered sequence of (cell, timestep) points, one per occupied timestep.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Route {
    pub points: Vec<RoutePoint>,
}

impl Route {
    pub fn new(points: Vec<RoutePoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Option<&RoutePoint> {
        self.points.first()
    }

    pub fn last(&self) -> Option<&RoutePoint> {
        self.points.last()
    }

    /// Distinct spatial cells visited (time ignored).
    pub fn cells(&self) -> BTreeSet<Coord> {
        self.points.iter().map(RoutePoint::coord).collect()
    }

    pub fn visits(&self, c: Coord) -> bool {
        self.points.iter().any(|p| p.coord() == c)
    }

    /// Renders as `[(x, y, t), ...]`, the form used in agent prompts.
    pub fn to_tuple_string(&self) -> String {
        let parts: Vec<String> = self
            .points
            .iter()
            .map(|p| format!("({}, {}, {})", p.x, p.y, p.t))
            .collect();
        format!("[{}]", parts.join(", "))
    }
}

/// Categories of route constraint violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    OriginMismatch,
    DepartMismatch,
    DestinationMismatch,
    LateArrival,
    TimeStep,
    SpeedExceeded,
    OutOfBounds,
}

impl ViolationKind {
    pub fn code(self) -> &'static str {
        match self {
            ViolationKind::OriginMismatch => "origin_mismatch",
            ViolationKind::DepartMismatch => "depart_mismatch",
            ViolationKind::DestinationMismatch => "destination_mismatch",
            ViolationKind::LateArrival => "late_arrival",
            ViolationKind::TimeStep => "time_step",
            ViolationKind::SpeedExceeded => "speed_exceeded",
            ViolationKind::OutOfBounds => "out_of_bounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Index of the first offending point.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RouteValidation {
    pub violations: Vec<Violation>,
}

impl RouteValidation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// Checks every route invariant against a schedule and grid. Reports the
/// first failing point for each violation category.
pub fn validate_route(route: &Route, schedule: &Schedule, grid: &GridMap) -> Result<RouteValidation> {
    let (first, last) = match (route.first(), route.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyRoute),
    };
    let mut found: Vec<Violation> = Vec::new();
    let mut record = |kind: ViolationKind, index: usize| {
        if !found.iter().any(|v| v.kind == kind) {
            found.push(Violation { kind, index });
        }
    };

    if first.coord() != schedule.origin {
        record(ViolationKind::OriginMismatch, 0);
    }
    if first.t != schedule.depart {
        record(ViolationKind::DepartMismatch, 0);
    }
    let last_idx = route.len() - 1;
    if last.coord() != schedule.destination {
        record(ViolationKind::DestinationMismatch, last_idx);
    }
    if last.t > schedule.arrive {
        record(ViolationKind::LateArrival, last_idx);
    }
    for (i, p) in route.points.iter().enumerate() {
        if !grid.contains(p.coord()) {
            record(ViolationKind::OutOfBounds, i);
        }
    }
    for (i, w) in route.points.windows(2).enumerate() {
        if w[1].t != w[0].t + 1 {
            record(ViolationKind::TimeStep, i + 1);
        }
        if manhattan(w[0].coord(), w[1].coord()) > schedule.speed {
            record(ViolationKind::SpeedExceeded, i + 1);
        }
    }
    found.sort_by_key(|v| v.kind);
    Ok(RouteValidation { violations: found })
}

/// Convenience wrapper: true iff the route is non-empty and valid.
pub fn is_valid_route(route: &Route, schedule: &Schedule, grid: &GridMap) -> bool {
    validate_route(route, schedule, grid)
        .map(|v| v.is_valid())
        .unwrap_or(false)
}
