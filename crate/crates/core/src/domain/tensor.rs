use serde::{Deserialize, Serialize};

use super::route::Route;
use crate::error::{Error, Result};

/// Dense I×J×(T+1) array of sensing counts. Timestamps run `0..=horizon`,
/// so the time axis has `horizon + 1` slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTensor {
    width: u32,
    height: u32,
    steps: u32,
    counts: Vec<f64>,
}

impl CoverageTensor {
    pub fn new(width: u32, height: u32, horizon: u32) -> Self {
        let steps = horizon + 1;
        Self {
            width,
            height,
            steps,
            counts: vec![0.0; width as usize * height as usize * steps as usize],
        }
    }

    pub fn dims(&self) -> (u32, u32, u32) {
        (self.width, self.height, self.steps)
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn slot(&self, x: u32, y: u32, t: u32) -> Option<usize> {
        if x < self.width && y < self.height && t < self.steps {
            Some((t as usize * self.height as usize + y as usize) * self.width as usize + x as usize)
        } else {
            None
        }
    }

    pub fn get(&self, x: u32, y: u32, t: u32) -> f64 {
        self.slot(x, y, t).map_or(0.0, |i| self.counts[i])
    }

    /// Adds one unit per route point.
    pub fn add_route(&mut self, route: &Route) -> Result<()> {
        self.apply(route, 1.0)
    }

    pub fn remove_route(&mut self, route: &Route) -> Result<()> {
        self.apply(route, -1.0)
    }

    fn apply(&mut self, route: &Route, sign: f64) -> Result<()> {
        for p in &route.points {
            let i = self.slot(p.x, p.y, p.t).ok_or(Error::OutOfBounds { x: p.x, y: p.y })?;
            let v = self.counts[i] + sign;
            if v < 0.0 {
                return Err(Error::Invalid("coverage count would become negative".into()));
            }
            self.counts[i] = v;
        }
        Ok(())
    }

    pub fn from_routes<'a>(
        width: u32,
        height: u32,
        horizon: u32,
        routes: impl IntoIterator<Item = &'a Route>,
    ) -> Result<Self> {
        let mut t = Self::new(width, height, horizon);
        for r in routes {
            t.add_route(r)?;
        }
        Ok(t)
    }

    /// Element-wise sum; dimensions must match.
    pub fn add(&mut self, other: &CoverageTensor) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Invalid("tensor dimensions differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Sets a raw count; used to build arbitrary tensors in tests and tools.
    pub fn set(&mut self, x: u32, y: u32, t: u32, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Invalid(format!("count must be >= 0, got {value}")));
        }
        let i = self.slot(x, y, t).ok_or(Error::OutOfBounds { x, y })?;
        self.counts[i] = value;
        Ok(())
    }

    /// Marginal over time, row-major `(y * width + x)`.
    pub fn spatial_marginal(&self) -> Vec<f64> {
        let plane = self.width as usize * self.height as usize;
        let mut out = vec![0.0; plane];
        for (i, c) in self.counts.iter().enumerate() {
            out[i % plane] += c;
        }
        out
    }
}
