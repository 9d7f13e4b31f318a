use serde::{Deserialize, Serialize};

use crate::domain::{CoverageTensor, LogBase, Route, TaskSpec};
use crate::error::{Error, Result};

/// Positive counts in ascending order. Summing in this order makes results
/// depend only on the multiset of counts, not on where they sit.
fn sorted_counts(tensor: &CoverageTensor) -> Vec<f64> {
    let mut v: Vec<f64> = tensor.counts().iter().copied().filter(|&c| c > 0.0).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Q(A): total sensing volume.
pub fn volume(tensor: &CoverageTensor) -> f64 {
    sorted_counts(tensor).iter().sum()
}

/// Shannon entropy of the normalized spatio-temporal distribution.
pub fn entropy(tensor: &CoverageTensor, base: LogBase) -> Result<f64> {
    let counts = sorted_counts(tensor);
    let q: f64 = counts.iter().sum();
    if q <= 0.0 {
        return Err(Error::EmptyCoverage);
    }
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c / q;
            -p * p.ln()
        })
        .sum();
    Ok(base.from_ln(h.max(0.0)))
}

/// φ(A) = α·E(A) + (1−α)·log Q(A).
pub fn coverage_utility(tensor: &CoverageTensor, spec: &TaskSpec) -> Result<f64> {
    let e = entropy(tensor, spec.log_base)?;
    let q = volume(tensor);
    Ok(spec.alpha * e + (1.0 - spec.alpha) * spec.log(q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub q: f64,
    pub entropy: f64,
    pub phi: f64,
    /// Counts summed over time, row-major `(y * width + x)`.
    pub per_cell_counts: Vec<f64>,
}

impl CoverageReport {
    pub fn from_tensor(tensor: &CoverageTensor, spec: &TaskSpec) -> Result<Self> {
        Ok(Self {
            q: volume(tensor),
            entropy: entropy(tensor, spec.log_base)?,
            phi: coverage_utility(tensor, spec)?,
            per_cell_counts: tensor.spatial_marginal(),
        })
    }

    /// Number of distinct spatial cells with positive coverage.
    pub fn covered_cells(&self) -> usize {
        self.per_cell_counts.iter().filter(|&&c| c > 0.0).count()
    }
}

fn xlogx(c: f64) -> f64 {
    if c > 0.0 {
        c * c.ln()
    } else {
        0.0
    }
}

/// Incrementally maintained coverage of a set of routes.
///
/// Tracks Q and S = Σ c·ln c so that E = ln Q − S/Q. Gains are summed in a
/// canonical order (sorted by count), so two candidates whose count changes
/// form the same multiset produce bit-identical utilities.
#[derive(Debug, Clone)]
pub struct CoverageState {
    tensor: CoverageTensor,
    q: f64,
    s: f64,
    alpha: f64,
    base: LogBase,
}

impl CoverageState {
    pub fn new(spec: &TaskSpec) -> Self {
        Self {
            tensor: CoverageTensor::new(spec.grid.width(), spec.grid.height(), spec.horizon),
            q: 0.0,
            s: 0.0,
            alpha: spec.alpha,
            base: spec.log_base,
        }
    }

    pub fn from_routes<'a>(spec: &TaskSpec, routes: impl IntoIterator<Item = &'a Route>) -> Result<Self> {
        let mut st = Self::new(spec);
        for r in routes {
            st.add(r)?;
        }
        Ok(st)
    }

    pub fn tensor(&self) -> &CoverageTensor {
        &self.tensor
    }

    pub fn volume(&self) -> f64 {
        self.q
    }

    fn phi_of(&self, q: f64, s: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        let e_nat = (q.ln() - s / q).max(0.0);
        self.alpha * self.base.from_ln(e_nat) + (1.0 - self.alpha) * self.base.log(q)
    }

    /// Current φ, with φ(∅) = 0.
    pub fn phi(&self) -> f64 {
        self.phi_of(self.q, self.s)
    }

    pub fn entropy(&self) -> f64 {
        if self.q <= 0.0 {
            return 0.0;
        }
        self.base.from_ln((self.q.ln() - self.s / self.q).max(0.0))
    }

    fn slot_of(&self, p: &crate::domain::RoutePoint) -> Result<usize> {
        self.tensor
            .slot(p.x, p.y, p.t)
            .ok_or(Error::OutOfBounds { x: p.x, y: p.y })
    }

    /// Net per-slot changes of swapping `remove` for `add`, as (count, delta).
    fn changes(&self, remove: Option<&Route>, add: Option<&Route>) -> Result<Vec<(f64, f64)>> {
        let mut deltas: Vec<(usize, f64)> = Vec::new();
        if let Some(r) = remove {
            for p in &r.points {
                deltas.push((self.slot_of(p)?, -1.0));
            }
        }
        if let Some(r) = add {
            for p in &r.points {
                deltas.push((self.slot_of(p)?, 1.0));
            }
        }
        deltas.sort_by_key(|d| d.0);
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(deltas.len());
        let mut i = 0;
        while i < deltas.len() {
            let slot = deltas[i].0;
            let mut d = 0.0;
            while i < deltas.len() && deltas[i].0 == slot {
                d += deltas[i].1;
                i += 1;
            }
            if d != 0.0 {
                merged.push((self.tensor.counts()[slot], d));
            }
        }
        merged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Ok(merged)
    }

    fn phi_after(&self, remove: Option<&Route>, add: Option<&Route>) -> Result<f64> {
        let changes = self.changes(remove, add)?;
        let mut ds = 0.0;
        let mut dq = 0.0;
        for (c, d) in changes {
            if c + d < 0.0 {
                return Err(Error::Invalid("route removal exceeds coverage".into()));
            }
            ds += xlogx(c + d) - xlogx(c);
            dq += d;
        }
        Ok(self.phi_of(self.q + dq, self.s + ds))
    }

    /// Δφ of adding a route, taking φ(∅) = 0.
    pub fn gain(&self, route: &Route) -> Result<f64> {
        Ok(self.phi_after(None, Some(route))? - self.phi())
    }

    /// Δφ of replacing `old` (already counted) with `new`.
    pub fn replacement_gain(&self, old: &Route, new: &Route) -> Result<f64> {
        Ok(self.phi_after(Some(old), Some(new))? - self.phi())
    }

    /// φ after hypothetically removing a counted route.
    pub fn phi_without(&self, route: &Route) -> Result<f64> {
        self.phi_after(Some(route), None)
    }

    pub fn add(&mut self, route: &Route) -> Result<()> {
        self.commit(None, Some(route))
    }

    pub fn remove(&mut self, route: &Route) -> Result<()> {
        self.commit(Some(route), None)
    }

    pub fn replace(&mut self, old: &Route, new: &Route) -> Result<()> {
        self.commit(Some(old), Some(new))
    }

    fn commit(&mut self, remove: Option<&Route>, add: Option<&Route>) -> Result<()> {
        let changes = self.changes(remove, add)?;
        for (c, d) in &changes {
            self.s += xlogx(c + d) - xlogx(*c);
            self.q += d;
        }
        if let Some(r) = remove {
            self.tensor.remove_route(r)?;
        }
        if let Some(r) = add {
            self.tensor.add_route(r)?;
        }
        Ok(())
    }

    /// Count currently recorded at a spatio-temporal slot.
    pub fn count_at(&self, x: u32, y: u32, t: u32) -> f64 {
        self.tensor.get(x, y, t)
    }
}
