use serde::{Deserialize, Serialize};

use super::grid::{Coord, GridMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Base10,
}

impl LogBase {
    pub fn log(self, v: f64) -> f64 {
        match self {
            LogBase::Natural => v.ln(),
            LogBase::Base10 => v.log10(),
        }
    }

    /// Converts a natural-log quantity into this base.
    pub fn from_ln(self, v: f64) -> f64 {
        match self {
            LogBase::Natural => v,
            LogBase::Base10 => v / std::f64::consts::LN_10,
        }
    }
}

/// Task setting: grid, horizon, budget and every scalar weight.
///
/// Fields are public so experiment variants can tweak a copy; call
/// [`TaskSpec::validate`] after editing. Deserialization validates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaskSpecRepr")]
pub struct TaskSpec {
    pub grid: GridMap,
    /// Number of timesteps T; valid timestamps are `0..=horizon`.
    pub horizon: u32,
    pub interval_minutes: u32,
    pub budget: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    #[serde(rename = "lambda_")]
    pub lambda: f64,
    pub mu: f64,
    pub overlap_threshold: f64,
    pub tie_epsilon: f64,
    pub max_negotiation_rounds: u32,
    /// `None` means |selected| choose 2, capped at 20.
    pub max_pair_attempts: Option<u32>,
    pub max_refine_iters: u32,
    pub log_base: LogBase,
}

#[derive(Deserialize)]
struct TaskSpecRepr {
    grid: GridMap,
    horizon: u32,
    interval_minutes: u32,
    budget: f64,
    alpha: f64,
    beta: f64,
    eta: f64,
    #[serde(rename = "lambda_")]
    lambda: f64,
    mu: f64,
    overlap_threshold: f64,
    tie_epsilon: f64,
    max_negotiation_rounds: u32,
    max_pair_attempts: Option<u32>,
    max_refine_iters: u32,
    #[serde(default)]
    log_base: LogBase,
}

impl TryFrom<TaskSpecRepr> for TaskSpec {
    type Error = Error;

    fn try_from(r: TaskSpecRepr) -> Result<Self> {
        let spec = TaskSpec {
            grid: r.grid,
            horizon: r.horizon,
            interval_minutes: r.interval_minutes,
            budget: r.budget,
            alpha: r.alpha,
            beta: r.beta,
            eta: r.eta,
            lambda: r.lambda,
            mu: r.mu,
            overlap_threshold: r.overlap_threshold,
            tie_epsilon: r.tie_epsilon,
            max_negotiation_rounds: r.max_negotiation_rounds,
            max_pair_attempts: r.max_pair_attempts,
            max_refine_iters: r.max_refine_iters,
            log_base: r.log_base,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_ETA: f64 = 1.0;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_MU: f64 = 0.2;
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.01;
pub const DEFAULT_TIE_EPSILON: f64 = 1e-6;
pub const DEFAULT_NEGOTIATION_ROUNDS: u32 = 3;
pub const DEFAULT_REFINE_ITERS: u32 = 3;
pub const PAIR_ATTEMPT_CAP: u32 = 20;

impl TaskSpec {
    /// A spec with default weights.
    pub fn new(grid: GridMap, horizon: u32, interval_minutes: u32, budget: f64) -> Result<Self> {
        let spec = Self {
            grid,
            horizon,
            interval_minutes,
            budget,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            eta: DEFAULT_ETA,
            lambda: DEFAULT_LAMBDA,
            mu: DEFAULT_MU,
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            tie_epsilon: DEFAULT_TIE_EPSILON,
            max_negotiation_rounds: DEFAULT_NEGOTIATION_ROUNDS,
            max_pair_attempts: None,
            max_refine_iters: DEFAULT_REFINE_ITERS,
            log_base: LogBase::Natural,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} must be >= 0, got {v}")))
            }
        };
        if self.horizon == 0 {
            return Err(Error::Invalid("horizon must be positive".into()));
        }
        if self.interval_minutes == 0 {
            return Err(Error::Invalid("interval_minutes must be positive".into()));
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Error::Invalid(format!("budget must be positive, got {}", self.budget)));
        }
        unit("alpha", self.alpha)?;
        unit("beta", self.beta)?;
        unit("lambda_", self.lambda)?;
        unit("overlap_threshold", self.overlap_threshold)?;
        nonneg("eta", self.eta)?;
        nonneg("mu", self.mu)?;
        nonneg("tie_epsilon", self.tie_epsilon)?;
        if self.max_negotiation_rounds == 0 {
            return Err(Error::Invalid("max_negotiation_rounds must be >= 1".into()));
        }
        Ok(())
    }

    /// Resolves N_pairs for a given number of selected participants.
    pub fn pair_attempts(&self, selected: usize) -> u32 {
        match self.max_pair_attempts {
            Some(n) => n,
            None => {
                let pairs = selected * selected.saturating_sub(1) / 2;
                (pairs as u32).min(PAIR_ATTEMPT_CAP)
            }
        }
    }

    pub fn log(&self, v: f64) -> f64 {
        self.log_base.log(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    CellBlocked,
    PriorityRegion,
}

/// A broadcast change to the sensing environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEvent {
    pub kind: DisturbanceKind,
    pub cell: Coord,
    pub time_window: [u32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bonus: Option<f64>,
}

impl DisturbanceEvent {
    pub fn blocked(cell: Coord, from: u32, to: u32) -> Self {
        Self {
            kind: DisturbanceKind::CellBlocked,
            cell,
            time_window: [from, to],
            bonus: None,
        }
    }

    pub fn priority(cell: Coord, from: u32, to: u32, bonus: f64) -> Self {
        Self {
            kind: DisturbanceKind::PriorityRegion,
            cell,
            time_window: [from, to],
            bonus: Some(bonus),
        }
    }

    pub fn validate(&self, spec: &TaskSpec) -> Result<()> {
        let [from, to] = self.time_window;
        if from > to || to > spec.horizon {
            return Err(Error::Invalid(format!(
                "time window [{from}, {to}] outside [0, {}]",
                spec.horizon
            )));
        }
        spec.grid.check_contains(self.cell)?;
        match (self.kind, self.bonus) {
            (DisturbanceKind::PriorityRegion, Some(b)) if b.is_finite() && b >= 0.0 => Ok(()),
            (DisturbanceKind::CellBlocked, None) => Ok(()),
            _ => Err(Error::Invalid(
                "bonus must be present iff kind is priority_region".into(),
            )),
        }
    }

    pub fn covers(&self, c: Coord, t: u32) -> bool {
        c == self.cell && (self.time_window[0]..=self.time_window[1]).contains(&t)
    }
}
