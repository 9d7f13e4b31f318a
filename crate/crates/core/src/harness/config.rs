use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instance-generation settings. The named presets reproduce the six
/// dataset/scale configurations; `custom` is anything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub n_participants: usize,
    pub budget: f64,
    pub horizon_minutes: u32,
    pub interval_minutes: u32,
    /// Whether cells carry crime counts; Grab-style presets have none.
    pub crime: bool,
    /// Inclusive range of integer speeds (cells per step).
    pub speed_range: (u32, u32),
    /// Range of participant costs.
    pub cost_range: (f64, f64),
}

pub const PRESET_NAMES: [&str; 6] = [
    "tdrive_small",
    "tdrive_medium",
    "tdrive_large",
    "grab_small",
    "grab_medium",
    "grab_large",
];

impl InstanceConfig {
    fn make(name: &str, (width, height): (u32, u32), n: usize, budget: f64, horizon: u32, interval: u32) -> Self {
        Self {
            name: name.to_string(),
            width,
            height,
            n_participants: n,
            budget,
            horizon_minutes: horizon,
            interval_minutes: interval,
            crime: name.starts_with("tdrive"),
            speed_range: (1, 3),
            cost_range: (1.0, 5.0),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "tdrive_small" => Self::make(name, (8, 8), 20, 40.0, 120, 15),
            "tdrive_medium" => Self::make(name, (16, 16), 40, 60.0, 240, 15),
            "tdrive_large" => Self::make(name, (32, 32), 60, 100.0, 360, 15),
            "grab_small" => Self::make(name, (8, 4), 15, 40.0, 40, 5),
            "grab_medium" => Self::make(name, (16, 8), 30, 60.0, 80, 5),
            "grab_large" => Self::make(name, (32, 16), 45, 100.0, 160, 5),
            other => {
                return Err(Error::Invalid(format!(
                    "unknown preset `{other}` (known: {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        })
    }

    /// Number of timesteps T = H / interval.
    pub fn horizon_steps(&self) -> u32 {
        self.horizon_minutes / self.interval_minutes.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::DegenerateConfig("grid must be non-empty".into()));
        }
        if self.interval_minutes == 0 || self.horizon_steps() == 0 {
            return Err(Error::DegenerateConfig(format!(
                "horizon of {} min holds no {}-min step",
                self.horizon_minutes, self.interval_minutes
            )));
        }
        let (lo, hi) = self.speed_range;
        if lo == 0 || lo > hi {
            return Err(Error::DegenerateConfig(format!("bad speed range {lo}..={hi}")));
        }
        let (clo, chi) = self.cost_range;
        if !(clo > 0.0 && clo <= chi && chi.is_finite()) {
            return Err(Error::DegenerateConfig(format!("bad cost range {clo}..{chi}")));
        }
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return Err(Error::DegenerateConfig(format!(
                "budget must be positive, got {}",
                self.budget
            )));
        }
        Ok(())
    }
}
