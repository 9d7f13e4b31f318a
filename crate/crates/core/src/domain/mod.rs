//! Shared domain types: grid, participants, routes, coverage tensor and the
//! task settings. No algorithms live here beyond invariant checks.

mod grid;
mod participant;
mod route;
mod spec;
mod tensor;

use std::collections::BTreeSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use grid::{manhattan, CellAttributes, Coord, GridMap, LandUse, LANDUSE_CATEGORIES};
pub use participant::{AgeGroup, Archetype, EconomicStatus, Gender, Participant, ParticipantProfile, Schedule};
pub use route::{is_valid_route, validate_route, Route, RoutePoint, RouteValidation, Violation, ViolationKind};
pub use spec::{
    DisturbanceEvent, DisturbanceKind, LogBase, TaskSpec, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_LAMBDA, DEFAULT_MU,
    DEFAULT_NEGOTIATION_ROUNDS, DEFAULT_OVERLAP_THRESHOLD, DEFAULT_REFINE_ITERS, DEFAULT_TIE_EPSILON, PAIR_ATTEMPT_CAP,
};
pub use tensor::CoverageTensor;

use crate::error::{Error, Result};

/// Version tag carried by every JSON artifact.
pub const FORMAT_TAG: &str = "sense-forge/v1";

/// A planning problem: task setting plus candidate participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub spec: TaskSpec,
    pub participants: Vec<Participant>,
}

impl Instance {
    pub fn new(spec: TaskSpec, participants: Vec<Participant>) -> Result<Self> {
        let inst = Self { spec, participants };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let mut ids = BTreeSet::new();
        for p in &self.participants {
            if !ids.insert(p.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate participant id {}", p.id)));
            }
            self.spec.grid.check_contains(p.origin())?;
            self.spec.grid.check_contains(p.destination())?;
        }
        Ok(())
    }

    pub fn participant(&self, id: &str) -> Option<&Participant> {
        self.participants.iter().find(|p| p.id == id)
    }

    pub fn empty_tensor(&self) -> CoverageTensor {
        CoverageTensor::new(self.spec.grid.width(), self.spec.grid.height(), self.spec.horizon)
    }
}

/// JSON envelope `{"format": "sense-forge/v1", ...body}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub format: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Self {
            format: FORMAT_TAG.to_string(),
            body,
        }
    }
}

pub fn to_json<T: Serialize>(body: &T) -> Result<String> {
    #[derive(Serialize)]
    struct Ref<'a, T> {
        format: &'static str,
        #[serde(flatten)]
        body: &'a T,
    }
    let mut s = serde_json::to_string_pretty(&Ref {
        format: FORMAT_TAG,
        body,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let v: Versioned<T> = serde_json::from_str(text)?;
    if v.format != FORMAT_TAG {
        return Err(Error::Invalid(format!(
            "unsupported format `{}`, expected {FORMAT_TAG}",
            v.format
        )));
    }
    Ok(v.body)
}

pub fn write_json<T: Serialize>(path: &Path, body: &T) -> Result<()> {
    std::fs::write(path, to_json(body)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    from_json(&text)
}
