use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::PlanResult;
use crate::domain::{read_json, write_json, Instance};
use crate::error::{Error, Result};

/// A plan together with the instance it was made for, so later steps
/// (negotiation, disturbance replay) need only this one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanArtifact {
    /// Method key, with `+negotiate` / `+disturb` appended by later steps.
    pub method: String,
    pub seed: u64,
    pub instance: Instance,
    pub plan: PlanResult,
}

impl PlanArtifact {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Reads and rechecks a plan file: the instance must validate and the
    /// stored metrics must match a recomputation from the routes.
    pub fn read(path: &Path) -> Result<Self> {
        let a: Self = read_json(path)?;
        a.instance.validate()?;
        let again = PlanResult::new(&a.instance, a.plan.selected.clone(), a.plan.routes.clone())?;
        if again.report.map(|r| r.q) != a.plan.report.as_ref().map(|r| r.q) {
            return Err(Error::Invalid(format!(
                "{}: stored coverage does not match the routes",
                path.display()
            )));
        }
        Ok(a)
    }
}
