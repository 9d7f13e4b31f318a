//! Planning engine for participatory urban sensing.
//!
//! Participants with fixed itineraries are recruited under a budget; each
//! sensing step adds one unit to a spatio-temporal coverage tensor. The
//! crate provides the coverage metrics, six baseline planners, a three-stage
//! pipeline (preference-aware routing, fairness-aware selection, negotiated
//! refinement) and an experiment harness.

pub mod baselines;
pub mod domain;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod pipeline;
pub mod policy;
pub mod routing;

pub use domain::*;
pub use error::{Error, Result};
