//! Scalar quality measures: coverage utility, path satisfaction, overlap and
//! fairness statistics.

mod coverage;
mod fairness;
mod satisfaction;

pub use coverage::{coverage_utility, entropy, volume, CoverageReport, CoverageState};
pub use fairness::{fairness_stats, FairnessStats};
pub use satisfaction::{
    cosine, pairwise_overlap_stats, path_satisfaction, risk, route_landuse_histogram, route_overlap,
};
