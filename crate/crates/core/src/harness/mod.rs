//! Instance generation, data ingestion and experiment runners.

mod artifact;
mod config;
mod experiments;
mod fairness;
mod generate;
mod load;

pub use artifact::PlanArtifact;
pub use config::{InstanceConfig, PRESET_NAMES};
pub use experiments::{
    ablation_variant, mean_var, method_keys, run_ablation, run_comparison, run_method, run_negotiation_effect,
    Aggregate, ExperimentReport, ExperimentRow, NegotiationReport, NegotiationRow, ABLATION_VARIANTS, PIPELINE_KEY,
};
pub use fairness::{run_fairness, FairnessConfig, FairnessReport, Strategy, StrategyResult};
pub use generate::{
    archetype_base, generate_instance, sample_profile, sample_profile_seeded, CRIME_EXCLUSION_THRESHOLD,
};
pub use load::{load_attributes, load_trajectories, TrajectoryLoad, TrajectoryOptions, LANDUSE_REPAIR_TOLERANCE};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_timing() {
        assert_eq!(InstanceConfig::preset("tdrive_small").unwrap().horizon_steps(), 8);
        assert_eq!(InstanceConfig::preset("grab_small").unwrap().horizon_steps(), 8);
    }

    #[test]
    fn generation_is_seeded() {
        let c = InstanceConfig::preset("tdrive_small").unwrap();
        let a = generate_instance(&c, 7).unwrap();
        assert_eq!(a.participants.len(), 20);
        assert_eq!((a.spec.grid.width(), a.spec.grid.height(), a.spec.horizon), (8, 8, 8));
        assert_eq!(
            crate::to_json(&a).unwrap(),
            crate::to_json(&generate_instance(&c, 7).unwrap()).unwrap()
        );
        assert!(a.participants.iter().all(|p| (1.0..=5.0).contains(&p.cost)));
    }

    #[test]
    fn degenerate_horizon() {
        let mut c = InstanceConfig::preset("grab_small").unwrap();
        c.horizon_minutes = 4;
        assert_eq!(generate_instance(&c, 1).unwrap_err().code(), "degenerate_config");
    }

    #[test]
    fn profiles() {
        use crate::domain::{Archetype, LandUse};
        let eco = archetype_base(Archetype::EcoEnthusiast);
        let top = (0..6).max_by(|&a, &b| eco[a].total_cmp(&eco[b])).unwrap();
        assert_eq!(top, LandUse::Vegetation.index());
        assert!(archetype_base(Archetype::Explorer)
            .iter()
            .all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
        for seed in 0..50 {
            let (p, pref) = sample_profile_seeded(seed);
            assert!((pref.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(p.age_group, crate::domain::AgeGroup::from_age(p.age));
        }
    }
}
