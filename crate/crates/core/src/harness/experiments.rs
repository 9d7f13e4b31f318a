//! Experiment runners and their CSV reports.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_instance, InstanceConfig};
use crate::baselines::{plan_by_key, PlanResult, METHOD_KEYS};
use crate::domain::Instance;
use crate::error::{Error, Result};
use crate::pipeline::{run_pipeline_with, FirstListed, HistoryTable, PhaseMetrics, PipelineOptions, RouteSource};
use crate::policy::Policies;

/// Method key of the full three-stage pipeline.
pub const PIPELINE_KEY: &str = "mapus";

/// Every key accepted by [`run_method`].
pub fn method_keys() -> Vec<&'static str> {
    METHOD_KEYS.iter().copied().chain([PIPELINE_KEY]).collect()
}

pub fn run_method(key: &str, instance: &Instance, seed: u64, policies: &Policies) -> Result<PlanResult> {
    if key == PIPELINE_KEY {
        let history = HistoryTable::from_participants(&instance.participants);
        run_pipeline_with(instance, policies, &history, &PipelineOptions::default()).map(|o| o.plan)
    } else {
        plan_by_key(key, instance, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub config: String,
    pub method: String,
    pub seed: u64,
    pub coverage: f64,
    pub pss: f64,
    pub runtime_ms: f64,
    /// Error code of a failed run; metrics are 0 then.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config: String,
    pub method: String,
    pub runs: usize,
    pub failed: usize,
    pub coverage_mean: f64,
    pub coverage_var: f64,
    pub pss_mean: f64,
    pub pss_var: f64,
    pub runtime_ms_mean: f64,
}

/// Mean and population variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    // Identical values: avoid rounding residue in the mean.
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentReport {
    /// Per (config, method) statistics over successful rows, in first-seen
    /// order.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut order: Vec<(String, String)> = Vec::new();
        let mut groups: BTreeMap<(String, String), Vec<&ExperimentRow>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.config.clone(), r.method.clone());
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rows = &groups[&key];
                let ok: Vec<&&ExperimentRow> = rows.iter().filter(|r| r.error.is_none()).collect();
                let pick = |f: fn(&ExperimentRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
                let (coverage_mean, coverage_var) = mean_var(&pick(|r| r.coverage));
                let (pss_mean, pss_var) = mean_var(&pick(|r| r.pss));
                let (runtime_ms_mean, _) = mean_var(&pick(|r| r.runtime_ms));
                Aggregate {
                    config: key.0,
                    method: key.1,
                    runs: rows.len(),
                    failed: rows.len() - ok.len(),
                    coverage_mean,
                    coverage_var,
                    pss_mean,
                    pss_var,
                    runtime_ms_mean,
                }
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.rows)
    }

    pub fn write_aggregate_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.aggregates())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Ok(Self { rows: read_rows(path)? })
    }
}

pub(crate) fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Seed of one (instance seed, method) cell.
fn cell_seed(seed: u64, method_index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(method_index as u64)
}

fn timed(config: &str, method: &str, seed: u64, run: impl FnOnce() -> Result<PlanResult>) -> ExperimentRow {
    let start = Instant::now();
    let result = run();
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(plan) => ExperimentRow {
            config: config.to_string(),
            method: method.to_string(),
            seed,
            coverage: plan.phi(),
            pss: plan.mean_pss,
            runtime_ms,
            error: None,
        },
        Err(e) => {
            log::warn!("{config}/{method}/seed {seed} failed: {e}");
            ExperimentRow {
                config: config.to_string(),
                method: method.to_string(),
                seed,
                coverage: 0.0,
                pss: 0.0,
                runtime_ms,
                error: Some(e.code().to_string()),
            }
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))
}

/// Runs every method on every (config, seed) instance. Failed runs become
/// rows with an error code instead of aborting the sweep. `jobs` = 0 uses
/// all cores.
pub fn run_comparison(
    configs: &[InstanceConfig],
    methods: &[&str],
    seeds: &[u64],
    policies: &Policies,
    jobs: usize,
) -> Result<ExperimentReport> {
    let known = method_keys();
    if let Some(bad) = methods.iter().find(|m| !known.contains(m)) {
        return Err(Error::UnknownMethod(bad.to_string()));
    }
    let instances: Vec<(&InstanceConfig, u64, Arc<Instance>)> = configs
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .map(|(c, s)| Ok((c, s, Arc::new(generate_instance(c, s)?))))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..methods.len()).map(move |m| (i, m)))
        .collect();
    let rows = pool(jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(i, m)| {
                let (config, seed, inst) = &instances[i];
                timed(&config.name, methods[m], *seed, || {
                    run_method(methods[m], inst, cell_seed(*seed, m), policies)
                })
            })
            .collect()
    });
    Ok(ExperimentReport { rows })
}

pub const ABLATION_VARIANTS: [&str; 4] = ["full", "wo_prg", "wo_fps", "wo_nrr"];

/// Spec, policies and options of one ablation variant.
pub fn ablation_variant(
    variant: &str,
    instance: &Instance,
    policies: &Policies,
) -> Result<(Instance, Policies, PipelineOptions)> {
    let mut inst = instance.clone();
    let mut pol = policies.clone();
    let mut opts = PipelineOptions::default();
    match variant {
        "full" => {}
        "wo_prg" => opts.route_source = RouteSource::Tvpg,
        "wo_fps" => {
            inst.spec.beta = 1.0;
            inst.spec.tie_epsilon = 0.0;
            pol.tiebreak = Arc::new(FirstListed);
        }
        "wo_nrr" => inst.spec.max_pair_attempts = Some(0),
        other => return Err(Error::UnknownMethod(other.to_string())),
    }
    Ok((inst, pol, opts))
}

/// The full pipeline and its three single-stage ablations on each seed.
pub fn run_ablation(config: &InstanceConfig, seeds: &[u64], policies: &Policies) -> Result<ExperimentReport> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let instance = generate_instance(config, seed)?;
        let history = HistoryTable::from_participants(&instance.participants);
        for variant in ABLATION_VARIANTS {
            let (inst, pol, opts) = ablation_variant(variant, &instance, policies)?;
            rows.push(timed(&config.name, variant, seed, || {
                run_pipeline_with(&inst, &pol, &history, &opts).map(|o| o.plan)
            }));
        }
    }
    Ok(ExperimentReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationRow {
    pub instance: u64,
    pub phase: String,
    pub overlap_pct: f64,
    pub coverage: f64,
    pub entropy: f64,
    pub count: f64,
    pub pss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NegotiationReport {
    pub rows: Vec<NegotiationRow>,
}

impl NegotiationReport {
    pub fn read_csv(path: &Path) -> Result<Self> {
        Ok(Self { rows: read_rows(path)? })
    }

    /// Mean of each metric per phase ("before", then "after").
    pub fn averages(&self) -> Vec<NegotiationRow> {
        ["before", "after"]
            .iter()
            .map(|phase| {
                let rs: Vec<&NegotiationRow> = self.rows.iter().filter(|r| r.phase == *phase).collect();
                let avg = |f: fn(&NegotiationRow) -> f64| mean_var(&rs.iter().map(|r| f(r)).collect::<Vec<_>>()).0;
                NegotiationRow {
                    instance: rs.len() as u64,
                    phase: phase.to_string(),
                    overlap_pct: avg(|r| r.overlap_pct),
                    coverage: avg(|r| r.coverage),
                    entropy: avg(|r| r.entropy),
                    count: avg(|r| r.count),
                    pss: avg(|r| r.pss),
                }
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.rows)
    }
}

fn negotiation_row(instance: u64, phase: &str, m: PhaseMetrics) -> NegotiationRow {
    NegotiationRow {
        instance,
        phase: phase.to_string(),
        overlap_pct: m.overlap_pct,
        coverage: m.coverage,
        entropy: m.entropy,
        count: m.count,
        pss: m.pss,
    }
}

/// Plan metrics right before and right after negotiation, per seed.
pub fn run_negotiation_effect(
    config: &InstanceConfig,
    seeds: &[u64],
    policies: &Policies,
) -> Result<NegotiationReport> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let instance = generate_instance(config, seed)?;
        let history = HistoryTable::from_participants(&instance.participants);
        let out = run_pipeline_with(&instance, policies, &history, &PipelineOptions::default())?;
        rows.push(negotiation_row(seed, "before", PhaseMetrics::of(&out.pre_negotiation)?));
        rows.push(negotiation_row(seed, "after", PhaseMetrics::of(&out.plan)?));
    }
    Ok(NegotiationReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> InstanceConfig {
        let mut c = InstanceConfig::preset("grab_small").unwrap();
        c.n_participants = 6;
        c
    }

    #[test]
    fn comparison_bookkeeping() {
        let seeds: Vec<u64> = (0..3).collect();
        let r = run_comparison(&[tiny()], &["tvpg", PIPELINE_KEY], &seeds, &Policies::heuristic(), 1).unwrap();
        assert_eq!(r.rows.len(), 6);
        let agg = r.aggregates();
        assert_eq!(agg.len(), 2);
        let tvpg: Vec<f64> = r
            .rows
            .iter()
            .filter(|x| x.method == "tvpg")
            .map(|x| x.coverage)
            .collect();
        assert!((agg[0].coverage_mean - tvpg.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_seed_has_zero_variance() {
        let r = run_comparison(&[tiny()], &["tvpg"], &[5, 5, 5], &Policies::heuristic(), 1).unwrap();
        assert_eq!(r.aggregates()[0].coverage_var, 0.0);
    }

    #[test]
    fn unknown_method_is_rejected() {
        let e = run_comparison(&[tiny()], &["nosuch"], &[1], &Policies::heuristic(), 1).unwrap_err();
        assert_eq!(e.code(), "unknown_method");
    }

    #[test]
    fn without_negotiation_phases_match() {
        let inst = generate_instance(&tiny(), 3).unwrap();
        let (i, p, o) = ablation_variant("wo_nrr", &inst, &Policies::heuristic()).unwrap();
        let out = run_pipeline_with(&i, &p, &HistoryTable::new(), &o).unwrap();
        assert_eq!(out.plan, out.pre_negotiation);
    }
}
