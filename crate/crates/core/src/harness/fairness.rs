//! Long-run selection fairness: a fixed worker pool recruited for a
//! sequence of tasks, with each strategy keeping its own history.

use std::collections::BTreeMap;
use std::path::Path;

use rand::prelude::*;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::experiments::{mean_var, write_rows};
use super::generate::{participant_id, random_grid, random_schedule, sample_profile};
use super::InstanceConfig;
use crate::domain::{Participant, ParticipantProfile, Route, TaskSpec, LANDUSE_CATEGORIES};
use crate::error::{Error, Result};
use crate::metrics::{fairness_stats, path_satisfaction, CoverageState, FairnessStats};
use crate::pipeline::{generate_route, select_participants, Candidate, HistoryTable};
use crate::policy::Policies;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Uniform random.
    Ur,
    /// Least selected so far.
    Ls,
    /// Coverage greedy.
    Cg,
    /// Fairness-aware selection.
    Fps,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Ur, Strategy::Ls, Strategy::Cg, Strategy::Fps];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ur => "ur",
            Strategy::Ls => "ls",
            Strategy::Cg => "cg",
            Strategy::Fps => "fps",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessConfig {
    pub n_workers: usize,
    pub n_tasks: usize,
    pub k_per_task: usize,
    pub seed: u64,
    /// Grid and timing of every task; participant count and budget are
    /// taken from the fields above (unit costs, budget k).
    pub task: InstanceConfig,
}

impl FairnessConfig {
    pub fn new(seed: u64) -> Self {
        let mut task = InstanceConfig::preset("tdrive_medium").expect("preset exists");
        task.name = "fairness".into();
        Self {
            n_workers: 30,
            n_tasks: 60,
            k_per_task: 20,
            seed,
            task,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: Strategy,
    pub counts: BTreeMap<String, u64>,
    pub stats: FairnessStats,
    pub mean_coverage: f64,
    pub mean_pss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub seed: u64,
    pub strategies: Vec<StrategyResult>,
}

#[derive(Serialize)]
struct CountRow<'a> {
    strategy: &'a str,
    worker_id: &'a str,
    count: u64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    strategy: &'a str,
    mean_count: f64,
    variance: f64,
    gini: f64,
    coverage: f64,
    pss: f64,
}

#[derive(Serialize)]
struct CdfRow<'a> {
    strategy: &'a str,
    count: u64,
    cdf: f64,
}

impl FairnessReport {
    pub fn get(&self, s: Strategy) -> &StrategyResult {
        self.strategies
            .iter()
            .find(|r| r.strategy == s)
            .expect("every strategy is run")
    }

    /// Per-worker counts: `strategy,worker_id,count`.
    pub fn write_counts_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<CountRow> = self
            .strategies
            .iter()
            .flat_map(|r| {
                r.counts.iter().map(|(id, &count)| CountRow {
                    strategy: r.strategy.name(),
                    worker_id: id,
                    count,
                })
            })
            .collect();
        write_rows(path, &rows)
    }

    /// One line per strategy with count statistics, coverage and PSS.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<SummaryRow> = self
            .strategies
            .iter()
            .map(|r| SummaryRow {
                strategy: r.strategy.name(),
                mean_count: r.stats.mean,
                variance: r.stats.variance,
                gini: r.stats.gini,
                coverage: r.mean_coverage,
                pss: r.mean_pss,
            })
            .collect();
        write_rows(path, &rows)
    }

    pub fn write_cdf_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<CdfRow> = self
            .strategies
            .iter()
            .flat_map(|r| {
                r.stats.cdf.iter().map(|&(count, cdf)| CdfRow {
                    strategy: r.strategy.name(),
                    count,
                    cdf,
                })
            })
            .collect();
        write_rows(path, &rows)
    }
}

/// Worker identities and preferences, fixed across tasks.
struct Worker {
    id: String,
    profile: ParticipantProfile,
    preference: [f64; LANDUSE_CATEGORIES],
}

/// Greedy on marginal coverage alone; ties keep input order.
fn coverage_greedy(cands: &[Candidate<'_>], k: usize, spec: &TaskSpec) -> Result<Vec<usize>> {
    let mut state = CoverageState::new(spec);
    let mut taken = vec![false; cands.len()];
    let mut picks = Vec::new();
    while picks.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in cands.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let g = state.gain(c.route)?;
            if best.is_none_or(|b| g > b.1) {
                best = Some((i, g));
            }
        }
        let Some((i, _)) = best else { break };
        state.add(cands[i].route)?;
        taken[i] = true;
        picks.push(i);
    }
    Ok(picks)
}

pub fn run_fairness(config: &FairnessConfig, policies: &Policies) -> Result<FairnessReport> {
    if config.k_per_task > config.n_workers {
        return Err(Error::Invalid(format!(
            "k_per_task {} exceeds the pool of {}",
            config.k_per_task, config.n_workers
        )));
    }
    config.task.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let grid = random_grid(&config.task, &mut rng)?;
    let workers: Vec<Worker> = (0..config.n_workers)
        .map(|i| {
            let (profile, preference) = sample_profile(&mut rng);
            Worker {
                id: participant_id(i),
                profile,
                preference,
            }
        })
        .collect();
    let spec = TaskSpec::new(
        grid,
        config.task.horizon_steps(),
        config.task.interval_minutes,
        config.k_per_task as f64,
    )?;

    let mut histories: BTreeMap<Strategy, HistoryTable> =
        Strategy::ALL.iter().map(|&s| (s, HistoryTable::new())).collect();
    let mut coverage: BTreeMap<Strategy, Vec<f64>> = BTreeMap::new();
    let mut pss: BTreeMap<Strategy, Vec<f64>> = BTreeMap::new();

    for task in 0..config.n_tasks {
        // Itineraries change from task to task; identities do not.
        let participants: Vec<Participant> = workers
            .iter()
            .map(|w| {
                let s = random_schedule(&config.task, &mut rng)?;
                Participant::new(w.id.clone(), s, 1.0, w.preference, 0, w.profile.clone())
            })
            .collect::<Result<_>>()?;
        let routes: Vec<Route> = participants
            .iter()
            .map(|p| generate_route(p, &spec, policies.refine.as_ref(), ""))
            .collect::<Result<_>>()?;
        let cands: Vec<Candidate<'_>> = participants
            .iter()
            .zip(&routes)
            .map(|(participant, route)| Candidate { participant, route })
            .collect();

        for strategy in Strategy::ALL {
            let history = &histories[&strategy];
            let picks: Vec<usize> = match strategy {
                Strategy::Ur => {
                    let mut r =
                        ChaCha8Rng::seed_from_u64(config.seed ^ (task as u64).wrapping_mul(0x2545_F491_4F6C_DD1D));
                    let mut v = sample(&mut r, cands.len(), config.k_per_task).into_vec();
                    v.sort_unstable();
                    v
                }
                Strategy::Ls => {
                    let mut order: Vec<usize> = (0..cands.len()).collect();
                    order.sort_by(|&a, &b| {
                        let (pa, pb) = (cands[a].participant, cands[b].participant);
                        history
                            .get(&pa.id)
                            .cmp(&history.get(&pb.id))
                            .then_with(|| pa.id.cmp(&pb.id))
                    });
                    order.truncate(config.k_per_task);
                    order
                }
                Strategy::Cg => coverage_greedy(&cands, config.k_per_task, &spec)?,
                Strategy::Fps => {
                    let sel = select_participants(&cands, history, &spec, policies.tiebreak.as_ref())?;
                    sel.selected
                        .iter()
                        .map(|id| {
                            cands
                                .iter()
                                .position(|c| &c.participant.id == id)
                                .expect("selected from candidates")
                        })
                        .collect()
                }
            };
            let chosen: Vec<&Route> = picks.iter().map(|&i| cands[i].route).collect();
            let phi = if chosen.is_empty() {
                0.0
            } else {
                CoverageState::from_routes(&spec, chosen.iter().copied())?.phi()
            };
            let mean_pss = picks
                .iter()
                .map(|&i| path_satisfaction(cands[i].route, cands[i].participant, &spec.grid, spec.mu))
                .sum::<f64>()
                / picks.len().max(1) as f64;
            coverage.entry(strategy).or_default().push(phi);
            pss.entry(strategy).or_default().push(mean_pss);
            let ids: Vec<String> = picks.iter().map(|&i| cands[i].participant.id.clone()).collect();
            histories.get_mut(&strategy).expect("history per strategy").record(&ids);
        }
    }

    let strategies = Strategy::ALL
        .iter()
        .map(|&s| {
            let h = &histories[&s];
            let counts: BTreeMap<String, u64> = workers
                .iter()
                .map(|w| (w.id.clone(), u64::from(h.get(&w.id))))
                .collect();
            let values: Vec<u64> = counts.values().copied().collect();
            StrategyResult {
                strategy: s,
                stats: fairness_stats(&values),
                counts,
                mean_coverage: mean_var(&coverage[&s]).0,
                mean_pss: mean_var(&pss[&s]).0,
            }
        })
        .collect();
    Ok(FairnessReport {
        seed: config.seed,
        strategies,
    })
}
