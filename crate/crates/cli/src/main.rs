use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sense_forge::baselines::PlanResult;
use sense_forge::harness::{
    generate_instance, load_attributes, load_trajectories, method_keys, run_ablation, run_comparison, run_fairness,
    run_method, FairnessConfig, InstanceConfig, PlanArtifact, TrajectoryOptions, PRESET_NAMES,
};
use sense_forge::pipeline::{apply_disturbance, negotiate, write_jsonl, NegotiationState, PhaseMetrics};
use sense_forge::policy::{Policies, RemoteClient, RemoteConfig};
use sense_forge::{read_json, write_json, DisturbanceEvent, Error, Instance, TaskSpec};

#[derive(Parser)]
#[command(
    name = "sense-forge",
    version,
    about = "Participant recruitment and route planning for mobile crowdsensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance from a preset or a config file.
    Generate(GenerateArgs),
    /// Plan one instance with a baseline or the full pipeline.
    Plan(PlanArgs),
    /// Negotiate the routes of an existing plan.
    Negotiate(NegotiateArgs),
    /// Run every (config, method, seed) cell and write per-run rows.
    Benchmark(BenchmarkArgs),
    /// Compare selection strategies over repeated tasks.
    Fairness(FairnessArgs),
    /// Run the pipeline with one component removed at a time.
    Ablate(AblateArgs),
    /// Replan an existing plan after blocked cells or priority regions.
    Disturb(DisturbArgs),
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum PolicyKind {
    /// Deterministic local rules; never touches the network.
    #[default]
    Heuristic,
    /// Chat-completion endpoint configured through SF_LLM_* variables.
    Remote,
}

#[derive(Args)]
struct PolicyArg {
    #[arg(long, value_enum, default_value_t = PolicyKind::Heuristic)]
    policy: PolicyKind,
}

#[derive(Args)]
struct GenerateArgs {
    /// Preset name or path to a JSON InstanceConfig.
    #[arg(long)]
    config: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cell attributes CSV replacing the generated grid.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Trajectory CSV replacing the generated participants.
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    instance: PathBuf,
    /// rn, tvpg, tcpg, msa, msagi, graphdp or mapus.
    #[arg(long)]
    method: String,
    #[command(flatten)]
    policy: PolicyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NegotiateArgs {
    #[arg(long)]
    plan: PathBuf,
    #[command(flatten)]
    policy: PolicyArg,
    #[arg(long)]
    out: PathBuf,
    /// One JSON object per negotiation round.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Presets or config files, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    configs: Vec<String>,
    /// Method keys, comma separated; all methods when omitted.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, default_value_t = 20)]
    runs: u64,
    /// First instance seed; runs use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    policy: PolicyArg,
    #[arg(long)]
    out: PathBuf,
    /// Per (config, method) means and variances.
    #[arg(long)]
    aggregate: Option<PathBuf>,
}

#[derive(Args)]
struct FairnessArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    workers: usize,
    #[arg(long, default_value_t = 60)]
    tasks: usize,
    /// Workers recruited per task.
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[command(flatten)]
    policy: PolicyArg,
    /// Per-worker selection counts.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    cdf: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: String,
    #[arg(long, default_value_t = 20)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    policy: PolicyArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    aggregate: Option<PathBuf>,
}

#[derive(Args)]
struct DisturbArgs {
    #[arg(long)]
    plan: PathBuf,
    /// JSON file holding an `events` list.
    #[arg(long)]
    events: PathBuf,
    #[command(flatten)]
    policy: PolicyArg,
    #[arg(long)]
    out: PathBuf,
    /// One JSON object per participant decision.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct EventsFile {
    events: Vec<DisturbanceEvent>,
}

/// Exit status 1 for domain errors, 2 for usage errors.
#[derive(Debug)]
enum Failure {
    Domain(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownMethod(m) => Failure::Usage(unknown_method(&m)),
            e => Failure::Domain(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn unknown_method(m: &str) -> String {
    format!("unknown method `{m}` (known: {})", method_keys().join(", "))
}

/// Attaches the path to errors that do not already name it.
fn at<T>(path: &Path, r: sense_forge::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| {
        let msg = e.to_string();
        let shown = path.display().to_string();
        match e {
            Error::UnknownMethod(_) => Failure::from(e),
            _ if msg.contains(&shown) => Failure::Domain(msg),
            _ => Failure::Domain(format!("{shown}: {msg}")),
        }
    })
}

fn policies(kind: PolicyKind) -> std::result::Result<Policies, Failure> {
    Ok(match kind {
        PolicyKind::Heuristic => Policies::heuristic(),
        PolicyKind::Remote => Policies::remote(RemoteClient::new(RemoteConfig::from_env()?)?),
    })
}

/// A preset name, or a path to a JSON InstanceConfig (the format envelope is
/// optional).
fn instance_config(arg: &str) -> std::result::Result<InstanceConfig, Failure> {
    if PRESET_NAMES.contains(&arg) {
        return Ok(InstanceConfig::preset(arg)?);
    }
    let path = Path::new(arg);
    if !path.exists() && !arg.contains(['.', '/', '\\']) {
        return Err(Failure::Usage(format!(
            "`{arg}` is neither a preset ({}) nor a file",
            PRESET_NAMES.join(", ")
        )));
    }
    let config: InstanceConfig = read_loose(path)?;
    at(path, config.validate())?;
    Ok(config)
}

/// Hand-written inputs may omit the `format` envelope.
fn read_loose<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let fail = |e: &dyn std::fmt::Display| Failure::Domain(format!("{}: {e}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| fail(&e))?;
    serde_json::from_str(&text).map_err(|e| fail(&e))
}

fn check_method(m: &str) -> Outcome {
    if method_keys().contains(&m) {
        Ok(())
    } else {
        Err(Failure::Usage(unknown_method(m)))
    }
}

fn generate(a: GenerateArgs) -> Outcome {
    let config = instance_config(&a.config)?;
    let mut instance = generate_instance(&config, a.seed)?;
    if let Some(path) = &a.attributes {
        let grid = at(path, load_attributes(path, config.width, config.height))?;
        instance.spec = TaskSpec { grid, ..instance.spec };
    }
    if let Some(path) = &a.trajectories {
        let mut opts = TrajectoryOptions::new(config.interval_minutes, config.horizon_steps());
        opts.seed = a.seed;
        opts.speed_cap = config.speed_range.1;
        opts.cost_range = config.cost_range;
        let load = at(path, load_trajectories(path, &instance.spec.grid, &opts))?;
        if load.dropped > 0 {
            eprintln!("dropped {} infeasible trajectories", load.dropped);
        }
        instance.participants = load.participants;
    }
    instance.validate()?;
    at(&a.out, write_json(&a.out, &instance))
}

fn plan(a: PlanArgs) -> Outcome {
    check_method(&a.method)?;
    let instance: Instance = at(&a.instance, read_json(&a.instance))?;
    at(&a.instance, instance.validate())?;
    let policies = policies(a.policy.policy)?;
    let plan = run_method(&a.method, &instance, a.seed, &policies)?;
    report(&a.method, &plan);
    let artifact = PlanArtifact {
        method: a.method,
        seed: a.seed,
        instance,
        plan,
    };
    at(&a.out, artifact.write(&a.out))
}

fn report(label: &str, plan: &PlanResult) {
    println!(
        "{label}: {} selected, coverage {:.4}, mean pss {:.4}",
        plan.selected.len(),
        plan.phi(),
        plan.mean_pss
    );
}

fn negotiate_cmd(a: NegotiateArgs) -> Outcome {
    let input = at(&a.plan, PlanArtifact::read(&a.plan))?;
    let policies = policies(a.policy.policy)?;
    let spec = &input.instance.spec;
    let state = negotiate(
        NegotiationState::new(input.plan.routes.clone()),
        &input.instance.participants,
        spec,
        policies.propose.as_ref(),
        policies.feedback.as_ref(),
    )?;
    let plan = PlanResult::new(&input.instance, input.plan.selected.clone(), state.routes.clone())?;
    let (before, after) = (PhaseMetrics::of(&input.plan)?, PhaseMetrics::of(&plan)?);
    println!(
        "overlap {:.3}% -> {:.3}%, entropy {:.4} -> {:.4}, count {} -> {}, {} rounds",
        before.overlap_pct,
        after.overlap_pct,
        before.entropy,
        after.entropy,
        before.count,
        after.count,
        state.transcript.len()
    );
    if let Some(path) = &a.transcript {
        at(path, write_jsonl(path, &state.transcript))?;
    }
    let artifact = PlanArtifact {
        method: format!("{}+negotiate", input.method),
        seed: input.seed,
        instance: input.instance,
        plan,
    };
    at(&a.out, artifact.write(&a.out))
}

fn benchmark(a: BenchmarkArgs) -> Outcome {
    let configs = a
        .configs
        .iter()
        .map(|c| instance_config(c))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let methods: Vec<&str> = if a.methods.is_empty() {
        method_keys()
    } else {
        for m in &a.methods {
            check_method(m)?;
        }
        a.methods.iter().map(String::as_str).collect()
    };
    if a.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let seeds: Vec<u64> = (a.seed..a.seed + a.runs).collect();
    let policies = policies(a.policy.policy)?;
    let result = run_comparison(&configs, &methods, &seeds, &policies, a.jobs)?;
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} runs, {failed} failed", result.rows.len());
    at(&a.out, result.write_csv(&a.out))?;
    if let Some(path) = &a.aggregate {
        at(path, result.write_aggregate_csv(path))?;
    }
    Ok(())
}

fn fairness(a: FairnessArgs) -> Outcome {
    let mut config = FairnessConfig::new(a.seed);
    config.n_workers = a.workers;
    config.n_tasks = a.tasks;
    config.k_per_task = a.k;
    let result = run_fairness(&config, &policies(a.policy.policy)?)?;
    for s in &result.strategies {
        println!(
            "{}: variance {:.3}, gini {:.4}, coverage {:.4}, pss {:.4}",
            s.strategy.name(),
            s.stats.variance,
            s.stats.gini,
            s.mean_coverage,
            s.mean_pss
        );
    }
    at(&a.out, result.write_counts_csv(&a.out))?;
    if let Some(path) = &a.summary {
        at(path, result.write_summary_csv(path))?;
    }
    if let Some(path) = &a.cdf {
        at(path, result.write_cdf_csv(path))?;
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> Outcome {
    let config = instance_config(&a.config)?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.runs).collect();
    let result = run_ablation(&config, &seeds, &policies(a.policy.policy)?)?;
    for g in result.aggregates() {
        println!("{}: coverage {:.4}, pss {:.4}", g.method, g.coverage_mean, g.pss_mean);
    }
    at(&a.out, result.write_csv(&a.out))?;
    if let Some(path) = &a.aggregate {
        at(path, result.write_aggregate_csv(path))?;
    }
    Ok(())
}

fn disturb(a: DisturbArgs) -> Outcome {
    let input = at(&a.plan, PlanArtifact::read(&a.plan))?;
    let events: EventsFile = read_loose(&a.events)?;
    let policies = policies(a.policy.policy)?;
    let out = at(
        &a.events,
        apply_disturbance(
            &input.plan.routes,
            &events.events,
            &input.instance.participants,
            &input.instance.spec,
            policies.refine.as_ref(),
        ),
    )?;
    for d in &out.log {
        if d.detail.is_empty() {
            println!("{}: {}", d.id, d.decision.as_str());
        } else {
            println!("{}: {} ({})", d.id, d.decision.as_str(), d.detail);
        }
    }
    if let Some(path) = &a.log {
        at(path, write_jsonl(path, &out.log))?;
    }
    let plan = PlanResult::new(&input.instance, input.plan.selected.clone(), out.routes)?;
    let artifact = PlanArtifact {
        method: format!("{}+disturb", input.method),
        seed: input.seed,
        instance: input.instance,
        plan,
    };
    at(&a.out, artifact.write(&a.out))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Plan(a) => plan(a),
        Command::Negotiate(a) => negotiate_cmd(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Fairness(a) => fairness(a),
        Command::Ablate(a) => ablate(a),
        Command::Disturb(a) => disturb(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
