//! `domstream`: collect expert data, train the chunk model, benchmark
//! executors, replay episodes and render reports.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use domstream::bench::{
    generate_scenarios, parse_csv, render_report, run_benchmark, BenchRun, Dimension, MetricsTable, ReportFormat,
    SweepManifest, TrialRecord,
};
use domstream::config::{ConfigSection, KvConfig, CONFIG_ENV};
use domstream::datagen::{self, write_episode, EpisodeLog};
use domstream::expert::Expert;
use domstream::flow::{self, FlowPolicy};
use domstream::streaming::{ChunkPolicy, CommandSource, ExecutorMode, OraclePolicy};
use domstream::{Real, Settings};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "domstream", version, about = "Dynamic manipulation simulator and action-streaming bench")]
struct Cli {
    /// Key/value config file
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set executor.chunk_horizon=12`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_assignment)]
    overrides: Vec<(String, String)>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Roll out closed-loop expert episodes
    Collect(CollectArgs),
    /// Fit the flow-matching chunk model to collected episodes
    Train(TrainArgs),
    /// Evaluate a policy under one or more executor settings
    Bench(BenchArgs),
    /// Print the tick table of one episode
    Replay(ReplayArgs),
    /// Render metrics tables written by `bench`
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct CollectArgs {
    #[arg(long, value_parser = parse_count)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory of episode files
    #[arg(long)]
    data: PathBuf,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
    /// Optimizer steps; defaults to `flow.steps`
    #[arg(long)]
    steps: Option<usize>,
    /// Defaults to `flow.seed`
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Debug)]
enum PolicySpec {
    Oracle,
    Flow(PathBuf),
}

fn parse_policy(s: &str) -> Result<PolicySpec, String> {
    match s.split_once(':') {
        _ if s == "oracle" => Ok(PolicySpec::Oracle),
        Some(("flow", path)) if !path.is_empty() => Ok(PolicySpec::Flow(path.into())),
        _ => Err(format!("expected `oracle` or `flow:PATH`, got {s:?}")),
    }
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// `oracle` or `flow:PATH`
    #[arg(long, default_value = "oracle", value_parser = parse_policy)]
    policy: PolicySpec,
    /// Executor modes, comma separated; defaults to `executor.mode`
    #[arg(long, value_delimiter = ',')]
    mode: Vec<ExecutorMode>,
    /// Inference delays in ticks, comma separated; defaults to `executor.latency_ticks`
    #[arg(long, value_delimiter = ',')]
    latency_ticks: Vec<u64>,
    /// Benchmark dimensions, comma separated
    #[arg(long, value_delimiter = ',', default_value = "CR")]
    dims: Vec<Dimension>,
    /// Scenarios per dimension; defaults to `bench.scenarios_per_dim`
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write every episode log under `OUT/episodes`
    #[arg(long)]
    keep_logs: bool,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    episode: PathBuf,
    /// `csv` or `json`
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    /// Write here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// A metrics CSV file, or a directory whose CSV files are merged
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected KEY=VALUE, got {s:?}")),
    }
}

/// Exit status 1 for domain failures, 2 for bad invocations.
enum Failure {
    Usage(String),
    Domain(String),
}

fn domain(e: impl Display) -> Failure {
    Failure::Domain(e.to_string())
}

fn load_config(cli: &Cli) -> Result<Settings, Failure> {
    let mut kv = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            KvConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => KvConfig::new(),
    };
    let mut overrides = KvConfig::new();
    for (k, v) in &cli.overrides {
        overrides.set(k.as_str(), v);
    }
    kv.merge(&overrides);
    Settings::from_kv(&kv).map_err(|e| Failure::Usage(e.to_string()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| domain(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn collect(cfg: &Settings, args: &CollectArgs) -> Result<(), Failure> {
    let summary = datagen::collect(cfg, args.episodes, args.seed, &args.out).map_err(domain)?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn train(cfg: &Settings, args: &TrainArgs) -> Result<(), Failure> {
    let mut flow_cfg = cfg.flow.clone();
    if let Some(steps) = args.steps {
        flow_cfg.steps = steps;
    }
    if let Some(seed) = args.seed {
        flow_cfg.seed = seed;
    }
    let logs = datagen::load_dataset::<Real>(&args.data, !flow_cfg.include_failures).map_err(domain)?;
    let (model, losses) = flow::train(&logs, &flow_cfg, cfg.executor.chunk_horizon, &cfg.digest()).map_err(domain)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| domain(format!("{}: {e}", dir.display())))?;
    }
    flow::save_model(&model, &args.out).map_err(domain)?;
    let last = losses.last().map_or("n/a".to_string(), |l| format!("{l:.6}"));
    println!(
        "trained on {} episodes, {} steps, seed {}, final loss {last} -> {}",
        logs.len(),
        flow_cfg.steps,
        flow_cfg.seed,
        args.out.display()
    );
    Ok(())
}

type PolicyFactory = Box<dyn Fn() -> Box<dyn ChunkPolicy<Real>> + Sync>;

fn policy_factory(cfg: &Settings, spec: &PolicySpec, seed: u64) -> Result<(PolicyFactory, String), Failure> {
    let expert = Expert::new(cfg.expert.clone(), cfg.scene.clone());
    match spec {
        PolicySpec::Oracle => Ok((
            Box::new(move || Box::new(OraclePolicy::new(expert.clone())) as Box<dyn ChunkPolicy<Real>>),
            "oracle".into(),
        )),
        PolicySpec::Flow(path) => {
            let model = flow::load_model::<Real>(path).map_err(|e| domain(format!("{}: {e}", path.display())))?;
            if model.horizon < cfg.executor.chunk_horizon {
                return Err(Failure::Usage(format!(
                    "model horizon {} is shorter than executor.chunk_horizon {}",
                    model.horizon, cfg.executor.chunk_horizon
                )));
            }
            let steps = cfg.flow.sample_steps;
            let name = format!("flow:{}", path.display());
            Ok((
                Box::new(move || {
                    Box::new(FlowPolicy::new(model.clone(), expert.clone(), steps, seed)) as Box<dyn ChunkPolicy<Real>>
                }),
                name,
            ))
        }
    }
}

fn bench(cfg: &Settings, args: &BenchArgs) -> Result<(), Failure> {
    let modes = if args.mode.is_empty() { vec![cfg.executor.mode] } else { args.mode.clone() };
    let latencies = if args.latency_ticks.is_empty() {
        vec![cfg.executor.latency_ticks]
    } else {
        args.latency_ticks.clone()
    };
    let count = args.scenarios.unwrap_or(cfg.bench.scenarios_per_dim);
    let (factory, policy) = policy_factory(cfg, &args.policy, args.seed)?;

    let mut scenarios = Vec::new();
    for &d in &args.dims {
        scenarios.extend(generate_scenarios(d, count, args.seed, &cfg.scene, &cfg.bench).map_err(domain)?);
    }

    let mut table = MetricsTable::default();
    let mut records: Vec<TrialRecord> = Vec::new();
    let mut executors = Vec::new();
    for &mode in &modes {
        for &m in &latencies {
            let mut executor = cfg.executor.clone();
            executor.mode = mode;
            executor.latency_ticks = m;
            executor.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let mut run = BenchRun::new(executor.clone(), args.trials, args.seed);
            run.config_digest = cfg.digest();
            run.velocity_source = cfg.expert.velocity_source;
            run.window = cfg.expert.window;
            run.keep_logs = args.keep_logs;
            let (t, episodes) = run_benchmark(&factory, &run, &scenarios);
            table.extend(t);
            for e in episodes {
                if let Some(log) = &e.log {
                    let name = format!("{}_{}_m{}_t{:02}.jsonl", e.record.scenario, mode, m, e.record.trial);
                    write_file(&args.out.join("episodes").join(name), write_episode(log))?;
                }
                records.push(e.record);
            }
            executors.push(executor);
            eprintln!("{mode} m={m}: {} trials", scenarios.len() * args.trials);
        }
    }

    let manifest = SweepManifest {
        seed: args.seed,
        config_digest: cfg.digest(),
        policy,
        executor: executors.first().cloned().unwrap_or_else(|| cfg.executor.clone()),
        trials_per_scenario: args.trials,
        scenarios: scenarios.iter().map(|s| (s.name.clone(), s.seed)).collect(),
        records,
    };
    let markdown = render_report(&table, ReportFormat::Markdown);
    write_file(&args.out.join("report.csv"), render_report(&table, ReportFormat::Csv))?;
    write_file(&args.out.join("report.json"), render_report(&table, ReportFormat::Json))?;
    write_file(
        &args.out.join("report.md"),
        format!("{markdown}\nconfig digest `{}`, seed {}\n", cfg.digest(), args.seed),
    )?;
    write_file(
        &args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    print!("{markdown}");
    Ok(())
}

#[derive(Serialize)]
struct TickRow {
    tick: u64,
    time: f64,
    ee_x: f64,
    ee_y: f64,
    ee_z: f64,
    gripper: String,
    attached: Option<u32>,
    phase: String,
    source: String,
    cmd_x: Option<f64>,
    cmd_y: Option<f64>,
    cmd_z: Option<f64>,
    cmd_gripper: String,
    events: String,
}

fn tick_rows(log: &EpisodeLog<Real>) -> Vec<TickRow> {
    log.ticks
        .iter()
        .map(|t| {
            let p = t.end_effector.position();
            let source = match t.source {
                Some(CommandSource::Chunk { start_tick, index }) => format!("chunk {start_tick}[{index}]"),
                Some(CommandSource::Hold) => "hold".into(),
                Some(CommandSource::ClosedLoop) => "closed-loop".into(),
                None => String::new(),
            };
            let events: Vec<String> = t.events.iter().map(|e| format!("{e:?}")).collect();
            TickRow {
                tick: t.tick,
                time: t.tick as f64 * log.header.dt,
                ee_x: p.x,
                ee_y: p.y,
                ee_z: p.z,
                gripper: format!("{:?}", t.end_effector.gripper),
                attached: t.end_effector.attached_object.map(|id| id.0),
                phase: t.phase.map_or(String::new(), |p| format!("{p:?}")),
                source,
                cmd_x: t.command.map(|c| c.target_position.x),
                cmd_y: t.command.map(|c| c.target_position.y),
                cmd_z: t.command.map(|c| c.target_position.z),
                cmd_gripper: t.command.map_or(String::new(), |c| format!("{:?}", c.gripper_command)),
                events: events.join(" "),
            }
        })
        .collect()
}

fn opt(x: Option<impl Display>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

fn replay(args: &ReplayArgs) -> Result<(), Failure> {
    let log = datagen::read_episode_file::<Real>(&args.episode).map_err(domain)?;
    let rows = tick_rows(&log);
    let text = if args.format == "json" {
        serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n"
    } else {
        let mut s = String::from(
            "tick,time,ee_x,ee_y,ee_z,gripper,attached,phase,source,cmd_x,cmd_y,cmd_z,cmd_gripper,events\n",
        );
        for r in &rows {
            s += &format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.tick,
                r.time,
                r.ee_x,
                r.ee_y,
                r.ee_z,
                r.gripper,
                opt(r.attached),
                r.phase,
                r.source,
                opt(r.cmd_x),
                opt(r.cmd_y),
                opt(r.cmd_z),
                r.cmd_gripper,
                r.events
            );
        }
        s
    };
    emit(args.out.as_deref(), &text)
}

fn report(args: &ReportArgs) -> Result<(), Failure> {
    let files = if args.input.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(&args.input)
            .map_err(|e| domain(format!("{}: {e}", args.input.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        v.sort();
        v
    } else {
        vec![args.input.clone()]
    };
    let mut table = MetricsTable::default();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| domain(format!("{}: {e}", f.display())))?;
        table.extend(parse_csv(&text).map_err(|e| domain(format!("{}: {e}", f.display())))?);
    }
    emit(args.out.as_deref(), &render_report(&table, args.format))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Collect(a) => collect(&load_config(cli)?, a),
        Command::Train(a) => train(&load_config(cli)?, a),
        Command::Bench(a) => bench(&load_config(cli)?, a),
        Command::Replay(a) => replay(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
