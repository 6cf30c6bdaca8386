//! Command-line front end: parse actions, label trajectories, build datasets,
//! simulate episodes against a policy and evaluate the results.

mod config;

use std::fs;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use egoact::dataset::{
    build_samples_annotation, build_samples_sliding, merge_trajectory, oversample, write_jsonl, AnnotatedEpisode,
    EgoSample, OversampleConfig, RawTrajectory,
};
use egoact::eval::{aggregate_report, render_table, score_run, EpisodeRecord, ScorerRegistry};
use egoact::grammar::{parse_sequence_with, serialize};
use egoact::pose::{label_trajectory, parse_trajectory};
use egoact::runner::{serve, ExecEndpoint, InProcess, OraclePolicy, PolicyEndpoint, TcpEndpoint};
use egoact::sim::scenario::{generate, ScenarioConfig};
use egoact::sim::{load_world, World};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use config::Config;

#[derive(Parser)]
#[command(name = "egoact", version, about = "Egocentric action toolkit")]
struct Cli {
    /// TOML file with router, agent, metrics, perturb and run settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an action string and print its structure and canonical form.
    Parse { text: String },
    /// Label a pose trajectory (JSON lines of {t, pose}) with structured actions.
    Convert {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        fps: f64,
    },
    /// Build training samples as JSON lines.
    BuildDataset {
        #[arg(long, value_enum)]
        mode: Mode,
        /// JSON lines: annotated episodes or raw simulator trajectories.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sliding mode: merged steps between recent observations.
        #[arg(long, default_value_t = 1)]
        interval: usize,
        /// Duplicate turning and action-ending samples, then shuffle.
        #[arg(long)]
        oversample: bool,
    },
    /// Run episodes and write one `run-<k>.jsonl` per run.
    Simulate {
        /// World file, or a directory of world files.
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        world: Option<PathBuf>,
        /// Generate worlds instead of loading them.
        #[arg(long, value_enum)]
        scenario: Option<Scenario>,
        /// Number of generated worlds.
        #[arg(long, default_value_t = 100)]
        count: u64,
        /// `oracle`, `exec:<command>` or `tcp:<host:port>`.
        #[arg(long, default_value = "oracle")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the configured metric run count.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        timeout_s: Option<f64>,
        #[arg(long)]
        retries: Option<usize>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Score run logs and print a report table; writes report.json.
    Evaluate {
        #[arg(long)]
        episodes: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        /// Report destination (default: <episodes>/report.json).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "policy")]
        label: String,
    },
    /// Serve the oracle for one world over stdin/stdout or a TCP port.
    ServeOracle {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Annotation,
    Sliding,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Free,
    Sparse,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Parse { text } => parse(&text, &cfg),
        Command::Convert { trajectory, fps } => convert(&trajectory, fps, &cfg),
        Command::BuildDataset {
            mode,
            input,
            output,
            seed,
            interval,
            oversample,
        } => build_dataset(mode, &input, &output, seed, interval, oversample, &cfg),
        Command::Simulate {
            world,
            scenario,
            count,
            policy,
            seed,
            runs,
            out,
            timeout_s,
            retries,
            max_steps,
        } => {
            let worlds = match (world, scenario) {
                (Some(path), _) => load_worlds(&path)?,
                (None, Some(s)) => generated_worlds(s, count),
                (None, None) => bail!("either --world or --scenario is required"),
            };
            let mut run_cfg = cfg.run()?;
            run_cfg.timeout_s = timeout_s.unwrap_or(run_cfg.timeout_s);
            run_cfg.retries = retries.unwrap_or(run_cfg.retries);
            run_cfg.max_steps = max_steps.unwrap_or(run_cfg.max_steps);
            let sim = Simulation {
                worlds,
                policy,
                seed,
                runs: runs.unwrap_or(cfg.metrics.runs),
                agent: cfg.agent,
                run_cfg,
            };
            sim.run(&out)
        }
        Command::Evaluate {
            episodes,
            runs,
            out,
            label,
        } => evaluate(&episodes, runs.unwrap_or(cfg.metrics.runs), out, &label, &cfg),
        Command::ServeOracle { world, listen } => serve_oracle(&world, listen.as_deref(), &cfg),
    }
}

fn parse(text: &str, cfg: &Config) -> Result<()> {
    #[derive(Serialize)]
    struct Parsed {
        canonical: String,
        #[serde(flatten)]
        sequence: egoact::grammar::ActionSequence,
    }
    let seq = parse_sequence_with(text, &cfg.router)?.canonicalize();
    let parsed = Parsed {
        canonical: serialize(&seq),
        sequence: seq,
    };
    println!("{}", serde_json::to_string_pretty(&parsed)?);
    Ok(())
}

fn convert(path: &Path, fps: f64, cfg: &Config) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let frames = parse_trajectory(&text)?;
    let mut out = io::stdout().lock();
    for label in label_trajectory(&frames, fps, &cfg.thresholds)? {
        writeln!(out, "{}", serde_json::to_string(&label)?)?;
    }
    Ok(())
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn build_dataset(
    mode: Mode,
    input: &Path,
    output: &Path,
    seed: u64,
    interval: usize,
    oversampled: bool,
    cfg: &Config,
) -> Result<()> {
    let mut samples: Vec<EgoSample> = Vec::new();
    match mode {
        Mode::Annotation => {
            let annotation = cfg.annotation(seed);
            for ep in read_lines::<AnnotatedEpisode>(input)? {
                samples
                    .extend(build_samples_annotation(&ep, &annotation).with_context(|| format!("episode {}", ep.id))?);
            }
        }
        Mode::Sliding => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for raw in read_lines::<RawTrajectory>(input)? {
                let merged = merge_trajectory(&raw, &cfg.steps, &cfg.perturb, &mut rng)
                    .with_context(|| format!("trajectory {}", raw.id))?;
                samples.extend(build_samples_sliding(&merged, interval)?);
            }
        }
    }
    if oversampled {
        samples = oversample(&samples, &OversampleConfig { seed, ..cfg.oversample });
    }
    fs::write(output, write_jsonl(&samples)).with_context(|| format!("writing {}", output.display()))?;
    eprintln!("wrote {} samples to {}", samples.len(), output.display());
    Ok(())
}

fn load_world_file(path: &Path) -> Result<World> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_world(&text).with_context(|| path.display().to_string())
}

/// Worlds keyed by episode id (the file stem).
fn load_worlds(path: &Path) -> Result<Vec<(String, World)>> {
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<io::Result<_>>()?;
        files.retain(|p| p.extension().is_some_and(|x| x == "json"));
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    ensure!(!files.is_empty(), "no world files in {}", path.display());
    files
        .iter()
        .map(|f| {
            let id = f
                .file_stem()
                .map_or_else(|| "world".into(), |s| s.to_string_lossy().into_owned());
            Ok((id, load_world_file(f)?))
        })
        .collect()
}

fn generated_worlds(kind: Scenario, count: u64) -> Vec<(String, World)> {
    let (name, cfg) = match kind {
        Scenario::Free => ("free", ScenarioConfig::obstacle_free()),
        Scenario::Sparse => ("sparse", ScenarioConfig::sparse()),
    };
    (0..count)
        .map(|s| (format!("{name}-{s:03}"), generate(s, &cfg)))
        .collect()
}

struct Simulation {
    worlds: Vec<(String, World)>,
    policy: String,
    seed: u64,
    runs: usize,
    agent: Option<egoact::sim::AgentConfig>,
    run_cfg: egoact::runner::RunConfig,
}

impl Simulation {
    /// Noise seed of one episode, distinct per run and episode.
    fn episode_seed(&self, run: usize, index: usize) -> u64 {
        self.seed
            .wrapping_mul(1_000_003)
            .wrapping_add(run as u64 * 100_003)
            .wrapping_add(index as u64)
    }

    fn endpoint(&self, world: &World) -> Result<Box<dyn PolicyEndpoint>> {
        Ok(match self.policy.split_once(':') {
            _ if self.policy == "oracle" => Box::new(InProcess(OraclePolicy::new(world.clone()))),
            Some(("exec", cmd)) => Box::new(ExecEndpoint::spawn(cmd).with_context(|| format!("spawning {cmd}"))?),
            Some(("tcp", addr)) => Box::new(TcpEndpoint::connect(addr).with_context(|| format!("connecting {addr}"))?),
            _ => bail!(
                "unknown policy {:?}; expected oracle, exec:<cmd> or tcp:<addr>",
                self.policy
            ),
        })
    }

    fn run(&self, out: &Path) -> Result<()> {
        ensure!(self.runs > 0, "at least one run");
        fs::create_dir_all(out)?;
        for run in 1..=self.runs {
            let mut lines = String::new();
            let (mut done, mut failures) = (0, 0);
            for (index, (id, world)) in self.worlds.iter().enumerate() {
                let mut world = world.clone();
                if let Some(agent) = self.agent {
                    world.agent = agent;
                }
                let cfg = egoact::runner::RunConfig {
                    seed: self.episode_seed(run, index),
                    ..self.run_cfg.clone()
                };
                let mut endpoint = self.endpoint(&world)?;
                let record = EpisodeRecord::simulate(&world, &mut endpoint, &cfg, id, run)
                    .with_context(|| format!("run {run}, episode {id}"))?;
                done += usize::from(record.result.terminal.is_some());
                failures += usize::from(record.result.protocol_failure);
                lines.push_str(&serde_json::to_string(&record)?);
                lines.push('\n');
            }
            let path = out.join(format!("run-{run}.jsonl"));
            fs::write(&path, lines)?;
            eprintln!(
                "run {run}: {} episodes, {done} terminated, {failures} protocol failures -> {}",
                self.worlds.len(),
                path.display()
            );
        }
        Ok(())
    }
}

fn evaluate(dir: &Path, runs: usize, out: Option<PathBuf>, label: &str, cfg: &Config) -> Result<()> {
    ensure!(runs > 0, "at least one run");
    let registry = ScorerRegistry::default();
    let mut metrics = Vec::with_capacity(runs);
    for run in 1..=runs {
        let records: Vec<EpisodeRecord> = read_lines(&dir.join(format!("run-{run}.jsonl")))?;
        metrics.push(score_run(run, &records, &cfg.metrics, &registry).with_context(|| format!("run {run}"))?);
    }
    let report = aggregate_report(&metrics, &cfg.metrics.thresholds)?;
    let out = out.unwrap_or_else(|| dir.join("report.json"));
    fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")?;
    print!("{}", render_table(&report, label));
    eprintln!(
        "{} episodes x {runs} runs, {} protocol failures; report -> {}",
        report.episode_count,
        report.protocol_failures,
        out.display()
    );
    Ok(())
}

fn serve_oracle(world: &Path, listen: Option<&str>, cfg: &Config) -> Result<()> {
    let mut world = load_world_file(world)?;
    if let Some(agent) = cfg.agent {
        world.agent = agent;
    }
    let mut oracle = OraclePolicy::new(world);
    match listen {
        None => serve(&mut oracle, io::stdin().lock(), io::stdout().lock())?,
        Some(addr) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = stream?;
                serve(&mut oracle, BufReader::new(stream.try_clone()?), stream)?;
            }
        }
    }
    Ok(())
}
