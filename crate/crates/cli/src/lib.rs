//! Configuration-driven experiment runner for `snn-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapters;
pub mod commands;
pub mod config;
pub mod status;

use std::path::{Path, PathBuf};

use snn_core::neuron::NeuronKind;

pub use commands::{RunDir, Stimulus, TrainOptions};
pub use config::{ConfigError, ExperimentConfig};
pub use status::{Failure, FailureKind, Status};

/// Flags shared by every verb.
#[derive(Clone, Debug, Default)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub debug_traces: bool,
}

#[derive(Clone, Debug)]
pub enum Command {
    Train,
    Eval {
        checkpoint: PathBuf,
    },
    Sweep,
    Profile {
        checkpoint: PathBuf,
        baseline: Option<PathBuf>,
    },
    Trace {
        stimulus: Stimulus,
        kinds: Vec<NeuronKind>,
        weight: f64,
    },
    Convert {
        adapter: String,
        source: Option<PathBuf>,
        channels: Option<u32>,
    },
}

impl Command {
    pub fn verb(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Eval { .. } => "eval",
            Command::Sweep => "sweep",
            Command::Profile { .. } => "profile",
            Command::Trace { .. } => "trace",
            Command::Convert { .. } => "convert",
        }
    }
}

/// Config file (or preset, or the built-in default) with flag overrides
/// applied and re-validated.
pub fn resolve_config(g: &Globals) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match (&g.config, &g.preset) {
        (Some(_), Some(_)) => {
            return Err(Failure::config(
                "--config and --preset are mutually exclusive",
            ))
        }
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(seeds) = &g.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(out) = &g.out {
        cfg.output.dir = out.clone();
    }
    if let Some(jobs) = g.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `cmd` inside a pool of `cfg.jobs` threads and returns the run directory.
pub fn execute(g: &Globals, cmd: &Command) -> Result<PathBuf, Failure> {
    let cfg = resolve_config(g)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Failure::config(format!("jobs: {e}")))?;
    pool.install(|| run_in(&cfg, g.debug_traces, cmd))
}

fn run_in(cfg: &ExperimentConfig, debug_traces: bool, cmd: &Command) -> Result<PathBuf, Failure> {
    let run = RunDir::create(&cfg.output.dir, cmd.verb())?;
    match cmd {
        Command::Train => {
            commands::cmd_train(
                cfg,
                &run,
                commands::TrainOptions {
                    debug_traces,
                    progress: true,
                },
            )?;
        }
        Command::Eval { checkpoint } => {
            commands::cmd_eval(cfg, checkpoint, &run, debug_traces)?;
        }
        Command::Sweep => {
            commands::cmd_sweep(cfg, &run)?;
        }
        Command::Profile {
            checkpoint,
            baseline,
        } => {
            commands::cmd_profile(cfg, checkpoint, baseline.as_deref(), &run)?;
        }
        Command::Trace {
            stimulus,
            kinds,
            weight,
        } => {
            commands::cmd_trace(cfg, stimulus, kinds, *weight, &run)?;
        }
        Command::Convert {
            adapter,
            source,
            channels,
        } => convert(cfg, adapter, source.as_deref(), *channels, &run)?,
    }
    Ok(run.path)
}

/// Without a source the synthetic adapter exports the configured task.
fn convert(
    cfg: &ExperimentConfig,
    adapter: &str,
    source: Option<&Path>,
    channels: Option<u32>,
    run: &RunDir,
) -> Result<(), Failure> {
    match (adapter, source, &cfg.dataset.source) {
        (_, Some(src), _) => commands::cmd_convert(adapter, src, channels, run).map(|_| ()),
        ("synthetic", None, config::DataSource::Synthetic { spec }) => {
            let summary = adapters::export_synthetic(spec, &run.join("data"))?;
            run.write_json("convert.json", &summary).map(|_| ())
        }
        _ => Err(Failure::config(format!(
            "adapter `{adapter}` needs --source"
        ))),
    }
}
