use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snn_cli::{execute, Command, Failure, Globals, Status, Stimulus};
use snn_core::neuron::NeuronKind;

#[derive(Parser)]
#[command(
    name = "snn",
    version,
    about = "Train, evaluate and profile spiking networks"
)]
struct Cli {
    #[command(flatten)]
    globals: GlobalArgs,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in preset: rate-task, temporal-order, nmnist-like, shd-like.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Single seed; replaces the configured list.
    #[arg(long, global = true, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Root directory for run directories.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Also dump full state trajectories of the first test sample.
    #[arg(long, global = true)]
    debug_traces: bool,
}

#[derive(Subcommand)]
enum Verb {
    /// Train one model per seed; writes checkpoints and epoch logs.
    Train,
    /// Accuracy, sparsity and synaptic operations on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Grid search over time constants.
    Sweep,
    /// Evaluation plus weight statistics and histograms.
    Profile {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Checkpoint to compare hidden activity against.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Single-neuron trajectories for a shared input spike train.
    Trace {
        /// Event file providing the input.
        #[arg(long, conflicts_with = "spikes", required_unless_present = "spikes")]
        events: Option<PathBuf>,
        /// Channel of the event file.
        #[arg(long, default_value_t = 0)]
        channel: usize,
        /// Comma-separated input spike steps.
        #[arg(long, value_delimiter = ',')]
        spikes: Option<Vec<usize>>,
        /// Neuron kinds to trace (default: all).
        #[arg(long, value_delimiter = ',')]
        kind: Option<Vec<NeuronKind>>,
        #[arg(long, default_value_t = 0.6)]
        weight: f64,
    },
    /// Convert a source into canonical event files and manifests.
    Convert {
        #[arg(long)]
        adapter: String,
        #[arg(long)]
        source: Option<PathBuf>,
        /// Channel count for adapters that cannot infer it.
        #[arg(long)]
        channels: Option<u32>,
    },
}

fn command(verb: Verb) -> Command {
    match verb {
        Verb::Train => Command::Train,
        Verb::Eval { checkpoint } => Command::Eval { checkpoint },
        Verb::Sweep => Command::Sweep,
        Verb::Profile {
            checkpoint,
            baseline,
        } => Command::Profile {
            checkpoint,
            baseline,
        },
        Verb::Trace {
            events,
            channel,
            spikes,
            kind,
            weight,
        } => Command::Trace {
            stimulus: match events {
                Some(path) => Stimulus::Events { path, channel },
                None => Stimulus::Steps(spikes.unwrap_or_default()),
            },
            kinds: kind.unwrap_or_else(|| NeuronKind::ALL.to_vec()),
            weight,
        },
        Verb::Convert {
            adapter,
            source,
            channels,
        } => Command::Convert {
            adapter,
            source,
            channels,
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let f = Failure::config(e.kind().to_string());
            println!("{}", Status::failed("snn", &f).line());
            return ExitCode::from(f.exit_code() as u8);
        }
    };
    let g = cli.globals;
    let globals = Globals {
        config: g.config,
        preset: g.preset,
        seeds: g.seed.map(|s| vec![s]).or(g.seeds),
        out: g.out,
        jobs: g.jobs,
        debug_traces: g.debug_traces,
    };
    let cmd = command(cli.verb);
    let verb = cmd.verb();
    match execute(&globals, &cmd) {
        Ok(dir) => {
            println!("{}", Status::ok(verb, dir).line());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            println!("{}", Status::failed(verb, &f).line());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
