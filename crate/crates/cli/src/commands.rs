//! The six verbs. Each writes into its own run directory, starting with the
//! fully expanded config.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use snn_core::checkpoint::{Checkpoint, SeedLineage};
use snn_core::event_data::{
    bin_events, generate_synthetic_dataset, load_split, read_events, DatasetManifest, Split,
};
use snn_core::metrics::{
    accuracy, evaluate, sparsity_delta, weight_stats, Accuracy, LayerSynOps, SparsityReport,
    SynOpReport, WeightStats,
};
use snn_core::network::{forward, ForwardRecord};
use snn_core::neuron::{trace_single_neuron, write_trace_csv, DecayParams, NeuronKind};
use snn_core::training::{grid_sweep, train_with_observer, EpochLog, SweepRequest, SweepTable};
use snn_core::{Dataset, SpikeRaster};

use crate::adapters::{find_adapter, ConvertSummary};
use crate::config::{DataSource, ExperimentConfig};
use crate::status::Failure;

/// Timestamped output directory of one invocation.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// `<root>/<verb>-<UTC timestamp>`, with a numeric suffix on collision.
    pub fn create(root: &Path, verb: &str) -> Result<Self, Failure> {
        fs::create_dir_all(root).map_err(|e| Failure::io(root, e))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
        let mut n = 0;
        loop {
            let name = if n == 0 {
                format!("{verb}-{stamp}")
            } else {
                format!("{verb}-{stamp}-{n}")
            };
            let path = root.join(name);
            match fs::create_dir(&path) {
                Ok(()) => return Ok(RunDir { path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
                Err(e) => return Err(Failure::io(&path, e)),
            }
        }
    }

    pub fn join(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.path.join(rel)
    }

    pub fn write(
        &self,
        rel: impl AsRef<Path>,
        bytes: impl AsRef<[u8]>,
    ) -> Result<PathBuf, Failure> {
        let path = self.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Failure::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Failure::io(&path, e))?;
        Ok(path)
    }

    pub fn write_json(
        &self,
        rel: impl AsRef<Path>,
        value: &impl Serialize,
    ) -> Result<PathBuf, Failure> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| Failure::io(rel.as_ref(), e))?;
        text.push('\n');
        self.write(rel, text)
    }

    fn write_csv_with(
        &self,
        rel: impl AsRef<Path>,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<PathBuf, Failure> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Failure::io(rel.as_ref(), e))?;
        self.write(rel, buf)
    }
}

fn write_config(cfg: &ExperimentConfig, run: &RunDir) -> Result<(), Failure> {
    run.write("config.toml", cfg.to_toml()).map(|_| ())
}

/// Train and test splits as rasters, plus the data seed when synthetic.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset, Option<u64>), Failure> {
    let (dt, steps) = (cfg.dataset.dt_ms, cfg.dataset.steps);
    let (train, test, seed) = match &cfg.dataset.source {
        DataSource::Synthetic { spec } => {
            let data = generate_synthetic_dataset(spec)?;
            (
                data.train.bin(dt, steps, spec.class_count)?,
                data.test.bin(dt, steps, spec.class_count)?,
                Some(spec.seed),
            )
        }
        DataSource::Manifest {
            train,
            test,
            class_count,
        } => {
            let tm = DatasetManifest::read_jsonl(train, Split::Train, Some(*class_count))?;
            let vm = DatasetManifest::read_jsonl(test, Split::Test, Some(*class_count))?;
            tm.ensure_disjoint(&vm)?;
            (
                load_split(&tm)?.bin(dt, steps, *class_count)?,
                load_split(&vm)?.bin(dt, steps, *class_count)?,
                None,
            )
        }
    };
    for (name, d) in [("train", &train), ("test", &test)] {
        if d.channels() != Some(cfg.topology.inputs) {
            return Err(Failure::config(format!(
                "topology.inputs: {} but the {name} split has {:?} channels",
                cfg.topology.inputs,
                d.channels()
            )));
        }
    }
    Ok((train, test, seed))
}

/// Every state variable of one forward pass as `t,layer,neuron,I,U,S`.
pub fn write_record_csv(mut w: impl Write, rec: &ForwardRecord) -> std::io::Result<()> {
    writeln!(w, "t,layer,neuron,I,U,S")?;
    for t in 0..rec.steps {
        for i in 0..rec.hidden {
            let k = t * rec.hidden + i;
            writeln!(
                w,
                "{t},hidden,{i},{},{},{}",
                rec.hidden_current[k], rec.hidden_membrane[k], rec.hidden_spikes[k]
            )?;
        }
        for o in 0..rec.outputs {
            let k = t * rec.outputs + o;
            writeln!(
                w,
                "{t},readout,{o},{},{},0",
                rec.readout_current[k], rec.readout_membrane[k]
            )?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub final_train_loss: f64,
    pub final_test_accuracy: f64,
    pub hidden_spikes_per_sample: f64,
    pub checkpoint: PathBuf,
    pub epoch_log: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainSummary {
    pub kind: NeuronKind,
    pub recurrent: bool,
    pub runs: Vec<SeedResult>,
    pub mean_test_accuracy: f64,
    /// Population standard deviation over seeds.
    pub std_test_accuracy: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (
        mean,
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt(),
    )
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TrainOptions {
    pub debug_traces: bool,
    /// Print one line per epoch to stderr.
    pub progress: bool,
}

/// One training run per configured seed, each under `seed-<n>/`.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    run: &RunDir,
    opts: TrainOptions,
) -> Result<TrainSummary, Failure> {
    write_config(cfg, run)?;
    let (train_set, test_set, data_seed) = load_data(cfg)?;
    let model = cfg.model_spec()?;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let dir = PathBuf::from(format!("seed-{seed}"));
        let log_path = run.join(dir.join("epoch_log.csv"));
        fs::create_dir_all(run.join(&dir)).map_err(|e| Failure::io(run.join(&dir), e))?;
        let mut log = csv::Writer::from_path(&log_path).map_err(|e| Failure::io(&log_path, e))?;
        let mut timing = String::from("epoch,wall_time_s\n");
        let mut write_err = None;
        let outcome = train_with_observer(
            &train_set,
            &test_set,
            &cfg.topology,
            &model,
            &cfg.train_config(seed),
            |e: &EpochLog| {
                timing.push_str(&format!("{},{}\n", e.epoch, e.wall_time_s));
                let row = EpochLog {
                    wall_time_s: if cfg.output.log_wall_time {
                        e.wall_time_s
                    } else {
                        0.0
                    },
                    ..e.clone()
                };
                if let Err(err) = log
                    .serialize(&row)
                    .and_then(|_| log.flush().map_err(Into::into))
                {
                    write_err.get_or_insert(err);
                }
                if opts.progress {
                    eprintln!(
                        "seed {seed} epoch {}/{} loss {:.4} test_acc {:.4}",
                        e.epoch, cfg.training.epochs, e.train_loss, e.test_accuracy
                    );
                }
            },
        )?;
        drop(log);
        if let Some(e) = write_err {
            return Err(Failure::io(&log_path, e));
        }
        run.write(dir.join("timing.csv"), timing)?;
        let ck = Checkpoint::new(
            cfg.topology,
            outcome.base_model.clone(),
            outcome.params.clone(),
            SeedLineage {
                train_seed: seed,
                data_seed,
            },
            cfg.training.epochs,
        );
        let ck_path = run.join(dir.join("checkpoint.json"));
        ck.save(&ck_path)?;
        if opts.debug_traces {
            let effective = outcome.effective_model()?;
            let rec = forward(&test_set.rasters[0], &outcome.params.weights, &effective)?;
            run.write_csv_with(dir.join("debug/test-sample-0.csv"), |b| {
                write_record_csv(b, &rec)
            })?;
        }
        let last = outcome.log.last().expect("at least one epoch");
        runs.push(SeedResult {
            seed,
            final_train_loss: last.train_loss,
            final_test_accuracy: last.test_accuracy,
            hidden_spikes_per_sample: last.hidden_spikes_per_sample,
            checkpoint: ck_path,
            epoch_log: log_path,
        });
    }
    let accs: Vec<f64> = runs.iter().map(|r| r.final_test_accuracy).collect();
    let (mean, std) = mean_std(&accs);
    let summary = TrainSummary {
        kind: cfg.model.kind,
        recurrent: cfg.topology.recurrent,
        runs,
        mean_test_accuracy: mean,
        std_test_accuracy: std,
    };
    run.write_json("summary.json", &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub checkpoint: PathBuf,
    pub samples: usize,
    pub accuracy: Accuracy,
    pub sparsity: SparsityReport,
    pub synops: SynOpReport,
}

fn synops_csv(r: &SynOpReport) -> Vec<u8> {
    let mut out = String::from("layer,scope,multiplications,additions,comparisons\n");
    for (layer, ops) in [("hidden", &r.hidden), ("readout", &r.readout)] {
        let LayerSynOps {
            per_step,
            per_sample,
            total,
        } = ops;
        for (scope, c) in [
            ("per_step", per_step),
            ("per_sample", per_sample),
            ("total", total),
        ] {
            out.push_str(&format!(
                "{layer},{scope},{},{},{}\n",
                c.multiplications, c.additions, c.comparisons
            ));
        }
    }
    out.into_bytes()
}

fn sparsity_csv(s: &SparsityReport) -> Vec<u8> {
    format!(
        "samples,hidden_neurons,steps,total_spikes,spikes_per_sample,spikes_per_neuron_per_step\n{},{},{},{},{},{}\n",
        s.samples, s.hidden_neurons, s.steps, s.total_spikes, s.spikes_per_sample, s.spikes_per_neuron_per_step
    )
    .into_bytes()
}

fn evaluate_checkpoint(
    ck_path: &Path,
    ck: &Checkpoint,
    test_set: &Dataset,
) -> Result<EvalReport, Failure> {
    if test_set.channels() != Some(ck.topology.inputs) {
        return Err(Failure::data(format!(
            "{}: checkpoint expects {} input channels, dataset has {:?}",
            ck_path.display(),
            ck.topology.inputs,
            test_set.channels()
        )));
    }
    let model = ck.effective_model()?;
    let eval = evaluate(test_set, &ck.params.weights, &model)?;
    Ok(EvalReport {
        checkpoint: ck_path.to_path_buf(),
        samples: test_set.len(),
        accuracy: accuracy(&eval.predictions, &test_set.labels, ck.topology.outputs)?,
        sparsity: eval.sparsity(),
        synops: eval.synops,
    })
}

/// Test-split accuracy, sparsity and synaptic operations of a checkpoint.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    run: &RunDir,
    debug_traces: bool,
) -> Result<EvalReport, Failure> {
    write_config(cfg, run)?;
    let ck = Checkpoint::load(checkpoint)?;
    let (_, test_set, _) = load_data(cfg)?;
    let report = evaluate_checkpoint(checkpoint, &ck, &test_set)?;
    run.write_json("report.json", &report)?;
    run.write("sparsity.csv", sparsity_csv(&report.sparsity))?;
    run.write("synops.csv", synops_csv(&report.synops))?;
    if debug_traces {
        let rec = forward(
            &test_set.rasters[0],
            &ck.params.weights,
            &ck.effective_model()?,
        )?;
        run.write_csv_with("debug/test-sample-0.csv", |b| write_record_csv(b, &rec))?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileReport {
    pub eval: EvalReport,
    pub weights: Vec<WeightStats>,
    /// Percentage change of hidden activity relative to the baseline checkpoint.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity_delta_percent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<EvalReport>,
}

/// Evaluation plus weight statistics and histograms; with a baseline (e.g.
/// the feedforward twin) also the change in hidden activity.
pub fn cmd_profile(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    baseline: Option<&Path>,
    run: &RunDir,
) -> Result<ProfileReport, Failure> {
    write_config(cfg, run)?;
    let ck = Checkpoint::load(checkpoint)?;
    let (_, test_set, _) = load_data(cfg)?;
    let eval = evaluate_checkpoint(checkpoint, &ck, &test_set)?;
    let base = baseline
        .map(|p| {
            Checkpoint::load(p)
                .map_err(Failure::from)
                .and_then(|b| evaluate_checkpoint(p, &b, &test_set))
        })
        .transpose()?;
    let delta = base
        .as_ref()
        .map(|b| sparsity_delta(&b.sparsity, &eval.sparsity))
        .transpose()?;
    let weights = weight_stats(&ck.params.weights);
    let mut table = String::from("name,count,mean,std\n");
    for w in &weights {
        table.push_str(&format!("{},{},{},{}\n", w.name, w.count, w.mean, w.std));
        run.write_csv_with(format!("histogram-{}.csv", w.name), |b| {
            w.histogram.write_csv(b)
        })?;
    }
    run.write("weights.csv", table)?;
    run.write("sparsity.csv", sparsity_csv(&eval.sparsity))?;
    run.write("synops.csv", synops_csv(&eval.synops))?;
    let report = ProfileReport {
        eval,
        weights,
        sparsity_delta_percent: delta,
        baseline: base,
    };
    run.write_json("profile.json", &report)?;
    Ok(report)
}

/// Grid of (τ_mem, τ_syn) over the configured seeds.
pub fn cmd_sweep(cfg: &ExperimentConfig, run: &RunDir) -> Result<SweepTable, Failure> {
    write_config(cfg, run)?;
    let (train_set, test_set, _) = load_data(cfg)?;
    let req = SweepRequest {
        kind: cfg.model.kind,
        tau_mem_ms: cfg.sweep.tau_mem_ms.clone(),
        tau_syn_ms: cfg.sweep.tau_syn_ms.clone(),
        dt_ms: cfg.dataset.dt_ms,
        seeds: cfg.seeds.clone(),
        train: cfg.train_config(0),
        jobs: rayon::current_num_threads(),
    };
    let table = grid_sweep(&train_set, &test_set, &cfg.topology, &req)?;
    run.write_csv_with("sweep.csv", |b| table.write_csv(b))?;
    run.write_csv_with("sweep-sparsity.csv", |b| table.write_sparsity_csv(b))?;
    run.write_json("sweep.json", &table)?;
    Ok(table)
}

/// Input spike train for a single-neuron trace.
#[derive(Clone, Debug, PartialEq)]
pub enum Stimulus {
    /// One channel of an event file, binned at the configured step.
    Events { path: PathBuf, channel: usize },
    /// Step indices carrying a spike.
    Steps(Vec<usize>),
}

impl Stimulus {
    pub fn to_bools(&self, dt_ms: f64, steps: usize) -> Result<Vec<bool>, Failure> {
        match self {
            Stimulus::Events { path, channel } => {
                let stream = read_events(path)?;
                let raster: SpikeRaster = bin_events(&stream, dt_ms, steps)?;
                if *channel >= raster.channels() {
                    return Err(Failure::data(format!(
                        "{}: channel {channel} outside [0, {})",
                        path.display(),
                        raster.channels()
                    )));
                }
                Ok((0..steps).map(|t| raster.get(t, *channel)).collect())
            }
            Stimulus::Steps(list) => {
                let mut v = vec![false; steps];
                for &t in list {
                    *v.get_mut(t).ok_or_else(|| {
                        Failure::config(format!("spike step {t} outside [0, {steps})"))
                    })? = true;
                }
                Ok(v)
            }
        }
    }
}

/// `I`, `U`, `S` of one neuron of each requested kind, all driven by the
/// same spikes through one synapse of weight `weight`.
pub fn cmd_trace(
    cfg: &ExperimentConfig,
    stimulus: &Stimulus,
    kinds: &[NeuronKind],
    weight: f64,
    run: &RunDir,
) -> Result<Vec<PathBuf>, Failure> {
    write_config(cfg, run)?;
    let (dt, steps) = (cfg.dataset.dt_ms, cfg.dataset.steps);
    let input = stimulus.to_bools(dt, steps)?;
    let mut spikes = String::from("step,input\n");
    for (t, &s) in input.iter().enumerate() {
        spikes.push_str(&format!("{t},{}\n", s as u8));
    }
    run.write("input.csv", spikes)?;
    let mut written = Vec::new();
    for &kind in kinds {
        let d = DecayParams::homogeneous(kind, 1, cfg.model.tau_mem_ms, cfg.model.tau_syn_ms, dt)?;
        let trace = trace_single_neuron(kind, &input, weight, d.alpha[0], d.beta[0], steps)?;
        written
            .push(run.write_csv_with(format!("trace-{kind}.csv"), |b| write_trace_csv(b, &trace))?);
    }
    Ok(written)
}

/// Runs a source adapter into `<run>/data`.
pub fn cmd_convert(
    adapter: &str,
    source: &Path,
    channel_count: Option<u32>,
    run: &RunDir,
) -> Result<ConvertSummary, Failure> {
    let adapter = find_adapter(adapter, channel_count)?;
    let summary = adapter.convert(source, &run.join("data"))?;
    run.write_json("convert.json", &summary)?;
    Ok(summary)
}
