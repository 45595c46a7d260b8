use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, TrainConfig};
use crate::error::{Result, SnnError};
use crate::event_data::Dataset;
use crate::network::{ModelSpec, Topology};
use crate::neuron::{decay_from_tau, NeuronKind};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRequest {
    pub kind: NeuronKind,
    pub tau_mem_ms: Vec<f64>,
    pub tau_syn_ms: Vec<f64>,
    pub dt_ms: f64,
    pub seeds: Vec<u64>,
    /// Template for every run; `seed` is replaced per run.
    pub train: TrainConfig,
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub tau_mem_ms: f64,
    pub tau_syn_ms: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Final-epoch test accuracy of each seed, in seed order.
    pub accuracies: Vec<f64>,
    pub spikes_per_sample: Vec<f64>,
}

impl SweepCell {
    pub fn mean(&self) -> f64 {
        mean(&self.accuracies)
    }

    /// Population standard deviation across seeds.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.accuracies.iter().map(|a| (a - m).powi(2)).sum::<f64>()
            / self.accuracies.len() as f64)
            .sqrt()
    }

    pub fn mean_spikes_per_sample(&self) -> f64 {
        mean(&self.spikes_per_sample)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Results laid out with τ_mem down the rows and τ_syn across the columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub kind: NeuronKind,
    pub tau_mem_ms: Vec<f64>,
    pub tau_syn_ms: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn cell(&self, mem: usize, syn: usize) -> &SweepCell {
        &self.cells[mem * self.tau_syn_ms.len() + syn]
    }

    /// Accuracy grid as `mean±std` percentages.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "tau_mem_ms")?;
        for s in &self.tau_syn_ms {
            write!(w, ",tau_syn_ms={s}")?;
        }
        writeln!(w)?;
        for (r, m) in self.tau_mem_ms.iter().enumerate() {
            write!(w, "{m}")?;
            for c in 0..self.tau_syn_ms.len() {
                let cell = self.cell(r, c);
                write!(w, ",{:.2}±{:.2}", 100.0 * cell.mean(), 100.0 * cell.std())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Hidden spikes per test sample, same layout as [`write_csv`](Self::write_csv).
    pub fn write_sparsity_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "tau_mem_ms")?;
        for s in &self.tau_syn_ms {
            write!(w, ",tau_syn_ms={s}")?;
        }
        writeln!(w)?;
        for (r, m) in self.tau_mem_ms.iter().enumerate() {
            write!(w, "{m}")?;
            for c in 0..self.tau_syn_ms.len() {
                write!(w, ",{}", self.cell(r, c).mean_spikes_per_sample())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Trains one model per (τ_mem, τ_syn, seed) and tabulates final accuracy.
/// Runs are independent jobs on a pool of `jobs` threads.
pub fn grid_sweep(
    train_set: &Dataset,
    test_set: &Dataset,
    topology: &Topology,
    req: &SweepRequest,
) -> Result<SweepTable> {
    if req.tau_mem_ms.is_empty() || req.tau_syn_ms.is_empty() || req.seeds.is_empty() {
        return Err(SnnError::Domain("sweep lists must be non-empty".into()));
    }
    let mut runs = Vec::new();
    for &m in &req.tau_mem_ms {
        for &s in &req.tau_syn_ms {
            for &seed in &req.seeds {
                runs.push((m, s, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(req.jobs.max(1))
        .build()
        .map_err(|e| SnnError::Domain(format!("thread pool: {e}")))?;
    let results: Vec<(f64, f64)> = pool.install(|| {
        runs.par_iter()
            .map(|&(m, s, seed)| {
                let model = ModelSpec::homogeneous(req.kind, topology, m, s, req.dt_ms)?;
                let cfg = TrainConfig {
                    seed,
                    ..req.train.clone()
                };
                let out = train(train_set, test_set, topology, &model, &cfg)?;
                let last = out.log.last().expect("at least one epoch");
                Ok((last.test_accuracy, last.hidden_spikes_per_sample))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let per_cell = req.seeds.len();
    let mut cells = Vec::new();
    for (k, chunk) in results.chunks(per_cell).enumerate() {
        let (m, s, _) = runs[k * per_cell];
        cells.push(SweepCell {
            tau_mem_ms: m,
            tau_syn_ms: s,
            alpha: if req.kind == NeuronKind::CubaLif {
                decay_from_tau(s, req.dt_ms)?
            } else {
                0.0
            },
            beta: if req.kind == NeuronKind::If {
                1.0
            } else {
                decay_from_tau(m, req.dt_ms)?
            },
            accuracies: chunk.iter().map(|r| r.0).collect(),
            spikes_per_sample: chunk.iter().map(|r| r.1).collect(),
        });
    }
    Ok(SweepTable {
        kind: req.kind,
        tau_mem_ms: req.tau_mem_ms.clone(),
        tau_syn_ms: req.tau_syn_ms.clone(),
        cells,
    })
}
