//! Accuracy, hidden-layer sparsity, synaptic-operation counts and weight
//! statistics.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::event_data::{Dataset, SpikeRaster};
use crate::network::{forward, predict, ForwardRecord, ModelSpec, WeightSet};
use crate::neuron::NeuronKind;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub fraction: f64,
    /// `confusion[label][prediction]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn accuracy(predictions: &[usize], labels: &[usize], class_count: usize) -> Result<Accuracy> {
    if predictions.len() != labels.len() {
        return Err(SnnError::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(SnnError::Domain("accuracy of an empty set".into()));
    }
    let mut confusion = vec![vec![0usize; class_count]; class_count];
    let mut correct = 0usize;
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= class_count || l >= class_count {
            return Err(SnnError::MalformedInput(format!(
                "class id {} outside [0, {class_count})",
                p.max(l)
            )));
        }
        confusion[l][p] += 1;
        correct += (p == l) as usize;
    }
    Ok(Accuracy {
        fraction: correct as f64 / labels.len() as f64,
        confusion,
    })
}

/// Multiplications, additions and comparisons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OpCounts {
    pub multiplications: f64,
    pub additions: f64,
    pub comparisons: f64,
}

impl OpCounts {
    fn add(&mut self, o: OpCounts) {
        self.multiplications += o.multiplications;
        self.additions += o.additions;
        self.comparisons += o.comparisons;
    }

    fn scaled(self, k: f64) -> OpCounts {
        OpCounts {
            multiplications: self.multiplications * k,
            additions: self.additions * k,
            comparisons: self.comparisons * k,
        }
    }
}

/// Per-neuron cost of one step: leak multiplies by kind, one addition per
/// arriving spike (plus the current-to-membrane addition for CUBA-LIF) and
/// one threshold comparison.
fn per_neuron(kind: NeuronKind, active_inputs: f64, spiking: bool) -> OpCounts {
    let (mults, extra_add) = match kind {
        NeuronKind::If => (0.0, 0.0),
        NeuronKind::Lif => (1.0, 0.0),
        NeuronKind::CubaLif => (2.0, 1.0),
    };
    OpCounts {
        multiplications: mults,
        additions: active_inputs + extra_add,
        comparisons: if spiking { 1.0 } else { 0.0 },
    }
}

/// Closed-form cost of `neurons` spiking neurons over `steps` steps with
/// `inputs` inputs each, a fraction `p` of which carry a spike.
pub fn count_synops(
    kind: NeuronKind,
    inputs: usize,
    p: f64,
    neurons: usize,
    steps: usize,
) -> Result<OpCounts> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SnnError::Domain(format!(
            "spike fraction {p} outside [0, 1]"
        )));
    }
    Ok(per_neuron(kind, inputs as f64 * p, true).scaled((neurons * steps) as f64))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerSynOps {
    pub per_step: OpCounts,
    pub per_sample: OpCounts,
    pub total: OpCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynOpReport {
    pub kind: NeuronKind,
    pub samples: usize,
    pub steps: usize,
    pub hidden: LayerSynOps,
    /// The readout never compares against a threshold.
    pub readout: LayerSynOps,
}

/// Raw op totals of one forward pass, using the measured spike fraction of
/// every step: the hidden layer sees the input row plus, when recurrent,
/// its own previous spikes; the readout sees the hidden spikes.
pub fn synops_of_record(
    kind: NeuronKind,
    raster: &SpikeRaster,
    record: &ForwardRecord,
    recurrent: bool,
) -> (OpCounts, OpCounts) {
    let mut hidden = OpCounts::default();
    let mut readout = OpCounts::default();
    let nonzero = |s: &[f64]| s.iter().filter(|&&x| x != 0.0).count() as f64;
    for t in 0..record.steps {
        let mut active = raster.row(t).iter().filter(|&&b| b != 0).count() as f64;
        if recurrent && t > 0 {
            active += nonzero(record.hidden_spikes_at(t - 1));
        }
        hidden.add(per_neuron(kind, active, true).scaled(record.hidden as f64));
        let active_h = nonzero(record.hidden_spikes_at(t));
        readout.add(per_neuron(kind, active_h, false).scaled(record.outputs as f64));
    }
    (hidden, readout)
}

impl SynOpReport {
    fn from_totals(
        kind: NeuronKind,
        samples: usize,
        steps: usize,
        hidden: OpCounts,
        readout: OpCounts,
    ) -> Self {
        let layer = |total: OpCounts| LayerSynOps {
            per_step: total.scaled(1.0 / (samples * steps).max(1) as f64),
            per_sample: total.scaled(1.0 / samples.max(1) as f64),
            total,
        };
        SynOpReport {
            kind,
            samples,
            steps,
            hidden: layer(hidden),
            readout: layer(readout),
        }
    }
}

/// Hidden-layer activity over a dataset split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub samples: usize,
    pub hidden_neurons: usize,
    pub steps: usize,
    pub total_spikes: f64,
    pub spikes_per_sample: f64,
    pub spikes_per_neuron_per_step: f64,
}

impl SparsityReport {
    pub fn from_counts(per_sample: &[f64], hidden_neurons: usize, steps: usize) -> Self {
        let total: f64 = per_sample.iter().sum();
        let n = per_sample.len();
        SparsityReport {
            samples: n,
            hidden_neurons,
            steps,
            total_spikes: total,
            spikes_per_sample: if n == 0 { 0.0 } else { total / n as f64 },
            spikes_per_neuron_per_step: if n == 0 {
                0.0
            } else {
                total / (n * hidden_neurons * steps).max(1) as f64
            },
        }
    }
}

/// Percentage change of total hidden activity from feedforward to recurrent.
pub fn sparsity_delta(fsnn: &SparsityReport, rsnn: &SparsityReport) -> Result<f64> {
    if fsnn.total_spikes <= 0.0 {
        return Err(SnnError::Domain(
            "feedforward baseline has no spikes".into(),
        ));
    }
    Ok((rsnn.total_spikes - fsnn.total_spikes) / fsnn.total_spikes * 100.0)
}

pub const HISTOGRAM_BINS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / self.counts.len() as f64
    }

    /// CSV with columns `bin_left,count`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "bin_left,count")?;
        let width = self.bin_width();
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{c}", self.min + k as f64 * width)?;
        }
        Ok(())
    }
}

/// Mean, population standard deviation and histogram of one matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub histogram: Histogram,
}

fn matrix_stats(name: &str, m: &Matrix) -> WeightStats {
    let d = m.as_slice();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let std = (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    let width = (max - min) / HISTOGRAM_BINS as f64;
    for &x in d {
        let k = if width > 0.0 {
            (((x - min) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        counts[k] += 1;
    }
    WeightStats {
        name: name.to_string(),
        count: d.len(),
        mean,
        std,
        histogram: Histogram { min, max, counts },
    }
}

/// Stats for `w1`, `v` (if present) and `w2`, in that order.
pub fn weight_stats(weights: &WeightSet) -> Vec<WeightStats> {
    let mut out = vec![matrix_stats("w1", &weights.w1)];
    if let Some(v) = &weights.v {
        out.push(matrix_stats("v", v));
    }
    out.push(matrix_stats("w2", &weights.w2));
    out
}

/// Predictions and activity of a model over a dataset split.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    pub hidden_spikes: Vec<f64>,
    pub synops: SynOpReport,
    pub hidden_neurons: usize,
    pub steps: usize,
}

impl Evaluation {
    pub fn accuracy(&self, labels: &[usize]) -> Result<f64> {
        let classes = self
            .predictions
            .iter()
            .chain(labels)
            .max()
            .map_or(1, |m| m + 1);
        Ok(accuracy(&self.predictions, labels, classes)?.fraction)
    }

    pub fn spikes_per_sample(&self) -> f64 {
        self.sparsity().spikes_per_sample
    }

    pub fn sparsity(&self) -> SparsityReport {
        SparsityReport::from_counts(&self.hidden_spikes, self.hidden_neurons, self.steps)
    }
}

/// Runs every sample forward (in parallel) and aggregates in sample order.
pub fn evaluate(data: &Dataset, weights: &WeightSet, model: &ModelSpec) -> Result<Evaluation> {
    let recurrent = weights.v.is_some();
    let per_sample = data
        .rasters
        .par_iter()
        .map(|r| {
            let rec = forward(r, weights, model)?;
            let ops = synops_of_record(model.kind, r, &rec, recurrent);
            Ok((predict(&rec), rec.hidden_spike_count(), ops))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hidden_ops = OpCounts::default();
    let mut readout_ops = OpCounts::default();
    for (_, _, (h, o)) in &per_sample {
        hidden_ops.add(*h);
        readout_ops.add(*o);
    }
    let steps = data.rasters.first().map_or(0, SpikeRaster::steps);
    Ok(Evaluation {
        predictions: per_sample.iter().map(|s| s.0).collect(),
        hidden_spikes: per_sample.iter().map(|s| s.1).collect(),
        synops: SynOpReport::from_totals(model.kind, data.len(), steps, hidden_ops, readout_ops),
        hidden_neurons: weights.w1.rows(),
        steps,
    })
}
