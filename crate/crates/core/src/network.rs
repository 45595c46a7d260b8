//! Input → hidden (optionally recurrent) → non-spiking readout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::event_data::SpikeRaster;
use crate::neuron::{integrate, DecayParams, LayerState, NeuronKind, SpikeFn, Threshold};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub recurrent: bool,
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.hidden == 0 || self.outputs == 0 {
            return Err(SnnError::Dimension(format!(
                "layer sizes must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}-{}", self.inputs, self.hidden, self.outputs)?;
        if self.recurrent {
            f.write_str(" (recurrent)")?;
        }
        Ok(())
    }
}

/// Input weights `w1` (hidden × inputs), optional recurrent `v`
/// (hidden × hidden) and readout weights `w2` (outputs × hidden).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub w1: Matrix,
    pub v: Option<Matrix>,
    pub w2: Matrix,
}

impl WeightSet {
    pub fn zeros(topology: &Topology) -> Self {
        WeightSet {
            w1: Matrix::zeros(topology.hidden, topology.inputs),
            v: topology
                .recurrent
                .then(|| Matrix::zeros(topology.hidden, topology.hidden)),
            w2: Matrix::zeros(topology.outputs, topology.hidden),
        }
    }

    pub fn topology(&self) -> Topology {
        Topology {
            inputs: self.w1.cols(),
            hidden: self.w1.rows(),
            outputs: self.w2.rows(),
            recurrent: self.v.is_some(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let t = self.topology();
        t.validate()?;
        if self.w2.cols() != t.hidden {
            return Err(SnnError::Dimension(format!(
                "w2 has {} columns but hidden layer has {} neurons",
                self.w2.cols(),
                t.hidden
            )));
        }
        if let Some(v) = &self.v {
            if v.shape() != (t.hidden, t.hidden) {
                return Err(SnnError::Dimension(format!("v is {:?}", v.shape())));
            }
        }
        Ok(())
    }
}

/// Gaussian init with std `1/sqrt(fan_in)`. `w1` and `w2` are drawn before
/// `v`, so a feedforward and a recurrent net with the same seed share them.
pub fn init_weights(topology: &Topology, seed: u64) -> Result<WeightSet> {
    topology.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| {
        let normal = Normal::new(0.0, 1.0 / (cols as f64).sqrt()).expect("finite std");
        Matrix::from_fn(rows, cols, |_, _| normal.sample(&mut rng))
    };
    let w1 = draw(topology.hidden, topology.inputs);
    let w2 = draw(topology.outputs, topology.hidden);
    let v = topology
        .recurrent
        .then(|| draw(topology.hidden, topology.hidden));
    Ok(WeightSet { w1, v, w2 })
}

/// Neuron kind, per-layer decays and threshold. The readout shares the
/// hidden layer's kind but never spikes or resets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: NeuronKind,
    pub hidden: DecayParams,
    pub readout: DecayParams,
    pub theta: Threshold,
}

impl ModelSpec {
    pub fn homogeneous(
        kind: NeuronKind,
        topology: &Topology,
        tau_mem_ms: f64,
        tau_syn_ms: f64,
        dt_ms: f64,
    ) -> Result<Self> {
        Ok(ModelSpec {
            kind,
            hidden: DecayParams::homogeneous(kind, topology.hidden, tau_mem_ms, tau_syn_ms, dt_ms)?,
            readout: DecayParams::homogeneous(
                kind,
                topology.outputs,
                tau_mem_ms,
                tau_syn_ms,
                dt_ms,
            )?,
            theta: Threshold::default(),
        })
    }
}

/// Everything a forward pass produced, row-major `[t][neuron]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardRecord {
    pub steps: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub hidden_spikes: Vec<f64>,
    pub hidden_current: Vec<f64>,
    pub hidden_membrane: Vec<f64>,
    pub readout_current: Vec<f64>,
    pub readout_membrane: Vec<f64>,
}

impl ForwardRecord {
    #[inline]
    pub fn hidden_spikes_at(&self, t: usize) -> &[f64] {
        &self.hidden_spikes[t * self.hidden..(t + 1) * self.hidden]
    }

    #[inline]
    pub fn hidden_membrane_at(&self, t: usize) -> &[f64] {
        &self.hidden_membrane[t * self.hidden..(t + 1) * self.hidden]
    }

    #[inline]
    pub fn hidden_current_at(&self, t: usize) -> &[f64] {
        &self.hidden_current[t * self.hidden..(t + 1) * self.hidden]
    }

    #[inline]
    pub fn readout_at(&self, t: usize) -> &[f64] {
        &self.readout_membrane[t * self.outputs..(t + 1) * self.outputs]
    }

    #[inline]
    pub fn readout_current_at(&self, t: usize) -> &[f64] {
        &self.readout_current[t * self.outputs..(t + 1) * self.outputs]
    }

    /// Sum of the hidden spike raster.
    pub fn hidden_spike_count(&self) -> f64 {
        self.hidden_spikes.iter().sum()
    }

    /// Per readout neuron: (max over time, first step attaining it).
    pub fn readout_maxima(&self) -> Vec<(f64, usize)> {
        (0..self.outputs)
            .map(|i| {
                let mut best = (f64::NEG_INFINITY, 0);
                for t in 0..self.steps {
                    let u = self.readout_membrane[t * self.outputs + i];
                    if u > best.0 {
                        best = (u, t);
                    }
                }
                best
            })
            .collect()
    }
}

/// Forward-pass variants used by training diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct ForwardOptions<'a> {
    pub spike_fn: SpikeFn,
    /// Hidden spikes (`[t][neuron]`) to use in the reset factor instead of the
    /// layer's own. Lets a finite-difference probe hold the reset fixed.
    pub reset_spikes: Option<&'a [f64]>,
}

impl Default for ForwardOptions<'_> {
    fn default() -> Self {
        ForwardOptions {
            spike_fn: SpikeFn::Heaviside,
            reset_spikes: None,
        }
    }
}

pub fn forward(
    raster: &SpikeRaster,
    weights: &WeightSet,
    model: &ModelSpec,
) -> Result<ForwardRecord> {
    forward_with(raster, weights, model, ForwardOptions::default())
}

pub fn forward_with(
    raster: &SpikeRaster,
    weights: &WeightSet,
    model: &ModelSpec,
    opts: ForwardOptions<'_>,
) -> Result<ForwardRecord> {
    weights.check()?;
    let topo = weights.topology();
    if raster.channels() != topo.inputs {
        return Err(SnnError::Dimension(format!(
            "raster has {} channels, network expects {}",
            raster.channels(),
            topo.inputs
        )));
    }
    if model.hidden.len() != topo.hidden || model.readout.len() != topo.outputs {
        return Err(SnnError::Dimension(
            "decay vectors do not match layer sizes".into(),
        ));
    }
    let steps = raster.steps();
    if let Some(r) = opts.reset_spikes {
        if r.len() != steps * topo.hidden {
            return Err(SnnError::Dimension(
                "reset override has wrong length".into(),
            ));
        }
    }

    let (nh, no) = (topo.hidden, topo.outputs);
    let mut rec = ForwardRecord {
        steps,
        hidden: nh,
        outputs: no,
        hidden_spikes: Vec::with_capacity(steps * nh),
        hidden_current: Vec::with_capacity(steps * nh),
        hidden_membrane: Vec::with_capacity(steps * nh),
        readout_current: Vec::with_capacity(steps * no),
        readout_membrane: Vec::with_capacity(steps * no),
    };
    let mut hidden = LayerState::zeros(nh);
    let mut readout = LayerState::zeros(no);
    let mut x = vec![0.0; topo.inputs];
    let zeros = vec![0.0; nh];
    let mut drive_h = vec![0.0; nh];
    let mut drive_o = vec![0.0; no];

    for t in 0..steps {
        raster.row_into(t, &mut x);
        drive_h.fill(0.0);
        weights.w1.mul_vec_acc(&x, &mut drive_h);
        if let Some(v) = &weights.v {
            v.mul_vec_acc(&hidden.spikes, &mut drive_h);
        }
        let reset = match opts.reset_spikes {
            Some(r) if t > 0 => &r[(t - 1) * nh..t * nh],
            Some(_) => &zeros[..],
            None => &hidden.spikes[..],
        };
        hidden = integrate(
            model.kind,
            &model.hidden,
            &hidden,
            &drive_h,
            Some(reset),
            opts.spike_fn,
            model.theta,
        );

        drive_o.fill(0.0);
        weights.w2.mul_vec_acc(&hidden.spikes, &mut drive_o);
        readout = integrate(
            model.kind,
            &model.readout,
            &readout,
            &drive_o,
            None,
            opts.spike_fn,
            model.theta,
        );

        rec.hidden_spikes.extend_from_slice(&hidden.spikes);
        rec.hidden_current.extend_from_slice(&hidden.current);
        rec.hidden_membrane.extend_from_slice(&hidden.membrane);
        rec.readout_current.extend_from_slice(&readout.current);
        rec.readout_membrane.extend_from_slice(&readout.membrane);
    }
    Ok(rec)
}

/// Independent samples in parallel; output order follows input order.
pub fn forward_batch(
    rasters: &[&SpikeRaster],
    weights: &WeightSet,
    model: &ModelSpec,
) -> Result<Vec<ForwardRecord>> {
    rasters
        .par_iter()
        .map(|r| forward(r, weights, model))
        .collect()
}

/// `argmax_i max_t U_i[t]`, ties to the lowest class.
pub fn predict(record: &ForwardRecord) -> usize {
    let maxima = record.readout_maxima();
    let mut best = 0;
    for (i, &(m, _)) in maxima.iter().enumerate() {
        if m > maxima[best].0 {
            best = i;
        }
    }
    best
}
