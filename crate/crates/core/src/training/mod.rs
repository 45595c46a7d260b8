//! Surrogate-gradient BPTT, max-over-time cross entropy and Adamax.

mod adamax;
mod bptt;
mod loss;
mod sweep;
mod trainer;

pub use adamax::{AdamaxConfig, AdamaxState};
pub use bptt::backward_bptt;
pub use loss::{loss_max_over_time, sample_loss, ReadoutGrad, SampleLoss};
pub use sweep::{grid_sweep, SweepCell, SweepRequest, SweepTable};
pub use trainer::{train, train_with_observer, EpochLog, TrainConfig, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::network::{ModelSpec, WeightSet};
use crate::neuron::{DecayParams, NeuronKind, Threshold};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub steepness: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig { steepness: 100.0 }
    }
}

/// Fast-sigmoid derivative `1 / (1 + k|u - ϑ|)²` with ϑ = 1.
pub fn surrogate_derivative(u: f64, cfg: &SurrogateConfig) -> f64 {
    surrogate_at(u - Threshold::default().0, cfg.steepness)
}

#[inline]
pub(crate) fn surrogate_at(distance: f64, steepness: f64) -> f64 {
    let d = 1.0 + steepness * distance.abs();
    1.0 / (d * d)
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    let y = 1.0 / (1.0 + (-x).exp());
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(HETERO_INIT_MARGIN, 1.0 - HETERO_INIT_MARGIN);
    (p / (1.0 - p)).ln()
}

/// Decays of exactly 0 or 1 have no finite logit; heterogeneous init pulls
/// them this far inside the unit interval.
pub const HETERO_INIT_MARGIN: f64 = 1e-6;

/// Unconstrained per-neuron parameters for trainable decays:
/// `α = logistic(a)`, `β = logistic(b)`. Entries are `None` where the neuron
/// kind pins the decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneousParams {
    pub hidden_a: Option<Vec<f64>>,
    pub hidden_b: Option<Vec<f64>>,
    pub readout_a: Option<Vec<f64>>,
    pub readout_b: Option<Vec<f64>>,
}

impl HeterogeneousParams {
    /// Raw parameters whose logistic reproduces `model`'s decays.
    pub fn from_model(model: &ModelSpec) -> Self {
        let kind = model.kind;
        let raw = |v: &[f64], on: bool| on.then(|| v.iter().map(|&p| logit(p)).collect());
        HeterogeneousParams {
            hidden_a: raw(&model.hidden.alpha, kind.trains_alpha()),
            hidden_b: raw(&model.hidden.beta, kind.trains_beta()),
            readout_a: raw(&model.readout.alpha, kind.trains_alpha()),
            readout_b: raw(&model.readout.beta, kind.trains_beta()),
        }
    }

    /// `base` with trained decays substituted in.
    pub fn apply(&self, base: &ModelSpec) -> Result<ModelSpec> {
        let layer = |d: &DecayParams, a: &Option<Vec<f64>>, b: &Option<Vec<f64>>| {
            let alpha = a.as_ref().map_or_else(
                || d.alpha.clone(),
                |a| a.iter().map(|&x| logistic(x)).collect(),
            );
            let beta = b.as_ref().map_or_else(
                || d.beta.clone(),
                |b| b.iter().map(|&x| logistic(x)).collect(),
            );
            DecayParams::new(alpha, beta, d.dt_ms)
        };
        Ok(ModelSpec {
            kind: base.kind,
            hidden: layer(&base.hidden, &self.hidden_a, &self.hidden_b)?,
            readout: layer(&base.readout, &self.readout_a, &self.readout_b)?,
            theta: base.theta,
        })
    }

    fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        [
            &mut self.hidden_a,
            &mut self.hidden_b,
            &mut self.readout_a,
            &mut self.readout_b,
        ]
        .into_iter()
        .flatten()
        .map(Vec::as_mut_slice)
    }
}

/// Everything the optimizer updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainableParams {
    pub weights: WeightSet,
    pub heterogeneous: Option<HeterogeneousParams>,
}

impl TrainableParams {
    pub fn new(weights: WeightSet, model: &ModelSpec, heterogeneous: bool) -> Self {
        TrainableParams {
            weights,
            heterogeneous: heterogeneous.then(|| HeterogeneousParams::from_model(model)),
        }
    }

    /// Decays actually used in the forward pass.
    pub fn effective_model(&self, base: &ModelSpec) -> Result<ModelSpec> {
        match &self.heterogeneous {
            Some(h) => h.apply(base),
            None => Ok(base.clone()),
        }
    }

    /// Flat views in a fixed order shared with [`Gradients::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.weights.w1.as_mut_slice()];
        if let Some(v) = &mut self.weights.v {
            out.push(v.as_mut_slice());
        }
        out.push(self.weights.w2.as_mut_slice());
        if let Some(h) = &mut self.heterogeneous {
            out.extend(h.tensors_mut());
        }
        out
    }
}

/// Gradients mirroring [`TrainableParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Matrix,
    pub v: Option<Matrix>,
    pub w2: Matrix,
    pub hidden_a: Option<Vec<f64>>,
    pub hidden_b: Option<Vec<f64>>,
    pub readout_a: Option<Vec<f64>>,
    pub readout_b: Option<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &TrainableParams) -> Self {
        let w = &params.weights;
        let z = |o: &Option<Vec<f64>>| o.as_ref().map(|v| vec![0.0; v.len()]);
        let h = params.heterogeneous.as_ref();
        Gradients {
            w1: Matrix::zeros(w.w1.rows(), w.w1.cols()),
            v: w.v.as_ref().map(|v| Matrix::zeros(v.rows(), v.cols())),
            w2: Matrix::zeros(w.w2.rows(), w.w2.cols()),
            hidden_a: h.and_then(|h| z(&h.hidden_a)),
            hidden_b: h.and_then(|h| z(&h.hidden_b)),
            readout_a: h.and_then(|h| z(&h.readout_a)),
            readout_b: h.and_then(|h| z(&h.readout_b)),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.w1.as_slice()];
        if let Some(v) = &self.v {
            out.push(v.as_slice());
        }
        out.push(self.w2.as_slice());
        for t in [
            &self.hidden_a,
            &self.hidden_b,
            &self.readout_a,
            &self.readout_b,
        ]
        .into_iter()
        .flatten()
        {
            out.push(t);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.w1.as_mut_slice()];
        if let Some(v) = &mut self.v {
            out.push(v.as_mut_slice());
        }
        out.push(self.w2.as_mut_slice());
        for t in [
            &mut self.hidden_a,
            &mut self.hidden_b,
            &mut self.readout_a,
            &mut self.readout_b,
        ]
        .into_iter()
        .flatten()
        {
            out.push(t);
        }
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        let theirs = other.tensors();
        let mut mine = self.tensors_mut();
        if mine.len() != theirs.len() || mine.iter().zip(&theirs).any(|(a, b)| a.len() != b.len()) {
            return Err(SnnError::Dimension("gradient layouts differ".into()));
        }
        for (a, b) in mine.iter_mut().zip(theirs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Checks that a model respects the kind's pinned decays.
pub fn check_kind_decays(model: &ModelSpec) -> Result<()> {
    let pinned = |d: &DecayParams| match model.kind {
        NeuronKind::If => d.alpha.iter().all(|&a| a == 0.0) && d.beta.iter().all(|&b| b == 1.0),
        NeuronKind::Lif => d.alpha.iter().all(|&a| a == 0.0),
        NeuronKind::CubaLif => true,
    };
    if pinned(&model.hidden) && pinned(&model.readout) {
        Ok(())
    } else {
        Err(SnnError::Domain(format!(
            "decays violate the {} constraints",
            model.kind
        )))
    }
}
