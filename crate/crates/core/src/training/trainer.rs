use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    backward_bptt, check_kind_decays, sample_loss, AdamaxConfig, AdamaxState, Gradients,
    SurrogateConfig, TrainableParams,
};
use crate::error::{Result, SnnError};
use crate::event_data::Dataset;
use crate::metrics::evaluate;
use crate::network::{forward, init_weights, ModelSpec, Topology};

/// Samples per gradient-accumulation chunk. Chunks are summed in index
/// order, so results do not depend on the thread count.
const CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub heterogeneous: bool,
    pub surrogate: SurrogateConfig,
    pub adamax: AdamaxConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(SnnError::Domain("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(SnnError::Domain(
                "batch_size and epochs must be positive".into(),
            ));
        }
        if !(self.surrogate.steepness > 0.0) {
            return Err(SnnError::Domain(
                "surrogate steepness must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub hidden_spikes_per_sample: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: TrainableParams,
    /// Model the run started from; combine with `params` for the trained decays.
    pub base_model: ModelSpec,
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    pub fn effective_model(&self) -> Result<ModelSpec> {
        self.params.effective_model(&self.base_model)
    }
}

pub fn train(
    train_set: &Dataset,
    test_set: &Dataset,
    topology: &Topology,
    model: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_observer(train_set, test_set, topology, model, cfg, |_| {})
}

/// Mini-batch training; `observe` sees each epoch's log line as it completes.
pub fn train_with_observer(
    train_set: &Dataset,
    test_set: &Dataset,
    topology: &Topology,
    model: &ModelSpec,
    cfg: &TrainConfig,
    mut observe: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    topology.validate()?;
    check_kind_decays(model)?;
    for (name, set) in [("train", train_set), ("test", test_set)] {
        if set.is_empty() {
            return Err(SnnError::MalformedInput(format!("{name} split is empty")));
        }
        if set.channels() != Some(topology.inputs) {
            return Err(SnnError::Dimension(format!(
                "{name} split has {:?} channels, topology expects {}",
                set.channels(),
                topology.inputs
            )));
        }
        if set.class_count > topology.outputs {
            return Err(SnnError::Dimension(format!(
                "{name} split has {} classes, readout has {} neurons",
                set.class_count, topology.outputs
            )));
        }
    }

    let weights = init_weights(topology, cfg.seed)?;
    let mut params = TrainableParams::new(weights, model, cfg.heterogeneous);
    let sizes: Vec<usize> = params.tensors_mut().iter().map(|t| t.len()).collect();
    let mut opt = AdamaxState::new(sizes, cfg.adamax);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let effective = params.effective_model(model)?;
            let (loss, grads) = batch_gradients(train_set, batch, &params, &effective, cfg)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(SnnError::Numeric(format!(
                    "non-finite loss or gradient in epoch {epoch}"
                )));
            }
            loss_sum += loss * batch.len() as f64;
            let g = grads.tensors();
            opt.step(&mut params.tensors_mut(), &g, cfg.learning_rate)?;
        }
        let effective = params.effective_model(model)?;
        let eval = evaluate(test_set, &params.weights, &effective)?;
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            test_accuracy: eval.accuracy(&test_set.labels)?,
            hidden_spikes_per_sample: eval.spikes_per_sample(),
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        observe(&entry);
        log.push(entry);
    }
    Ok(TrainOutcome {
        params,
        base_model: model.clone(),
        log,
    })
}

/// Mean loss and summed (already batch-averaged) gradients over `batch`.
fn batch_gradients(
    data: &Dataset,
    batch: &[usize],
    params: &TrainableParams,
    model: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<(f64, Gradients)> {
    let scale = 1.0 / batch.len() as f64;
    let partials = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Gradients::zeros_like(params);
            let mut loss = 0.0;
            for &k in chunk {
                let raster = &data.rasters[k];
                let record = forward(raster, &params.weights, model)?;
                let s = sample_loss(&record, data.labels[k], scale);
                loss += s.loss;
                let g = backward_bptt(&record, raster, params, model, &s.grads, &cfg.surrogate)?;
                acc.add_assign(&g)?;
            }
            Ok((loss, acc))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Gradients::zeros_like(params);
    let mut loss = 0.0;
    for (l, g) in &partials {
        loss += l;
        total.add_assign(g)?;
    }
    Ok((loss * scale, total))
}
