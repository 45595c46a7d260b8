use crate::error::{Result, SnnError};
use crate::network::ForwardRecord;

/// Loss gradient for one readout neuron, routed to its peak step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutGrad {
    pub step: usize,
    pub grad: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleLoss {
    pub loss: f64,
    pub grads: Vec<ReadoutGrad>,
}

/// Cross entropy of the softmax over per-neuron temporal maxima. Gradients
/// are multiplied by `scale` (the batch-mean factor); the loss is not.
pub fn sample_loss(record: &ForwardRecord, label: usize, scale: f64) -> SampleLoss {
    let maxima = record.readout_maxima();
    let top = maxima.iter().map(|m| m.0).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = maxima.iter().map(|m| (m.0 - top).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() - (maxima[label].0 - top);
    let grads = maxima
        .iter()
        .zip(&exps)
        .enumerate()
        .map(|(i, (&(_, step), &e))| {
            let target = if i == label { 1.0 } else { 0.0 };
            ReadoutGrad {
                step,
                grad: scale * (e / z - target),
            }
        })
        .collect();
    SampleLoss { loss, grads }
}

/// Batch-mean max-over-time loss and per-sample readout gradients.
pub fn loss_max_over_time(
    records: &[ForwardRecord],
    labels: &[usize],
) -> Result<(f64, Vec<Vec<ReadoutGrad>>)> {
    if records.is_empty() || records.len() != labels.len() {
        return Err(SnnError::Dimension(format!(
            "{} records and {} labels",
            records.len(),
            labels.len()
        )));
    }
    let scale = 1.0 / records.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(records.len());
    for (r, &y) in records.iter().zip(labels) {
        if y >= r.outputs {
            return Err(SnnError::MalformedInput(format!(
                "label {y} with {} readout neurons",
                r.outputs
            )));
        }
        let s = sample_loss(r, y, scale);
        total += s.loss;
        grads.push(s.grads);
    }
    Ok((total * scale, grads))
}
