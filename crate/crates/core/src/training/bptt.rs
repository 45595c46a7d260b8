//! Reverse pass through the unrolled network.
//!
//! Adjoints run backwards from `t = T-1`:
//!
//! ```text
//! gU2[t] = ∂L/∂U2[t] + β2 ⊙ gU2[t+1]
//! gI2[t] = gU2[t] + α2 ⊙ gI2[t+1]
//! gS[t]  = W2ᵀ gI2[t] + Vᵀ gI[t+1]
//! gU[t]  = gS[t] ⊙ σ'(U[t]) + β ⊙ (1 - S[t]) ⊙ gU[t+1]
//! gI[t]  = gU[t] ⊙ (1 - S[t-1]) + α ⊙ gI[t+1]
//! ```
//!
//! The reset factor `(1 - S[t-1])` is a constant here: no gradient flows
//! through the spike that caused a reset.

use super::{surrogate_at, Gradients, ReadoutGrad, SurrogateConfig, TrainableParams};
use crate::error::{Result, SnnError};
use crate::event_data::SpikeRaster;
use crate::network::{ForwardRecord, ModelSpec};

/// Gradients of one sample's loss. `readout_grads[i]` carries `∂L/∂U2_i`
/// at that neuron's peak step; `model` must be the effective model the
/// record was produced with.
pub fn backward_bptt(
    record: &ForwardRecord,
    raster: &SpikeRaster,
    params: &TrainableParams,
    model: &ModelSpec,
    readout_grads: &[ReadoutGrad],
    cfg: &SurrogateConfig,
) -> Result<Gradients> {
    let w = &params.weights;
    let topo = w.topology();
    let (nh, no, steps) = (topo.hidden, topo.outputs, record.steps);
    if record.hidden != nh
        || record.outputs != no
        || raster.steps() != steps
        || raster.channels() != topo.inputs
        || readout_grads.len() != no
    {
        return Err(SnnError::Dimension(
            "record, raster and weights disagree".into(),
        ));
    }
    let kind = model.kind;
    let alpha_h: Vec<f64> = (0..nh).map(|i| kind.alpha(&model.hidden, i)).collect();
    let beta_h: Vec<f64> = (0..nh).map(|i| kind.beta(&model.hidden, i)).collect();
    let alpha_o: Vec<f64> = (0..no).map(|i| kind.alpha(&model.readout, i)).collect();
    let beta_o: Vec<f64> = (0..no).map(|i| kind.beta(&model.readout, i)).collect();
    let theta = model.theta.0;

    let mut grads = Gradients::zeros_like(params);
    let hetero = params.heterogeneous.is_some();
    let mut g_alpha_h = vec![0.0; nh];
    let mut g_beta_h = vec![0.0; nh];
    let mut g_alpha_o = vec![0.0; no];
    let mut g_beta_o = vec![0.0; no];

    let mut gu2_next = vec![0.0; no];
    let mut gi2_next = vec![0.0; no];
    let mut gu_next = vec![0.0; nh];
    let mut gi_next = vec![0.0; nh];
    let mut gu2 = vec![0.0; no];
    let mut gi2 = vec![0.0; no];
    let mut gs = vec![0.0; nh];
    let mut gu = vec![0.0; nh];
    let mut gi = vec![0.0; nh];
    let mut x = vec![0.0; topo.inputs];
    let zeros_h = vec![0.0; nh];
    let zeros_o = vec![0.0; no];

    for t in (0..steps).rev() {
        let s_t = record.hidden_spikes_at(t);
        let (s_prev, u_prev, i_prev, u2_prev, i2_prev) = if t > 0 {
            (
                record.hidden_spikes_at(t - 1),
                record.hidden_membrane_at(t - 1),
                record.hidden_current_at(t - 1),
                record.readout_at(t - 1),
                record.readout_current_at(t - 1),
            )
        } else {
            (
                &zeros_h[..],
                &zeros_h[..],
                &zeros_h[..],
                &zeros_o[..],
                &zeros_o[..],
            )
        };

        for i in 0..no {
            let direct = if readout_grads[i].step == t {
                readout_grads[i].grad
            } else {
                0.0
            };
            gu2[i] = direct + beta_o[i] * gu2_next[i];
            gi2[i] = gu2[i] + alpha_o[i] * gi2_next[i];
            if hetero {
                g_beta_o[i] += gu2[i] * u2_prev[i];
                g_alpha_o[i] += gi2[i] * i2_prev[i];
            }
        }
        grads.w2.add_outer(&gi2, s_t);

        gs.fill(0.0);
        w.w2.mul_vec_transposed_acc(&gi2, &mut gs);
        if let Some(v) = &w.v {
            v.mul_vec_transposed_acc(&gi_next, &mut gs);
        }
        let u_t = record.hidden_membrane_at(t);
        for i in 0..nh {
            let sg = surrogate_at(u_t[i] - theta, cfg.steepness);
            gu[i] = gs[i] * sg + beta_h[i] * (1.0 - s_t[i]) * gu_next[i];
            let reset = 1.0 - s_prev[i];
            gi[i] = gu[i] * reset + alpha_h[i] * gi_next[i];
            if hetero {
                g_beta_h[i] += gu[i] * reset * u_prev[i];
                g_alpha_h[i] += gi[i] * i_prev[i];
            }
        }
        raster.row_into(t, &mut x);
        grads.w1.add_outer(&gi, &x);
        if let Some(gv) = &mut grads.v {
            gv.add_outer(&gi, s_prev);
        }

        std::mem::swap(&mut gu2, &mut gu2_next);
        std::mem::swap(&mut gi2, &mut gi2_next);
        std::mem::swap(&mut gu, &mut gu_next);
        std::mem::swap(&mut gi, &mut gi_next);
    }

    // Chain through α = logistic(a): dα/da = α(1 - α).
    let chain = |slot: &mut Option<Vec<f64>>, g: &[f64], p: &[f64]| {
        if let Some(out) = slot {
            for ((o, &gk), &pk) in out.iter_mut().zip(g).zip(p) {
                *o = gk * pk * (1.0 - pk);
            }
        }
    };
    chain(&mut grads.hidden_a, &g_alpha_h, &model.hidden.alpha);
    chain(&mut grads.hidden_b, &g_beta_h, &model.hidden.beta);
    chain(&mut grads.readout_a, &g_alpha_o, &model.readout.alpha);
    chain(&mut grads.readout_b, &g_beta_o, &model.readout.beta);
    Ok(grads)
}
