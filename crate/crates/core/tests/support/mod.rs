//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls the engine's forward or backward code.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snn_core::event_data::SpikeRaster;
use snn_core::metrics::OpCounts;
use snn_core::network::{
    forward_with, ForwardOptions, ForwardRecord, ModelSpec, Topology, WeightSet,
};
use snn_core::neuron::{DecayParams, NeuronKind, SpikeFn, Threshold};
use snn_core::training::{backward_bptt, sample_loss, SurrogateConfig, TrainableParams};
use snn_core::Matrix;

pub fn random_raster(rng: &mut ChaCha8Rng, steps: usize, channels: usize, p: f64) -> SpikeRaster {
    let mut r = SpikeRaster::zeros(steps, channels, 14.0);
    for t in 0..steps {
        for c in 0..channels {
            r.set(t, c, rng.random_bool(p));
        }
    }
    r
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Random decays obeying `kind`'s pinned values.
pub fn random_model(rng: &mut ChaCha8Rng, kind: NeuronKind, topo: &Topology) -> ModelSpec {
    let mut layer = |n: usize| {
        let alpha = (0..n)
            .map(|_| {
                if kind == NeuronKind::CubaLif {
                    rng.random_range(0.2..0.9)
                } else {
                    0.0
                }
            })
            .collect();
        let beta = (0..n)
            .map(|_| {
                if kind == NeuronKind::If {
                    1.0
                } else {
                    rng.random_range(0.5..0.98)
                }
            })
            .collect();
        DecayParams::new(alpha, beta, 14.0).unwrap()
    };
    ModelSpec {
        kind,
        hidden: layer(topo.hidden),
        readout: layer(topo.outputs),
        theta: Threshold::default(),
    }
}

pub struct ScalarRun {
    /// `[t][i]`
    pub hidden_spikes: Vec<Vec<f64>>,
    pub hidden_membrane: Vec<Vec<f64>>,
    pub readout: Vec<Vec<f64>>,
}

/// Per-scalar forward simulation written directly from the update rule.
pub fn scalar_forward(raster: &SpikeRaster, w: &WeightSet, model: &ModelSpec) -> ScalarRun {
    let nh = w.w1.rows();
    let no = w.w2.rows();
    let c_in = w.w1.cols();
    let (a_h, b_h, a_o, b_o) = effective(model);
    let mut ih = vec![0.0; nh];
    let mut uh = vec![0.0; nh];
    let mut sh = vec![0.0; nh];
    let mut io = vec![0.0; no];
    let mut uo = vec![0.0; no];
    let mut run = ScalarRun {
        hidden_spikes: vec![],
        hidden_membrane: vec![],
        readout: vec![],
    };
    for t in 0..raster.steps() {
        let mut ih_new = vec![0.0; nh];
        let mut uh_new = vec![0.0; nh];
        let mut sh_new = vec![0.0; nh];
        for i in 0..nh {
            let mut acc = a_h[i] * ih[i];
            for j in 0..c_in {
                if raster.get(t, j) {
                    acc += w.w1.get(i, j);
                }
            }
            if let Some(v) = &w.v {
                for j in 0..nh {
                    acc += v.get(i, j) * sh[j];
                }
            }
            ih_new[i] = acc;
            uh_new[i] = (b_h[i] * uh[i] + acc) * (1.0 - sh[i]);
            sh_new[i] = if uh_new[i] >= 1.0 { 1.0 } else { 0.0 };
        }
        for k in 0..no {
            let mut acc = a_o[k] * io[k];
            for i in 0..nh {
                acc += w.w2.get(k, i) * sh_new[i];
            }
            io[k] = acc;
            uo[k] = b_o[k] * uo[k] + acc;
        }
        ih = ih_new;
        uh = uh_new.clone();
        sh = sh_new.clone();
        run.hidden_spikes.push(sh_new);
        run.hidden_membrane.push(uh_new);
        run.readout.push(uo.clone());
    }
    run
}

fn effective(model: &ModelSpec) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let pick = |d: &DecayParams| match model.kind {
        NeuronKind::If => (vec![0.0; d.len()], vec![1.0; d.len()]),
        NeuronKind::Lif => (vec![0.0; d.len()], d.beta.clone()),
        NeuronKind::CubaLif => (d.alpha.clone(), d.beta.clone()),
    };
    let (a, b) = pick(&model.hidden);
    let (c, d) = pick(&model.readout);
    (a, b, c, d)
}

/// Max-over-time cross entropy, computed from scratch.
pub fn reference_loss(readout: &[f64], steps: usize, outputs: usize, label: usize) -> f64 {
    let maxima: Vec<f64> = (0..outputs)
        .map(|i| {
            (0..steps)
                .map(|t| readout[t * outputs + i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let z: f64 = maxima.iter().map(|m| m.exp()).sum();
    -(maxima[label].exp() / z).ln()
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst: String,
    pub checked: usize,
    pub max_abs_grad: f64,
}

/// Gradients smaller than this in both routes are compared absolutely.
pub const REL_FLOOR: f64 = 1e-8;

/// Central finite differences of the surrogate-relaxed loss against BPTT on
/// a random 3-4-2 network over 5 steps, batch of two samples.
pub fn gradient_check(
    kind: NeuronKind,
    recurrent: bool,
    hetero: bool,
    seed: u64,
    h: f64,
) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topo = Topology {
        inputs: 3,
        hidden: 4,
        outputs: 2,
        recurrent,
    };
    let steps = 5;
    let weights = WeightSet {
        w1: random_matrix(&mut rng, 4, 3, -0.4, 1.2),
        v: recurrent.then(|| random_matrix(&mut rng, 4, 4, -20.0, 20.0)),
        w2: random_matrix(&mut rng, 2, 4, -20.0, 20.0),
    };
    let base_model = random_model(&mut rng, kind, &topo);
    let params = TrainableParams::new(weights, &base_model, hetero);
    let rasters = [
        random_raster(&mut rng, steps, 3, 0.6),
        random_raster(&mut rng, steps, 3, 0.6),
    ];
    let labels = [0usize, 1];
    let cfg = SurrogateConfig::default();
    let relaxed = SpikeFn::FastSigmoid {
        steepness: cfg.steepness,
    };

    // BPTT route.
    let model = params.effective_model(&base_model).unwrap();
    let mut analytic: Option<Vec<Vec<f64>>> = None;
    let mut frozen = Vec::new();
    for (r, &y) in rasters.iter().zip(&labels) {
        let rec = forward_with(
            r,
            &params.weights,
            &model,
            ForwardOptions {
                spike_fn: relaxed,
                reset_spikes: None,
            },
        )
        .unwrap();
        let s = sample_loss(&rec, y, 0.5);
        let g = backward_bptt(&rec, r, &params, &model, &s.grads, &cfg).unwrap();
        let flat: Vec<Vec<f64>> = g.tensors().iter().map(|t| t.to_vec()).collect();
        analytic = Some(match analytic {
            None => flat,
            Some(acc) => acc
                .iter()
                .zip(&flat)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        });
        frozen.push(rec.hidden_spikes.clone());
    }
    let analytic = analytic.unwrap();

    // Finite-difference route with the reset factor held at its base value.
    let loss_at = |p: &TrainableParams| -> f64 {
        let m = p.effective_model(&base_model).unwrap();
        let mut total = 0.0;
        for ((r, &y), reset) in rasters.iter().zip(&labels).zip(&frozen) {
            let rec = forward_with(
                r,
                &p.weights,
                &m,
                ForwardOptions {
                    spike_fn: relaxed,
                    reset_spikes: Some(reset),
                },
            )
            .unwrap();
            total += reference_loss(&rec.readout_membrane, rec.steps, rec.outputs, y);
        }
        total / rasters.len() as f64
    };
    let mut probe = params.clone();
    let mut out = GradCheck {
        max_rel_err: 0.0,
        worst: String::new(),
        checked: 0,
        max_abs_grad: 0.0,
    };
    for (k, tensor) in analytic.iter().enumerate() {
        for (j, &a) in tensor.iter().enumerate() {
            let orig = probe.tensors_mut()[k][j];
            probe.tensors_mut()[k][j] = orig + h;
            let up = loss_at(&probe);
            probe.tensors_mut()[k][j] = orig - h;
            let down = loss_at(&probe);
            probe.tensors_mut()[k][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
            let rel = (a - numeric).abs() / denom;
            out.checked += 1;
            out.max_abs_grad = out.max_abs_grad.max(a.abs());
            if rel > out.max_rel_err {
                out.max_rel_err = rel;
                out.worst = format!("tensor {k} entry {j}: bptt {a:e} fd {numeric:e}");
            }
        }
    }
    out
}

/// Walks the event list of one sample and charges every arriving spike to
/// each target neuron, then adds leak and threshold work per neuron-step.
pub fn replay_synops(
    kind: NeuronKind,
    raster: &SpikeRaster,
    rec: &ForwardRecord,
    recurrent: bool,
) -> (OpCounts, OpCounts) {
    let (mults, extra) = match kind {
        NeuronKind::If => (0.0, 0.0),
        NeuronKind::Lif => (1.0, 0.0),
        NeuronKind::CubaLif => (2.0, 1.0),
    };
    let mut hidden = OpCounts::default();
    let mut readout = OpCounts::default();
    let events = raster.to_event_stream().unwrap();
    for ev in events.events() {
        let t = (ev.time_us as f64 / (1000.0 * raster.dt_ms())).floor() as usize;
        assert!(raster.get(t, ev.channel as usize));
        hidden.additions += rec.hidden as f64;
    }
    for t in 0..rec.steps {
        for &s in rec.hidden_spikes_at(t) {
            if s == 0.0 {
                continue;
            }
            readout.additions += rec.outputs as f64;
            if recurrent && t + 1 < rec.steps {
                hidden.additions += rec.hidden as f64;
            }
        }
        hidden.multiplications += mults * rec.hidden as f64;
        hidden.additions += extra * rec.hidden as f64;
        hidden.comparisons += rec.hidden as f64;
        readout.multiplications += mults * rec.outputs as f64;
        readout.additions += extra * rec.outputs as f64;
    }
    (hidden, readout)
}
