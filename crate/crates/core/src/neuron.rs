//! Discrete-time IF, LIF and CUBA-LIF layers.
//!
//! One step of a layer reads only values from the previous step:
//!
//! ```text
//! I[t] = α ⊙ I[t-1] + W · s_in[t] + V · S[t-1]
//! U[t] = (β ⊙ U[t-1] + I[t]) ⊙ (1 - S[t-1])
//! S[t] = Θ(U[t] - ϑ)
//! ```
//!
//! LIF is the special case α = 0, IF additionally has β = 1.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeuronKind {
    #[serde(rename = "IF")]
    If,
    #[serde(rename = "LIF")]
    Lif,
    #[serde(rename = "CUBA_LIF")]
    CubaLif,
}

impl NeuronKind {
    pub const ALL: [NeuronKind; 3] = [NeuronKind::If, NeuronKind::Lif, NeuronKind::CubaLif];

    /// Synaptic decay actually used by this kind for neuron `i`.
    #[inline]
    pub fn alpha(self, decay: &DecayParams, i: usize) -> f64 {
        match self {
            NeuronKind::CubaLif => decay.alpha[i],
            NeuronKind::If | NeuronKind::Lif => 0.0,
        }
    }

    /// Membrane decay actually used by this kind for neuron `i`.
    #[inline]
    pub fn beta(self, decay: &DecayParams, i: usize) -> f64 {
        match self {
            NeuronKind::If => 1.0,
            NeuronKind::Lif | NeuronKind::CubaLif => decay.beta[i],
        }
    }

    pub fn trains_alpha(self) -> bool {
        self == NeuronKind::CubaLif
    }

    pub fn trains_beta(self) -> bool {
        self != NeuronKind::If
    }
}

impl std::fmt::Display for NeuronKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NeuronKind::If => "IF",
            NeuronKind::Lif => "LIF",
            NeuronKind::CubaLif => "CUBA_LIF",
        })
    }
}

impl std::str::FromStr for NeuronKind {
    type Err = SnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "IF" => Ok(NeuronKind::If),
            "LIF" => Ok(NeuronKind::Lif),
            "CUBA_LIF" | "CUBALIF" => Ok(NeuronKind::CubaLif),
            other => Err(SnnError::MalformedInput(format!(
                "unknown neuron kind {other:?}"
            ))),
        }
    }
}

/// Firing threshold ϑ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold(pub f64);

impl Default for Threshold {
    fn default() -> Self {
        Threshold(1.0)
    }
}

/// Per-step decay `exp(-dt/τ)`; `τ = 0` gives 0 and `τ = ∞` gives 1.
pub fn decay_from_tau(tau_ms: f64, dt_ms: f64) -> Result<f64> {
    if tau_ms.is_nan() || tau_ms < 0.0 {
        return Err(SnnError::Domain(format!(
            "time constant must be >= 0, got {tau_ms}"
        )));
    }
    if !(dt_ms > 0.0) || !dt_ms.is_finite() {
        return Err(SnnError::Domain(format!(
            "dt must be positive, got {dt_ms}"
        )));
    }
    Ok(if tau_ms == 0.0 {
        0.0
    } else if tau_ms.is_infinite() {
        1.0
    } else {
        (-dt_ms / tau_ms).exp()
    })
}

/// Per-neuron decay factors of one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub dt_ms: f64,
}

impl DecayParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, dt_ms: f64) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(SnnError::Dimension(format!(
                "alpha has {} entries, beta has {}",
                alpha.len(),
                beta.len()
            )));
        }
        if let Some(a) = alpha.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(SnnError::Domain(format!("alpha {a} outside [0, 1)")));
        }
        if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && **b <= 1.0)) {
            return Err(SnnError::Domain(format!("beta {b} outside (0, 1]")));
        }
        Ok(DecayParams { alpha, beta, dt_ms })
    }

    /// Same time constants for all `n` neurons; the kind pins whatever it
    /// does not leave free (IF: α=0, β=1; LIF: α=0).
    pub fn homogeneous(
        kind: NeuronKind,
        n: usize,
        tau_mem_ms: f64,
        tau_syn_ms: f64,
        dt_ms: f64,
    ) -> Result<Self> {
        let alpha = match kind {
            NeuronKind::CubaLif => decay_from_tau(tau_syn_ms, dt_ms)?,
            _ => 0.0,
        };
        let beta = match kind {
            NeuronKind::If => 1.0,
            _ => decay_from_tau(tau_mem_ms, dt_ms)?,
        };
        DecayParams::new(vec![alpha; n], vec![beta; n], dt_ms)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Synaptic current, membrane potential and last spikes of a layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub current: Vec<f64>,
    pub membrane: Vec<f64>,
    pub spikes: Vec<f64>,
}

impl LayerState {
    pub fn zeros(n: usize) -> Self {
        LayerState {
            current: vec![0.0; n],
            membrane: vec![0.0; n],
            spikes: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.membrane.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membrane.is_empty()
    }
}

/// Nonlinearity mapping `U - ϑ` to the emitted spike.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpikeFn {
    /// Θ(x) = 1 for x ≥ 0.
    Heaviside,
    /// x / (1 + k|x|), the smooth relaxation whose derivative is the surrogate.
    FastSigmoid { steepness: f64 },
}

impl SpikeFn {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            SpikeFn::Heaviside => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::FastSigmoid { steepness } => x / (1.0 + steepness * x.abs()),
        }
    }
}

/// Advances one layer by a step given its precomputed synaptic drive
/// (`W·s_in + V·S[t-1]`). `reset_spikes` supplies the S[t-1] used in the
/// reset factor; `None` disables reset and output (non-spiking readout).
pub(crate) fn integrate(
    kind: NeuronKind,
    decay: &DecayParams,
    prev: &LayerState,
    drive: &[f64],
    reset_spikes: Option<&[f64]>,
    spike_fn: SpikeFn,
    theta: Threshold,
) -> LayerState {
    let n = prev.len();
    let mut next = LayerState::zeros(n);
    for i in 0..n {
        let current = kind.alpha(decay, i) * prev.current[i] + drive[i];
        let mut membrane = kind.beta(decay, i) * prev.membrane[i] + current;
        next.current[i] = current;
        if let Some(reset) = reset_spikes {
            membrane *= 1.0 - reset[i];
            next.spikes[i] = spike_fn.apply(membrane - theta.0);
        }
        next.membrane[i] = membrane;
    }
    next
}

/// One exact step of a spiking layer. `v` is the recurrent matrix (absent in
/// feedforward layers); the recurrent input is the layer's own previous spikes.
#[allow(clippy::too_many_arguments)]
pub fn step_layer(
    kind: NeuronKind,
    state: &LayerState,
    ff_spikes: &[f64],
    w: &Matrix,
    v: Option<&Matrix>,
    decay: &DecayParams,
    theta: Threshold,
) -> Result<LayerState> {
    let n = state.len();
    if w.rows() != n || w.cols() != ff_spikes.len() {
        return Err(SnnError::Dimension(format!(
            "W is {:?} but layer has {n} neurons and {} inputs",
            w.shape(),
            ff_spikes.len()
        )));
    }
    if let Some(v) = v {
        if v.shape() != (n, n) {
            return Err(SnnError::Dimension(format!(
                "V is {:?}, expected ({n}, {n})",
                v.shape()
            )));
        }
    }
    if decay.len() != n || state.current.len() != n || state.spikes.len() != n {
        return Err(SnnError::Dimension(format!(
            "state/decay sizes disagree with {n} neurons"
        )));
    }
    let mut drive = vec![0.0; n];
    w.mul_vec_acc(ff_spikes, &mut drive);
    if let Some(v) = v {
        v.mul_vec_acc(&state.spikes, &mut drive);
    }
    Ok(integrate(
        kind,
        decay,
        state,
        &drive,
        Some(&state.spikes),
        SpikeFn::Heaviside,
        theta,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub step: usize,
    pub current: f64,
    pub membrane: f64,
    pub spike: f64,
}

/// Full trajectory of one neuron driven by a single input channel.
pub fn trace_single_neuron(
    kind: NeuronKind,
    input: &[bool],
    weight: f64,
    alpha: f64,
    beta: f64,
    steps: usize,
) -> Result<Vec<TracePoint>> {
    let decay = DecayParams::new(vec![alpha], vec![beta], 1.0)?;
    let w = Matrix::from_vec(1, 1, vec![weight])?;
    let mut state = LayerState::zeros(1);
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let x = [input.get(t).copied().unwrap_or(false) as u8 as f64];
        state = step_layer(kind, &state, &x, &w, None, &decay, Threshold::default())?;
        out.push(TracePoint {
            step: t,
            current: state.current[0],
            membrane: state.membrane[0],
            spike: state.spikes[0],
        });
    }
    Ok(out)
}

/// Writes a trace as CSV with columns `step,I,U,S`.
pub fn write_trace_csv(mut w: impl Write, trace: &[TracePoint]) -> std::io::Result<()> {
    writeln!(w, "step,I,U,S")?;
    for p in trace {
        writeln!(w, "{},{},{},{}", p.step, p.current, p.membrane, p.spike)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(alpha: f64, beta: f64) -> DecayParams {
        DecayParams::new(vec![alpha], vec![beta], 14.0).unwrap()
    }

    #[test]
    fn decay_values() {
        assert!((decay_from_tau(14.0, 14.0).unwrap() - 0.368).abs() < 1e-3);
        assert!((decay_from_tau(140.0, 14.0).unwrap() - 0.905).abs() < 1e-3);
        assert_eq!(decay_from_tau(f64::INFINITY, 14.0).unwrap(), 1.0);
        assert_eq!(decay_from_tau(0.0, 14.0).unwrap(), 0.0);
        assert!(matches!(
            decay_from_tau(-1.0, 14.0),
            Err(SnnError::Domain(_))
        ));
        assert!(decay_from_tau(1.0, 0.0).is_err());
    }

    #[test]
    fn lif_substitution() {
        let state = LayerState {
            current: vec![0.0],
            membrane: vec![0.5],
            spikes: vec![0.0],
        };
        let w = Matrix::from_vec(1, 2, vec![0.15, 0.05]).unwrap();
        let next = step_layer(
            NeuronKind::Lif,
            &state,
            &[1.0, 1.0],
            &w,
            None,
            &single(0.0, 0.905),
            Threshold::default(),
        )
        .unwrap();
        assert!((next.membrane[0] - 0.6525).abs() < 1e-12);
        assert_eq!(next.spikes[0], 0.0);
    }

    #[test]
    fn previous_spike_zeroes_membrane() {
        for kind in NeuronKind::ALL {
            let state = LayerState {
                current: vec![0.7],
                membrane: vec![1.3],
                spikes: vec![1.0],
            };
            let w = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
            let next = step_layer(
                kind,
                &state,
                &[1.0],
                &w,
                None,
                &single(0.5, 0.9),
                Threshold::default(),
            )
            .unwrap();
            assert_eq!(next.membrane[0], 0.0, "{kind}");
            assert_eq!(next.spikes[0], 0.0);
        }
    }

    #[test]
    fn if_crosses_threshold() {
        let state = LayerState {
            current: vec![0.0],
            membrane: vec![0.999],
            spikes: vec![0.0],
        };
        let w = Matrix::from_vec(1, 1, vec![0.002]).unwrap();
        let next = step_layer(
            NeuronKind::If,
            &state,
            &[1.0],
            &w,
            None,
            &single(0.0, 1.0),
            Threshold::default(),
        )
        .unwrap();
        assert!((next.membrane[0] - 1.001).abs() < 1e-12);
        assert_eq!(next.spikes[0], 1.0);
    }

    #[test]
    fn dimension_mismatch_is_structural_error() {
        let w = Matrix::zeros(2, 3);
        let r = step_layer(
            NeuronKind::If,
            &LayerState::zeros(2),
            &[0.0; 2],
            &w,
            None,
            &DecayParams::homogeneous(NeuronKind::If, 2, f64::INFINITY, 0.0, 14.0).unwrap(),
            Threshold::default(),
        );
        assert!(matches!(r, Err(SnnError::Dimension(_))));
    }

    /// Scalar re-statement of the update rule, one neuron at a time.
    fn scalar_oracle(
        w: &[Vec<f64>],
        v: &[Vec<f64>],
        alpha: &[f64],
        beta: &[f64],
        inputs: &[Vec<f64>],
    ) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = alpha.len();
        let (mut i_prev, mut u_prev, mut s_prev) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut out = Vec::new();
        for x in inputs {
            let mut i_new = vec![0.0; n];
            let mut u_new = vec![0.0; n];
            let mut s_new = vec![0.0; n];
            for k in 0..n {
                let mut ff = 0.0;
                for j in 0..x.len() {
                    ff += w[k][j] * x[j];
                }
                let mut rec = 0.0;
                for j in 0..n {
                    rec += v[k][j] * s_prev[j];
                }
                i_new[k] = alpha[k] * i_prev[k] + ff + rec;
                u_new[k] = (beta[k] * u_prev[k] + i_new[k]) * (1.0 - s_prev[k]);
                s_new[k] = if u_new[k] >= 1.0 { 1.0 } else { 0.0 };
            }
            out.push((i_new.clone(), u_new.clone(), s_new.clone()));
            i_prev = i_new;
            u_prev = u_new;
            s_prev = s_new;
        }
        out
    }

    #[test]
    fn cuba_layer_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, c) = (4, 5);
        let w: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..c).map(|_| rng.random_range(-0.5..1.0)).collect())
            .collect();
        let v: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-0.5..0.5)).collect())
            .collect();
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.95)).collect();
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.0)).collect();
        let inputs: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..c).map(|_| rng.random_bool(0.4) as u8 as f64).collect())
            .collect();

        let wm = Matrix::from_fn(n, c, |r, k| w[r][k]);
        let vm = Matrix::from_fn(n, n, |r, k| v[r][k]);
        let decay = DecayParams::new(alpha.clone(), beta.clone(), 14.0).unwrap();
        let mut state = LayerState::zeros(n);
        let oracle = scalar_oracle(&w, &v, &alpha, &beta, &inputs);
        let mut fired = 0.0;
        for (x, (i_o, u_o, s_o)) in inputs.iter().zip(&oracle) {
            state = step_layer(
                NeuronKind::CubaLif,
                &state,
                x,
                &wm,
                Some(&vm),
                &decay,
                Threshold::default(),
            )
            .unwrap();
            for k in 0..n {
                assert!((state.current[k] - i_o[k]).abs() <= 1e-12);
                assert!((state.membrane[k] - u_o[k]).abs() <= 1e-12);
                assert_eq!(state.spikes[k], s_o[k]);
            }
            fired += s_o.iter().sum::<f64>();
        }
        assert!(fired > 0.0, "instance should exercise resets");
    }

    #[test]
    fn traces() {
        let t = trace_single_neuron(NeuronKind::If, &[], 1.0, 0.0, 1.0, 10).unwrap();
        assert!(t.iter().all(|p| p.membrane == 0.0));

        let t = trace_single_neuron(NeuronKind::Lif, &[true], 0.5, 0.0, 0.5, 4).unwrap();
        let u: Vec<f64> = t.iter().map(|p| p.membrane).collect();
        assert_eq!(u, vec![0.5, 0.25, 0.125, 0.0625]);

        // CUBA-LIF: current decays geometrically, membrane rises then decays.
        let t = trace_single_neuron(NeuronKind::CubaLif, &[true], 0.3, 0.8, 0.9, 40).unwrap();
        for w in t.windows(2) {
            assert!((w[1].current - 0.8 * w[0].current).abs() < 1e-15);
        }
        let peak = (0..t.len())
            .max_by(|&a, &b| t[a].membrane.total_cmp(&t[b].membrane))
            .unwrap();
        assert!(peak > 0 && peak < 39);
        assert!(t[39].membrane < t[peak].membrane);

        let mut csv = Vec::new();
        write_trace_csv(&mut csv, &t[..2]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("step,I,U,S\n0,0.3,0.3,0\n"));
    }

    fn arb_layer() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        (1usize..5, 1usize..5, 1usize..12).prop_flat_map(|(n, c, t)| {
            (
                prop::collection::vec(-1.0f64..1.5, n * c),
                prop::collection::vec(-0.5f64..0.5, n * n),
                prop::collection::vec(0.01f64..1.0, n),
                prop::collection::vec(
                    prop::collection::vec(prop::bool::ANY.prop_map(|b| b as u8 as f64), c),
                    t,
                ),
            )
        })
    }

    fn run(
        kind: NeuronKind,
        w: &Matrix,
        v: &Matrix,
        decay: &DecayParams,
        xs: &[Vec<f64>],
    ) -> Vec<LayerState> {
        let mut s = LayerState::zeros(w.rows());
        xs.iter()
            .map(|x| {
                s = step_layer(kind, &s, x, w, Some(v), decay, Threshold::default()).unwrap();
                s.clone()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn model_reductions_are_exact((w, v, beta, xs) in arb_layer()) {
            let n = beta.len();
            let c = xs[0].len();
            let wm = Matrix::from_vec(n, c, w).unwrap();
            let vm = Matrix::from_vec(n, n, v).unwrap();
            let cuba = DecayParams::new(vec![0.0; n], beta.clone(), 14.0).unwrap();
            let lif = DecayParams::new(vec![0.7; n], beta, 14.0).unwrap();
            prop_assert_eq!(run(NeuronKind::CubaLif, &wm, &vm, &cuba, &xs), run(NeuronKind::Lif, &wm, &vm, &lif, &xs));
            let lif_one = DecayParams::new(vec![0.0; n], vec![1.0; n], 14.0).unwrap();
            let if_any = DecayParams::new(vec![0.3; n], vec![0.5; n], 14.0).unwrap();
            let a = run(NeuronKind::Lif, &wm, &vm, &lif_one, &xs);
            prop_assert_eq!(&a, &run(NeuronKind::If, &wm, &vm, &if_any, &xs));
            for s in &a {
                for k in 0..n {
                    prop_assert_eq!(s.spikes[k], if s.membrane[k] >= 1.0 { 1.0 } else { 0.0 });
                }
            }
        }

        #[test]
        fn free_membrane_never_grows(u0 in -3.0f64..3.0, beta in 0.01f64..1.0, steps in 1usize..30) {
            let decay = DecayParams::new(vec![0.5], vec![beta], 14.0).unwrap();
            let w = Matrix::zeros(1, 1);
            for kind in NeuronKind::ALL {
                let mut s = LayerState { current: vec![0.0], membrane: vec![u0], spikes: vec![0.0] };
                for _ in 0..steps {
                    let next = step_layer(kind, &s, &[0.0], &w, None, &decay, Threshold::default()).unwrap();
                    if s.spikes[0] == 0.0 {
                        if kind == NeuronKind::If {
                            prop_assert_eq!(next.membrane[0], s.membrane[0]);
                        } else {
                            prop_assert!(next.membrane[0].abs() <= s.membrane[0].abs());
                        }
                    } else {
                        prop_assert_eq!(next.membrane[0], 0.0);
                    }
                    s = next;
                }
            }
        }
    }
}
