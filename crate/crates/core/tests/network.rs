mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snn_core::network::{
    forward, forward_batch, init_weights, predict, ModelSpec, Topology, WeightSet,
};
use snn_core::neuron::NeuronKind;
use snn_core::Matrix;

#[test]
fn forward_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..20 {
        let kind = NeuronKind::ALL[case % 3];
        let recurrent = case % 2 == 0;
        let topo = Topology {
            inputs: 10,
            hidden: 4,
            outputs: 2,
            recurrent,
        };
        let weights = WeightSet {
            w1: support::random_matrix(&mut rng, 4, 10, -0.3, 0.8),
            v: recurrent.then(|| support::random_matrix(&mut rng, 4, 4, -0.5, 0.5)),
            w2: support::random_matrix(&mut rng, 2, 4, -1.0, 1.0),
        };
        let model = support::random_model(&mut rng, kind, &topo);
        let raster = support::random_raster(&mut rng, 6, 10, 0.4);
        let rec = forward(&raster, &weights, &model).unwrap();
        let oracle = support::scalar_forward(&raster, &weights, &model);
        for t in 0..6 {
            assert_eq!(rec.hidden_spikes_at(t), &oracle.hidden_spikes[t][..]);
            for i in 0..4 {
                assert!(
                    (rec.hidden_membrane_at(t)[i] - oracle.hidden_membrane[t][i]).abs() <= 1e-12
                );
            }
            for k in 0..2 {
                assert!((rec.readout_at(t)[k] - oracle.readout[t][k]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn zero_recurrence_is_feedforward() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let raster = support::random_raster(&mut rng, 20, 8, 0.5);
    for kind in NeuronKind::ALL {
        let topo = Topology {
            inputs: 8,
            hidden: 10,
            outputs: 3,
            recurrent: false,
        };
        let model = ModelSpec::homogeneous(kind, &topo, 420.0, 28.0, 14.0).unwrap();
        let mut w = init_weights(&topo, 9).unwrap();
        w.w1.scale(4.0);
        let ff = forward(&raster, &w, &model).unwrap();
        assert!(ff.hidden_spike_count() > 0.0);
        w.v = Some(Matrix::zeros(10, 10));
        assert_eq!(ff, forward(&raster, &w, &model).unwrap());
    }
}

#[test]
fn batching_does_not_change_results() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let topo = Topology {
        inputs: 8,
        hidden: 10,
        outputs: 3,
        recurrent: true,
    };
    let model = ModelSpec::homogeneous(NeuronKind::CubaLif, &topo, 140.0, 28.0, 14.0).unwrap();
    let w = init_weights(&topo, 2).unwrap();
    let rasters: Vec<_> = (0..17)
        .map(|_| {
            let rate = rng.random_range(0.1..0.7);
            support::random_raster(&mut rng, 15, 8, rate)
        })
        .collect();
    let refs: Vec<_> = rasters.iter().collect();
    let batched = forward_batch(&refs, &w, &model).unwrap();
    for (r, b) in rasters.iter().zip(&batched) {
        let single = forward(r, &w, &model).unwrap();
        assert_eq!(&single, b);
        assert_eq!(predict(&single), predict(b));
    }
}
