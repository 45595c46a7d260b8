//! Fixtures shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snn_core::event_data::SpikeRaster;
use snn_core::network::{init_weights, ModelSpec, Topology, WeightSet};
use snn_core::neuron::NeuronKind;

/// Raster with each bit set independently with probability `rate`.
pub fn raster(steps: usize, channels: usize, rate: f64, seed: u64) -> SpikeRaster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = SpikeRaster::zeros(steps, channels, 14.0);
    for t in 0..steps {
        for c in 0..channels {
            r.set(t, c, rng.random_bool(rate));
        }
    }
    r
}

pub fn network(topology: Topology, kind: NeuronKind) -> (WeightSet, ModelSpec) {
    let weights = init_weights(&topology, 0).expect("valid topology");
    let model = ModelSpec::homogeneous(kind, &topology, 1680.0, 28.0, 14.0).expect("valid taus");
    (weights, model)
}
