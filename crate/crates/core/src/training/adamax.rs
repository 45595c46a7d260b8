use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamaxConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamaxConfig {
    fn default() -> Self {
        AdamaxConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First moments `m` and infinity-norm accumulators `u`, one buffer per
/// parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamaxState {
    pub cfg: AdamaxConfig,
    pub m: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamaxState {
    pub fn new(sizes: impl IntoIterator<Item = usize>, cfg: AdamaxConfig) -> Self {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        AdamaxState {
            cfg,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            u: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
        if params.len() != self.m.len()
            || grads.len() != self.m.len()
            || params
                .iter()
                .zip(grads)
                .zip(&self.m)
                .any(|((p, g), m)| p.len() != m.len() || g.len() != m.len())
        {
            return Err(SnnError::Dimension(
                "optimizer state does not match parameters".into(),
            ));
        }
        self.step += 1;
        let AdamaxConfig { beta1, beta2, eps } = self.cfg;
        let rate = lr / (1.0 - beta1.powi(self.step.min(i32::MAX as u64) as i32));
        for (((p, g), m), u) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.u)
        {
            for k in 0..p.len() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                u[k] = (beta2 * u[k]).max(g[k].abs());
                p[k] -= rate * m[k] / (u[k] + eps);
            }
        }
        Ok(())
    }
}
