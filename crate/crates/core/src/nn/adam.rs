use serde::{Deserialize, Serialize};

use super::{DenseNet, Gradients};
use crate::error::{Error, Result};

/// Adam with bias correction. Moment buffers are flat, in the same order as
/// [`DenseNet::parameters`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(net: &DenseNet, lr: f64) -> AdamState {
        AdamState::with_betas(net, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(net: &DenseNet, lr: f64, beta1: f64, beta2: f64, eps: f64) -> AdamState {
        let n = net.param_count();
        AdamState { lr, beta1, beta2, eps, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One update. Rejects non-finite gradients before touching anything.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() {
            return Err(Error::DimensionMismatch { expected: net.layers.len(), found: grads.layers.len() });
        }
        for (layer, g) in net.layers.iter().zip(&grads.layers) {
            if g.weights.len() != layer.weights.len() || g.biases.len() != layer.biases.len() {
                return Err(Error::DimensionMismatch {
                    expected: layer.weights.len() + layer.biases.len(),
                    found: g.weights.len() + g.biases.len(),
                });
            }
        }
        if self.m.len() != net.param_count() {
            return Err(Error::DimensionMismatch { expected: self.m.len(), found: net.param_count() });
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }

        self.t += 1;
        let t = self.t as i32;
        let step = self.lr / (1.0 - self.beta1.powi(t));
        let inv_correction2 = 1.0 / (1.0 - self.beta2.powi(t));
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);

        let mut offset = 0;
        for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
            for (params, grads) in [(&mut layer.weights, &g.weights), (&mut layer.biases, &g.biases)] {
                let n = params.len();
                let m = &mut self.m[offset..offset + n];
                let v = &mut self.v[offset..offset + n];
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
                    *m = flush(b1 * *m + (1.0 - b1) * g);
                    *v = flush(b2 * *v + (1.0 - b2) * g * g);
                    *p -= step * *m / ((*v * inv_correction2).sqrt() + eps);
                }
                offset += n;
            }
        }
        if !net.is_finite() {
            return Err(Error::NonFinite("network parameters after Adam step".into()));
        }
        Ok(())
    }
}

/// Moments of parameters that stop receiving gradient decay geometrically
/// into the subnormal range and then stick there (0.9 times the smallest
/// subnormal rounds back to itself), which makes every later step several
/// times slower. Anything below the smallest normal float is treated as zero.
#[inline]
fn flush(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}
