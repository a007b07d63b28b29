//! Decoupled-weight-decay adaptive moment optimizer over a flat parameter
//! vector, plus global-norm gradient clipping.

use crate::error::{Error, Result};
use crate::net::ParamSet;

/// Scale `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> Result<f64> {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::Numeric(format!("gradient norm {norm}")));
    }
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    Ok(norm)
}

/// AdamW: adaptive moments with weight decay applied directly to the
/// parameters rather than folded into the gradient.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64, n_params: usize) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One update over the flat layout of `params`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[f64]) -> Result<()> {
        if grads.len() != self.m.len() || grads.len() != params.flat_len() {
            return Err(Error::Size(format!(
                "optimizer sized for {} params, got {} grads over {} params",
                self.m.len(),
                grads.len(),
                params.flat_len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut flat = params.flatten();
        for i in 0..flat.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            flat[i] -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * flat[i]);
        }
        params.load_flat(&flat)
    }
}
