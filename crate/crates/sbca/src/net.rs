//! Layers and parameter plumbing for the policy networks: affine maps,
//! LayerNorm (with an explicit bypass used by the fusion analysis harness),
//! stabilized softmax, the two stream encoders, gated cross-modal fusion
//! and the affine concatenation baseline.
//!
//! Every layer is generic over [`Real`], so the identical forward code runs
//! on plain `f64` for evaluation and on tape [`Var`]s for training.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::WeightVector;
use crate::error::{Error, Result};
use crate::graph::{Real, Tape, Var};

/// LayerNorm variance stabilizer.
pub const LN_EPS: f64 = 1e-5;

/// How the two feature streams are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Gated,
    Concat,
}

/// Shape and mode of the representation network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub hidden: usize,
    /// Identity LayerNorm; only the fusion analysis harness sets this.
    pub layernorm_bypass: bool,
    pub mode: FusionMode,
}

impl FusionConfig {
    pub fn new(hidden: usize, mode: FusionMode) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Parameter("hidden size must be at least 1".into()));
        }
        Ok(Self {
            hidden,
            layernorm_bypass: false,
            mode,
        })
    }
}

/// One named parameter tensor, stored flat with its shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Ordered collection of named tensors. Iteration order is insertion order
/// and defines the flat layout used by the optimizer and gradient checks.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParamSet {
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        debug_assert!(self.tensors.iter().all(|t| t.name != name));
        self.tensors.push(Tensor {
            name: name.into(),
            shape,
            data,
        });
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Size(format!("parameter tensor {name} missing")))
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Total number of scalar parameters.
    pub fn flat_len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// Copy all parameters into one flat vector (insertion order).
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// Overwrite all parameters from a flat vector (insertion order).
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(Error::Size(format!(
                "flat parameter vector has {} entries, expected {}",
                flat.len(),
                self.flat_len()
            )));
        }
        let mut offset = 0;
        for t in &mut self.tensors {
            let len = t.data.len();
            t.data.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }
}

/// A [`ParamSet`] lifted onto a scalar carrier: plain values for `f64`,
/// leaf nodes for tape [`Var`]s.
pub struct ParamsView<R> {
    tensors: Vec<(String, Vec<R>)>,
}

impl<R: Real> ParamsView<R> {
    pub fn get(&self, name: &str) -> Result<&[R]> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Size(format!("parameter tensor {name} missing")))
    }
}

impl ParamsView<f64> {
    pub fn plain(params: &ParamSet) -> Self {
        Self {
            tensors: params
                .tensors()
                .iter()
                .map(|t| (t.name.clone(), t.data.clone()))
                .collect(),
        }
    }
}

impl ParamsView<Var> {
    /// Insert every parameter as a leaf on `tape`, in insertion order, so
    /// gradients can be read back positionally.
    pub fn on_tape(params: &ParamSet, tape: &Tape) -> Self {
        Self {
            tensors: params
                .tensors()
                .iter()
                .map(|t| (t.name.clone(), tape.vars(&t.data)))
                .collect(),
        }
    }

    /// Leaf handles in flat (insertion) order.
    pub fn leaves(&self) -> impl Iterator<Item = &Var> {
        self.tensors.iter().flat_map(|(_, v)| v.iter())
    }
}

/// Matrix-vector affine map `Wx + b`; `W` is row-major `len(b) × len(x)`.
pub fn affine<R: Real>(w: &[R], b: &[R], x: &[R]) -> Result<Vec<R>> {
    let (rows, cols) = (b.len(), x.len());
    if w.len() != rows * cols || cols == 0 || rows == 0 {
        return Err(Error::Size(format!(
            "affine shapes disagree: W has {} entries, b {} rows, x {} cols",
            w.len(),
            rows,
            cols
        )));
    }
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = row[0].mul(&x[0]);
        for c in 1..cols {
            acc = acc.add(&row[c].mul(&x[c]));
        }
        out.push(acc.add(&b[r]));
    }
    Ok(out)
}

/// `γ·(x - mean)/sqrt(var + ε) + β` with population variance over the
/// feature dimension. With `bypass` the input passes through unchanged.
pub fn layer_norm<R: Real>(
    x: &[R],
    gamma: &[R],
    beta: &[R],
    eps: f64,
    bypass: bool,
) -> Result<Vec<R>> {
    if bypass {
        return Ok(x.to_vec());
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "layer norm over {n} feature(s); need at least 2 (or bypass)"
        )));
    }
    if gamma.len() != n || beta.len() != n {
        return Err(Error::Size(format!(
            "layer norm shapes disagree: x {n}, gamma {}, beta {}",
            gamma.len(),
            beta.len()
        )));
    }
    let mean = crate::graph::sum(x).mul_c(1.0 / n as f64);
    let centered: Vec<R> = x.iter().map(|v| v.sub(&mean)).collect();
    let var = crate::graph::sum(&centered.iter().map(|v| v.sq()).collect::<Vec<_>>())
        .mul_c(1.0 / n as f64);
    let denom = var.add_c(eps).sqrt();
    Ok(centered
        .iter()
        .zip(gamma.iter().zip(beta))
        .map(|(c, (g, b))| c.div(&denom).mul(g).add(b))
        .collect())
}

/// Numerically stabilized softmax: the (constant) max logit is subtracted
/// before exponentiation, so the map is shift-invariant by construction.
pub fn softmax<R: Real>(logits: &[R]) -> Result<Vec<R>> {
    if logits.is_empty() {
        return Err(Error::Size("softmax of empty logits".into()));
    }
    if logits.iter().any(|v| !v.val().is_finite()) {
        return Err(Error::Numeric("non-finite logit".into()));
    }
    let max = logits.iter().map(|v| v.val()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<R> = logits.iter().map(|v| v.add_c(-max).exp()).collect();
    let total = crate::graph::sum(&exps);
    Ok(exps.iter().map(|e| e.div(&total)).collect())
}

/// Softmax straight into a validated simplex weight vector.
pub fn softmax_weights(logits: &[f64]) -> Result<WeightVector> {
    WeightVector::new(softmax(logits)?)
}

/// One stream encoder: `ReLU(LayerNorm(Wx + b))`.
pub fn encode_stream<R: Real>(
    w: &[R],
    b: &[R],
    gamma: &[R],
    beta: &[R],
    x: &[R],
    bypass: bool,
) -> Result<Vec<R>> {
    let pre = affine(w, b, x)?;
    let normed = layer_norm(&pre, gamma, beta, LN_EPS, bypass)?;
    Ok(normed.iter().map(|v| v.relu()).collect())
}

thread_local! {
    static GATED_CALLS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
    static CONCAT_CALLS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

/// Per-thread forward-call counters `(gated, concat)`; used to assert
/// variant wiring.
pub fn fusion_calls() -> (u64, u64) {
    (GATED_CALLS.get(), CONCAT_CALLS.get())
}

pub fn reset_fusion_calls() {
    GATED_CALLS.set(0);
    CONCAT_CALLS.set(0);
}

/// Gated cross-modal fusion:
/// `g = Tanh(W_g f_s + b_g)`, `out = ReLU(W_f(f_p ⊙ (1+g) + f_s) + b_f)`.
pub fn gated_fusion<R: Real>(
    w_g: &[R],
    b_g: &[R],
    w_f: &[R],
    b_f: &[R],
    f_p: &[R],
    f_s: &[R],
) -> Result<Vec<R>> {
    if f_p.len() != f_s.len() {
        return Err(Error::Size(format!(
            "fusion streams disagree: {} vs {}",
            f_p.len(),
            f_s.len()
        )));
    }
    GATED_CALLS.set(GATED_CALLS.get() + 1);
    let gate: Vec<R> = affine(w_g, b_g, f_s)?.iter().map(|v| v.tanh()).collect();
    let mixed: Vec<R> = f_p
        .iter()
        .zip(&gate)
        .zip(f_s)
        .map(|((p, g), s)| p.mul(&g.add_c(1.0)).add(s))
        .collect();
    Ok(affine(w_f, b_f, &mixed)?.iter().map(|v| v.relu()).collect())
}

/// Concatenation baseline: `W·[p;s] + b`, purely affine, no activation.
pub fn concat_fusion<R: Real>(w: &[R], b: &[R], p: &[R], s: &[R]) -> Result<Vec<R>> {
    CONCAT_CALLS.set(CONCAT_CALLS.get() + 1);
    let mut joint = Vec::with_capacity(p.len() + s.len());
    joint.extend_from_slice(p);
    joint.extend_from_slice(s);
    affine(w, b, &joint)
}

/// Representation of one state under either fusion mode.
///
/// Gated mode encodes each stream (`ReLU∘LayerNorm∘affine`) and fuses them;
/// concat mode is the affine baseline over the raw concatenated blocks.
pub fn representation<R: Real>(
    params: &ParamsView<R>,
    cfg: &FusionConfig,
    price: &[R],
    text: &[R],
) -> Result<Vec<R>> {
    match cfg.mode {
        FusionMode::Gated => {
            let f_p = encode_stream(
                params.get("w_p")?,
                params.get("b_p")?,
                params.get("ln_p_gamma")?,
                params.get("ln_p_beta")?,
                price,
                cfg.layernorm_bypass,
            )?;
            let f_s = encode_stream(
                params.get("w_s")?,
                params.get("b_s")?,
                params.get("ln_s_gamma")?,
                params.get("ln_s_beta")?,
                text,
                cfg.layernorm_bypass,
            )?;
            gated_fusion(
                params.get("w_g")?,
                params.get("b_g")?,
                params.get("w_f")?,
                params.get("b_f")?,
                &f_p,
                &f_s,
            )
        }
        FusionMode::Concat => concat_fusion(
            params.get("w_cat")?,
            params.get("b_cat")?,
            price,
            text,
        ),
    }
}

/// Policy head: raw logits over assets.
pub fn policy_logits<R: Real>(params: &ParamsView<R>, rep: &[R]) -> Result<Vec<R>> {
    affine(params.get("w_policy")?, params.get("b_policy")?, rep)
}

/// Critic head: scalar state value.
pub fn state_value<R: Real>(params: &ParamsView<R>, rep: &[R]) -> Result<R> {
    Ok(affine(params.get("w_value")?, params.get("b_value")?, rep)?.remove(0))
}

/// Build a freshly initialized parameter set for the given shapes.
///
/// Matrices are uniform in `±sqrt(1/fan_in)`, biases zero, LayerNorm gains
/// one. Tensors are drawn in a fixed order with the critic head last, so
/// two models that differ only in having a critic share every other
/// parameter draw.
pub fn init_params<Rn: Rng>(
    n_assets: usize,
    window: usize,
    cfg: &FusionConfig,
    with_critic: bool,
    rng: &mut Rn,
) -> ParamSet {
    let h = cfg.hidden;
    let price_dim = window * n_assets;
    let text_dim = n_assets;
    let mut params = ParamSet::new();

    let matrix = |params: &mut ParamSet, rng: &mut Rn, name: &str, rows: usize, cols: usize| {
        let bound = (1.0 / cols as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        params.insert(name, vec![rows, cols], data);
    };
    let zeros = |params: &mut ParamSet, name: &str, len: usize| {
        params.insert(name, vec![len], vec![0.0; len]);
    };
    let ones = |params: &mut ParamSet, name: &str, len: usize| {
        params.insert(name, vec![len], vec![1.0; len]);
    };

    match cfg.mode {
        FusionMode::Gated => {
            matrix(&mut params, rng, "w_p", h, price_dim);
            zeros(&mut params, "b_p", h);
            ones(&mut params, "ln_p_gamma", h);
            zeros(&mut params, "ln_p_beta", h);
            matrix(&mut params, rng, "w_s", h, text_dim);
            zeros(&mut params, "b_s", h);
            ones(&mut params, "ln_s_gamma", h);
            zeros(&mut params, "ln_s_beta", h);
            matrix(&mut params, rng, "w_g", h, h);
            zeros(&mut params, "b_g", h);
            matrix(&mut params, rng, "w_f", h, h);
            zeros(&mut params, "b_f", h);
        }
        FusionMode::Concat => {
            matrix(&mut params, rng, "w_cat", h, price_dim + text_dim);
            zeros(&mut params, "b_cat", h);
        }
    }
    matrix(&mut params, rng, "w_policy", n_assets, h);
    zeros(&mut params, "b_policy", n_assets);
    if with_critic {
        matrix(&mut params, rng, "w_value", 1, h);
        zeros(&mut params, "b_value", 1);
    }
    params
}

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    schema_version: u32,
    seed: u64,
    config: serde_json::Value,
    tensors: Vec<Tensor>,
}

/// Write parameters plus the seed and experiment config that produced them.
pub fn save_checkpoint(
    path: &Path,
    params: &ParamSet,
    seed: u64,
    config: serde_json::Value,
) -> Result<()> {
    let file = CheckpointFile {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        seed,
        config,
        tensors: params.tensors().to_vec(),
    };
    let mut text = serde_json::to_string(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ParamSet, u64, serde_json::Value)> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "checkpoint schema version {} unsupported (expected {CHECKPOINT_SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    let mut params = ParamSet::new();
    for t in file.tensors {
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(Error::Schema(format!(
                "checkpoint tensor {} shape/data mismatch",
                t.name
            )));
        }
        params.insert(&t.name, t.shape, t.data);
    }
    Ok((params, file.seed, file.config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn affine_hand_values() {
        let out = affine(&[2.0], &[1.0], &[3.0]).unwrap();
        assert_eq!(out, vec![7.0]);
        // identity
        let w = [1.0, 0.0, 0.0, 1.0];
        let out = affine(&w, &[0.0, 0.0], &[3.5, -2.0]).unwrap();
        assert_eq!(out, vec![3.5, -2.0]);
        assert!(affine(&w, &[0.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn affine_bias_gradient_is_ones() {
        let tape = Tape::new();
        let w = tape.vars(&[0.3, -0.2, 0.8, 0.1, 0.5, -0.7]);
        let b = tape.vars(&[0.0, 0.0]);
        let x = tape.vars(&[1.0, 2.0, 3.0]);
        let out = affine(&w, &b, &x).unwrap();
        let total = crate::graph::sum(&out);
        let g = tape.backward(&total).unwrap();
        for bi in &b {
            assert_eq!(g.get(bi), 1.0);
        }
    }

    #[test]
    fn layer_norm_matches_scalar_oracle() {
        let out = layer_norm(&[1.0, -1.0], &[1.0, 1.0], &[0.0, 0.0], 1e-5, false).unwrap();
        assert_relative_eq!(out[0], 0.9999950000374997, epsilon = 1e-12);
        assert_relative_eq!(out[1], -0.9999950000374997, epsilon = 1e-12);
    }

    #[test]
    fn layer_norm_constant_input_is_zero() {
        let out = layer_norm(&[2.0; 5], &[1.0; 5], &[0.0; 5], 1e-5, false).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn layer_norm_bypass_and_degenerate() {
        let out = layer_norm(&[3.0], &[1.0], &[0.0], 1e-5, true).unwrap();
        assert_eq!(out, vec![3.0]);
        assert!(matches!(
            layer_norm(&[3.0], &[1.0], &[0.0], 1e-5, false),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn softmax_hand_values() {
        let out = softmax(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        for v in &out {
            assert_relative_eq!(*v, 0.25, epsilon = 1e-15);
        }
        let out = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert_relative_eq!(out[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(out[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn softmax_shift_invariant_and_validated() {
        let z = [0.3, -1.2, 2.0];
        let a = softmax(&z).unwrap();
        let b = softmax(&z.map(|v| v + 100.0)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
        assert!(matches!(
            softmax(&[f64::NAN, 0.0]),
            Err(Error::Numeric(_))
        ));
        let w = softmax_weights(&[1.0, 2.0, 3.0]).unwrap();
        let sum: f64 = w.as_slice().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
    }

    fn probe_cfg(hidden: usize) -> FusionConfig {
        FusionConfig::new(hidden, FusionMode::Gated).unwrap()
    }

    #[test]
    fn encoder_outputs_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = probe_cfg(8);
        let params = init_params(2, 5, &cfg, false, &mut rng);
        let view = ParamsView::plain(&params);
        for trial in 0..20 {
            let x: Vec<f64> = (0..10).map(|i| ((trial * 10 + i) as f64).sin()).collect();
            let out = encode_stream(
                view.get("w_p").unwrap(),
                view.get("b_p").unwrap(),
                view.get("ln_p_gamma").unwrap(),
                view.get("ln_p_beta").unwrap(),
                &x,
                false,
            )
            .unwrap();
            assert_eq!(out.len(), 8);
            assert!(out.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn encoder_bypass_identity_on_positive_input() {
        // identity weights, zero bias, bypassed LayerNorm: f(p) = p for p > 0
        let h = 3;
        let mut w = vec![0.0; h * h];
        for i in 0..h {
            w[i * h + i] = 1.0;
        }
        let out = encode_stream(&w, &[0.0; 3], &[1.0; 3], &[0.0; 3], &[1.5, 2.0, 0.25], true)
            .unwrap();
        assert_eq!(out, vec![1.5, 2.0, 0.25]);
    }

    #[test]
    fn gate_zero_reduces_to_plain_sum() {
        let h = 2;
        let w_g = vec![0.0; h * h];
        let b_g = vec![0.0; h];
        let w_f = vec![1.0, 0.0, 0.0, 1.0];
        let b_f = vec![0.0; h];
        let f_p = [0.4, 0.6];
        let f_s = [0.1, 0.2];
        let out = gated_fusion(&w_g, &b_g, &w_f, &b_f, &f_p, &f_s).unwrap();
        assert_relative_eq!(out[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(out[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn zero_price_stream_ignores_gate() {
        let b_f = vec![1.0, 1.0];
        let w_f = vec![1.0, 0.0, 0.0, 1.0];
        let f_p = [0.0, 0.0];
        let f_s = [0.3, 0.7];
        let out_a = gated_fusion(&[5.0, 0.0, 0.0, 5.0], &[1.0; 2], &w_f, &b_f, &f_p, &f_s).unwrap();
        let out_b = gated_fusion(&[-9.0, 0.0, 0.0, -9.0], &[-1.0; 2], &w_f, &b_f, &f_p, &f_s)
            .unwrap();
        assert_eq!(out_a, out_b);
    }

    #[test]
    fn concat_is_affine() {
        let w = [0.5, -0.25, 2.0, 1.0, 0.75, -1.5];
        let b = [0.1, -0.2];
        let f = |p: &[f64], s: &[f64]| concat_fusion(&w, &b, p, s).unwrap();
        assert_eq!(f(&[0.0, 0.0], &[0.0]), b.to_vec());
        // exact linearity: f(αp, s) - f(0, s) = α (f(p, s) - f(0, s))
        let p = [0.4, -0.9];
        let s = [0.6];
        let alpha = 2.5;
        let base = f(&[0.0, 0.0], &s);
        let one = f(&p, &s);
        let scaled = f(&p.map(|v| alpha * v), &s);
        for i in 0..2 {
            assert_relative_eq!(
                scaled[i] - base[i],
                alpha * (one[i] - base[i]),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn representation_layer_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = probe_cfg(4);
        let mut params = init_params(2, 3, &cfg, true, &mut rng);
        let price: Vec<f64> = (0..6).map(|i| 0.3 * (i as f64 + 1.0).sin()).collect();
        let text = vec![0.25, -0.5];

        let loss_at = |params: &ParamSet| -> f64 {
            let view = ParamsView::plain(params);
            let rep = representation(&view, &cfg, &price, &text).unwrap();
            let logits = policy_logits(&view, &rep).unwrap();
            let probs = softmax(&logits).unwrap();
            let v = state_value(&view, &rep).unwrap();
            // scalar objective touching every head
            probs[0].ln() + v * v
        };

        let tape = Tape::new();
        let view = ParamsView::on_tape(&params, &tape);
        let price_v = tape.vars(&price);
        let text_v = tape.vars(&text);
        let rep = representation(&view, &cfg, &price_v, &text_v).unwrap();
        let logits = policy_logits(&view, &rep).unwrap();
        let probs = softmax(&logits).unwrap();
        let v = state_value(&view, &rep).unwrap();
        let loss = probs[0].ln().add(&v.sq());
        assert_relative_eq!(loss.val(), loss_at(&params), epsilon = 1e-12);
        let grads = tape.backward(&loss).unwrap();
        let analytic: Vec<f64> = view.leaves().map(|l| grads.get(l)).collect();

        let flat = params.flatten();
        let h = 1e-5;
        for (k, &a) in analytic.iter().enumerate().step_by(7) {
            let mut plus = flat.clone();
            plus[k] += h;
            let mut minus = flat.clone();
            minus[k] -= h;
            params.load_flat(&plus).unwrap();
            let up = loss_at(&params);
            params.load_flat(&minus).unwrap();
            let down = loss_at(&params);
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(1e-6);
            assert!(
                (a - fd).abs() / denom <= 1e-4,
                "param {k}: analytic {a} vs fd {fd}"
            );
        }
        params.load_flat(&flat).unwrap();
    }

    #[test]
    fn tanh_matches_truncated_series_near_zero() {
        // x - x³/3 + 2x⁵/15 holds within 5e-7 on |x| ≤ 0.1
        for k in 0..1000 {
            let x = -0.1 + 0.2 * (k as f64) / 999.0;
            let series = x - x.powi(3) / 3.0 + 2.0 * x.powi(5) / 15.0;
            assert!(
                (x.tanh() - series).abs() <= 5e-7,
                "series deviates at {x}"
            );
        }
        // tanh'(0) = 1: the leading series term
        let t = Tape::new();
        let x = t.var(0.0);
        let y = x.tanh();
        let g = t.backward(&y).unwrap();
        assert_eq!(g.get(&x), 1.0);
    }

    #[test]
    fn init_is_deterministic_and_ordered() {
        let cfg = probe_cfg(8);
        let a = init_params(3, 10, &cfg, true, &mut ChaCha8Rng::seed_from_u64(42));
        let b = init_params(3, 10, &cfg, true, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a.flatten(), b.flatten());
        // critic-less init shares every draw with the critic one
        let c = init_params(3, 10, &cfg, false, &mut ChaCha8Rng::seed_from_u64(42));
        let shared = c.flat_len();
        assert_eq!(a.flatten()[..shared], c.flatten()[..]);
        // forward pass bit-identical
        let view_a = ParamsView::plain(&a);
        let view_b = ParamsView::plain(&b);
        let price: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).cos()).collect();
        let text = vec![0.1, -0.4, 0.9];
        let ra = representation(&view_a, &cfg, &price, &text).unwrap();
        let rb = representation(&view_b, &cfg, &price, &text).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn encoder_golden_vector() {
        let cfg = probe_cfg(4);
        let params = init_params(2, 3, &cfg, false, &mut ChaCha8Rng::seed_from_u64(7));
        let view = ParamsView::plain(&params);
        let out = encode_stream(
            view.get("w_p").unwrap(),
            view.get("b_p").unwrap(),
            view.get("ln_p_gamma").unwrap(),
            view.get("ln_p_beta").unwrap(),
            &[0.5, -0.25, 1.5, 0.0, -1.0, 0.75],
            false,
        )
        .unwrap();
        let golden: [f64; 4] = [
            0.8034652193395371,
            0.0,
            0.0,
            1.0729963758168986,
        ];
        for (v, g) in out.iter().zip(golden) {
            assert_relative_eq!(*v, g, epsilon = 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip_preserves_bits() {
        let cfg = probe_cfg(6);
        let params = init_params(2, 4, &cfg, true, &mut ChaCha8Rng::seed_from_u64(3));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&path, &params, 42, serde_json::json!({"hidden": 6})).unwrap();
        let (back, seed, config) = load_checkpoint(&path).unwrap();
        assert_eq!(seed, 42);
        assert_eq!(config["hidden"], 6);
        assert_eq!(back.flatten(), params.flatten());
        for (a, b) in back.tensors().iter().zip(params.tensors()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
        }
    }
}
