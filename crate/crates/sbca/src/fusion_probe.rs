//! Expressiveness probes separating the gated fusion layer from the affine
//! concatenation baseline.
//!
//! Two diagnostics: an explicit construction showing the gated layer can
//! replicate any affine map of the concatenated inputs on a region where all
//! ReLU preactivations stay nonnegative, and finite-difference statistics
//! (mixed partial, second-order interaction fit) showing the gated layer also
//! realizes multiplicative cross-modal interactions, which no affine map has.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::{representation, FusionConfig, FusionMode, ParamSet, ParamsView};

/// Build gated-fusion parameters that reproduce `w·[p;s] + b` exactly on any
/// region where the map's preactivations are nonnegative.
///
/// The gate is silenced (`w_g = 0`, `b_g = 0`), LayerNorm is bypassed, the
/// target matrix is split column-wise across the two stream encoders, and the
/// mixer is the identity carrying the target bias.
pub fn replicate_affine(
    w_target: &[f64],
    b_target: &[f64],
    p_dim: usize,
) -> Result<(ParamSet, FusionConfig)> {
    let h = b_target.len();
    if h == 0 || p_dim == 0 || w_target.len() % h != 0 {
        return Err(Error::Construction(
            "affine target shapes disagree".into(),
        ));
    }
    let in_dim = w_target.len() / h;
    if p_dim >= in_dim {
        return Err(Error::Construction(format!(
            "price block ({p_dim}) must leave room for the text block ({in_dim} total)"
        )));
    }
    let s_dim = in_dim - p_dim;

    let mut w_p = Vec::with_capacity(h * p_dim);
    let mut w_s = Vec::with_capacity(h * s_dim);
    for r in 0..h {
        let row = &w_target[r * in_dim..(r + 1) * in_dim];
        w_p.extend_from_slice(&row[..p_dim]);
        w_s.extend_from_slice(&row[p_dim..]);
    }
    let mut identity = vec![0.0; h * h];
    for i in 0..h {
        identity[i * h + i] = 1.0;
    }

    let mut params = ParamSet::new();
    params.insert("w_p", vec![h, p_dim], w_p);
    params.insert("b_p", vec![h], vec![0.0; h]);
    params.insert("ln_p_gamma", vec![h], vec![1.0; h]);
    params.insert("ln_p_beta", vec![h], vec![0.0; h]);
    params.insert("w_s", vec![h, s_dim], w_s);
    params.insert("b_s", vec![h], vec![0.0; h]);
    params.insert("ln_s_gamma", vec![h], vec![1.0; h]);
    params.insert("ln_s_beta", vec![h], vec![0.0; h]);
    params.insert("w_g", vec![h, h], vec![0.0; h * h]);
    params.insert("b_g", vec![h], vec![0.0; h]);
    params.insert("w_f", vec![h, h], identity);
    params.insert("b_f", vec![h], b_target.to_vec());

    let cfg = FusionConfig {
        hidden: h,
        layernorm_bypass: true,
        mode: FusionMode::Gated,
    };
    Ok((params, cfg))
}

fn mat_vec(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, bi)| {
            w[r * cols..(r + 1) * cols]
                .iter()
                .zip(x)
                .map(|(a, v)| a * v)
                .sum::<f64>()
                + bi
        })
        .collect()
}

/// Build the replication parameters and report the largest absolute gap
/// between the gated forward pass and the target affine map over `n_points`
/// inputs drawn uniformly from `region^(in_dim)`.
///
/// Fails with a construction error if any sampled input drives a ReLU
/// preactivation negative, since the replication only holds where every ReLU
/// acts as the identity.
pub fn affine_replication_deviation(
    w_target: &[f64],
    b_target: &[f64],
    p_dim: usize,
    region: (f64, f64),
    n_points: usize,
    seed: u64,
) -> Result<(ParamSet, f64)> {
    let (params, cfg) = replicate_affine(w_target, b_target, p_dim)?;
    let h = b_target.len();
    let in_dim = w_target.len() / h;
    let view = ParamsView::plain(&params);
    let (w_p, w_s) = (view.get("w_p")?, view.get("w_s")?);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup = 0.0f64;
    for _ in 0..n_points {
        let x: Vec<f64> = (0..in_dim)
            .map(|_| rng.random_range(region.0..=region.1))
            .collect();
        let (p, s) = x.split_at(p_dim);

        let pre_p = mat_vec(w_p, &vec![0.0; h], p);
        let pre_s = mat_vec(w_s, &vec![0.0; h], s);
        let target = mat_vec(w_target, b_target, &x);
        if pre_p
            .iter()
            .chain(&pre_s)
            .chain(&target)
            .any(|v| *v < 0.0)
        {
            return Err(Error::Construction(format!(
                "region [{}, {}] drives a ReLU preactivation negative",
                region.0, region.1
            )));
        }

        let gated = representation(&view, &cfg, p, &s.to_vec())?;
        for (g, t) in gated.iter().zip(&target) {
            sup = sup.max((g - t).abs());
        }
    }
    Ok((params, sup))
}

/// Largest absolute mixed partial `∂²f/∂p∂s`, estimated by the four-point
/// central difference with step `h` over an `n_grid × n_grid` lattice on
/// `region²`. Affine maps score exactly zero up to roundoff.
pub fn mixed_partial_max(
    f: impl Fn(f64, f64) -> f64,
    region: (f64, f64),
    n_grid: usize,
    h: f64,
) -> f64 {
    let coord = |k: usize| {
        region.0 + (region.1 - region.0) * (k as f64) / ((n_grid - 1) as f64)
    };
    let mut max = 0.0f64;
    for i in 0..n_grid {
        for j in 0..n_grid {
            let (p, s) = (coord(i), coord(j));
            let fd = (f(p + h, s + h) - f(p + h, s - h) - f(p - h, s + h)
                + f(p - h, s - h))
                / (4.0 * h * h);
            max = max.max(fd.abs());
        }
    }
    max
}

/// Least-squares fit of the second-order difference
/// `D(p,s) = f(p,s) − f(p,0) − f(0,s) + f(0,0)` against `c·p·s` over an
/// `n_grid × n_grid` lattice on `region²`; returns `(c, r²)`.
///
/// An affine `f` has `D ≡ 0`; the gated probe produces a clean product term.
pub fn interaction_fit(
    f: impl Fn(f64, f64) -> f64,
    region: (f64, f64),
    n_grid: usize,
) -> (f64, f64) {
    let coord = |k: usize| {
        region.0 + (region.1 - region.0) * (k as f64) / ((n_grid - 1) as f64)
    };
    let mut xs = Vec::with_capacity(n_grid * n_grid);
    let mut ds = Vec::with_capacity(n_grid * n_grid);
    for i in 0..n_grid {
        for j in 0..n_grid {
            let (p, s) = (coord(i), coord(j));
            xs.push(p * s);
            ds.push(f(p, s) - f(p, 0.0) - f(0.0, s) + f(0.0, 0.0));
        }
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxd: f64 = xs.iter().zip(&ds).map(|(x, d)| x * d).sum();
    let c = if sxx > 0.0 { sxd / sxx } else { 0.0 };
    let mean = ds.iter().sum::<f64>() / ds.len() as f64;
    let ss_tot: f64 = ds.iter().map(|d| (d - mean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ds)
        .map(|(x, d)| (d - c * x).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (c, r2)
}

/// Pinned scalar gated probe (hidden size 1, LayerNorm bypassed) whose
/// output on `[−1,1]²` is `(p+3)(1+tanh(s)) + s + 3`: strictly positive, with
/// mixed partial `sech²(s)` peaking at 1.
pub fn pinned_gated_probe() -> (ParamSet, FusionConfig) {
    let mut params = ParamSet::new();
    params.insert("w_p", vec![1, 1], vec![1.0]);
    params.insert("b_p", vec![1], vec![3.0]);
    params.insert("ln_p_gamma", vec![1], vec![1.0]);
    params.insert("ln_p_beta", vec![1], vec![0.0]);
    params.insert("w_s", vec![1, 1], vec![1.0]);
    params.insert("b_s", vec![1], vec![3.0]);
    params.insert("ln_s_gamma", vec![1], vec![1.0]);
    params.insert("ln_s_beta", vec![1], vec![0.0]);
    params.insert("w_g", vec![1, 1], vec![1.0]);
    params.insert("b_g", vec![1], vec![-3.0]);
    params.insert("w_f", vec![1, 1], vec![1.0]);
    params.insert("b_f", vec![1], vec![0.0]);
    let cfg = FusionConfig {
        hidden: 1,
        layernorm_bypass: true,
        mode: FusionMode::Gated,
    };
    (params, cfg)
}

/// Pinned scalar concat probe with small weights, so finite-difference
/// roundoff on the mixed partial stays well below the affine threshold.
pub fn pinned_concat_probe() -> (ParamSet, FusionConfig) {
    let mut params = ParamSet::new();
    params.insert("w_cat", vec![1, 2], vec![0.08, -0.06]);
    params.insert("b_cat", vec![1], vec![0.02]);
    let cfg = FusionConfig {
        hidden: 1,
        layernorm_bypass: false,
        mode: FusionMode::Concat,
    };
    (params, cfg)
}

/// Scalar view of a hidden-size-1 probe as a function of `(p, s)`.
pub fn scalar_probe(params: &ParamSet, cfg: FusionConfig) -> impl Fn(f64, f64) -> f64 + '_ {
    let view = ParamsView::plain(params);
    move |p: f64, s: f64| representation(&view, &cfg, &[p], &[s]).unwrap()[0]
}
