//! Portfolio market environment: weight smoothing, turnover, the net-value
//! recursion and the risk-sensitive reward with downside and turnover
//! penalties.
//!
//! One step charges commission on the half-L1 distance between the newly
//! submitted weights and the previously submitted ones, against the gross
//! return earned by the previous weights. The reward decomposes exactly as
//! `r_t = ln R_t - P_t`, which makes the cumulative reward satisfy
//! `Σ r_t = ln V_T - Σ P_t`; tests hold every rollout to that identity.
//!
//! [`step_parts`] is generic over the scalar carrier, so the same reward
//! arithmetic can run on plain floats or on autodiff tape nodes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Real;

/// Long-only portfolio weights on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validate simplex membership: components at least `-1e-12` (tiny
    /// negatives from smoothing arithmetic are clamped to zero and the
    /// vector renormalized), sum within `1e-9` of one.
    pub fn new(mut w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Size("empty weight vector".into()));
        }
        for v in &mut w {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite weight {v}")));
            }
            if *v < -1e-12 {
                return Err(Error::Validation(format!("negative weight {v}")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("weights sum to {sum}, not 1")));
        }
        for v in &mut w {
            *v /= sum;
        }
        Ok(Self(w))
    }

    /// The cost-free initial book: `1/N` in every asset.
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One-way commission rate.
#[derive(Debug, Clone, Copy)]
pub struct CostModel {
    pub commission: f64,
}

impl CostModel {
    pub fn new(commission: f64) -> Result<Self> {
        if !(0.0..=0.05).contains(&commission) {
            return Err(Error::Parameter(format!(
                "commission {commission} outside [0, 0.05]"
            )));
        }
        Ok(Self { commission })
    }
}

/// Penalty coefficients of the reward.
#[derive(Debug, Clone, Copy)]
pub struct RewardParams {
    pub lambda_risk: f64,
    pub lambda_turnover: f64,
}

impl RewardParams {
    pub fn new(lambda_risk: f64, lambda_turnover: f64) -> Result<Self> {
        if lambda_risk < 0.0 || lambda_turnover < 0.0 {
            return Err(Error::Parameter(format!(
                "penalty coefficients must be nonnegative, got {lambda_risk}, {lambda_turnover}"
            )));
        }
        Ok(Self {
            lambda_risk,
            lambda_turnover,
        })
    }
}

/// Environment state between steps.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub net_value: f64,
    pub prev_weights: WeightVector,
    pub step_index: usize,
}

impl EnvState {
    /// Fresh book: unit net value, uniform weights, before the first step.
    pub fn initial(n_assets: usize) -> Self {
        Self {
            net_value: 1.0,
            prev_weights: WeightVector::uniform(n_assets),
            step_index: 0,
        }
    }
}

/// Everything one step produced.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub reward: f64,
    pub penalty: f64,
    pub turnover: f64,
    pub net_return: f64,
    pub net_value: f64,
}

/// Half the L1 distance between two weight vectors; lies in `[0,1]` on the
/// simplex.
pub fn turnover(w_new: &WeightVector, w_old: &WeightVector) -> Result<f64> {
    if w_new.len() != w_old.len() {
        return Err(Error::Size(format!(
            "turnover dimensions disagree: {} vs {}",
            w_new.len(),
            w_old.len()
        )));
    }
    Ok(0.5
        * w_new
            .as_slice()
            .iter()
            .zip(w_old.as_slice())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Exponential smoothing `α·w_raw + (1-α)·w_prev`; a convex combination,
/// so the output stays on the simplex.
pub fn ema_smooth(w_raw: &WeightVector, w_prev: &WeightVector, alpha: f64) -> Result<WeightVector> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha {alpha} outside (0, 1]")));
    }
    if w_raw.len() != w_prev.len() {
        return Err(Error::Size(format!(
            "smoothing dimensions disagree: {} vs {}",
            w_raw.len(),
            w_prev.len()
        )));
    }
    WeightVector::new(
        w_raw
            .as_slice()
            .iter()
            .zip(w_prev.as_slice())
            .map(|(r, p)| alpha * r + (1.0 - alpha) * p)
            .collect(),
    )
}

/// Post-return drifted weights: what the held book looks like after the
/// market applies gross returns `y`, before any rebalance.
pub fn drift(w: &WeightVector, y: &[f64]) -> Result<WeightVector> {
    if w.len() != y.len() {
        return Err(Error::Size(format!(
            "drift dimensions disagree: {} vs {}",
            w.len(),
            y.len()
        )));
    }
    let gross: f64 = w.as_slice().iter().zip(y).map(|(w, y)| w * y).sum();
    WeightVector::new(w.as_slice().iter().zip(y).map(|(w, y)| w * y / gross).collect())
}

/// The reward arithmetic of one step on any scalar carrier.
pub struct StepParts<R> {
    pub turnover: R,
    pub net_return: R,
    pub reward: R,
    pub penalty: R,
}

/// Compute net return factor, reward and penalty for one step.
///
/// `prev_w` earns the gross return `y`; commission is charged on the
/// distance from `prev_w` to the newly submitted `w_new`:
/// `R = prev_w·y - c·TO`, `r = ln R - λ_risk·max(-ln R, 0)² - λ_to·TO`.
pub fn step_parts<R: Real>(
    prev_w: &[R],
    w_new: &[R],
    y: &[f64],
    commission: f64,
    params: &RewardParams,
    step_index: usize,
) -> Result<StepParts<R>> {
    if prev_w.len() != w_new.len() || prev_w.len() != y.len() {
        return Err(Error::Size(format!(
            "step dimensions disagree: {} / {} / {}",
            prev_w.len(),
            w_new.len(),
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|v| **v <= 0.0 || !v.is_finite()) {
        return Err(Error::Validation(format!(
            "gross return {bad} must be positive and finite"
        )));
    }

    let mut gross = prev_w[0].mul_c(y[0]);
    for i in 1..y.len() {
        gross = gross.add(&prev_w[i].mul_c(y[i]));
    }
    let mut l1 = w_new[0].sub(&prev_w[0]).abs();
    for i in 1..y.len() {
        l1 = l1.add(&w_new[i].sub(&prev_w[i]).abs());
    }
    let to = l1.mul_c(0.5);
    let net_return = gross.add(&to.mul_c(-commission));
    if net_return.val() <= 0.0 {
        return Err(Error::Insolvency {
            step: step_index,
            factor: net_return.val(),
        });
    }
    let log_r = net_return.ln();
    let downside = log_r.neg().relu().sq().mul_c(params.lambda_risk);
    let penalty = downside.add(&to.mul_c(params.lambda_turnover));
    let reward = log_r.sub(&penalty);
    Ok(StepParts {
        turnover: to,
        net_return,
        reward,
        penalty,
    })
}

/// Advance the environment by one day: submit `w_new` against gross
/// returns `y`.
pub fn step(
    state: &EnvState,
    w_new: &WeightVector,
    y: &[f64],
    cost: &CostModel,
    params: &RewardParams,
) -> Result<(EnvState, StepRecord)> {
    let parts = step_parts(
        state.prev_weights.as_slice(),
        w_new.as_slice(),
        y,
        cost.commission,
        params,
        state.step_index + 1,
    )?;
    let net_value = state.net_value * parts.net_return;
    let record = StepRecord {
        reward: parts.reward,
        penalty: parts.penalty,
        turnover: parts.turnover,
        net_return: parts.net_return,
        net_value,
    };
    let next = EnvState {
        net_value,
        prev_weights: w_new.clone(),
        step_index: state.step_index + 1,
    };
    Ok((next, record))
}

/// Run a full trajectory: one submitted weight vector per day of `gross`,
/// starting from the uniform book at unit net value. Returns all step
/// records and the terminal net value.
pub fn rollout(
    gross: &[Vec<f64>],
    weights: &[WeightVector],
    cost: &CostModel,
    params: &RewardParams,
) -> Result<(Vec<StepRecord>, f64)> {
    if gross.len() != weights.len() {
        return Err(Error::Size(format!(
            "rollout lengths disagree: {} days vs {} weight vectors",
            gross.len(),
            weights.len()
        )));
    }
    if gross.is_empty() {
        return Err(Error::Size("empty rollout".into()));
    }
    let mut state = EnvState::initial(weights[0].len());
    let mut records = Vec::with_capacity(gross.len());
    for (y, w) in gross.iter().zip(weights) {
        let (next, record) = step(&state, w, y, cost, params)?;
        records.push(record);
        state = next;
    }
    Ok((records, state.net_value))
}

/// Write a trajectory as CSV: `t,V,TO,R,reward,penalty,w_1..w_N`.
pub fn write_trajectory_csv(
    path: &Path,
    records: &[StepRecord],
    weights: &[WeightVector],
) -> Result<()> {
    if records.len() != weights.len() {
        return Err(Error::Size(format!(
            "trajectory rows disagree: {} records vs {} weight vectors",
            records.len(),
            weights.len()
        )));
    }
    let mut out = String::new();
    out.push_str("t,V,TO,R,reward,penalty");
    let n = weights.first().map_or(0, WeightVector::len);
    for i in 1..=n {
        out.push_str(&format!(",w_{i}"));
    }
    out.push('\n');
    for (t, (rec, w)) in records.iter().zip(weights).enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            t + 1,
            rec.net_value,
            rec.turnover,
            rec.net_return,
            rec.reward,
            rec.penalty
        ));
        for v in w.as_slice() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
