//! Benchmark strategies and policy backtests, all reported as [`RunReport`].

use chrono::NaiveDate;

use crate::agent::{evaluate, EvalTrajectory, TrainConfig};
use crate::data::{FeatureScaler, PanelDataset, SplitTag};
use crate::env::{drift, step, CostModel, EnvState, StepRecord, WeightVector};
use crate::error::{Error, Result};
use crate::net::{FusionConfig, ParamSet};

use super::RunReport;

/// Which benchmark to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    /// Rebalance to 1/N every day, paying commission on the rebalance.
    EqualWeight,
    /// Allocate 1/N once and let the weights drift, never trading.
    BuyAndHold,
    /// Track an external benchmark price series.
    IndexSeries,
}

impl BenchmarkKind {
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::EqualWeight => "equal_weight",
            BenchmarkKind::BuyAndHold => "buy_and_hold",
            BenchmarkKind::IndexSeries => "index",
        }
    }
}

impl std::str::FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "equal_weight" => Ok(BenchmarkKind::EqualWeight),
            "buy_and_hold" => Ok(BenchmarkKind::BuyAndHold),
            "index" => Ok(BenchmarkKind::IndexSeries),
            other => Err(Error::Parameter(format!(
                "unknown benchmark {other} (expected equal_weight|buy_and_hold|index)"
            ))),
        }
    }
}

fn split_days(panel: &PanelDataset, tag: SplitTag) -> Result<Vec<usize>> {
    let days = panel.split_indices(tag);
    if days.is_empty() {
        return Err(Error::Range(format!("split {tag:?} has no trading days")));
    }
    Ok(days)
}

/// Daily 1/N rebalancing through the trading environment.
///
/// The held book is always uniform; each day the market drifts it to
/// `d_t = u*y_t / u.y_t` and the rebalance back to uniform is charged as
/// turnover between the two, so the net factor is `mean(y_t) - c*TO_t`.
pub fn run_equal_weight(
    panel: &PanelDataset,
    tag: SplitTag,
    group: &str,
    cost: &CostModel,
    annual_rf: f64,
) -> Result<RunReport> {
    equal_weight_with_records(panel, tag, group, cost, annual_rf).map(|(r, _)| r)
}

fn equal_weight_with_records(
    panel: &PanelDataset,
    tag: SplitTag,
    group: &str,
    cost: &CostModel,
    annual_rf: f64,
) -> Result<(RunReport, Vec<StepRecord>)> {
    let days = split_days(panel, tag)?;
    let n = panel.n_assets();
    let uniform = WeightVector::uniform(n);
    let params = crate::env::RewardParams::new(0.0, 0.0)?;

    let mut state = EnvState::initial(n);
    let mut log_returns = Vec::with_capacity(days.len());
    let mut net_values = vec![1.0];
    let mut weights = Vec::with_capacity(days.len());
    let mut records = Vec::with_capacity(days.len());
    for &t in &days {
        let y = panel.gross_returns(t);
        let drifted = drift(&uniform, &y)?;
        let (next, record) = step(&state, &drifted, &y, cost, &params)?;
        log_returns.push(record.net_return.ln());
        net_values.push(record.net_value);
        weights.push(uniform.as_slice().to_vec());
        records.push(record);
        // the rebalance restores the uniform book before the next day
        state = EnvState {
            net_value: next.net_value,
            prev_weights: uniform.clone(),
            step_index: next.step_index,
        };
    }
    let report = RunReport::from_series(
        group,
        BenchmarkKind::EqualWeight.name(),
        cost.commission,
        log_returns,
        net_values,
        weights,
        annual_rf,
    )?;
    Ok((report, records))
}

/// Buy once, hold forever: 1/N of capital per asset at the start, weights
/// drift with prices, no trades and therefore no commission.
pub fn run_buy_and_hold(
    panel: &PanelDataset,
    tag: SplitTag,
    group: &str,
    cost: &CostModel,
    annual_rf: f64,
) -> Result<RunReport> {
    buy_and_hold_with_records(panel, tag, group, cost, annual_rf).map(|(r, _)| r)
}

fn buy_and_hold_with_records(
    panel: &PanelDataset,
    tag: SplitTag,
    group: &str,
    cost: &CostModel,
    annual_rf: f64,
) -> Result<(RunReport, Vec<StepRecord>)> {
    let days = split_days(panel, tag)?;
    let n = panel.n_assets();

    let mut w = WeightVector::uniform(n);
    let mut log_returns = Vec::with_capacity(days.len());
    let mut net_values = vec![1.0];
    let mut weights = Vec::with_capacity(days.len());
    let mut records = Vec::with_capacity(days.len());
    for &t in &days {
        let y = panel.gross_returns(t);
        let gross: f64 = w.as_slice().iter().zip(&y).map(|(w, y)| w * y).sum();
        if !(gross > 0.0) {
            return Err(Error::Insolvency {
                step: weights.len() + 1,
                factor: gross,
            });
        }
        log_returns.push(gross.ln());
        let net_value = net_values.last().expect("seeded with 1.0") * gross;
        net_values.push(net_value);
        records.push(StepRecord {
            reward: gross.ln(),
            penalty: 0.0,
            turnover: 0.0,
            net_return: gross,
            net_value,
        });
        w = drift(&w, &y)?;
        weights.push(w.as_slice().to_vec());
    }
    let report = RunReport::from_series(
        group,
        BenchmarkKind::BuyAndHold.name(),
        cost.commission,
        log_returns,
        net_values,
        weights,
        annual_rf,
    )?;
    Ok((report, records))
}

/// Metrics of an external benchmark price series over the split dates,
/// normalized to a unit starting value.
///
/// Every split date must appear in the series. When the series also has a
/// close before the split starts, the latest such close anchors the unit
/// value so the first split day contributes a return, mirroring the
/// portfolio strategies; otherwise the first split date itself is the
/// anchor.
pub fn run_index(
    dates: &[NaiveDate],
    closes: &[f64],
    panel: &PanelDataset,
    tag: SplitTag,
    group: &str,
    annual_rf: f64,
) -> Result<RunReport> {
    index_with_records(dates, closes, panel, tag, group, annual_rf).map(|(r, _)| r)
}

fn index_with_records(
    dates: &[NaiveDate],
    closes: &[f64],
    panel: &PanelDataset,
    tag: SplitTag,
    group: &str,
    annual_rf: f64,
) -> Result<(RunReport, Vec<StepRecord>)> {
    if dates.len() != closes.len() {
        return Err(Error::Size(format!(
            "index series: {} dates vs {} closes",
            dates.len(),
            closes.len()
        )));
    }
    if let Some(bad) = closes.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(Error::Validation(format!(
            "index close {bad} must be positive and finite"
        )));
    }
    let days = split_days(panel, tag)?;
    let lookup: std::collections::HashMap<NaiveDate, f64> =
        dates.iter().copied().zip(closes.iter().copied()).collect();

    let first_date = panel.calendar[days[0]];
    let base = dates
        .iter()
        .zip(closes)
        .filter(|(d, _)| **d < first_date)
        .max_by_key(|(d, _)| **d)
        .map(|(_, c)| *c);

    let mut series = Vec::with_capacity(days.len());
    for &t in &days {
        let date = panel.calendar[t];
        let close = *lookup.get(&date).ok_or_else(|| {
            Error::Range(format!("index series has no close for {date}"))
        })?;
        series.push(close);
    }
    let (anchor, tracked): (f64, &[f64]) = match base {
        Some(c) => (c, &series),
        None => (series[0], &series[1..]),
    };
    if tracked.is_empty() {
        return Err(Error::Size(
            "index series covers too few days to produce a return".into(),
        ));
    }

    let mut log_returns = Vec::with_capacity(tracked.len());
    let mut net_values = vec![1.0];
    let mut records = Vec::with_capacity(tracked.len());
    let mut prev = anchor;
    for &close in tracked {
        let gross = close / prev;
        log_returns.push(gross.ln());
        net_values.push(close / anchor);
        records.push(StepRecord {
            reward: gross.ln(),
            penalty: 0.0,
            turnover: 0.0,
            net_return: gross,
            net_value: close / anchor,
        });
        prev = close;
    }
    // the benchmark is one series holding itself
    let weights = vec![vec![1.0]; tracked.len()];
    let report = RunReport::from_series(
        group,
        BenchmarkKind::IndexSeries.name(),
        0.0,
        log_returns,
        net_values,
        weights,
        annual_rf,
    )?;
    Ok((report, records))
}

/// Run a benchmark and keep the per-day environment records alongside the
/// report, for trajectory exports. The buy-and-hold and index records carry
/// zero turnover and penalty since neither strategy trades.
pub fn run_benchmark_with_records(
    kind: BenchmarkKind,
    panel: &PanelDataset,
    tag: SplitTag,
    group: &str,
    cost: &CostModel,
    annual_rf: f64,
    index_series: Option<(&[NaiveDate], &[f64])>,
) -> Result<(RunReport, Vec<StepRecord>)> {
    match kind {
        BenchmarkKind::EqualWeight => {
            equal_weight_with_records(panel, tag, group, cost, annual_rf)
        }
        BenchmarkKind::BuyAndHold => {
            buy_and_hold_with_records(panel, tag, group, cost, annual_rf)
        }
        BenchmarkKind::IndexSeries => {
            let (dates, closes) = index_series.ok_or_else(|| {
                Error::Parameter(
                    "the index benchmark needs an external date,close series".into(),
                )
            })?;
            index_with_records(dates, closes, panel, tag, group, annual_rf)
        }
    }
}

/// Backtest a trained policy on a split: deterministic action, smoothing,
/// and the trading environment, summarized as a report.
pub fn run_policy(
    panel: &PanelDataset,
    tag: SplitTag,
    group: &str,
    strategy: &str,
    params: &ParamSet,
    cfg: &FusionConfig,
    config: &TrainConfig,
) -> Result<RunReport> {
    let scaler = FeatureScaler::fit(panel)?;
    let traj = evaluate(panel, &scaler, tag, params, cfg, config)?;
    report_from_trajectory(&traj, group, strategy, config)
}

/// Summarize an already-computed policy trajectory.
pub fn report_from_trajectory(
    traj: &EvalTrajectory,
    group: &str,
    strategy: &str,
    config: &TrainConfig,
) -> Result<RunReport> {
    let mut net_values = Vec::with_capacity(traj.records.len() + 1);
    net_values.push(1.0);
    net_values.extend(traj.records.iter().map(|r| r.net_value));
    RunReport::from_series(
        group,
        strategy,
        config.commission,
        traj.log_returns.clone(),
        net_values,
        traj.weights.clone(),
        config.rf_annual,
    )
}
