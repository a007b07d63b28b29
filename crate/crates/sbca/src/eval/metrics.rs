//! Performance metrics over daily log-return and net-value series.
//!
//! Conventions used throughout: 252 trading days per year, the annual
//! risk-free rate converted to daily by simple division, and sample
//! (ddof 1) standard deviations. Metrics whose formula does not apply to
//! a series fail with [`Error::UndefinedMetric`] so that reports can show
//! them as absent instead of a misleading zero.

use crate::error::{Error, Result};

/// Annualization constant.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Default annual risk-free rate.
pub const DEFAULT_ANNUAL_RF: f64 = 0.02;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (ddof 1). `None` for fewer than 2 points.
fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    Some(var.sqrt())
}

/// Annualized return implied by a terminal portfolio value over `n_days`
/// trading days: `pv^(252/n_days) - 1`.
pub fn annual_return(pv: f64, n_days: usize) -> Result<f64> {
    if n_days == 0 {
        return Err(Error::Parameter(
            "annual return needs at least one trading day".into(),
        ));
    }
    if !(pv > 0.0) {
        return Err(Error::Degenerate(format!(
            "annual return undefined for portfolio value {pv}"
        )));
    }
    Ok(pv.powf(TRADING_DAYS_PER_YEAR / n_days as f64) - 1.0)
}

/// Annualized Sharpe ratio of daily log returns:
/// `(mean - rf_daily) / std * sqrt(252)` with `rf_daily = annual_rf / 252`.
pub fn sharpe(daily_log_returns: &[f64], annual_rf: f64) -> Result<f64> {
    let Some(std) = sample_std(daily_log_returns) else {
        return Err(Error::UndefinedMetric(format!(
            "sharpe needs at least 2 observations, got {}",
            daily_log_returns.len()
        )));
    };
    if std == 0.0 {
        return Err(Error::UndefinedMetric(
            "sharpe undefined for a zero-dispersion series".into(),
        ));
    }
    let rf_daily = annual_rf / TRADING_DAYS_PER_YEAR;
    Ok((mean(daily_log_returns) - rf_daily) / std * TRADING_DAYS_PER_YEAR.sqrt())
}

/// Annualized Sortino ratio: like [`sharpe`] but the denominator is the
/// sample standard deviation over the strictly negative daily returns.
pub fn sortino(daily_log_returns: &[f64], annual_rf: f64) -> Result<f64> {
    if daily_log_returns.is_empty() {
        return Err(Error::UndefinedMetric("sortino of an empty series".into()));
    }
    let downside: Vec<f64> = daily_log_returns
        .iter()
        .copied()
        .filter(|r| *r < 0.0)
        .collect();
    let Some(std_d) = sample_std(&downside) else {
        return Err(Error::UndefinedMetric(format!(
            "sortino needs at least 2 negative returns, got {}",
            downside.len()
        )));
    };
    if std_d == 0.0 {
        return Err(Error::UndefinedMetric(
            "sortino undefined when all negative returns are equal".into(),
        ));
    }
    let rf_daily = annual_rf / TRADING_DAYS_PER_YEAR;
    Ok((mean(daily_log_returns) - rf_daily) / std_d * TRADING_DAYS_PER_YEAR.sqrt())
}

/// Maximum drawdown of a net-value series, as a fraction of the running
/// peak: `min_t (V_t - max_{s<=t} V_s) / max_{s<=t} V_s`. Always in `[-1, 0]`
/// for positive series.
pub fn max_drawdown(net_values: &[f64]) -> Result<f64> {
    if net_values.is_empty() {
        return Err(Error::Size("max drawdown of an empty series".into()));
    }
    if let Some(bad) = net_values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Validation(format!(
            "net value {bad} must be positive and finite"
        )));
    }
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &v in net_values {
        peak = peak.max(v);
        worst = worst.min((v - peak) / peak);
    }
    Ok(worst)
}

/// Calmar ratio `ar / |mdd|`.
pub fn calmar(ar: f64, mdd: f64) -> Result<f64> {
    if mdd == 0.0 {
        return Err(Error::UndefinedMetric(
            "calmar undefined without a drawdown".into(),
        ));
    }
    if !(mdd < 0.0) || mdd < -1.0 {
        return Err(Error::Parameter(format!(
            "max drawdown {mdd} outside [-1, 0)"
        )));
    }
    Ok(ar / mdd.abs())
}
