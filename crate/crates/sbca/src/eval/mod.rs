//! Performance evaluation: metrics, benchmark strategies, and the
//! experiment protocols (ablation grid, commission sweep).

pub mod experiments;
pub mod metrics;
pub mod strategies;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use metrics::{annual_return, calmar, max_drawdown, sharpe, sortino};

/// Full record of one strategy run on one asset group: the six summary
/// metrics plus the daily series they were computed from.
///
/// `net_values` carries the initial unit value, so it is one longer than
/// `log_returns` and `pv == exp(sum(log_returns))` up to rounding.
/// Metrics whose formula does not apply to the series are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub group: String,
    pub strategy: String,
    pub commission: f64,
    pub pv: f64,
    pub annual_return: f64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub max_drawdown: f64,
    pub calmar: Option<f64>,
    pub log_returns: Vec<f64>,
    pub net_values: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

/// Map an undefined-metric failure to an absent value; pass through
/// everything else.
fn absent_if_undefined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

impl RunReport {
    /// Assemble a report from daily series. `net_values` must start at the
    /// initial unit value and contain one entry per return thereafter.
    pub fn from_series(
        group: &str,
        strategy: &str,
        commission: f64,
        log_returns: Vec<f64>,
        net_values: Vec<f64>,
        weights: Vec<Vec<f64>>,
        annual_rf: f64,
    ) -> Result<RunReport> {
        if log_returns.is_empty() {
            return Err(Error::Size(format!(
                "report for {group}/{strategy} needs at least one trading day"
            )));
        }
        if net_values.len() != log_returns.len() + 1 {
            return Err(Error::Size(format!(
                "report for {group}/{strategy}: {} net values for {} returns",
                net_values.len(),
                log_returns.len()
            )));
        }
        let pv = *net_values.last().expect("nonempty by check above");
        let ar = annual_return(pv, log_returns.len())?;
        let mdd = max_drawdown(&net_values)?;
        Ok(RunReport {
            group: group.to_string(),
            strategy: strategy.to_string(),
            commission,
            pv,
            annual_return: ar,
            sharpe: absent_if_undefined(sharpe(&log_returns, annual_rf))?,
            sortino: absent_if_undefined(sortino(&log_returns, annual_rf))?,
            max_drawdown: mdd,
            calmar: absent_if_undefined(calmar(ar, mdd))?,
            log_returns,
            net_values,
            weights,
        })
    }

    /// Number of trading days the report covers.
    pub fn n_days(&self) -> usize {
        self.log_returns.len()
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write reports as CSV, one row per (group, strategy), summary metrics
/// only.
pub fn write_report_csv(path: &Path, reports: &[RunReport]) -> Result<()> {
    let mut out =
        String::from("group,strategy,commission,pv,annual_return,sharpe,sortino,max_drawdown,calmar\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.group,
            r.strategy,
            r.commission,
            r.pv,
            r.annual_return,
            fmt_opt(r.sharpe),
            fmt_opt(r.sortino),
            r.max_drawdown,
            fmt_opt(r.calmar),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write reports as JSON, full daily series included.
pub fn write_report_json(path: &Path, reports: &[RunReport]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(reports)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Read back a JSON report file.
pub fn read_report_json(path: &Path) -> Result<Vec<RunReport>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_report() -> RunReport {
        let log_returns: Vec<f64> = vec![0.01, -0.02, 0.015, -0.005];
        let mut net_values = vec![1.0];
        for r in &log_returns {
            net_values.push(net_values.last().unwrap() * r.exp());
        }
        RunReport::from_series(
            "g2",
            "demo",
            0.0025,
            log_returns,
            net_values,
            vec![vec![0.5, 0.5]; 4],
            0.02,
        )
        .unwrap()
    }

    #[test]
    fn report_is_internally_consistent() {
        let r = sample_report();
        assert_relative_eq!(
            r.pv,
            r.log_returns.iter().sum::<f64>().exp(),
            epsilon = 1e-9
        );
        assert_relative_eq!(
            r.annual_return,
            annual_return(r.pv, r.n_days()).unwrap(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            r.calmar.unwrap(),
            r.annual_return / r.max_drawdown.abs(),
            epsilon = 1e-12
        );
        assert!(r.max_drawdown <= 0.0 && r.max_drawdown >= -1.0);
    }

    #[test]
    fn report_rejects_misaligned_series() {
        assert!(RunReport::from_series("g", "s", 0.0, vec![], vec![1.0], vec![], 0.02).is_err());
        assert!(
            RunReport::from_series("g", "s", 0.0, vec![0.01], vec![1.0], vec![], 0.02).is_err()
        );
    }

    #[test]
    fn undefined_metrics_surface_as_absent() {
        // strictly rising series: no negative returns, so sortino and
        // calmar are absent while sharpe is defined
        let log_returns: Vec<f64> = vec![0.01, 0.02, 0.01];
        let mut net_values = vec![1.0];
        for r in &log_returns {
            net_values.push(net_values.last().unwrap() * r.exp());
        }
        let r =
            RunReport::from_series("g", "s", 0.0, log_returns, net_values, vec![], 0.02).unwrap();
        assert!(r.sharpe.is_some());
        assert!(r.sortino.is_none());
        assert_eq!(r.max_drawdown, 0.0);
        assert!(r.calmar.is_none());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let reports = vec![sample_report()];
        let csv_path = dir.path().join("report.csv");
        let json_path = dir.path().join("report.json");
        write_report_csv(&csv_path, &reports).unwrap();
        write_report_json(&json_path, &reports).unwrap();

        let text = std::fs::read_to_string(&csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "group,strategy,commission,pv,annual_return,sharpe,sortino,max_drawdown,calmar"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("g2,demo,0.0025,"));

        let back = read_report_json(&json_path).unwrap();
        assert_eq!(back, reports);
    }
}
