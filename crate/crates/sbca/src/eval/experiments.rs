//! Experiment protocols: the ablation grid over asset groups and policy
//! variants, and the commission sensitivity sweep.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{derive_seed, train, PolicyVariant, TrainConfig};
use crate::data::{PanelDataset, SplitTag};
use crate::error::{Error, Result};
use crate::net::ParamSet;

use super::strategies::{run_buy_and_hold, run_equal_weight, run_policy, BenchmarkKind};
use super::RunReport;

/// Commission rates the sensitivity sweep walks through.
pub const SWEEP_COMMISSIONS: [f64; 4] = [0.001, 0.0025, 0.005, 0.01];

/// One Sharpe cell of the commission sweep. `None` marks an undefined
/// metric or a run that went insolvent at this commission level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub group: String,
    pub strategy: String,
    pub commission: f64,
    pub sharpe: Option<f64>,
}

/// A trained policy entering the commission sweep, with the training
/// configuration its parameter shapes were built for.
#[derive(Debug, Clone)]
pub struct SweepPolicy {
    pub label: String,
    pub variant: PolicyVariant,
    pub params: ParamSet,
    pub config: TrainConfig,
}

fn sweep_sharpe(outcome: Result<RunReport>) -> Result<Option<f64>> {
    match outcome {
        Ok(report) => Ok(report.sharpe),
        Err(Error::Insolvency { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Sharpe ratio of every strategy at every commission rate.
///
/// The equal-weight and buy-and-hold benchmarks are always included;
/// trained policies are re-evaluated (not retrained) at each rate. Rows
/// come out strategy-major in the commission order given.
pub fn cost_sweep(
    panel: &PanelDataset,
    tag: SplitTag,
    group: &str,
    policies: &[SweepPolicy],
    config: &TrainConfig,
    commissions: &[f64],
) -> Result<Vec<SweepCell>> {
    if commissions.is_empty() {
        return Err(Error::Parameter("commission list is empty".into()));
    }
    let mut cells = Vec::with_capacity((2 + policies.len()) * commissions.len());
    for kind in [BenchmarkKind::EqualWeight, BenchmarkKind::BuyAndHold] {
        for &c in commissions {
            let cost = crate::env::CostModel::new(c)?;
            let outcome = match kind {
                BenchmarkKind::EqualWeight => {
                    run_equal_weight(panel, tag, group, &cost, config.rf_annual)
                }
                BenchmarkKind::BuyAndHold => {
                    run_buy_and_hold(panel, tag, group, &cost, config.rf_annual)
                }
                BenchmarkKind::IndexSeries => unreachable!("index is not swept"),
            };
            cells.push(SweepCell {
                group: group.to_string(),
                strategy: kind.name().to_string(),
                commission: c,
                sharpe: sweep_sharpe(outcome)?,
            });
        }
    }
    for policy in policies {
        let cfg = policy.config.fusion_config(policy.variant);
        for &c in commissions {
            let swept = TrainConfig {
                commission: c,
                ..policy.config.clone()
            };
            let outcome = run_policy(
                panel,
                tag,
                group,
                &policy.label,
                &policy.params,
                &cfg,
                &swept,
            );
            cells.push(SweepCell {
                group: group.to_string(),
                strategy: policy.label.clone(),
                commission: c,
                sharpe: sweep_sharpe(outcome)?,
            });
        }
    }
    Ok(cells)
}

/// Write sweep cells as CSV with an absent cell for undefined Sharpe.
pub fn write_cost_sweep_csv(path: &Path, cells: &[SweepCell]) -> Result<()> {
    let mut out = String::from("group,strategy,commission,sharpe\n");
    for cell in cells {
        out.push_str(&format!(
            "{},{},{},{}\n",
            cell.group,
            cell.strategy,
            cell.commission,
            super::fmt_opt(cell.sharpe),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// One cell of the ablation grid: a full report, or the error that stopped
/// this cell without stopping the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub group: String,
    pub variant: String,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

/// Train and backtest every (group, variant) combination.
///
/// Each group gets its own PRNG stream derived from the base seed, so
/// adding or removing a group never perturbs the others; within a group
/// all variants share the stream, preserving the common parameter draw at
/// epoch 0. Cells run in parallel and failures are recorded per cell.
pub fn ablation_grid(
    groups: &[(String, PanelDataset)],
    variants: &[PolicyVariant],
    config: &TrainConfig,
) -> Vec<AblationCell> {
    let cells: Vec<(usize, PolicyVariant)> = groups
        .iter()
        .enumerate()
        .flat_map(|(gi, _)| variants.iter().map(move |v| (gi, *v)))
        .collect();
    cells
        .into_par_iter()
        .map(|(gi, variant)| {
            let (group, panel) = &groups[gi];
            let cell_config = TrainConfig {
                seed: derive_seed(config.seed, &["ablation", group]),
                ..config.clone()
            };
            let outcome = train(panel, variant, &cell_config).and_then(|(params, _)| {
                run_policy(
                    panel,
                    SplitTag::Test,
                    group,
                    variant.name(),
                    &params,
                    &cell_config.fusion_config(variant),
                    &cell_config,
                )
            });
            match outcome {
                Ok(report) => AblationCell {
                    group: group.clone(),
                    variant: variant.name().to_string(),
                    report: Some(report),
                    error: None,
                },
                Err(e) => AblationCell {
                    group: group.clone(),
                    variant: variant.name().to_string(),
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Write ablation cells as CSV; failed cells keep their row with a
/// diagnostic in the `status` column and empty metric cells.
pub fn write_ablation_csv(path: &Path, cells: &[AblationCell]) -> Result<()> {
    let mut out = String::from(
        "group,variant,status,pv,annual_return,sharpe,sortino,max_drawdown,calmar\n",
    );
    for cell in cells {
        match (&cell.report, &cell.error) {
            (Some(r), _) => out.push_str(&format!(
                "{},{},ok,{},{},{},{},{},{}\n",
                cell.group,
                cell.variant,
                r.pv,
                r.annual_return,
                super::fmt_opt(r.sharpe),
                super::fmt_opt(r.sortino),
                r.max_drawdown,
                super::fmt_opt(r.calmar),
            )),
            (None, Some(e)) => out.push_str(&format!(
                "{},{},failed: {},,,,,,\n",
                cell.group,
                cell.variant,
                e.replace(',', ";"),
            )),
            (None, None) => out.push_str(&format!("{},{},failed,,,,,,\n", cell.group, cell.variant)),
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write net-value curves side by side: row `day`, one column per report,
/// starting from the unit value at day 0. All reports must cover the same
/// number of days.
pub fn write_pv_curves_csv(path: &Path, reports: &[&RunReport]) -> Result<()> {
    let Some(first) = reports.first() else {
        return Err(Error::Size("no reports to plot".into()));
    };
    let len = first.net_values.len();
    if let Some(bad) = reports.iter().find(|r| r.net_values.len() != len) {
        return Err(Error::Size(format!(
            "report {} covers {} days, expected {}",
            bad.strategy,
            bad.net_values.len() - 1,
            len - 1
        )));
    }
    let mut out = String::from("day");
    for r in reports {
        out.push(',');
        out.push_str(&r.strategy);
    }
    out.push('\n');
    for day in 0..len {
        out.push_str(&day.to_string());
        for r in reports {
            out.push_str(&format!(",{}", r.net_values[day]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
