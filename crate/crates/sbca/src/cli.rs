//! Command-line pipeline: ingest data, train policies, backtest them
//! against benchmarks, and run the experiment grids. Every artifact lands
//! in the output directory and is tracked in the run manifest.
//!
//! Exit codes: 0 success, 2 input or validation failure, 3 numeric or
//! training failure, 64 usage error.

use std::path::PathBuf;

use chrono::{Datelike, NaiveDate, Weekday};
use clap::{Args, Parser, Subcommand};

use crate::agent::{evaluate, train, write_trainlog_csv, PolicyVariant, TrainConfig};
use crate::config::ExperimentConfig;
use crate::data::{self, FeatureScaler, PanelDataset, SplitTag};
use crate::env::{write_trajectory_csv, CostModel, WeightVector};
use crate::error::{Error, Result};
use crate::eval::experiments::{
    ablation_grid, cost_sweep, write_ablation_csv, write_cost_sweep_csv,
    write_pv_curves_csv, SweepPolicy,
};
use crate::eval::strategies::{
    run_benchmark_with_records, run_buy_and_hold, run_equal_weight, BenchmarkKind,
};
use crate::eval::{write_report_csv, write_report_json, RunReport};
use crate::manifest::RunManifest;
use crate::net::{load_checkpoint, save_checkpoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "sbca",
    version,
    about = "Sentiment-aware portfolio policies: data pipeline, training, backtests and experiment grids"
)]
pub struct Cli {
    /// Flat JSON config file; omitted keys keep their defaults
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed override (wins over SBCA_SEED and the config file)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory override
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Shape of a generated synthetic panel.
#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of assets
    #[arg(long, default_value_t = 2)]
    pub assets: usize,
    /// Number of trading days
    #[arg(long, default_value_t = 600)]
    pub days: usize,
    /// Daily log-return drift per asset, comma separated; a single value
    /// applies to every asset
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub drift: Option<Vec<f64>>,
    /// Daily log-return volatility per asset, comma separated; a single
    /// value applies to every asset
    #[arg(long, value_delimiter = ',')]
    pub vol: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align configured price and news files into a validated panel
    Ingest {
        /// Generate seeded synthetic inputs instead of reading configured
        /// files
        #[arg(long)]
        synth: bool,
        #[command(flatten)]
        shape: SynthArgs,
    },
    /// Train one policy variant on one asset group
    Train {
        /// Policy variant: sb, sba, sbc or sbca
        #[arg(long, value_parser = parse_variant_arg)]
        variant: PolicyVariant,
        /// Asset group from the config (defaults to the only group)
        #[arg(long)]
        group: Option<String>,
    },
    /// Backtest a trained checkpoint or a benchmark strategy on a split
    Backtest {
        /// Checkpoint file written by `train`
        #[arg(
            long,
            value_name = "FILE",
            required_unless_present = "benchmark",
            conflicts_with = "benchmark"
        )]
        checkpoint: Option<PathBuf>,
        /// Benchmark strategy: equal_weight, buy_and_hold or index
        #[arg(long, value_parser = parse_benchmark_arg)]
        benchmark: Option<BenchmarkKind>,
        /// Asset group from the config (defaults to the only group)
        #[arg(long)]
        group: Option<String>,
        /// Panel split to evaluate: train, val or test
        #[arg(long, default_value = "test", value_parser = parse_split_arg)]
        split: SplitTag,
    },
    /// Train and evaluate every configured (group, variant) cell
    Ablate,
    /// Sharpe ratio of benchmarks and trained checkpoints across the
    /// configured commission rates
    CostSweep {
        /// Trained checkpoints to sweep alongside the benchmarks (repeat
        /// the flag per file)
        #[arg(long = "checkpoint", value_name = "FILE")]
        checkpoints: Vec<PathBuf>,
        /// Asset group from the config (defaults to the only group)
        #[arg(long)]
        group: Option<String>,
    },
    /// Write seeded synthetic price, news and index CSVs without
    /// ingesting them
    Synth {
        #[command(flatten)]
        shape: SynthArgs,
    },
}

fn parse_variant_arg(s: &str) -> std::result::Result<PolicyVariant, String> {
    s.parse::<PolicyVariant>().map_err(|e| e.to_string())
}

fn parse_benchmark_arg(s: &str) -> std::result::Result<BenchmarkKind, String> {
    s.parse::<BenchmarkKind>().map_err(|e| e.to_string())
}

fn parse_split_arg(s: &str) -> std::result::Result<SplitTag, String> {
    match s {
        "train" => Ok(SplitTag::Train),
        "val" => Ok(SplitTag::Val),
        "test" => Ok(SplitTag::Test),
        other => Err(format!("unknown split {other:?} (expected train, val or test)")),
    }
}

/// Exit code for an application error: numeric and training failures map
/// to 3, everything else (IO, schema, validation, parameters) to 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_)
        | Error::Insolvency { .. }
        | Error::Graph(_)
        | Error::Construction(_) => EXIT_NUMERIC,
        _ => EXIT_INPUT,
    }
}

/// Parse `std::env::args` and run; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Assemble the effective config (defaults < file < environment < flags)
/// and dispatch the subcommand.
pub fn run(cli: Cli) -> Result<i32> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply_env()?;
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.clone();
    }
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;

    match cli.command {
        Command::Ingest { synth, shape } => cmd_ingest(&config, synth.then_some(&shape)),
        Command::Train { variant, group } => cmd_train(&config, variant, group.as_deref()),
        Command::Backtest {
            checkpoint,
            benchmark,
            group,
            split,
        } => cmd_backtest(&config, checkpoint, benchmark, group.as_deref(), split),
        Command::Ablate => cmd_ablate(&config),
        Command::CostSweep { checkpoints, group } => {
            cmd_cost_sweep(&config, &checkpoints, group.as_deref())
        }
        Command::Synth { shape } => {
            let (prices, news, index) = write_synth_inputs(&config, &shape)?;
            RunManifest::update(
                &config.out_dir,
                &config,
                &[prices.clone(), news.clone(), index.clone()],
            )?;
            println!(
                "wrote {}, {}, {}",
                prices.display(),
                news.display(),
                index.display()
            );
            Ok(EXIT_OK)
        }
    }
}

/// Expand a per-asset list: `n` values pass through, a single value is
/// repeated for every asset.
fn per_asset(label: &str, values: Option<Vec<f64>>, default: f64, n: usize) -> Result<Vec<f64>> {
    match values {
        None => Ok(vec![default; n]),
        Some(v) if v.len() == n => Ok(v),
        Some(v) if v.len() == 1 => Ok(vec![v[0]; n]),
        Some(v) => Err(Error::Parameter(format!(
            "{label} needs 1 or {n} values, got {}",
            v.len()
        ))),
    }
}

/// Generate the synthetic panel for `shape` and write it back out as the
/// three input CSVs (prices, news, index) the ingest pipeline reads.
///
/// News rows are dated on the session before the day their score applies
/// to, so alignment attaches them to the next trading day; the index is
/// the equal-weight average close.
fn write_synth_inputs(
    config: &ExperimentConfig,
    shape: &SynthArgs,
) -> Result<(PathBuf, PathBuf, PathBuf)> {
    let drift = per_asset("--drift", shape.drift.clone(), 0.0005, shape.assets)?;
    let vol = per_asset("--vol", shape.vol.clone(), 0.015, shape.assets)?;
    let panel = data::synth_generate(config.train.seed, shape.assets, shape.days, &drift, &vol)?;

    let n = panel.n_assets();
    // closes implied by the returns, anchored at 100 on the session
    // before the panel starts
    let mut closes = vec![vec![100.0; n]];
    for row in &panel.returns {
        let prev = closes.last().expect("seeded").clone();
        closes.push((0..n).map(|i| prev[i] * row[i].exp()).collect());
    }
    let mut day0 = panel.calendar[0] - chrono::Days::new(1);
    while matches!(day0.weekday(), Weekday::Sat | Weekday::Sun) {
        day0 = day0 - chrono::Days::new(1);
    }
    let dates: Vec<NaiveDate> = std::iter::once(day0)
        .chain(panel.calendar.iter().copied())
        .collect();

    let mut prices = String::from("date,ticker,close\n");
    for (i, ticker) in panel.tickers.iter().enumerate() {
        for (t, date) in dates.iter().enumerate() {
            prices.push_str(&format!("{date},{ticker},{}\n", closes[t][i]));
        }
    }
    let mut news = String::from("date,ticker,title,delta_bert\n");
    for t in 0..panel.n_days() {
        for (i, ticker) in panel.tickers.iter().enumerate() {
            news.push_str(&format!(
                "{},{ticker},synthetic wire {ticker} {},{}\n",
                dates[t], dates[t], panel.sentiment[t][i]
            ));
        }
    }
    let mut index = String::from("date,close\n");
    for (t, date) in dates.iter().enumerate() {
        let avg = closes[t].iter().sum::<f64>() / n as f64;
        index.push_str(&format!("{date},{avg}\n"));
    }

    let prices_path = config.out_dir.join("prices.csv");
    let news_path = config.out_dir.join("news.csv");
    let index_path = config.out_dir.join("index.csv");
    std::fs::write(&prices_path, prices)?;
    std::fs::write(&news_path, news)?;
    std::fs::write(&index_path, index)?;
    Ok((prices_path, news_path, index_path))
}

fn cmd_ingest(config: &ExperimentConfig, synth: Option<&SynthArgs>) -> Result<i32> {
    let mut artifacts: Vec<PathBuf> = Vec::new();
    let (prices_path, news_path) = match synth {
        Some(shape) => {
            let (prices, news, index) = write_synth_inputs(config, shape)?;
            artifacts.extend([prices.clone(), news.clone(), index]);
            (prices, Some(news))
        }
        None => {
            let prices = config.prices_csv.clone().ok_or_else(|| {
                Error::Parameter(
                    "no prices_csv configured; set it in the config file or pass --synth".into(),
                )
            })?;
            (prices, config.news_csv.clone())
        }
    };

    let prices = data::load_prices(&prices_path)?;
    let records = match &news_path {
        Some(path) => data::load_news(path)?,
        None => {
            eprintln!("note: no news file configured, sentiment defaults to neutral");
            Vec::new()
        }
    };

    let (full_calendar, _) = data::shared_calendar(&prices)?;
    if full_calendar.len() < 2 {
        return Err(Error::Size(
            "price files share too few dates to form returns".into(),
        ));
    }
    let calendar = full_calendar[1..].to_vec();
    let tickers: Vec<String> = prices.iter().map(|p| p.ticker.clone()).collect();
    let (sentiment, summary) = data::align_news(&records, &tickers, &calendar)?;
    let covered = sentiment
        .iter()
        .flat_map(|s| s.titles.iter())
        .filter(|t| !t.is_empty())
        .count();
    let coverage = 100.0 * covered as f64 / (calendar.len() * tickers.len()) as f64;
    if summary.unknown_ticker > 0 || summary.dropped_after_calendar > 0 {
        eprintln!(
            "note: dropped {} news records for unknown tickers, {} dated past the calendar",
            summary.unknown_ticker, summary.dropped_after_calendar
        );
    }

    let panel = data::assemble_panel(&prices, &sentiment)?;
    let (train_end, val_end) = config.split_boundaries(&panel.calendar)?;
    let panel = data::split_time_series(panel, train_end, val_end)?;
    for (name, group_tickers) in config.effective_groups(&panel.tickers) {
        for t in &group_tickers {
            if !panel.tickers.contains(t) {
                return Err(Error::Schema(format!(
                    "group {name} references ticker {t} not present in the price data"
                )));
            }
        }
    }

    let panel_path = config.resolved_panel_path();
    if let Some(parent) = panel_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    data::write_panel(&panel_path, &panel)?;
    artifacts.push(panel_path.clone());
    RunManifest::update(&config.out_dir, config, &artifacts)?;
    println!(
        "panel: {} days, {} assets, news coverage {coverage:.1}%",
        panel.n_days(),
        panel.n_assets()
    );
    println!("wrote {}", panel_path.display());
    Ok(EXIT_OK)
}

/// Pick the asset group to operate on and select its panel columns.
fn resolve_group(
    config: &ExperimentConfig,
    panel: &PanelDataset,
    group: Option<&str>,
) -> Result<(String, PanelDataset)> {
    if config.groups.is_empty() {
        return match group {
            None | Some("all") => Ok(("all".to_string(), panel.clone())),
            Some(other) => Err(Error::Parameter(format!(
                "group {other:?} is not configured (no groups defined)"
            ))),
        };
    }
    let name = match group {
        Some(name) => name.to_string(),
        None if config.groups.len() == 1 => {
            config.groups.keys().next().expect("nonempty").clone()
        }
        None => {
            return Err(Error::Parameter(format!(
                "config defines {} groups; pass --group",
                config.groups.len()
            )));
        }
    };
    let tickers = config.groups.get(&name).ok_or_else(|| {
        Error::Parameter(format!("group {name:?} is not in the config"))
    })?;
    let selected = panel.select(tickers)?;
    Ok((name, selected))
}

fn cmd_train(config: &ExperimentConfig, variant: PolicyVariant, group: Option<&str>) -> Result<i32> {
    let panel_full = data::read_panel(&config.resolved_panel_path())?;
    let (group_name, panel) = resolve_group(config, &panel_full, group)?;

    let (params, log) = match train(&panel, variant, &config.train) {
        Ok(out) => out,
        Err(e) if exit_code(&e) == EXIT_NUMERIC => {
            let path = config
                .out_dir
                .join(format!("diagnostics_{group_name}_{}.txt", variant.name()));
            std::fs::write(
                &path,
                format!(
                    "training aborted: {e}\nvariant: {}\ngroup: {group_name}\nconfig: {}\n",
                    variant.name(),
                    serde_json::to_string(config)?
                ),
            )?;
            RunManifest::update(&config.out_dir, config, &[path.clone()])?;
            eprintln!("diagnostics: {}", path.display());
            return Err(e);
        }
        Err(e) => return Err(e),
    };

    let checkpoint_path = config
        .out_dir
        .join(format!("checkpoint_{group_name}_{}.json", variant.name()));
    let meta = serde_json::json!({
        "variant": variant,
        "group": group_name,
        "train": &config.train,
    });
    save_checkpoint(&checkpoint_path, &params, config.train.seed, meta)?;
    let log_path = config.out_dir.join("trainlog.csv");
    write_trainlog_csv(&log_path, &log)?;
    RunManifest::update(
        &config.out_dir,
        config,
        &[checkpoint_path.clone(), log_path.clone()],
    )?;

    let best = &log.epochs[log.best_epoch];
    println!(
        "trained {} on {group_name}: {} epochs, best epoch {} (val PV {:.6})",
        variant.name(),
        log.epochs.len(),
        log.best_epoch,
        best.val_pv
    );
    println!("wrote {}, {}", checkpoint_path.display(), log_path.display());
    Ok(EXIT_OK)
}

/// Variant, group and training configuration a checkpoint was saved with.
fn decode_checkpoint_meta(
    meta: &serde_json::Value,
) -> Result<(PolicyVariant, String, TrainConfig)> {
    let field = |name: &str| {
        meta.get(name).cloned().ok_or_else(|| {
            Error::Schema(format!("checkpoint metadata is missing {name:?}"))
        })
    };
    let variant: PolicyVariant = serde_json::from_value(field("variant")?)?;
    let group: String = serde_json::from_value(field("group")?)?;
    let train: TrainConfig = serde_json::from_value(field("train")?)?;
    Ok((variant, group, train))
}

fn weight_rows(rows: &[Vec<f64>]) -> Result<Vec<WeightVector>> {
    rows.iter().cloned().map(WeightVector::new).collect()
}

fn cmd_backtest(
    config: &ExperimentConfig,
    checkpoint: Option<PathBuf>,
    benchmark: Option<BenchmarkKind>,
    group: Option<&str>,
    split: SplitTag,
) -> Result<i32> {
    let panel_full = data::read_panel(&config.resolved_panel_path())?;
    let mut artifacts: Vec<PathBuf> = Vec::new();

    let (report, records, weights) = match (checkpoint, benchmark) {
        (Some(path), _) => {
            let (params, _seed, meta) = load_checkpoint(&path)?;
            let (variant, saved_group, train_cfg) = decode_checkpoint_meta(&meta)?;
            let (group_name, panel) =
                resolve_group(config, &panel_full, group.or(Some(saved_group.as_str())))?;
            let scaler = FeatureScaler::fit(&panel)?;
            let cfg = train_cfg.fusion_config(variant);
            let traj = evaluate(&panel, &scaler, split, &params, &cfg, &train_cfg)?;
            let report = crate::eval::strategies::report_from_trajectory(
                &traj,
                &group_name,
                variant.name(),
                &train_cfg,
            )?;

            // per-asset signal series: date, raw and smoothed weight, and
            // the sentiment score the policy saw
            for (i, ticker) in panel.tickers.iter().enumerate() {
                let mut out = String::from("date,raw_weight,weight,sentiment\n");
                for (k, &t) in traj.days.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        panel.calendar[t],
                        traj.raw_weights[k][i],
                        traj.weights[k][i],
                        panel.sentiment[t][i]
                    ));
                }
                let path = config.out_dir.join(format!("signals_{ticker}.csv"));
                std::fs::write(&path, out)?;
                artifacts.push(path);
            }
            (report, traj.records, weight_rows(&traj.weights)?)
        }
        (None, Some(kind)) => {
            let (group_name, panel) = resolve_group(config, &panel_full, group)?;
            let index_series = match kind {
                BenchmarkKind::IndexSeries => {
                    let path = config.index_csv.clone().ok_or_else(|| {
                        Error::Parameter(
                            "the index benchmark needs index_csv in the config".into(),
                        )
                    })?;
                    Some(data::load_index(&path)?)
                }
                _ => None,
            };
            let cost = CostModel::new(config.train.commission)?;
            let (report, records) = run_benchmark_with_records(
                kind,
                &panel,
                split,
                &group_name,
                &cost,
                config.train.rf_annual,
                index_series
                    .as_ref()
                    .map(|(d, c)| (d.as_slice(), c.as_slice())),
            )?;
            let weights = weight_rows(&report.weights)?;
            (report, records, weights)
        }
        (None, None) => {
            return Err(Error::Parameter(
                "pass --checkpoint or --benchmark".into(),
            ));
        }
    };

    let json_path = config.out_dir.join("report.json");
    let csv_path = config.out_dir.join("report.csv");
    let traj_path = config.out_dir.join("trajectory.csv");
    write_report_json(&json_path, std::slice::from_ref(&report))?;
    write_report_csv(&csv_path, std::slice::from_ref(&report))?;
    write_trajectory_csv(&traj_path, &records, &weights)?;
    artifacts.extend([json_path, csv_path, traj_path]);
    RunManifest::update(&config.out_dir, config, &artifacts)?;

    let show = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    println!(
        "{} on {} ({:?} split): PV {:.4}, annual return {:.4}, sharpe {}, sortino {}, max drawdown {:.4}, calmar {}",
        report.strategy,
        report.group,
        split,
        report.pv,
        report.annual_return,
        show(report.sharpe),
        show(report.sortino),
        report.max_drawdown,
        show(report.calmar)
    );
    Ok(EXIT_OK)
}

fn cmd_ablate(config: &ExperimentConfig) -> Result<i32> {
    let panel_full = data::read_panel(&config.resolved_panel_path())?;
    let groups = config.effective_groups(&panel_full.tickers);
    let mut group_panels: Vec<(String, PanelDataset)> = Vec::with_capacity(groups.len());
    for (name, tickers) in &groups {
        group_panels.push((name.clone(), panel_full.select(tickers)?));
    }

    let cells = ablation_grid(&group_panels, &config.variants, &config.train);
    let mut artifacts: Vec<PathBuf> = Vec::new();
    let table_path = config.out_dir.join("ablation.csv");
    write_ablation_csv(&table_path, &cells)?;
    artifacts.push(table_path.clone());

    // plot data: net-value curves of each variant plus the benchmarks
    let cost = CostModel::new(config.train.commission)?;
    for (name, panel) in &group_panels {
        let ew = run_equal_weight(panel, SplitTag::Test, name, &cost, config.train.rf_annual)?;
        let bh = run_buy_and_hold(panel, SplitTag::Test, name, &cost, config.train.rf_annual)?;
        let mut curves: Vec<&RunReport> = cells
            .iter()
            .filter(|c| c.group == *name)
            .filter_map(|c| c.report.as_ref())
            .collect();
        curves.push(&ew);
        curves.push(&bh);
        let path = if group_panels.len() == 1 {
            config.out_dir.join("pv_curves.csv")
        } else {
            config.out_dir.join(format!("pv_curves_{name}.csv"))
        };
        write_pv_curves_csv(&path, &curves)?;
        artifacts.push(path);
    }
    RunManifest::update(&config.out_dir, config, &artifacts)?;

    let ok = cells.iter().filter(|c| c.report.is_some()).count();
    for cell in cells.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "cell {}/{} failed: {}",
            cell.group,
            cell.variant,
            cell.error.as_deref().unwrap_or("unknown")
        );
    }
    println!(
        "ablation: {ok}/{} cells ok, wrote {}",
        cells.len(),
        table_path.display()
    );
    Ok(if ok > 0 { EXIT_OK } else { EXIT_NUMERIC })
}

fn cmd_cost_sweep(
    config: &ExperimentConfig,
    checkpoints: &[PathBuf],
    group: Option<&str>,
) -> Result<i32> {
    let panel_full = data::read_panel(&config.resolved_panel_path())?;
    let (group_name, panel) = resolve_group(config, &panel_full, group)?;

    let mut policies: Vec<SweepPolicy> = Vec::with_capacity(checkpoints.len());
    for path in checkpoints {
        let (params, _seed, meta) = load_checkpoint(path)?;
        let (variant, _saved_group, train_cfg) = decode_checkpoint_meta(&meta)?;
        policies.push(SweepPolicy {
            label: variant.name().to_string(),
            variant,
            params,
            config: train_cfg,
        });
    }

    let cells = cost_sweep(
        &panel,
        SplitTag::Test,
        &group_name,
        &policies,
        &config.train,
        &config.commissions,
    )?;
    let path = config.out_dir.join("cost_sweep.csv");
    write_cost_sweep_csv(&path, &cells)?;
    RunManifest::update(&config.out_dir, config, &[path.clone()])?;

    let ok = cells.iter().filter(|c| c.sharpe.is_some()).count();
    println!(
        "cost sweep: {ok}/{} cells defined, wrote {}",
        cells.len(),
        path.display()
    );
    Ok(if ok > 0 { EXIT_OK } else { EXIT_NUMERIC })
}
