//! Deterministic synthetic panels for tests and offline experiments.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::{PanelDataset, SplitTag};
use crate::error::{Error, Result};

/// Panel days below this are rejected: the default 30-day feature window
/// plus a little room to trade.
const MIN_DAYS: usize = 41;

/// Generate a panel of `n_days` return rows over `n_assets` geometric
/// random walks, with per-asset daily `drift` and `vol` in log space and
/// uniform `[0,1]` sentiment. Identical seeds give bit-identical panels.
///
/// The calendar walks weekdays from 2012-01-03. Days are pre-tagged with a
/// 64/18/18 train/val/test split; use
/// [`split_time_series`](super::split_time_series) to retag.
pub fn synth_generate(
    seed: u64,
    n_assets: usize,
    n_days: usize,
    drift: &[f64],
    vol: &[f64],
) -> Result<PanelDataset> {
    if n_assets == 0 {
        return Err(Error::Parameter("n_assets must be positive".into()));
    }
    if n_days < MIN_DAYS {
        return Err(Error::Parameter(format!(
            "n_days {n_days} too short; need at least {MIN_DAYS}"
        )));
    }
    if drift.len() != n_assets || vol.len() != n_assets {
        return Err(Error::Size(format!(
            "drift/vol lengths {}/{} disagree with n_assets {n_assets}",
            drift.len(),
            vol.len()
        )));
    }
    if vol.iter().any(|v| *v < 0.0) {
        return Err(Error::Parameter("vol must be nonnegative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;

    // n_days + 1 closes produce n_days returns.
    let mut closes = vec![vec![100.0; n_assets]];
    for t in 0..n_days {
        let prev = closes[t].clone();
        let row: Vec<f64> = (0..n_assets)
            .map(|i| {
                let z: f64 = normal.sample(&mut rng);
                prev[i] * (drift[i] + vol[i] * z).exp()
            })
            .collect();
        closes.push(row);
    }

    let unit = Uniform::new_inclusive(0.0, 1.0)
        .map_err(|e| Error::Parameter(format!("uniform range: {e}")))?;
    let sentiment: Vec<Vec<f64>> = (0..n_days)
        .map(|_| (0..n_assets).map(|_| unit.sample(&mut rng)).collect())
        .collect();

    let returns: Vec<Vec<f64>> = (1..=n_days)
        .map(|t| {
            (0..n_assets)
                .map(|i| (closes[t][i] / closes[t - 1][i]).ln())
                .collect()
        })
        .collect();

    let mut calendar = Vec::with_capacity(n_days);
    let mut day = NaiveDate::from_ymd_opt(2012, 1, 3).unwrap();
    while calendar.len() < n_days {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            calendar.push(day);
        }
        day += Duration::days(1);
    }

    let train_end = (n_days as f64 * 0.64).floor() as usize;
    let val_end = (n_days as f64 * 0.82).floor() as usize;
    let split = (0..n_days)
        .map(|t| {
            if t < train_end {
                SplitTag::Train
            } else if t < val_end {
                SplitTag::Val
            } else {
                SplitTag::Test
            }
        })
        .collect();

    Ok(PanelDataset {
        tickers: (0..n_assets).map(|i| format!("SYN{i}")).collect(),
        calendar,
        returns,
        sentiment,
        split,
    })
}
