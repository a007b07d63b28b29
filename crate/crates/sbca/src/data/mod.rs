//! Price and sentiment data: loading, calendar alignment, news-to-session
//! mapping, time-ordered splits, feature standardization, and deterministic
//! synthetic panels for tests.
//!
//! The central type is [`PanelDataset`]: a shared trading calendar where
//! every day carries one log return and one sentiment score per asset, plus
//! a train/val/test tag. The first close of each raw series only seeds the
//! first return and does not appear as a panel day, so `returns[t]` is real
//! data for every `t`.

mod io;
mod synth;

pub use io::{load_index, load_news, load_prices, read_panel, write_panel};
pub use synth::synth_generate;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Close-price history for one ticker.
#[derive(Debug, Clone)]
pub struct PriceSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub close: Vec<f64>,
}

/// One raw news row: headline plus its precomputed sentiment score.
#[derive(Debug, Clone)]
pub struct NewsRecord {
    pub date: NaiveDate,
    pub ticker: String,
    pub title: String,
    pub score: f64,
}

/// Per-ticker sentiment aligned to the trading calendar, one score per day.
/// Titles are kept only for export.
#[derive(Debug, Clone)]
pub struct SentimentSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub score: Vec<f64>,
    pub titles: Vec<String>,
}

/// Bookkeeping from [`align_news`]: records that could not be attached.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct AlignSummary {
    /// Records dated on or after the last trading day (no next session).
    pub dropped_after_calendar: usize,
    /// Records for tickers not in the panel.
    pub unknown_ticker: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

/// Aligned multi-asset dataset over a shared trading calendar.
///
/// `returns[t][i]` is the log return of asset `i` over the session ending on
/// `calendar[t]`; `sentiment[t][i]` is that asset's score for the same day,
/// aggregated from news dated strictly before it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelDataset {
    pub tickers: Vec<String>,
    pub calendar: Vec<NaiveDate>,
    pub returns: Vec<Vec<f64>>,
    pub sentiment: Vec<Vec<f64>>,
    pub split: Vec<SplitTag>,
}

/// Per-asset standardization statistics, fitted on the training split only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Flattened model input for one decision day.
#[derive(Debug, Clone)]
pub struct StateVector {
    /// `W×N` standardized log returns, day-major.
    pub price_block: Vec<f64>,
    /// `N` sentiment values mapped to `[-1, 1]`.
    pub text_block: Vec<f64>,
}

/// Log returns of a close series: `out[t] = ln(p_{t+1}/p_t)`.
pub fn log_returns(close: &[f64]) -> Result<Vec<f64>> {
    if close.len() < 2 {
        return Err(Error::Size(format!(
            "log returns need at least 2 prices, got {}",
            close.len()
        )));
    }
    Ok(close.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Maximum consecutive missing sessions a ticker may forward-fill before the
/// day is dropped panel-wide.
pub const MAX_FFILL_DAYS: usize = 3;

/// Build the shared trading calendar and a filled close matrix.
///
/// The calendar starts from the union of all per-ticker dates. A ticker
/// missing a day inherits its previous close for up to [`MAX_FFILL_DAYS`]
/// consecutive days; a day any ticker cannot cover is dropped for every
/// asset. Returns the surviving dates and a `days × N` close matrix.
pub fn shared_calendar(series: &[PriceSeries]) -> Result<(Vec<NaiveDate>, Vec<Vec<f64>>)> {
    if series.is_empty() {
        return Err(Error::Size("no price series supplied".into()));
    }
    let mut union: Vec<NaiveDate> = series.iter().flat_map(|s| s.dates.iter().copied()).collect();
    union.sort_unstable();
    union.dedup();

    let n = series.len();
    let mut closes: Vec<Vec<f64>> = Vec::with_capacity(union.len());
    let mut kept: Vec<NaiveDate> = Vec::with_capacity(union.len());
    let mut cursor = vec![0usize; n];
    let mut last = vec![f64::NAN; n];
    let mut gap = vec![0usize; n];

    for &day in &union {
        let mut row = vec![0.0; n];
        let mut ok = true;
        for (i, s) in series.iter().enumerate() {
            if cursor[i] < s.dates.len() && s.dates[cursor[i]] == day {
                last[i] = s.close[cursor[i]];
                gap[i] = 0;
                cursor[i] += 1;
                row[i] = last[i];
            } else if last[i].is_finite() && gap[i] < MAX_FFILL_DAYS {
                gap[i] += 1;
                row[i] = last[i];
            } else {
                ok = false;
            }
        }
        if ok {
            kept.push(day);
            closes.push(row);
        }
    }
    if kept.len() < 2 {
        return Err(Error::Size(format!(
            "shared calendar has {} day(s); need at least 2 to form a return",
            kept.len()
        )));
    }
    Ok((kept, closes))
}

/// Attach news records to trading sessions.
///
/// A record dated `d` affects the first calendar day strictly after `d`, so
/// weekend and after-close items roll to the next session and every panel
/// day only sees strictly earlier news. Multiple scores on one ticker-day
/// are averaged; titles are concatenated with `" ||| "`. Days without news
/// get the neutral score 0.5.
pub fn align_news(
    records: &[NewsRecord],
    tickers: &[String],
    calendar: &[NaiveDate],
) -> Result<(Vec<SentimentSeries>, AlignSummary)> {
    if calendar.is_empty() {
        return Err(Error::Size("empty trading calendar".into()));
    }
    let mut summary = AlignSummary::default();
    // per ticker, per day: (score sum, count, titles)
    let mut buckets: Vec<Vec<(f64, usize, Vec<String>)>> =
        vec![vec![(0.0, 0, Vec::new()); calendar.len()]; tickers.len()];

    for rec in records {
        let Some(ti) = tickers.iter().position(|t| *t == rec.ticker) else {
            summary.unknown_ticker += 1;
            continue;
        };
        let di = calendar.partition_point(|&d| d <= rec.date);
        if di == calendar.len() {
            summary.dropped_after_calendar += 1;
            continue;
        }
        let slot = &mut buckets[ti][di];
        slot.0 += rec.score;
        slot.1 += 1;
        slot.2.push(rec.title.clone());
    }

    let series = tickers
        .iter()
        .zip(buckets)
        .map(|(ticker, days)| {
            let mut score = Vec::with_capacity(calendar.len());
            let mut titles = Vec::with_capacity(calendar.len());
            for (sum, count, t) in days {
                if count == 0 {
                    score.push(0.5);
                    titles.push(String::new());
                } else {
                    score.push(sum / count as f64);
                    titles.push(t.join(" ||| "));
                }
            }
            SentimentSeries {
                ticker: ticker.clone(),
                dates: calendar.to_vec(),
                score,
                titles,
            }
        })
        .collect();
    Ok((series, summary))
}

/// Assemble a panel from price series and pre-aligned sentiment.
///
/// The first shared close day seeds the first return and is dropped, so the
/// panel calendar is `shared_calendar[1..]`. `sentiment` must already be
/// aligned to that panel calendar (see [`align_news`]). All days start
/// tagged as training data until [`split_time_series`] retags them.
pub fn assemble_panel(
    prices: &[PriceSeries],
    sentiment: &[SentimentSeries],
) -> Result<PanelDataset> {
    let (full_calendar, closes) = shared_calendar(prices)?;
    let calendar: Vec<NaiveDate> = full_calendar[1..].to_vec();
    let n = prices.len();

    let mut returns = Vec::with_capacity(calendar.len());
    for t in 1..full_calendar.len() {
        let row: Vec<f64> = (0..n).map(|i| (closes[t][i] / closes[t - 1][i]).ln()).collect();
        returns.push(row);
    }

    let mut sent = vec![vec![0.5; n]; calendar.len()];
    for (i, ticker) in prices.iter().map(|p| &p.ticker).enumerate() {
        let Some(series) = sentiment.iter().find(|s| s.ticker == *ticker) else {
            continue; // no news for this ticker: neutral everywhere
        };
        if series.dates != calendar {
            return Err(Error::Size(format!(
                "sentiment for {ticker} is not aligned to the panel calendar"
            )));
        }
        for (t, &s) in series.score.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Validation(format!(
                    "sentiment score {s} for {ticker} outside [0,1]"
                )));
            }
            sent[t][i] = s;
        }
    }

    Ok(PanelDataset {
        tickers: prices.iter().map(|p| p.ticker.clone()).collect(),
        calendar: calendar.clone(),
        returns,
        sentiment: sent,
        split: vec![SplitTag::Train; calendar.len()],
    })
}

impl PanelDataset {
    pub fn n_days(&self) -> usize {
        self.calendar.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    /// Day indices carrying `tag`, in time order.
    pub fn split_indices(&self, tag: SplitTag) -> Vec<usize> {
        (0..self.n_days()).filter(|&t| self.split[t] == tag).collect()
    }

    /// Gross return vector `exp(returns[t])` for day `t`.
    pub fn gross_returns(&self, t: usize) -> Vec<f64> {
        self.returns[t].iter().map(|r| r.exp()).collect()
    }

    /// Restrict the panel to a subset of tickers, preserving day rows.
    pub fn select(&self, tickers: &[String]) -> Result<PanelDataset> {
        let cols: Vec<usize> = tickers
            .iter()
            .map(|w| {
                self.tickers
                    .iter()
                    .position(|t| t == w)
                    .ok_or_else(|| Error::Schema(format!("ticker {w} not in panel")))
            })
            .collect::<Result<_>>()?;
        let pick = |m: &[Vec<f64>]| -> Vec<Vec<f64>> {
            m.iter()
                .map(|row| cols.iter().map(|&c| row[c]).collect())
                .collect()
        };
        Ok(PanelDataset {
            tickers: tickers.to_vec(),
            calendar: self.calendar.clone(),
            returns: pick(&self.returns),
            sentiment: pick(&self.sentiment),
            split: self.split.clone(),
        })
    }

    fn check_rectangular(&self) -> Result<()> {
        let (d, n) = (self.n_days(), self.n_assets());
        if self.returns.len() != d
            || self.sentiment.len() != d
            || self.split.len() != d
            || self.returns.iter().any(|r| r.len() != n)
            || self.sentiment.iter().any(|r| r.len() != n)
        {
            return Err(Error::Size("panel matrices disagree with calendar/tickers".into()));
        }
        Ok(())
    }
}

/// Tag panel days as train (`day ≤ train_end`), validation
/// (`train_end < day ≤ val_end`) or test (`day > val_end`).
///
/// All three splits must come out nonempty; boundaries that leave one empty
/// or fall outside the calendar are rejected.
pub fn split_time_series(
    mut panel: PanelDataset,
    train_end: NaiveDate,
    val_end: NaiveDate,
) -> Result<PanelDataset> {
    panel.check_rectangular()?;
    if train_end >= val_end {
        return Err(Error::Range(format!(
            "split boundaries out of order: {train_end} vs {val_end}"
        )));
    }
    for (t, &day) in panel.calendar.iter().enumerate() {
        panel.split[t] = if day <= train_end {
            SplitTag::Train
        } else if day <= val_end {
            SplitTag::Val
        } else {
            SplitTag::Test
        };
    }
    for tag in [SplitTag::Train, SplitTag::Val, SplitTag::Test] {
        if panel.split_indices(tag).is_empty() {
            return Err(Error::Range(format!(
                "split boundary leaves the {tag:?} split empty"
            )));
        }
    }
    Ok(panel)
}

impl FeatureScaler {
    /// Population mean/std of each asset's log returns over training days
    /// only. A constant asset gets its std clamped to 1e-8.
    pub fn fit(panel: &PanelDataset) -> Result<FeatureScaler> {
        let rows = panel.split_indices(SplitTag::Train);
        if rows.is_empty() {
            return Err(Error::Size("no training days to fit the scaler".into()));
        }
        let n = panel.n_assets();
        let mut mean = vec![0.0; n];
        for &t in &rows {
            for i in 0..n {
                mean[i] += panel.returns[t][i];
            }
        }
        for m in &mut mean {
            *m /= rows.len() as f64;
        }
        let mut std = vec![0.0; n];
        for &t in &rows {
            for i in 0..n {
                let d = panel.returns[t][i] - mean[i];
                std[i] += d * d;
            }
        }
        for s in &mut std {
            *s = (*s / rows.len() as f64).sqrt().max(1e-8);
        }
        Ok(FeatureScaler { mean, std })
    }
}

/// Model input for decision day `t`: the `W` standardized return rows
/// `t-W..t` (strictly before `t`) plus day `t`'s centered sentiment.
pub fn build_state(
    panel: &PanelDataset,
    scaler: &FeatureScaler,
    t: usize,
    window: usize,
) -> Result<StateVector> {
    if t < window {
        return Err(Error::Window(format!(
            "day {t} has only {t} prior rows, window needs {window}"
        )));
    }
    if t >= panel.n_days() {
        return Err(Error::Range(format!(
            "day index {t} outside panel of {} days",
            panel.n_days()
        )));
    }
    let n = panel.n_assets();
    let mut price_block = Vec::with_capacity(window * n);
    for row in &panel.returns[t - window..t] {
        for i in 0..n {
            price_block.push((row[i] - scaler.mean[i]) / scaler.std[i]);
        }
    }
    let text_block = panel.sentiment[t].iter().map(|s| 2.0 * (s - 0.5)).collect();
    Ok(StateVector {
        price_block,
        text_block,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn series(ticker: &str, days: &[(&str, f64)]) -> PriceSeries {
        PriceSeries {
            ticker: ticker.into(),
            dates: days.iter().map(|(s, _)| d(s)).collect(),
            close: days.iter().map(|(_, c)| *c).collect(),
        }
    }

    #[test]
    fn log_returns_match_scalar_oracle() {
        let r = log_returns(&[100.0, 110.0]).unwrap();
        assert_relative_eq!(r[0], 0.09531017980432493, epsilon = 1e-12);
        let r = log_returns(&[100.0, 50.0, 100.0]).unwrap();
        assert_relative_eq!(r[0], -0.6931471805599453, epsilon = 1e-12);
        assert_relative_eq!(r[1], 0.6931471805599453, epsilon = 1e-12);
        assert_eq!(log_returns(&[7.0, 7.0]).unwrap(), vec![0.0]);
        assert!(matches!(log_returns(&[1.0]), Err(Error::Size(_))));
    }

    #[test]
    fn log_returns_round_trip_reconstructs_closes() {
        let close = [100.0, 103.0, 101.5, 108.2, 97.9];
        let rets = log_returns(&close).unwrap();
        let mut p = close[0];
        for (t, r) in rets.iter().enumerate() {
            p *= r.exp();
            assert_relative_eq!(p, close[t + 1], max_relative = 1e-10);
        }
    }

    #[test]
    fn calendar_forward_fills_short_gaps_and_drops_long_ones() {
        let a = series(
            "A",
            &[
                ("2020-01-01", 10.0),
                ("2020-01-02", 11.0),
                ("2020-01-03", 12.0),
                ("2020-01-06", 13.0),
                ("2020-01-07", 14.0),
                ("2020-01-08", 15.0),
                ("2020-01-09", 16.0),
            ],
        );
        // B trades only on Jan 1 and Jan 10. Its Jan 2/3/6 gaps are filled
        // (three consecutive), Jan 7-9 exceed the fill budget and are
        // dropped panel-wide; on Jan 10 B is fresh again and A fills.
        let b = series("B", &[("2020-01-01", 20.0), ("2020-01-10", 21.0)]);
        let (cal, closes) = shared_calendar(&[a, b]).unwrap();
        let days: Vec<String> = cal.iter().map(|d| d.to_string()).collect();
        assert_eq!(
            days,
            ["2020-01-01", "2020-01-02", "2020-01-03", "2020-01-06", "2020-01-10"]
        );
        assert!(closes.iter().take(4).all(|row| row[1] == 20.0));
        assert_eq!(closes[4], vec![16.0, 21.0]); // A carried from Jan 9
    }

    #[test]
    fn news_rolls_to_next_session() {
        let tickers = vec!["NVDA".to_string()];
        let cal = vec![d("2020-01-03"), d("2020-01-06"), d("2020-01-07")]; // Fri, Mon, Tue
        let records = vec![
            NewsRecord {
                date: d("2020-01-04"), // Saturday
                ticker: "NVDA".into(),
                title: "a".into(),
                score: 0.9,
            },
            NewsRecord {
                date: d("2020-01-04"),
                ticker: "NVDA".into(),
                title: "b".into(),
                score: 0.7,
            },
            NewsRecord {
                date: d("2020-01-07"), // dated on the last day: no next session
                ticker: "NVDA".into(),
                title: "late".into(),
                score: 0.1,
            },
            NewsRecord {
                date: d("2020-01-04"),
                ticker: "ZZZ".into(),
                title: "noise".into(),
                score: 0.2,
            },
        ];
        let (out, summary) = align_news(&records, &tickers, &cal).unwrap();
        let s = &out[0];
        // Saturday items attach to Monday; scores averaged, titles joined.
        assert_relative_eq!(s.score[1], 0.8);
        assert_eq!(s.titles[1], "a ||| b");
        // Friday had no news: neutral.
        assert_relative_eq!(s.score[0], 0.5);
        assert_relative_eq!(s.score[2], 0.5);
        assert_eq!(summary.dropped_after_calendar, 1);
        assert_eq!(summary.unknown_ticker, 1);
    }

    #[test]
    fn news_on_a_trading_day_affects_only_the_next_day() {
        let tickers = vec!["A".to_string()];
        let cal = vec![d("2020-01-01"), d("2020-01-02")];
        let records = vec![NewsRecord {
            date: d("2020-01-01"),
            ticker: "A".into(),
            title: "t".into(),
            score: 1.0,
        }];
        let (out, _) = align_news(&records, &tickers, &cal).unwrap();
        assert_relative_eq!(out[0].score[0], 0.5);
        assert_relative_eq!(out[0].score[1], 1.0);
    }

    #[test]
    fn alignment_totality() {
        let tickers: Vec<String> = vec!["A".into(), "B".into()];
        let cal: Vec<NaiveDate> = (1..=9).map(|i| d(&format!("2020-03-0{i}"))).collect();
        let records: Vec<NewsRecord> = (0..30)
            .map(|k| NewsRecord {
                date: d(&format!("2020-03-0{}", 1 + k % 8)),
                ticker: if k % 3 == 0 { "A".into() } else { "B".into() },
                title: format!("t{k}"),
                score: (k as f64) / 30.0,
            })
            .collect();
        let (out, _) = align_news(&records, &tickers, &cal).unwrap();
        for s in &out {
            assert_eq!(s.score.len(), cal.len());
            assert!(s.score.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    fn ten_day_panel() -> PanelDataset {
        let days: Vec<(String, f64)> = (1..=11)
            .map(|i| (format!("2020-04-{i:02}"), 100.0 + i as f64))
            .collect();
        let a = PriceSeries {
            ticker: "A".into(),
            dates: days.iter().map(|(s, _)| s.parse().unwrap()).collect(),
            close: days.iter().map(|(_, c)| *c).collect(),
        };
        assemble_panel(&[a], &[]).unwrap()
    }

    #[test]
    fn split_counts_match_boundaries() {
        let panel = ten_day_panel();
        assert_eq!(panel.n_days(), 10);
        // Panel days run Apr 2..=11; cut after day 6 and day 8.
        let panel = split_time_series(panel, d("2020-04-07"), d("2020-04-09")).unwrap();
        assert_eq!(panel.split_indices(SplitTag::Train).len(), 6);
        assert_eq!(panel.split_indices(SplitTag::Val).len(), 2);
        assert_eq!(panel.split_indices(SplitTag::Test).len(), 2);
        // Monotone: train < val < test in time.
        let last_train = *panel.split_indices(SplitTag::Train).last().unwrap();
        let first_val = panel.split_indices(SplitTag::Val)[0];
        let last_val = *panel.split_indices(SplitTag::Val).last().unwrap();
        let first_test = panel.split_indices(SplitTag::Test)[0];
        assert!(panel.calendar[last_train] < panel.calendar[first_val]);
        assert!(panel.calendar[last_val] < panel.calendar[first_test]);
    }

    #[test]
    fn degenerate_splits_rejected() {
        let panel = ten_day_panel();
        assert!(matches!(
            split_time_series(panel.clone(), d("2020-04-07"), d("2020-04-07")),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            split_time_series(panel.clone(), d("2019-01-01"), d("2020-04-09")),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            split_time_series(panel, d("2020-04-07"), d("2021-01-01")),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn scaler_uses_training_rows_only() {
        let mut panel = ten_day_panel();
        panel = split_time_series(panel, d("2020-04-07"), d("2020-04-09")).unwrap();
        // Poison non-train rows; the fit must not move.
        let before = FeatureScaler::fit(&panel).unwrap();
        for &t in &panel.split_indices(SplitTag::Val) {
            panel.returns[t][0] = 99.0;
        }
        for &t in &panel.split_indices(SplitTag::Test) {
            panel.returns[t][0] = -99.0;
        }
        let after = FeatureScaler::fit(&panel).unwrap();
        assert_eq!(before.mean, after.mean);
        assert_eq!(before.std, after.std);
    }

    #[test]
    fn constant_asset_std_is_clamped() {
        let days: Vec<(&str, f64)> = vec![
            ("2020-05-01", 50.0),
            ("2020-05-04", 50.0),
            ("2020-05-05", 50.0),
            ("2020-05-06", 50.0),
        ];
        let panel = assemble_panel(&[series("A", &days)], &[]).unwrap();
        let scaler = FeatureScaler::fit(&panel).unwrap();
        assert_eq!(scaler.std[0], 1e-8);
    }

    #[test]
    fn state_blocks_standardize_and_center() {
        let mut panel = ten_day_panel();
        panel.sentiment[5] = vec![1.0];
        panel.sentiment[6] = vec![0.0];
        let scaler = FeatureScaler::fit(&panel).unwrap();
        let s = build_state(&panel, &scaler, 5, 3).unwrap();
        assert_eq!(s.price_block.len(), 3);
        assert_eq!(s.text_block, vec![1.0]);
        let s = build_state(&panel, &scaler, 6, 3).unwrap();
        assert_eq!(s.text_block, vec![-1.0]);
        // Neutral day
        let s = build_state(&panel, &scaler, 7, 3).unwrap();
        assert_eq!(s.text_block, vec![0.0]);
        assert!(matches!(
            build_state(&panel, &scaler, 2, 3),
            Err(Error::Window(_))
        ));
    }

    #[test]
    fn state_reads_nothing_at_or_after_t_for_prices() {
        let mut panel = ten_day_panel();
        let scaler = FeatureScaler::fit(&panel).unwrap();
        let before = build_state(&panel, &scaler, 6, 4).unwrap();
        // Corrupt day 6 and later returns: the price block must not change.
        for t in 6..panel.n_days() {
            panel.returns[t][0] = 1e9;
        }
        let after = build_state(&panel, &scaler, 6, 4).unwrap();
        assert_eq!(before.price_block, after.price_block);
    }

    #[test]
    fn constant_returns_standardize_to_zero() {
        let days: Vec<(String, f64)> = (0..8)
            .map(|i| (format!("2020-06-{:02}", i + 1), 100.0 * 1.01f64.powi(i)))
            .collect();
        let a = PriceSeries {
            ticker: "A".into(),
            dates: days.iter().map(|(s, _)| s.parse().unwrap()).collect(),
            close: days.iter().map(|(_, c)| *c).collect(),
        };
        let panel = assemble_panel(&[a], &[]).unwrap();
        let scaler = FeatureScaler::fit(&panel).unwrap();
        let s = build_state(&panel, &scaler, 4, 3).unwrap();
        for v in s.price_block {
            assert!(v.abs() < 1e-4, "near-constant returns should be ~0, got {v}");
        }
    }

    #[test]
    fn select_projects_columns() {
        let a = series("A", &[("2020-01-01", 1.0), ("2020-01-02", 2.0), ("2020-01-03", 4.0)]);
        let b = series("B", &[("2020-01-01", 1.0), ("2020-01-02", 1.0), ("2020-01-03", 1.0)]);
        let panel = assemble_panel(&[a, b], &[]).unwrap();
        let sub = panel.select(&["B".to_string()]).unwrap();
        assert_eq!(sub.tickers, vec!["B".to_string()]);
        assert_eq!(sub.returns[0], vec![0.0]);
        assert!(panel.select(&["C".to_string()]).is_err());
    }
}
