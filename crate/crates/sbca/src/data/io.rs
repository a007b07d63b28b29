//! File formats: `prices.csv`, `news.csv`, `index.csv` and `panel.json`.
//!
//! Dates are ISO-8601 (`YYYY-MM-DD`) everywhere. `panel.json` carries a
//! `schema_version` field so stored panels can be rejected instead of
//! misread when the layout changes.

use std::collections::HashSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{NewsRecord, PanelDataset, PriceSeries};
use crate::error::{Error, Result};

pub const PANEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: String,
    ticker: String,
    close: f64,
}

#[derive(Debug, Deserialize)]
struct NewsRow {
    date: String,
    ticker: String,
    #[serde(default)]
    title: String,
    delta_bert: f64,
}

#[derive(Debug, Deserialize)]
struct IndexRow {
    date: String,
    close: f64,
}

fn parse_date(raw: &str, row: usize, file: &str) -> Result<NaiveDate> {
    raw.parse().map_err(|_| {
        Error::Schema(format!("{file} row {row}: bad date {raw:?}, expected YYYY-MM-DD"))
    })
}

/// Read `prices.csv` (`date,ticker,close` required; extra columns ignored)
/// into one date-sorted series per ticker, in first-appearance order.
pub fn load_prices(path: &Path) -> Result<Vec<PriceSeries>> {
    let mut reader = csv::ReaderBuilder::new().from_path(path).map_err(|e| {
        Error::Schema(format!("cannot open {}: {e}", path.display()))
    })?;
    let name = path.display().to_string();

    let mut order: Vec<String> = Vec::new();
    let mut rows: Vec<(NaiveDate, usize, f64)> = Vec::new();
    let mut seen: HashSet<(NaiveDate, usize)> = HashSet::new();

    for (i, rec) in reader.deserialize::<PriceRow>().enumerate() {
        let row = i + 2; // header is line 1
        let rec = rec.map_err(|e| Error::Schema(format!("{name} row {row}: {e}")))?;
        let date = parse_date(&rec.date, row, &name)?;
        if rec.close <= 0.0 || !rec.close.is_finite() {
            return Err(Error::Validation(format!(
                "{name} row {row}: nonpositive close {} for {}",
                rec.close, rec.ticker
            )));
        }
        let ti = match order.iter().position(|t| *t == rec.ticker) {
            Some(ti) => ti,
            None => {
                order.push(rec.ticker.clone());
                order.len() - 1
            }
        };
        if !seen.insert((date, ti)) {
            return Err(Error::Validation(format!(
                "{name} row {row}: duplicate entry for ({}, {date})",
                rec.ticker
            )));
        }
        rows.push((date, ti, rec.close));
    }
    if rows.is_empty() {
        return Err(Error::Schema(format!("{name}: no data rows")));
    }

    let mut series: Vec<PriceSeries> = order
        .into_iter()
        .map(|ticker| PriceSeries {
            ticker,
            dates: Vec::new(),
            close: Vec::new(),
        })
        .collect();
    rows.sort_by_key(|&(date, ti, _)| (ti, date));
    for (date, ti, close) in rows {
        series[ti].dates.push(date);
        series[ti].close.push(close);
    }
    Ok(series)
}

/// Read `news.csv` (`date,ticker,title,delta_bert`). Scores must lie in
/// `[0,1]`; alignment to trading days happens later.
pub fn load_news(path: &Path) -> Result<Vec<NewsRecord>> {
    let mut reader = csv::ReaderBuilder::new().from_path(path).map_err(|e| {
        Error::Schema(format!("cannot open {}: {e}", path.display()))
    })?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<NewsRow>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Schema(format!("{name} row {row}: {e}")))?;
        if !(0.0..=1.0).contains(&rec.delta_bert) {
            return Err(Error::Validation(format!(
                "{name} row {row}: delta_bert {} outside [0,1]",
                rec.delta_bert
            )));
        }
        out.push(NewsRecord {
            date: parse_date(&rec.date, row, &name)?,
            ticker: rec.ticker,
            title: rec.title,
            score: rec.delta_bert,
        });
    }
    Ok(out)
}

/// Read a single benchmark series `index.csv` (`date,close`), date-sorted.
pub fn load_index(path: &Path) -> Result<(Vec<NaiveDate>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new().from_path(path).map_err(|e| {
        Error::Schema(format!("cannot open {}: {e}", path.display()))
    })?;
    let name = path.display().to_string();
    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (i, rec) in reader.deserialize::<IndexRow>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Schema(format!("{name} row {row}: {e}")))?;
        if rec.close <= 0.0 || !rec.close.is_finite() {
            return Err(Error::Validation(format!(
                "{name} row {row}: nonpositive close {}",
                rec.close
            )));
        }
        rows.push((parse_date(&rec.date, row, &name)?, rec.close));
    }
    if rows.is_empty() {
        return Err(Error::Schema(format!("{name}: no data rows")));
    }
    rows.sort_by_key(|&(d, _)| d);
    Ok(rows.into_iter().unzip())
}

#[derive(Serialize, Deserialize)]
struct PanelFile {
    schema_version: u32,
    #[serde(flatten)]
    panel: PanelDataset,
}

pub fn write_panel(path: &Path, panel: &PanelDataset) -> Result<()> {
    let file = PanelFile {
        schema_version: PANEL_SCHEMA_VERSION,
        panel: panel.clone(),
    };
    let mut text = serde_json::to_string(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_panel(path: &Path) -> Result<PanelDataset> {
    let text = std::fs::read_to_string(path)?;
    let file: PanelFile = serde_json::from_str(&text)?;
    if file.schema_version != PANEL_SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "panel schema version {} unsupported (expected {PANEL_SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    file.panel.check_rectangular()?;
    Ok(file.panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn prices_minimal_file() {
        let f = write_tmp("date,ticker,close\n2020-01-01,NVDA,100\n2020-01-02,NVDA,110\n");
        let series = load_prices(f.path()).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].close, vec![100.0, 110.0]);
    }

    #[test]
    fn prices_extra_columns_ignored_and_sorted() {
        let f = write_tmp(
            "date,ticker,open,high,low,close,volume\n\
             2020-01-03,A,1,2,0,30,100\n\
             2020-01-01,A,1,2,0,10,100\n\
             2020-01-02,A,1,2,0,20,100\n",
        );
        let series = load_prices(f.path()).unwrap();
        assert_eq!(series[0].close, vec![10.0, 20.0, 30.0]);
        let dates: Vec<String> = series[0].dates.iter().map(|d| d.to_string()).collect();
        assert_eq!(dates, ["2020-01-01", "2020-01-02", "2020-01-03"]);
    }

    #[test]
    fn prices_reject_bad_rows() {
        let f = write_tmp("date,ticker,close\n2020-01-01,A,-5\n");
        let err = load_prices(f.path()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");

        let f = write_tmp("date,ticker,close\n2020-01-01,A,5\n2020-01-01,A,6\n");
        assert!(matches!(load_prices(f.path()), Err(Error::Validation(_))));

        let f = write_tmp("date,ticker\n2020-01-01,A\n");
        assert!(matches!(load_prices(f.path()), Err(Error::Schema(_))));
    }

    #[test]
    fn news_scores_validated() {
        let f = write_tmp("date,ticker,title,delta_bert\n2020-01-01,A,hello,0.9\n");
        let recs = load_news(f.path()).unwrap();
        assert_eq!(recs[0].title, "hello");
        assert_eq!(recs[0].score, 0.9);

        let f = write_tmp("date,ticker,title,delta_bert\n2020-01-01,A,hello,1.5\n");
        assert!(matches!(load_news(f.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn panel_json_round_trip() {
        let panel = crate::data::synth_generate(7, 2, 45, &[0.0, 0.001], &[0.01, 0.02]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.json");
        write_panel(&path, &panel).unwrap();
        let back = read_panel(&path).unwrap();
        assert_eq!(back.tickers, panel.tickers);
        assert_eq!(back.calendar, panel.calendar);
        assert_eq!(back.returns, panel.returns);
        assert_eq!(back.sentiment, panel.sentiment);
        assert_eq!(back.split, panel.split);
    }

    #[test]
    fn panel_schema_version_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.json");
        std::fs::write(
            &path,
            r#"{"schema_version":99,"tickers":[],"calendar":[],"returns":[],"sentiment":[],"split":[]}"#,
        )
        .unwrap();
        assert!(matches!(read_panel(&path), Err(Error::Schema(_))));
    }
}
