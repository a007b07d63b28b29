//! Experiment configuration: one flat JSON document covering data paths,
//! asset groups, split boundaries, training hyperparameters and the
//! experiment grids.
//!
//! Precedence when assembling the effective configuration: command-line
//! flags override the `SBCA_SEED` environment variable, which overrides
//! the config file, which overrides the built-in defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::agent::{PolicyVariant, TrainConfig};
use crate::env::CostModel;
use crate::error::{Error, Result};
use crate::eval::experiments::SWEEP_COMMISSIONS;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV_VAR: &str = "SBCA_SEED";

/// Everything a pipeline run needs. Serialized as a single flat JSON
/// object; the training hyperparameters live at the top level alongside
/// the paths and grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Input `date,ticker,close` file for `ingest`.
    pub prices_csv: Option<PathBuf>,
    /// Input `date,ticker,title,delta_bert` file for `ingest`; without it
    /// every day gets the neutral score.
    pub news_csv: Option<PathBuf>,
    /// External `date,close` benchmark series for the index strategy.
    pub index_csv: Option<PathBuf>,
    /// Panel file location; relative paths resolve inside `out_dir`.
    pub panel_path: PathBuf,
    /// Output directory for panels, checkpoints, reports and the manifest.
    pub out_dir: PathBuf,
    /// Named asset groups (ticker lists) for grouped experiments. Empty
    /// means one group over the whole panel.
    pub groups: BTreeMap<String, Vec<String>>,
    /// Last training day (inclusive). Given together with `val_end`;
    /// otherwise the fractional boundaries apply.
    pub train_end: Option<NaiveDate>,
    /// Last validation day (inclusive).
    pub val_end: Option<NaiveDate>,
    /// Fraction of panel days tagged as training data.
    pub train_frac: f64,
    /// Fraction of panel days tagged as validation data.
    pub val_frac: f64,
    /// Commission rates the cost sweep walks through.
    pub commissions: Vec<f64>,
    /// Policy variants the ablation grid trains.
    pub variants: Vec<PolicyVariant>,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            prices_csv: None,
            news_csv: None,
            index_csv: None,
            panel_path: PathBuf::from("panel.json"),
            out_dir: PathBuf::from("out"),
            groups: BTreeMap::new(),
            train_end: None,
            val_end: None,
            train_frac: 0.64,
            val_frac: 0.18,
            commissions: SWEEP_COMMISSIONS.to_vec(),
            variants: PolicyVariant::ALL.to_vec(),
            train: TrainConfig::default(),
        }
    }
}

fn allowed_keys() -> BTreeSet<String> {
    match serde_json::to_value(ExperimentConfig::default()) {
        Ok(serde_json::Value::Object(map)) => map.keys().cloned().collect(),
        _ => unreachable!("default config serializes to an object"),
    }
}

impl ExperimentConfig {
    /// Read a config file, rejecting unknown keys so typos fail loudly.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Schema(format!("cannot read config {}: {e}", path.display()))
        })?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("config {}: {e}", path.display())))?;
        let Some(obj) = value.as_object() else {
            return Err(Error::Schema(format!(
                "config {} must be a JSON object",
                path.display()
            )));
        };
        let allowed = allowed_keys();
        for key in obj.keys() {
            if !allowed.contains(key) {
                return Err(Error::Schema(format!(
                    "config {}: unknown key {key:?}",
                    path.display()
                )));
            }
        }
        let config: ExperimentConfig = serde_json::from_value(value)
            .map_err(|e| Error::Schema(format!("config {}: {e}", path.display())))?;
        Ok(config)
    }

    /// Apply the `SBCA_SEED` override if the variable is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
            self.train.seed = raw.trim().parse().map_err(|_| {
                Error::Parameter(format!("{SEED_ENV_VAR}={raw:?} is not a valid seed"))
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        match (self.train_end, self.val_end) {
            (Some(a), Some(b)) if a >= b => {
                return Err(Error::Parameter(format!(
                    "train_end {a} must precede val_end {b}"
                )));
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(Error::Parameter(
                    "train_end and val_end must be given together".into(),
                ));
            }
            _ => {}
        }
        if self.train_end.is_none() {
            let (t, v) = (self.train_frac, self.val_frac);
            if !(t > 0.0 && v > 0.0 && t + v < 1.0) {
                return Err(Error::Parameter(format!(
                    "split fractions {t}/{v} must be positive with sum below 1"
                )));
            }
        }
        if self.commissions.is_empty() {
            return Err(Error::Parameter("commission list is empty".into()));
        }
        for &c in &self.commissions {
            CostModel::new(c)?;
        }
        if self.variants.is_empty() {
            return Err(Error::Parameter("variant list is empty".into()));
        }
        for (name, tickers) in &self.groups {
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
            {
                return Err(Error::Parameter(format!(
                    "group name {name:?} must be nonempty alphanumeric/-/_ (it names files)"
                )));
            }
            if tickers.is_empty() {
                return Err(Error::Parameter(format!("group {name} has no tickers")));
            }
        }
        Ok(())
    }

    /// Panel file location with relative paths anchored in `out_dir`.
    pub fn resolved_panel_path(&self) -> PathBuf {
        if self.panel_path.is_absolute() {
            self.panel_path.clone()
        } else {
            self.out_dir.join(&self.panel_path)
        }
    }

    /// The asset groups to iterate: the configured ones, or one group
    /// `"all"` spanning the given tickers when none are configured.
    pub fn effective_groups(&self, all_tickers: &[String]) -> Vec<(String, Vec<String>)> {
        if self.groups.is_empty() {
            vec![("all".to_string(), all_tickers.to_vec())]
        } else {
            self.groups
                .iter()
                .map(|(name, tickers)| (name.clone(), tickers.clone()))
                .collect()
        }
    }

    /// Split boundary dates: the configured ones, or dates derived from
    /// the fractions over `calendar` (train days are those at index below
    /// `floor(n * train_frac)`, mirroring the synthetic generator).
    pub fn split_boundaries(&self, calendar: &[NaiveDate]) -> Result<(NaiveDate, NaiveDate)> {
        if let (Some(a), Some(b)) = (self.train_end, self.val_end) {
            return Ok((a, b));
        }
        let n = calendar.len();
        let ti = (n as f64 * self.train_frac).floor() as usize;
        let vi = (n as f64 * (self.train_frac + self.val_frac)).floor() as usize;
        if ti == 0 || vi <= ti || vi >= n {
            return Err(Error::Range(format!(
                "fractions {}/{} leave an empty split over {n} days",
                self.train_frac, self.val_frac
            )));
        }
        Ok((calendar[ti - 1], calendar[vi - 1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_hyperparameters() {
        let c = ExperimentConfig::default();
        assert_eq!(c.train.gamma, 0.99);
        assert_eq!(c.train.lr, 3e-4);
        assert_eq!(c.train.weight_decay, 1e-5);
        assert_eq!(c.train.max_epochs, 30);
        assert_eq!(c.train.patience, 5);
        assert_eq!(c.train.seed, 42);
        assert_eq!(c.train.ema_alpha, 0.4);
        assert_eq!(c.train.lambda_risk, 0.1);
        assert_eq!(c.train.lambda_turnover, 0.005);
        assert_eq!(c.train.commission, 0.0025);
        assert_eq!(c.train.window, 30);
        assert_eq!(c.train.hidden, 64);
        assert_eq!(c.train.rf_annual, 0.02);
        assert_eq!(c.commissions, vec![0.001, 0.0025, 0.005, 0.01]);
        assert_eq!(c.variants.len(), 4);
        c.validate().unwrap();
    }

    #[test]
    fn file_overrides_defaults_and_flat_layout_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            r#"{"seed": 7, "lr": 0.001, "out_dir": "results",
                "groups": {"tech": ["AAPL", "MSFT"]},
                "commissions": [0.001, 0.005]}"#,
        )
        .unwrap();
        let c = ExperimentConfig::load(&path).unwrap();
        assert_eq!(c.train.seed, 7);
        assert_eq!(c.train.lr, 0.001);
        assert_eq!(c.train.gamma, 0.99); // untouched default
        assert_eq!(c.out_dir, PathBuf::from("results"));
        assert_eq!(c.groups["tech"], vec!["AAPL", "MSFT"]);
        assert_eq!(c.commissions, vec![0.001, 0.005]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"learning_rate": 0.001}"#).unwrap();
        let err = ExperimentConfig::load(&path).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
        assert!(err.to_string().contains("learning_rate"));
    }

    #[test]
    fn validation_catches_bad_grids_and_groups() {
        let mut c = ExperimentConfig {
            commissions: vec![],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.commissions = vec![0.001];
        c.groups.insert("bad name".into(), vec!["A".into()]);
        assert!(c.validate().is_err());
        c.groups.clear();
        c.groups.insert("ok-name".into(), vec![]);
        assert!(c.validate().is_err());
        c.groups.clear();
        c.train_end = NaiveDate::from_ymd_opt(2020, 1, 1);
        assert!(c.validate().is_err()); // val_end missing
        c.val_end = NaiveDate::from_ymd_opt(2019, 1, 1);
        assert!(c.validate().is_err()); // out of order
        c.val_end = NaiveDate::from_ymd_opt(2021, 1, 1);
        c.validate().unwrap();
    }

    #[test]
    fn fractional_boundaries_mirror_synthetic_tagging() {
        let panel = crate::data::synth_generate(3, 2, 100, &[0.0; 2], &[0.01; 2]).unwrap();
        let c = ExperimentConfig::default();
        let (train_end, val_end) = c.split_boundaries(&panel.calendar).unwrap();
        let retagged =
            crate::data::split_time_series(panel.clone(), train_end, val_end).unwrap();
        assert_eq!(retagged.split, panel.split);
    }

    #[test]
    fn config_json_round_trips() {
        let mut c = ExperimentConfig::default();
        c.train.seed = 99;
        c.groups.insert("g".into(), vec!["SYN0".into()]);
        let text = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        // flat layout: training keys sit at the top level
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("gamma").is_some());
        assert!(v.get("train").is_none());
    }
}
