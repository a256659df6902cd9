//! Flat TOML run configuration.
//!
//! Every key of the scenario plus the experiment keys below live in one
//! table. Unknown keys are rejected. Command-line flags override the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ensemble_core::estimates::Hyperparams;
use ensemble_core::experiment::ExperimentConfig;
use ensemble_core::factory::{Policy, ScenarioConfig};
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentKeys {
    weeks: Option<u32>,
    policy_schedule: Option<String>,
    hidden: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    epochs: Option<usize>,
    training_seed: Option<u64>,
    full_retrain: Option<bool>,
    out: Option<PathBuf>,
    write_datasets: Option<bool>,
    trace: Option<bool>,
}

const EXPERIMENT_KEYS: &[&str] = &[
    "weeks",
    "policy_schedule",
    "hidden",
    "learning_rate",
    "batch_size",
    "epochs",
    "training_seed",
    "full_retrain",
    "out",
    "write_datasets",
    "trace",
];

pub fn read_table(path: &Path) -> Result<Table> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<Table>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Parses `key=value`; the value is read as TOML and falls back to a string.
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let Some((k, v)) = s.split_once('=') else {
        bail!("expected key=value, got `{s}`");
    };
    let value = format!("v = {v}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Builds the experiment configuration from defaults overlaid with `table`.
pub fn experiment_from_table(table: Table) -> Result<ExperimentConfig> {
    let mut scenario = Table::try_from(ScenarioConfig::default()).expect("scenario serializes");
    let mut rest = Table::new();
    for (k, v) in table {
        if scenario.contains_key(&k) {
            scenario.insert(k, v);
        } else if EXPERIMENT_KEYS.contains(&k.as_str()) {
            rest.insert(k, v);
        } else {
            bail!("unknown configuration key `{k}`");
        }
    }
    let scenario: ScenarioConfig = scenario.try_into().context("invalid scenario settings")?;
    let keys: ExperimentKeys = rest.try_into().context("invalid experiment settings")?;

    let mut cfg = ExperimentConfig {
        scenario,
        ..ExperimentConfig::default()
    };
    if let Some(w) = keys.weeks {
        cfg.weeks = w;
    }
    if let Some(s) = keys.policy_schedule {
        cfg.schedule = parse_schedule(&s)?;
    }
    let hp: &mut Hyperparams = &mut cfg.training;
    hp.hidden = keys.hidden.unwrap_or(hp.hidden);
    hp.learning_rate = keys.learning_rate.unwrap_or(hp.learning_rate);
    hp.batch_size = keys.batch_size.unwrap_or(hp.batch_size);
    hp.epochs = keys.epochs.unwrap_or(hp.epochs);
    hp.seed = keys.training_seed.unwrap_or(hp.seed);
    hp.full_retrain = keys.full_retrain.unwrap_or(hp.full_retrain);
    cfg.out_dir = keys.out;
    cfg.write_datasets = keys.write_datasets.unwrap_or(cfg.write_datasets);
    cfg.trace = keys.trace.unwrap_or(cfg.trace);
    Ok(cfg)
}

pub fn parse_schedule(s: &str) -> Result<Vec<Policy>> {
    ExperimentConfig::parse_schedule(s).map_err(anyhow::Error::msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_gives_defaults() {
        assert_eq!(
            experiment_from_table(Table::new()).unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn keys_are_routed() {
        let t: Table = "late_fraction = 0.3\nweeks = 2\npolicy_schedule = \"rigid,ml\"\nepochs = 5\nselector = \"exact\""
            .parse()
            .unwrap();
        let cfg = experiment_from_table(t).unwrap();
        assert_eq!(cfg.scenario.late_fraction, 0.3);
        assert_eq!(cfg.weeks, 2);
        assert_eq!(cfg.schedule, vec![Policy::Rigid, Policy::Ml]);
        assert_eq!(cfg.training.epochs, 5);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let t: Table = "late_fractoin = 0.3".parse().unwrap();
        assert!(experiment_from_table(t).is_err());
    }

    #[test]
    fn assignment_values() {
        assert_eq!(
            parse_assignment("seed=4").unwrap(),
            ("seed".into(), Value::Integer(4))
        );
        assert_eq!(
            parse_assignment("selector=exact").unwrap().1,
            Value::String("exact".into())
        );
        assert!(parse_assignment("seed").is_err());
    }
}
