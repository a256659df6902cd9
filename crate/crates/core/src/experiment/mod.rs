//! Week-by-week experiment: simulate, collect arrival data, train, and switch
//! to the learned cancellation rule.

mod boundary;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub use boundary::{BoundaryDump, OFFSETS};

use thiserror::Error;

use crate::estimates::{
    self, checkpoint, Collector, EstimateError, Estimator, Hyperparams, TrainReport, TrainSpec,
    TrainedEstimate, TrainingDataset,
};
use crate::factory::{
    run_days, write_metrics_csv, Factory, FactoryError, MetricsRecord, Policy, ScenarioConfig,
    SimDiagnostics,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Factory(#[from] FactoryError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid experiment: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub weeks: u32,
    /// Policy per week; weeks past the end reuse the last entry.
    pub schedule: Vec<Policy>,
    pub training: Hyperparams,
    pub out_dir: Option<PathBuf>,
    /// Write each week's collected examples as CSV.
    pub write_datasets: bool,
    /// Write the per-tick ensemble dump.
    pub trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            weeks: 3,
            schedule: vec![Policy::Rigid, Policy::Ml, Policy::Ml],
            training: Hyperparams {
                epochs: 3,
                ..Hyperparams::default()
            },
            out_dir: None,
            write_datasets: true,
            trace: false,
        }
    }
}

impl ExperimentConfig {
    pub fn policy(&self, week: u32) -> Policy {
        let i = (week as usize)
            .saturating_sub(1)
            .min(self.schedule.len().saturating_sub(1));
        self.schedule.get(i).copied().unwrap_or(Policy::Rigid)
    }

    /// Parses `rigid,ml,ml` style schedules.
    pub fn parse_schedule(spec: &str) -> Result<Vec<Policy>, String> {
        spec.split(',').map(str::parse).collect()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.scenario.validate().map_err(ExperimentError::Config)?;
        if self.weeks == 0 {
            return Err(ExperimentError::Config("weeks must be at least 1".into()));
        }
        if self.schedule.is_empty() {
            return Err(ExperimentError::Config("policy schedule is empty".into()));
        }
        if self.training.batch_size == 0 || self.training.hidden == 0 {
            return Err(ExperimentError::Config(
                "batch_size and hidden must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One training round, run after `after_week`.
#[derive(Debug, Clone)]
pub struct TrainingRound {
    pub after_week: u32,
    pub report: TrainReport,
    pub boundary: BoundaryDump,
    pub estimator: Estimator,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub metrics: Vec<MetricsRecord>,
    pub trainings: Vec<TrainingRound>,
    pub examples_per_week: Vec<usize>,
    pub diagnostics: SimDiagnostics,
    /// willArrive queries, clamped offsets and untrained fallbacks.
    pub estimate_queries: (u64, u64, u64),
    pub artifacts: Vec<PathBuf>,
}

impl ExperimentResult {
    /// Mean (standbys called, lateness) per shift-day in `week`.
    pub fn week_means(&self, week: u32) -> (f64, f64) {
        let rows: Vec<&MetricsRecord> = self.metrics.iter().filter(|r| r.week == week).collect();
        let n = rows.len().max(1) as f64;
        (
            rows.iter().map(|r| r.standbys_called as f64).sum::<f64>() / n,
            rows.iter().map(|r| r.lateness as f64).sum::<f64>() / n,
        )
    }

    pub fn metrics_csv(&self) -> String {
        let mut buf = Vec::new();
        write_metrics_csv(&self.metrics, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs the configured weeks in order.
///
/// Week `w` covers days `7(w-1)..7w`. Arrival data is collected every week
/// whose data can still matter (or is written out). Before a week that uses
/// the learned rule, the estimator is trained on all data so far: a fresh
/// fit the first time, then continued training on the pooled data.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut factory = Factory::new(config.scenario.clone())?;
    let spec = factory.will_arrive();
    let train_spec = TrainSpec::from(&spec);
    let mut pooled = TrainingDataset::new(&spec.name, spec.feature_count());
    let mut model: Option<Estimator> = None;
    let mut estimate = TrainedEstimate::new(spec.clone());
    let mut result = ExperimentResult {
        metrics: Vec::new(),
        trainings: Vec::new(),
        examples_per_week: Vec::new(),
        diagnostics: SimDiagnostics::default(),
        estimate_queries: (0, 0, 0),
        artifacts: Vec::new(),
    };
    let mut trace = Vec::new();

    for week in 1..=config.weeks {
        let policy = config.policy(week);
        let set = match policy {
            Policy::Rigid => factory.rigid_ensembles()?,
            Policy::Ml => factory.ml_ensembles(estimate.clone())?,
        };
        let ml_ahead = (week + 1..=config.weeks).any(|w| config.policy(w) == Policy::Ml);
        let collecting = ml_ahead || config.write_datasets;
        let mut collector =
            Collector::new(&spec, &format!("seed{}-week{week}", config.scenario.seed));
        let days = (week as u64 - 1) * 7..week as u64 * 7;
        log::info!("week {week}: {} policy", policy.as_str());
        let rows = run_days(
            &mut factory,
            set,
            week,
            days,
            policy,
            collecting.then_some((&spec, &mut collector)),
            config.trace.then_some(&mut trace),
        );
        result.metrics.extend(rows);
        let data = collector.take_dataset();
        result.examples_per_week.push(data.len());

        if let (Some(dir), true) = (&config.out_dir, config.write_datasets) {
            let path = dir.join(format!("dataset_week{week}.csv"));
            data.write_csv(create(&path)?)?;
            result.artifacts.push(path);
        }
        if !ml_ahead {
            continue;
        }
        pooled.extend(&data)?;
        let round = result.trainings.len() as u64 + 1;
        let hp = Hyperparams {
            seed: config.training.seed
                ^ config.scenario.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
                ^ round,
            ..config.training.clone()
        };
        log::info!("training round {round} on {} examples", pooled.len());
        let (est, report) = match &model {
            None => estimates::train(&pooled, &train_spec, &hp)?,
            Some(m) => estimates::update(m, &pooled, &hp)?,
        };
        let boundary = BoundaryDump::from_estimator(&est)?;
        log::info!("after week {week}: {}", boundary.summary());
        if let Some(dir) = &config.out_dir {
            let path = dir.join(format!("estimator_training{round}.txt"));
            checkpoint::save(&est, create(&path)?)?;
            result.artifacts.push(path);
            let path = dir.join(format!("boundary_training{round}.csv"));
            boundary.write_csv(create(&path)?).map_err(io_err(&path))?;
            result.artifacts.push(path);
        }
        estimate.model = Some(std::sync::Arc::new(est.clone()));
        result.trainings.push(TrainingRound {
            after_week: week,
            report,
            boundary,
            estimator: est.clone(),
        });
        model = Some(est);
    }

    result.diagnostics = factory.diagnostics.clone();
    result.estimate_queries = estimate.diagnostics.snapshot();
    if let Some(dir) = &config.out_dir {
        let path = dir.join("metrics.csv");
        write_metrics_csv(&result.metrics, create(&path)?).map_err(io_err(&path))?;
        result.artifacts.push(path);
        if config.trace {
            let path = dir.join("trace.txt");
            std::fs::write(&path, trace.join("")).map_err(io_err(&path))?;
            result.artifacts.push(path);
        }
    }
    Ok(result)
}
