//! Supervised value estimates: declaration, data collection, training and inference.

pub mod checkpoint;
mod collect;
mod dataset;
mod network;
mod spec;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use collect::{CollectDiagnostics, Collector};
pub use dataset::{ExampleRef, Provenance, TrainingDataset};
pub use network::{
    train, update, Estimator, EstimatorKind, Hyperparams, Prediction, TrainReport, TrainSpec,
};
pub use spec::{
    Attachment, AttachmentContext, ContextKey, Feature, Horizon, Output, OutputKind, ValueEstimate,
    MINUTES_PER_DAY,
};

use thiserror::Error;

use crate::model::Time;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("horizon must satisfy 1 <= min <= max (got <{min},{max}>)")]
    InvalidHorizon { min: u32, max: u32 },
    #[error("expected {expected} features, got {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("label {0} does not fit the output kind")]
    InvalidLabel(f64),
    #[error("estimate `{0}` has no trained model")]
    Untrained(String),
    #[error("target time {target} is not after now ({now})")]
    TargetNotInFuture { target: Time, now: Time },
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl PartialEq for EstimateError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

/// Counters shared by every copy of a [`TrainedEstimate`].
#[derive(Debug, Default)]
pub struct EstimateDiagnostics {
    pub queries: AtomicU64,
    pub clamped: AtomicU64,
    pub untrained: AtomicU64,
}

impl EstimateDiagnostics {
    pub fn snapshot(&self) -> (u64, u64, u64) {
        (
            self.queries.load(Ordering::Relaxed),
            self.clamped.load(Ordering::Relaxed),
            self.untrained.load(Ordering::Relaxed),
        )
    }
}

/// An estimate declaration with its current model, if any.
#[derive(Debug, Clone)]
pub struct TrainedEstimate {
    pub spec: Arc<ValueEstimate>,
    pub model: Option<Arc<Estimator>>,
    pub diagnostics: Arc<EstimateDiagnostics>,
}

impl TrainedEstimate {
    pub fn new(spec: ValueEstimate) -> Self {
        Self {
            spec: Arc::new(spec),
            model: None,
            diagnostics: Arc::default(),
        }
    }

    pub fn with_model(mut self, model: Estimator) -> Self {
        self.model = Some(Arc::new(model));
        self
    }

    /// Predicts the output at `target` from the state in `ctx` (taken at `ctx.now`).
    /// Offsets outside the horizon are clamped into it and counted.
    pub fn predict_at(
        &self,
        ctx: &AttachmentContext<'_>,
        target: Time,
    ) -> Result<Prediction, EstimateError> {
        self.diagnostics.queries.fetch_add(1, Ordering::Relaxed);
        if target <= ctx.now {
            return Err(EstimateError::TargetNotInFuture {
                target,
                now: ctx.now,
            });
        }
        let Some(model) = &self.model else {
            self.diagnostics.untrained.fetch_add(1, Ordering::Relaxed);
            return Err(EstimateError::Untrained(self.spec.name.clone()));
        };
        let horizon = self.spec.horizon;
        let offset = target - ctx.now;
        let t = horizon.clamp(offset);
        if t as Time != offset {
            self.diagnostics.clamped.fetch_add(1, Ordering::Relaxed);
            log::trace!("{}: offset {offset} clamped to {t}", self.spec.name);
        }
        let mut x = Vec::with_capacity(self.spec.feature_count());
        self.spec.extract_inputs(ctx, &mut x);
        x.push(horizon.encode(t));
        model.predict(&x)
    }
}

/// Named estimates available to ensemble builders.
#[derive(Debug, Clone, Default)]
pub struct EstimateRegistry {
    entries: BTreeMap<String, TrainedEstimate>,
}

impl EstimateRegistry {
    pub fn declare(&mut self, spec: ValueEstimate) -> &mut TrainedEstimate {
        let name = spec.name.clone();
        self.entries
            .insert(name.clone(), TrainedEstimate::new(spec));
        self.entries.get_mut(&name).expect("just inserted")
    }

    pub fn set_model(&mut self, name: &str, model: Estimator) -> Result<(), EstimateError> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| EstimateError::Untrained(name.into()))?;
        entry.model = Some(Arc::new(model));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&TrainedEstimate> {
        self.entries.get(name)
    }
}
