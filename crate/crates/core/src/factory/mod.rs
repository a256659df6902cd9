//! Smart-factory scenario: workers commute to shifts, pass the gate and the
//! headgear dispenser under ensemble-granted permissions, and late workers
//! are replaced by standbys under a rigid or a learned cancellation rule.

mod agent;
mod config;
mod ensembles;
pub mod layout;
mod sim;

pub use agent::{Event, Phase, Resources, WorkerState};
pub use config::{Policy, ScenarioConfig, Selector};
pub use ensembles::{
    access_ensembles, build_ml_ensembles, build_rigid_ensembles, learned_cancel, rigid_cancel,
    will_arrive, will_arrive_inputs, CANCEL_THRESHOLD, WILL_ARRIVE,
};
pub use layout::{FactoryTypes, Layout};
pub use sim::{
    lateness, run_days, schedule_arrivals, write_metrics_csv, DayOutcome, Factory, MetricsRecord,
    ShiftArrivals, SimDiagnostics, METRICS_HEADER,
};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum FactoryError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
