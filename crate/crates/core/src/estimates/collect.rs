//! Per-tick training-data collection for one estimate.

use std::collections::{BTreeMap, VecDeque};

use super::dataset::{Provenance, TrainingDataset};
use super::spec::{ContextKey, ValueEstimate};
use crate::model::{Population, Time};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CollectDiagnostics {
    pub snapshots_recorded: u64,
    pub unreadable_outputs: u64,
    pub examples: u64,
}

/// Input history plus the dataset being built.
#[derive(Debug, Clone)]
pub struct Collector {
    buffer: BTreeMap<ContextKey, VecDeque<(Time, Vec<f64>)>>,
    dataset: TrainingDataset,
    run_id: String,
    window: Option<(Time, Time)>,
    diagnostics: CollectDiagnostics,
    row: Vec<f64>,
}

impl Collector {
    pub fn new(estimate: &ValueEstimate, run_id: &str) -> Self {
        Self {
            buffer: BTreeMap::new(),
            dataset: TrainingDataset::new(&estimate.name, estimate.feature_count()),
            run_id: run_id.into(),
            window: None,
            diagnostics: CollectDiagnostics::default(),
            row: Vec::new(),
        }
    }

    /// One collection pass; call once per tick after resolution.
    ///
    /// For every context passing the guard the current inputs are buffered
    /// under `now`, then the current output is linked with each buffered
    /// snapshot taken `t` ticks ago for `t` in the horizon (ascending `t`).
    pub fn collect_step(&mut self, estimate: &ValueEstimate, population: &Population, now: Time) {
        let horizon = estimate.horizon;
        let oldest = now - horizon.max() as Time;
        self.buffer.retain(|_, snaps| {
            while snaps.front().is_some_and(|(at, _)| *at < oldest) {
                snaps.pop_front();
            }
            !snaps.is_empty()
        });

        for ctx in estimate.contexts(population, now) {
            if !estimate.passes_guard(&ctx) {
                continue;
            }
            let key = ctx.key();
            if estimate.records_inputs(&ctx) {
                let mut inputs = Vec::with_capacity(estimate.input_width());
                estimate.extract_inputs(&ctx, &mut inputs);
                self.buffer.entry(key).or_default().push_back((now, inputs));
                self.diagnostics.snapshots_recorded += 1;
            }
            let Some(label) = estimate.read_output(&ctx) else {
                self.diagnostics.unreadable_outputs += 1;
                continue;
            };
            let Some(snaps) = self.buffer.get(&key) else {
                continue;
            };
            for (at, inputs) in snaps.iter().rev() {
                let t = now - at;
                if t < horizon.min() as Time {
                    continue;
                }
                let t = t as u32;
                self.row.clear();
                self.row.extend_from_slice(inputs);
                self.row.push(horizon.encode(t));
                self.dataset
                    .push(t, &self.row, label)
                    .expect("collector rows match the estimate width");
                self.diagnostics.examples += 1;
            }
        }
        self.window = Some(match self.window {
            None => (now, now),
            Some((a, b)) => (a.min(now), b.max(now)),
        });
    }

    pub fn diagnostics(&self) -> &CollectDiagnostics {
        &self.diagnostics
    }

    pub fn dataset(&self) -> &TrainingDataset {
        &self.dataset
    }

    /// Snapshots currently held in the bounded input history.
    pub fn buffered(&self) -> usize {
        self.buffer.values().map(VecDeque::len).sum()
    }

    /// Hands over the dataset collected so far (with provenance) and starts a fresh one.
    pub fn take_dataset(&mut self) -> TrainingDataset {
        let fresh = TrainingDataset::new(&self.dataset.estimate, self.dataset.n_features());
        let mut ds = std::mem::replace(&mut self.dataset, fresh);
        if let Some(window) = self.window.take() {
            ds.provenance.push(Provenance {
                run_id: self.run_id.clone(),
                window,
            });
        }
        ds
    }

    /// Drops the input history, e.g. between independent simulated days.
    pub fn clear_history(&mut self) {
        self.buffer.clear();
    }
}
