//! Minute-tick simulation of one factory day.

use std::io::Write;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::agent::{Event, Resources, WorkerState};
use super::config::{Policy, ScenarioConfig};
use super::ensembles;
use super::layout::{self, shift, worker, FactoryTypes, Layout};
use super::FactoryError;
use crate::estimates::{Collector, TrainedEstimate, ValueEstimate, MINUTES_PER_DAY};
use crate::model::{
    ComponentId, EnsembleRuntime, EnsembleSet, InstanceKey, Population, Time, TypeRegistry, Value,
};

/// Arrival plan of one shift for one day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftArrivals {
    /// Bus drop-off minute per assigned worker, in assignment order.
    pub arrival: Vec<Time>,
    pub late: Vec<bool>,
}

/// Draws arrivals for every shift of `day` (absolute day index).
///
/// Each day uses its own ChaCha stream of the scenario seed, so the draws do
/// not depend on what was simulated before.
pub fn schedule_arrivals(config: &ScenarioConfig, day: u64) -> Vec<ShiftArrivals> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(day);
    let start = day as Time * MINUTES_PER_DAY + config.shift_start;
    let weekend = ScenarioConfig::is_weekend((day % 7) as usize);
    let (bus, late_bus) = if weekend {
        (config.bus_offset_weekend, config.late_bus_weekend)
    } else {
        (config.bus_offset_business, config.late_bus_business)
    };
    let delay = (config.mean_delay > 0.0)
        .then(|| Exp::new(1.0 / config.mean_delay).expect("positive rate"));
    let n = config.workers_per_shift;
    (0..config.shifts)
        .map(|_| {
            let mut late = vec![false; n];
            for i in sample(&mut rng, n, config.late_count().min(n)) {
                late[i] = true;
            }
            let arrival = late
                .iter()
                .map(|&is_late| {
                    let extra = delay.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                    start + if is_late { late_bus } else { bus } + extra.round() as Time
                })
                .collect();
            ShiftArrivals { arrival, late }
        })
        .collect()
}

/// Per-day, per-shift outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsRecord {
    pub week: u32,
    /// 1-based day number within the experiment.
    pub day: u32,
    /// 0 = Monday ... 6 = Sunday.
    pub day_of_week: u32,
    pub shift_id: u32,
    pub policy: Policy,
    pub standbys_called: u32,
    pub canceled: u32,
    /// Sum of squared minutes by which workers reached the workplace after start.
    pub lateness: u64,
}

pub const METRICS_HEADER: &str =
    "week,day,day_of_week,shift_id,policy,standbys_called,canceled,lateness";

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.week,
            self.day,
            self.day_of_week,
            self.shift_id,
            self.policy.as_str(),
            self.standbys_called,
            self.canceled,
            self.lateness
        )
    }
}

pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()
}

/// Lateness of a set of workplace arrival times, `None` counting as never arrived
/// (charged as arriving at `never`).
pub fn lateness(start: Time, arrivals: impl IntoIterator<Item = Option<Time>>, never: Time) -> u64 {
    arrivals
        .into_iter()
        .map(|a| {
            let late = (a.unwrap_or(never) - start).max(0) as u64;
            late * late
        })
        .sum()
}

/// Checks and counters gathered while simulating.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimDiagnostics {
    /// Gate entries without a same-tick entry permission.
    pub unauthorized_entries: u64,
    /// Ticks at which standby selection was infeasible.
    pub infeasible_selections: u64,
    /// Workers found both working and cancelled for a shift.
    pub cancel_conflicts: u64,
    /// Standbys called by more than one shift.
    pub duplicate_calls: u64,
    pub notifications: u64,
}

/// One simulated day.
#[derive(Debug, Clone)]
pub struct DayOutcome {
    /// Per shift: (standbys called, canceled, lateness).
    pub shifts: Vec<(u32, u32, u64)>,
    /// Delivered notifications as (tick, component, tag).
    pub notifications: Vec<(Time, ComponentId, String)>,
    pub trace: Vec<String>,
}

/// The factory: population, agents and the scenario they run in.
pub struct Factory {
    pub config: ScenarioConfig,
    pub registry: Arc<TypeRegistry>,
    pub types: FactoryTypes,
    pub layout: Layout,
    pub population: Population,
    pub agents: Vec<WorkerState>,
    pub diagnostics: SimDiagnostics,
    index: std::collections::HashMap<ComponentId, usize>,
}

impl Factory {
    pub fn new(config: ScenarioConfig) -> Result<Self, FactoryError> {
        config.validate().map_err(FactoryError::Config)?;
        let mut registry = TypeRegistry::new();
        let types = layout::register_types(&mut registry)?;
        let registry = Arc::new(registry);
        let (population, layout) = layout::build_population(&config, registry.clone(), &types)?;
        let mut agents = Vec::new();
        for (si, ws) in layout.assigned.iter().enumerate() {
            for &w in ws {
                agents.push(WorkerState::assigned(
                    w,
                    si,
                    layout.workplaces[si],
                    Time::MAX,
                ));
            }
        }
        agents.extend(layout.all_standbys().map(WorkerState::standby));
        agents.sort_by_key(|a| a.id);
        let index = agents.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
        Ok(Self {
            config,
            registry,
            types,
            layout,
            population,
            agents,
            diagnostics: SimDiagnostics::default(),
            index,
        })
    }

    pub fn rigid_ensembles(&self) -> Result<EnsembleSet, FactoryError> {
        Ok(ensembles::build_rigid_ensembles(
            &self.config,
            &self.registry,
            &self.types,
            &self.layout,
        )?)
    }

    pub fn ml_ensembles(&self, estimate: TrainedEstimate) -> Result<EnsembleSet, FactoryError> {
        Ok(ensembles::build_ml_ensembles(
            &self.config,
            &self.registry,
            &self.types,
            &self.layout,
            estimate,
        )?)
    }

    pub fn will_arrive(&self) -> ValueEstimate {
        ensembles::will_arrive(&self.config, &self.types)
    }

    pub fn agent(&self, id: ComponentId) -> Option<&WorkerState> {
        self.index.get(&id).map(|&i| &self.agents[i])
    }

    pub fn shift_window(&self, day: u64) -> (Time, Time) {
        let start = day as Time * MINUTES_PER_DAY + self.config.shift_start;
        (start, start + self.config.shift_length)
    }

    fn set(&mut self, id: ComponentId, idx: usize, v: Value) {
        self.population.set_at(id, idx, v).expect("factory schema");
    }

    /// Resets shifts and workers for `day` with the given arrival plan.
    pub fn begin_day(&mut self, day: u64, arrivals: &[ShiftArrivals]) {
        let (start, end) = self.shift_window(day);
        for (si, s) in self.layout.shifts.clone().into_iter().enumerate() {
            self.set(s, shift::START_TIME, Value::Time(start));
            self.set(s, shift::END_TIME, Value::Time(end));
            self.set(
                s,
                shift::WORKERS,
                Value::ids(self.layout.assigned[si].iter().copied()),
            );
            self.set(s, shift::CALLED_STANDBYS, Value::ids([]));
            self.set(s, shift::CANCELLED, Value::ids([]));
            for (k, &w) in self.layout.assigned[si].iter().enumerate() {
                let i = self.index[&w];
                self.agents[i] = WorkerState::assigned(
                    w,
                    si,
                    self.layout.workplaces[si],
                    arrivals[si].arrival[k],
                );
            }
        }
        for s in self.layout.all_standbys().collect::<Vec<_>>() {
            let i = self.index[&s];
            self.agents[i] = WorkerState::standby(s);
        }
        for i in 0..self.agents.len() {
            self.sync_worker(i);
        }
    }

    fn sync_worker(&mut self, i: usize) {
        let a = &self.agents[i];
        let (id, pos, hg, af, aw, c) = (
            a.id,
            a.position,
            a.has_headgear(),
            a.is_at_factory(),
            a.is_at_workplace(),
            a.canceled,
        );
        self.set(id, worker::POSITION, Value::Position(pos));
        self.set(id, worker::HAS_HEADGEAR, Value::Bool(hg));
        self.set(id, worker::IS_AT_FACTORY, Value::Bool(af));
        self.set(id, worker::IS_AT_WORKPLACE, Value::Bool(aw));
        self.set(id, worker::CANCELED, Value::Bool(c));
    }

    fn shift_ids(&self, si: usize, field: usize) -> Vec<ComponentId> {
        self.population
            .get(self.layout.shifts[si])
            .and_then(|s| s.value(field).as_ids())
            .map(|v| v.to_vec())
            .unwrap_or_default()
    }

    fn shift_of_key(&self, key: &InstanceKey) -> Option<usize> {
        let mut k = Some(key);
        while let Some(cur) = k {
            if let Some((_, ids)) = cur.binding.iter().find(|(name, _)| &**name == "shift") {
                return ids.first().and_then(|id| self.layout.shift_index(*id));
            }
            k = cur.parent.as_deref();
        }
        None
    }

    /// Simulates one day. Each tick: resolve ensembles, deliver notifications,
    /// move workers, publish their state, then collect training data.
    pub fn run_day(
        &mut self,
        day: u64,
        runtime: &mut EnsembleRuntime,
        collect: Option<(&ValueEstimate, &mut Collector)>,
        trace: bool,
    ) -> DayOutcome {
        let arrivals = schedule_arrivals(&self.config, day);
        self.run_day_with(day, &arrivals, runtime, collect, trace)
    }

    /// Like [`Factory::run_day`] with a given arrival plan.
    pub fn run_day_with(
        &mut self,
        day: u64,
        arrivals: &[ShiftArrivals],
        runtime: &mut EnsembleRuntime,
        mut collect: Option<(&ValueEstimate, &mut Collector)>,
        trace: bool,
    ) -> DayOutcome {
        self.begin_day(day, arrivals);
        let (start, end) = self.shift_window(day);
        let (first, last) = (start - self.config.day_margin, end + self.config.day_margin);
        let resources = Resources {
            door: self.layout.door,
            dispenser: self.layout.dispenser,
        };
        let mut lines = Vec::new();
        let mut delivered = Vec::new();

        for now in first..=last {
            let outcome = runtime.step(&self.population, now);
            let resolution = &outcome.resolution;
            if !resolution.infeasible.is_empty() {
                self.diagnostics.infeasible_selections += 1;
            }
            if trace {
                lines.push(resolution.dump(now));
            }

            let mut touched_shifts = Vec::new();
            for note in &outcome.delivered {
                self.diagnostics.notifications += 1;
                delivered.push((now, note.component, note.tag.to_string()));
                let Some(&i) = self.index.get(&note.component) else {
                    continue;
                };
                let Some(si) = self.shift_of_key(&note.instance) else {
                    continue;
                };
                match &*note.tag {
                    "canceled" => {
                        if self.agents[i].cancel() {
                            self.sync_worker(i);
                            let mut c = self.shift_ids(si, shift::CANCELLED);
                            c.push(note.component);
                            self.set(self.layout.shifts[si], shift::CANCELLED, Value::ids(c));
                            touched_shifts.push(si);
                        }
                    }
                    "calledIn" => {
                        let wp = self.layout.workplaces[si];
                        let config = self.config.clone();
                        if self.agents[i].call_in(now, si, wp, &config) {
                            self.sync_worker(i);
                            let mut c = self.shift_ids(si, shift::CALLED_STANDBYS);
                            c.push(note.component);
                            self.set(
                                self.layout.shifts[si],
                                shift::CALLED_STANDBYS,
                                Value::ids(c),
                            );
                            touched_shifts.push(si);
                        }
                    }
                    other => log::debug!("ignoring notification `{other}`"),
                }
            }
            for si in touched_shifts {
                let cancelled = self.shift_ids(si, shift::CANCELLED);
                let mut workers: Vec<ComponentId> = self.layout.assigned[si]
                    .iter()
                    .copied()
                    .filter(|w| cancelled.binary_search(w).is_err())
                    .collect();
                workers.extend(self.shift_ids(si, shift::CALLED_STANDBYS));
                self.set(self.layout.shifts[si], shift::WORKERS, Value::ids(workers));
            }

            for i in 0..self.agents.len() {
                let before = self.agents[i].clone();
                let event =
                    self.agents[i].step(now, &resolution.permissions, &resources, &self.config);
                if event == Some(Event::EnteredFactory)
                    && !resolution
                        .permissions
                        .allows(before.id, resources.door, "enter")
                {
                    self.diagnostics.unauthorized_entries += 1;
                }
                if self.agents[i] != before {
                    self.sync_worker(i);
                }
            }

            if let Some((estimate, collector)) = collect.as_mut() {
                collector.collect_step(estimate, &self.population, now);
            }
        }

        self.audit_day();
        let never = last + 1;
        let shifts = (0..self.layout.shifts.len())
            .map(|si| {
                let called = self.shift_ids(si, shift::CALLED_STANDBYS);
                let cancelled = self.shift_ids(si, shift::CANCELLED);
                let serving = self.layout.assigned[si]
                    .iter()
                    .filter(|w| cancelled.binary_search(w).is_err())
                    .chain(called.iter())
                    .map(|w| self.agent(*w).and_then(|a| a.workplace_arrival));
                (
                    called.len() as u32,
                    cancelled.len() as u32,
                    lateness(start, serving, never),
                )
            })
            .collect();
        DayOutcome {
            shifts,
            notifications: delivered,
            trace: lines,
        }
    }

    fn audit_day(&mut self) {
        let mut seen = std::collections::HashSet::new();
        for si in 0..self.layout.shifts.len() {
            let workers = self.shift_ids(si, shift::WORKERS);
            let cancelled = self.shift_ids(si, shift::CANCELLED);
            self.diagnostics.cancel_conflicts += workers
                .iter()
                .filter(|w| cancelled.binary_search(w).is_ok())
                .count() as u64;
            for s in self.shift_ids(si, shift::CALLED_STANDBYS) {
                if !seen.insert(s) {
                    self.diagnostics.duplicate_calls += 1;
                }
            }
        }
    }
}

/// Simulates consecutive days under one ensemble set, returning metrics rows.
#[allow(clippy::too_many_arguments)]
pub fn run_days(
    factory: &mut Factory,
    set: EnsembleSet,
    week: u32,
    days: std::ops::Range<u64>,
    policy: Policy,
    mut collect: Option<(&ValueEstimate, &mut Collector)>,
    trace_out: Option<&mut Vec<String>>,
) -> Vec<MetricsRecord> {
    let mut runtime = EnsembleRuntime::new(set);
    let mut rows = Vec::new();
    let want_trace = trace_out.is_some();
    let mut trace_lines = Vec::new();
    for day in days {
        let c = collect.as_mut().map(|(e, c)| (*e, &mut **c));
        let outcome = factory.run_day(day, &mut runtime, c, want_trace);
        trace_lines.extend(outcome.trace);
        for (si, (called, canceled, late)) in outcome.shifts.into_iter().enumerate() {
            rows.push(MetricsRecord {
                week,
                day: day as u32 + 1,
                day_of_week: (day % 7) as u32,
                shift_id: si as u32,
                policy,
                standbys_called: called,
                canceled,
                lateness: late,
            });
        }
    }
    if let Some(out) = trace_out {
        out.extend(trace_lines);
    }
    rows
}
