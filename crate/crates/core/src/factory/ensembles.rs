//! The factory's ensemble types, in rigid and learned variants, and the
//! `willArrive` estimate.

use std::sync::Arc;

use super::config::ScenarioConfig;
use super::layout::{shift, worker, FactoryTypes, Layout};
use crate::estimates::{
    Attachment, AttachmentContext, EstimateError, Feature, Horizon, Output, OutputKind,
    TrainedEstimate, ValueEstimate,
};
use crate::heuristics::SelectStrategy;
use crate::model::{
    ActionSpec, Cardinality, ComponentInstance, DynamicRoleSpec, EnsembleSet, EnsembleType,
    ModelError, ResourceRef, RoleContext, Time, TypeRegistry,
};

pub const WILL_ARRIVE: &str = "willArrive";
pub const CANCEL_THRESHOLD: f64 = 0.5;

fn flag(c: &ComponentInstance, idx: usize) -> bool {
    c.value(idx).as_bool().unwrap_or(false)
}

fn time_of(s: &ComponentInstance, idx: usize) -> Time {
    s.value(idx).as_time().unwrap_or(0)
}

/// Non-canceled assigned workers plus standbys called for this shift.
fn works_in(s: &ComponentInstance, w: &ComponentInstance) -> bool {
    let id = w.id();
    (s.value(shift::ASSIGNED).contains(id) && !flag(w, worker::CANCELED))
        || s.value(shift::CALLED_STANDBYS).contains(id)
}

fn in_window(ctx: &RoleContext<'_>, before_start: Time, after_end: Time) -> bool {
    ctx.member("shift").is_some_and(|s| {
        let start = time_of(s, shift::START_TIME);
        let end = time_of(s, shift::END_TIME);
        start - before_start <= ctx.now && ctx.now <= end + after_end
    })
}

fn access_ensemble(
    name: &str,
    config: &ScenarioConfig,
    types: &FactoryTypes,
    action: ActionSpec,
) -> EnsembleType {
    let margin = config.access_window;
    EnsembleType::new(name)
        .static_role("shift", types.shift, 1, 1)
        .situation(move |ctx| in_window(ctx, margin, margin))
        .dynamic_role(DynamicRoleSpec::filter(
            "workers",
            types.worker,
            Cardinality::Unbounded,
            |ctx, w| ctx.member("shift").is_some_and(|s| works_in(s, w)),
        ))
        .action(action)
}

/// Gate, dispenser and workplace access. Identical apart from the resource.
pub fn access_ensembles(
    config: &ScenarioConfig,
    types: &FactoryTypes,
    layout: &Layout,
) -> Vec<EnsembleType> {
    vec![
        access_ensemble(
            "AccessToFactory",
            config,
            types,
            ActionSpec::allow("workers", ResourceRef::Component(layout.door), "enter"),
        ),
        access_ensemble(
            "AccessToDispenser",
            config,
            types,
            ActionSpec::allow("workers", ResourceRef::Component(layout.dispenser), "use"),
        ),
        access_ensemble(
            "AccessToWorkplace",
            config,
            types,
            ActionSpec::allow(
                "workers",
                ResourceRef::RoleField {
                    role: "shift".into(),
                    field: "workPlace".into(),
                },
                "enter",
            ),
        ),
    ]
}

/// Selects `lateWorkers.size` standbys exclusively across all shifts.
///
/// A standby already called for some shift stays eligible only for that
/// shift and is preferred there, so earlier calls survive re-resolution.
fn replace_with_standbys(
    config: &ScenarioConfig,
    types: &FactoryTypes,
    strategy: SelectStrategy,
) -> EnsembleType {
    let shift_type = types.shift;
    let global = config.global_standby_pool;
    let called_by = move |ctx: &RoleContext<'_>, w: &ComponentInstance| {
        ctx.population
            .of_type(shift_type)
            .find(|s| s.value(shift::CALLED_STANDBYS).contains(w.id()))
            .map(|s| s.id())
    };
    let eligible = move |ctx: &RoleContext<'_>, w: &ComponentInstance| {
        let Some(s) = ctx.member("shift") else {
            return false;
        };
        if !flag(w, worker::STANDBY) {
            return false;
        }
        match called_by(ctx, w) {
            Some(owner) => owner == s.id(),
            None => global || s.value(shift::STAND_BYS).contains(w.id()),
        }
    };
    let cost = move |ctx: &RoleContext<'_>, w: &ComponentInstance| {
        let here = ctx
            .member("shift")
            .is_some_and(|s| s.value(shift::CALLED_STANDBYS).contains(w.id()));
        if here {
            0.0
        } else {
            1.0
        }
    };
    EnsembleType::new("ReplaceLateWithStandbys")
        .dynamic_role(
            DynamicRoleSpec::exclusive(
                "standBys",
                types.worker,
                Cardinality::SizeOf("lateWorkers".into()),
                eligible,
            )
            .with_cost(cost)
            .with_strategy(strategy),
        )
        .action(ActionSpec::notify("standBys", "calledIn"))
}

fn is_late_absent(s: &ComponentInstance, w: &ComponentInstance) -> bool {
    s.value(shift::ASSIGNED).contains(w.id()) && !flag(w, worker::IS_AT_FACTORY)
}

/// `CancelLateWorkers` with the fixed cutoff: every assigned worker not in
/// the factory from `start - cutoff` on is canceled.
pub fn rigid_cancel(config: &ScenarioConfig, types: &FactoryTypes) -> EnsembleType {
    let cutoff = config.rigid_cutoff;
    EnsembleType::new("CancelLateWorkers")
        .static_role("shift", types.shift, 1, 1)
        .situation(move |ctx| in_window(ctx, cutoff, 0))
        .dynamic_role(DynamicRoleSpec::filter(
            "lateWorkers",
            types.worker,
            Cardinality::Unbounded,
            |ctx, w| ctx.member("shift").is_some_and(|s| is_late_absent(s, w)),
        ))
        .action(ActionSpec::notify("lateWorkers", "canceled"))
        .inner(replace_with_standbys(config, types, config.selector.into()))
}

/// Learned cancellation decision for an absent worker.
///
/// Returns true when the worker should be (or stay) canceled: already
/// canceled, the shift has started, or the estimate gives arrival by the
/// start a probability below 0.5. Without a usable model the rigid cutoff applies.
fn learned_late(
    estimate: &TrainedEstimate,
    cutoff: Time,
    ctx: &RoleContext<'_>,
    s: &ComponentInstance,
    w: &ComponentInstance,
) -> bool {
    if flag(w, worker::CANCELED) {
        return true;
    }
    let start = time_of(s, shift::START_TIME);
    if ctx.now >= start {
        return true;
    }
    let actx = AttachmentContext {
        population: ctx.population,
        now: ctx.now,
        component: Some(w),
        anchor: Some(s),
    };
    match estimate.predict_at(&actx, start) {
        Ok(p) => p.value() < CANCEL_THRESHOLD,
        Err(EstimateError::Untrained(_)) => ctx.now >= start - cutoff,
        Err(e) => {
            log::warn!("willArrive query failed: {e}");
            ctx.now >= start - cutoff
        }
    }
}

/// `CancelLateWorkers` driven by the `willArrive` estimate.
pub fn learned_cancel(
    config: &ScenarioConfig,
    types: &FactoryTypes,
    estimate: TrainedEstimate,
) -> EnsembleType {
    let window = config.ml_window;
    let cutoff = config.rigid_cutoff;
    let estimate = Arc::new(estimate);
    EnsembleType::new("CancelLateWorkers")
        .static_role("shift", types.shift, 1, 1)
        .situation(move |ctx| in_window(ctx, window, window))
        .dynamic_role(DynamicRoleSpec::filter(
            "lateWorkers",
            types.worker,
            Cardinality::Unbounded,
            move |ctx, w| {
                ctx.member("shift").is_some_and(|s| {
                    is_late_absent(s, w) && learned_late(&estimate, cutoff, ctx, s, w)
                })
            },
        ))
        .action(ActionSpec::notify("lateWorkers", "canceled"))
        .inner(replace_with_standbys(config, types, config.selector.into()))
}

fn register_all(
    registry: &TypeRegistry,
    types: Vec<EnsembleType>,
) -> Result<EnsembleSet, ModelError> {
    let mut set = EnsembleSet::new(registry);
    for t in types {
        set.register(t)?;
    }
    Ok(set)
}

pub fn build_rigid_ensembles(
    config: &ScenarioConfig,
    registry: &TypeRegistry,
    types: &FactoryTypes,
    layout: &Layout,
) -> Result<EnsembleSet, ModelError> {
    let mut all = access_ensembles(config, types, layout);
    all.push(rigid_cancel(config, types));
    register_all(registry, all)
}

pub fn build_ml_ensembles(
    config: &ScenarioConfig,
    registry: &TypeRegistry,
    types: &FactoryTypes,
    layout: &Layout,
    estimate: TrainedEstimate,
) -> Result<EnsembleSet, ModelError> {
    let mut all = access_ensembles(config, types, layout);
    all.push(learned_cancel(config, types, estimate));
    register_all(registry, all)
}

/// Arrival estimate for a (worker, shift) pair: will the worker be in the
/// factory `t` minutes from now, for `t` in 1..=30.
///
/// Data is recorded only for the shift's own (non-standby, non-canceled)
/// workers from `start - collection_lead` up to the shift start, and input
/// snapshots only while the worker is still absent, so the model learns the
/// arrival probability of a worker who has not shown up yet.
pub fn will_arrive(config: &ScenarioConfig, types: &FactoryTypes) -> ValueEstimate {
    let lead = config.collection_lead;
    ValueEstimate::new(
        WILL_ARRIVE,
        Attachment::ComponentEnsemblePair {
            component_type: types.worker,
            anchor_type: types.shift,
        },
        Output::component_field("isAtFactory", OutputKind::Binary),
        Horizon::new(1, 30).expect("valid horizon"),
    )
    .input(Feature::day_of_week())
    .guard(move |ctx| {
        let (Some(w), Some(s)) = (ctx.component, ctx.anchor) else {
            return false;
        };
        if w.value(worker::SHIFT).as_id() != Some(s.id())
            || flag(w, worker::STANDBY)
            || flag(w, worker::CANCELED)
        {
            return false;
        }
        let start = time_of(s, shift::START_TIME);
        start - lead <= ctx.now && ctx.now <= start
    })
    .record_inputs_when(|ctx| {
        ctx.component
            .is_some_and(|w| !flag(w, worker::IS_AT_FACTORY))
    })
}

/// Input vector of `willArrive` for a day of week and offset, as used by the boundary grid.
pub fn will_arrive_inputs(horizon: Horizon, day_of_week: usize, minutes_ahead: u32) -> Vec<f64> {
    let mut x: Vec<f64> = (0..7)
        .map(|d| if d == day_of_week { 1.0 } else { 0.0 })
        .collect();
    x.push(horizon.encode(horizon.clamp(minutes_ahead as i64)));
    x
}
