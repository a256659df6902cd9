//! Nested-loop re-derivation of collected training data, and random traces.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::estimates::{
    Attachment, AttachmentContext, Collector, ContextKey, Feature, Horizon, Output, OutputKind,
    ValueEstimate,
};
use crate::model::{
    ComponentId, ComponentInstance, ComponentType, FieldKind, Population, Time, TypeRegistry, Value,
};

/// One example: offset, inputs (including the encoded offset) and label.
pub type Row = (u32, Vec<f64>, f64);

fn contexts<'a>(
    estimate: &ValueEstimate,
    population: &'a Population,
    now: Time,
) -> BTreeMap<ContextKey, AttachmentContext<'a>> {
    let by_type = |t| {
        population
            .iter()
            .filter(move |c| c.type_handle() == t)
            .collect::<Vec<_>>()
    };
    let mut out = BTreeMap::new();
    let mut add = |component: Option<&'a ComponentInstance>,
                   anchor: Option<&'a ComponentInstance>| {
        let ctx = AttachmentContext {
            population,
            now,
            component,
            anchor,
        };
        out.insert(ctx.key(), ctx);
    };
    match estimate.attachment {
        Attachment::Component { component_type } => by_type(component_type)
            .into_iter()
            .for_each(|c| add(Some(c), None)),
        Attachment::Ensemble { anchor_type } => by_type(anchor_type)
            .into_iter()
            .for_each(|a| add(None, Some(a))),
        Attachment::ComponentEnsemblePair {
            component_type,
            anchor_type,
        } => {
            for c in by_type(component_type) {
                for a in by_type(anchor_type) {
                    add(Some(c), Some(a));
                }
            }
        }
    }
    out
}

/// For every tick `now`, every guarded context with a readable output and
/// every offset `t` in the horizon (ascending), emits the example whose inputs
/// were observed at `now - t`, if the context was guarded there and its
/// inputs were recorded. `trace` must be in increasing time order.
pub fn nested_loop_dataset(estimate: &ValueEstimate, trace: &[(Time, Population)]) -> Vec<Row> {
    let h = estimate.horizon;
    let encode = |t: u32| {
        if h.max() == h.min() {
            0.0
        } else {
            (t as f64 - h.min() as f64) / (h.max() - h.min()) as f64
        }
    };
    let mut rows = Vec::new();
    for (j, (now, pop)) in trace.iter().enumerate() {
        for (key, ctx) in contexts(estimate, pop, *now) {
            if !estimate.passes_guard(&ctx) {
                continue;
            }
            let Some(label) = estimate.read_output(&ctx) else {
                continue;
            };
            for t in h.min()..=h.max() {
                let at = *now - t as Time;
                let Some((_, earlier)) = trace[..=j].iter().find(|(time, _)| *time == at) else {
                    continue;
                };
                let then = contexts(estimate, earlier, at);
                let Some(past) = then.get(&key) else {
                    continue;
                };
                if !estimate.passes_guard(past) || !estimate.records_inputs(past) {
                    continue;
                }
                let mut inputs = Vec::new();
                estimate.extract_inputs(past, &mut inputs);
                inputs.push(encode(t));
                rows.push((t, inputs, label));
            }
        }
    }
    rows
}

/// Runs a [`Collector`] over the trace and returns its rows.
pub fn collected_rows(estimate: &ValueEstimate, trace: &[(Time, Population)]) -> Vec<Row> {
    let mut collector = Collector::new(estimate, "oracle");
    for (now, pop) in trace {
        collector.collect_step(estimate, pop, *now);
    }
    collector
        .dataset()
        .iter()
        .map(|e| (e.t, e.inputs.to_vec(), e.label))
        .collect()
}

/// Number of positions where the two row lists differ, counting length
/// differences. Floats are compared bit for bit.
pub fn mismatches(a: &[Row], b: &[Row]) -> usize {
    let same = |x: &Row, y: &Row| {
        x.0 == y.0
            && x.2.to_bits() == y.2.to_bits()
            && x.1.len() == y.1.len()
            && x.1
                .iter()
                .zip(&y.1)
                .all(|(p, q)| p.to_bits() == q.to_bits())
    };
    a.iter().zip(b).filter(|(x, y)| !same(x, y)).count() + a.len().abs_diff(b.len())
}

pub struct DatasetCase {
    pub estimate: ValueEstimate,
    pub trace: Vec<(Time, Population)>,
}

fn num(c: Option<&ComponentInstance>, field: &str) -> Option<f64> {
    let v = c?.get(field)?;
    v.as_number()
        .or_else(|| v.as_bool().map(|b| b as u8 as f64))
}

/// Random estimate and trace: at most `max_ticks` ticks, at most 5 contexts,
/// horizon within <1,30>. Components come and go and their fields change.
pub fn random_case(seed: u64, max_ticks: usize) -> DatasetCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut registry = TypeRegistry::new();
    let sensor = registry
        .register(
            ComponentType::new("Sensor")
                .field("value", FieldKind::Number)
                .field("flag", FieldKind::Boolean),
        )
        .expect("fresh registry");
    let anchor = registry
        .register(
            ComponentType::new("Anchor")
                .field("value", FieldKind::Number)
                .field("flag", FieldKind::Boolean),
        )
        .expect("fresh registry");
    let registry = Arc::new(registry);

    let (n_sensors, n_anchors, attachment) = match rng.gen_range(0..3) {
        0 => (
            rng.gen_range(1..=5),
            1,
            Attachment::Component {
                component_type: sensor,
            },
        ),
        1 => (
            1,
            rng.gen_range(1..=5),
            Attachment::Ensemble {
                anchor_type: anchor,
            },
        ),
        _ => {
            let s = rng.gen_range(1..=2);
            (
                s,
                rng.gen_range(1..=(5 / s)),
                Attachment::ComponentEnsemblePair {
                    component_type: sensor,
                    anchor_type: anchor,
                },
            )
        }
    };
    let min = rng.gen_range(1..=5);
    let max = rng.gen_range(min..=30);
    let kind = if rng.gen_bool(0.5) {
        OutputKind::Binary
    } else {
        OutputKind::Continuous
    };
    let mut estimate = ValueEstimate::new(
        "probe",
        attachment,
        Output::new("value", kind, move |ctx| match kind {
            OutputKind::Binary => num(ctx.component.or(ctx.anchor), "flag"),
            _ => num(ctx.component.or(ctx.anchor), "value"),
        }),
        Horizon::new(min, max).expect("min >= 1"),
    )
    .input(Feature::new("values", 2, true, |ctx, out| {
        out.push(num(ctx.component, "value").unwrap_or(-1.0));
        out.push(num(ctx.anchor, "value").unwrap_or(-1.0));
    }));
    if rng.gen_bool(0.6) {
        let threshold = rng.gen_range(0..4) as f64;
        estimate = estimate.guard(move |ctx| {
            num(ctx.anchor.or(ctx.component), "value").is_some_and(|v| v >= threshold)
        });
    }
    if rng.gen_bool(0.5) {
        estimate = estimate
            .record_inputs_when(|ctx| num(ctx.component.or(ctx.anchor), "flag") == Some(0.0));
    }

    // Sensors get ids 1.., anchors 100..
    let ids: Vec<(ComponentId, bool)> = (0..n_sensors)
        .map(|i| (ComponentId(1 + i as u32), true))
        .chain((0..n_anchors).map(|i| (ComponentId(100 + i as u32), false)))
        .collect();
    let mut state: Vec<(bool, f64, bool)> = ids
        .iter()
        .map(|_| (true, rng.gen_range(0..6) as f64, rng.gen_bool(0.5)))
        .collect();
    let ticks = rng.gen_range(1..=max_ticks.max(1));
    let mut now: Time = rng.gen_range(0..100);
    let mut trace = Vec::with_capacity(ticks);
    for _ in 0..ticks {
        let mut pop = Population::new(registry.clone());
        for ((id, is_sensor), (present, value, flag)) in ids.iter().zip(&state) {
            if *present {
                let t = if *is_sensor { sensor } else { anchor };
                pop.insert(
                    *id,
                    t,
                    vec![
                        ("value", Value::Number(*value)),
                        ("flag", Value::Bool(*flag)),
                    ],
                )
                .expect("schema");
            }
        }
        trace.push((now, pop));
        for s in &mut state {
            if rng.gen_bool(0.05) {
                s.0 = !s.0;
            }
            if rng.gen_bool(0.3) {
                s.1 = rng.gen_range(0..6) as f64;
            }
            if rng.gen_bool(0.2) {
                s.2 = !s.2;
            }
        }
        now += if rng.gen_bool(0.1) {
            rng.gen_range(2..4)
        } else {
            1
        };
    }
    DatasetCase { estimate, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_guarded_single_context_count() {
        // one context, 40 ticks, horizon <1,30>: sum over k of min(k - 1, 30)
        let mut registry = TypeRegistry::new();
        let s = registry
            .register(ComponentType::new("S").field("value", FieldKind::Number))
            .unwrap();
        let registry = Arc::new(registry);
        let est = ValueEstimate::new(
            "x",
            Attachment::Component { component_type: s },
            Output::component_field("value", OutputKind::Continuous),
            Horizon::new(1, 30).unwrap(),
        )
        .input(Feature::component_field("value"));
        let trace: Vec<(Time, Population)> = (0..40)
            .map(|t| {
                let mut p = Population::new(registry.clone());
                p.insert(ComponentId(1), s, vec![("value", Value::Number(t as f64))])
                    .unwrap();
                (t, p)
            })
            .collect();
        let expected: usize = (1..=40).map(|k: usize| (k - 1).min(30)).sum();
        let oracle = nested_loop_dataset(&est, &trace);
        assert_eq!(oracle.len(), expected);
        assert_eq!(mismatches(&oracle, &collected_rows(&est, &trace)), 0);
    }
}
