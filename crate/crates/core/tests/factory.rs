use ensemble_core::estimates::{Estimator, EstimatorKind, TrainedEstimate, MINUTES_PER_DAY};
use ensemble_core::factory::{
    lateness, run_days, schedule_arrivals, Factory, Policy, ScenarioConfig, ShiftArrivals,
};
use ensemble_core::model::{ComponentId, EnsembleRuntime, Time};

fn small(workers: usize, standbys: usize) -> ScenarioConfig {
    ScenarioConfig {
        shifts: 1,
        workers_per_shift: workers,
        standbys_per_shift: standbys,
        mean_delay: 0.0,
        late_fraction: 0.0,
        ..ScenarioConfig::default()
    }
}

/// Estimator ignoring its inputs and returning probability `p`.
fn constant(p: f64) -> Estimator {
    let mut est = Estimator::init(EstimatorKind::Binary, 8, 16, vec![(0.0, 1.0); 8], 0);
    let n = est.params().len();
    est.params_mut().iter_mut().for_each(|w| *w = 0.0);
    est.params_mut()[n - 1] = (p / (1.0 - p)).ln();
    est
}

fn start_of(f: &Factory, day: u64) -> Time {
    f.shift_window(day).0
}

#[test]
fn punctual_business_arrival_without_delay() {
    let cfg = ScenarioConfig {
        mean_delay: 0.0,
        ..ScenarioConfig::default()
    };
    let plan = schedule_arrivals(&cfg, 0);
    let start = cfg.shift_start;
    for shift in &plan {
        for (a, late) in shift.arrival.iter().zip(&shift.late) {
            assert_eq!(*a - start, if *late { -18 } else { -24 });
        }
        assert_eq!(shift.late.iter().filter(|l| **l).count(), 10);
    }
}

#[test]
fn late_weekend_arrival_without_delay() {
    let cfg = ScenarioConfig {
        mean_delay: 0.0,
        ..ScenarioConfig::default()
    };
    let day = 5;
    let start = day as Time * MINUTES_PER_DAY + cfg.shift_start;
    for shift in schedule_arrivals(&cfg, day) {
        for (a, late) in shift.arrival.iter().zip(&shift.late) {
            assert_eq!(*a - start, if *late { -15 } else { -30 });
        }
    }
}

#[test]
fn arrivals_are_reproducible() {
    let cfg = ScenarioConfig::default();
    assert_eq!(schedule_arrivals(&cfg, 3), schedule_arrivals(&cfg, 3));
    assert_ne!(schedule_arrivals(&cfg, 3), schedule_arrivals(&cfg, 4));
}

#[test]
fn lateness_squares_delays_past_start() {
    assert_eq!(lateness(100, [Some(103)], 10_000), 9);
    assert_eq!(lateness(100, [Some(90), Some(100), None::<Time>], 105), 25);
}

#[test]
fn no_delay_and_no_late_workers_is_quiet() {
    let mut f = Factory::new(ScenarioConfig {
        mean_delay: 0.0,
        late_fraction: 0.0,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let set = f.rigid_ensembles().unwrap();
    let rows = run_days(&mut f, set, 1, 0..7, Policy::Rigid, None, None);
    assert!(rows
        .iter()
        .all(|r| r.standbys_called == 0 && r.canceled == 0 && r.lateness == 0));
}

#[test]
fn canceled_worker_is_replaced_by_a_standby() {
    // one late-bus worker on a business day: at the factory at start - 15, so
    // absent at start - 16 and canceled; the standby enters at start + 14 and
    // reaches the workplace 2 + 3 minutes later.
    let mut f = Factory::new(ScenarioConfig {
        late_fraction: 1.0,
        ..small(1, 1)
    })
    .unwrap();
    let start = start_of(&f, 0);
    let mut rt = EnsembleRuntime::new(f.rigid_ensembles().unwrap());
    let out = f.run_day(0, &mut rt, None, false);
    assert_eq!(out.shifts, vec![(1, 1, 19 * 19)]);
    let worker = f.layout.assigned[0][0];
    let standby = f.layout.standbys[0][0];
    assert!(out
        .notifications
        .contains(&(start - 16, worker, "canceled".into())));
    assert!(out
        .notifications
        .contains(&(start - 16, standby, "calledIn".into())));
    assert_eq!(
        f.agent(standby).unwrap().workplace_arrival,
        Some(start + 19)
    );
    assert!(f.agent(worker).unwrap().canceled);
}

#[test]
fn canceled_notification_is_delivered_once() {
    let mut f = Factory::new(small(1, 1)).unwrap();
    let start = start_of(&f, 0);
    let worker = f.layout.assigned[0][0];
    // the worker never shows up; replay three ticks from the rigid cutoff
    f.begin_day(
        0,
        &[ShiftArrivals {
            arrival: vec![Time::MAX / 2],
            late: vec![true],
        }],
    );
    let mut rt = EnsembleRuntime::new(f.rigid_ensembles().unwrap());
    let mut pending = 0;
    let mut delivered = 0;
    for now in start - 16..start - 13 {
        let out = rt.step(&f.population, now);
        pending += out
            .resolution
            .pending
            .iter()
            .filter(|n| n.component == worker && &*n.tag == "canceled")
            .count();
        delivered += out
            .delivered
            .iter()
            .filter(|n| n.component == worker && &*n.tag == "canceled")
            .count();
    }
    assert_eq!(pending, 3);
    assert_eq!(delivered, 1);
}

#[test]
fn factory_access_opens_thirty_minutes_before_start() {
    let mut f = Factory::new(small(2, 1)).unwrap();
    let start = start_of(&f, 0);
    f.begin_day(0, &schedule_arrivals(&f.config, 0));
    let set = f.rigid_ensembles().unwrap();
    let count = |now| {
        set.resolve(&f.population, now)
            .instances
            .iter()
            .filter(|i| i.type_path() == "AccessToFactory")
            .count()
    };
    assert_eq!(count(start - 31), 0);
    assert_eq!(count(start - 30), 1);
}

#[test]
fn two_cancellations_demand_two_standbys() {
    let mut f = Factory::new(small(3, 3)).unwrap();
    let start = start_of(&f, 0);
    let never = Time::MAX / 2;
    let plan = [ShiftArrivals {
        arrival: vec![start - 24, never, never],
        late: vec![false, true, true],
    }];
    let mut rt = EnsembleRuntime::new(f.rigid_ensembles().unwrap());
    let out = f.run_day_with(0, &plan, &mut rt, None, false);
    let called: Vec<_> = out
        .notifications
        .iter()
        .filter(|(_, _, t)| t == "calledIn")
        .collect();
    assert_eq!(called.len(), 2);
    assert!(called.iter().all(|(t, _, _)| *t == start - 16));
    assert_eq!(out.shifts[0].0, 2);
    assert_eq!(out.shifts[0].1, 2);
}

#[test]
fn confident_estimate_keeps_a_worker_past_the_rigid_cutoff() {
    let mut f = Factory::new(small(1, 1)).unwrap();
    let start = start_of(&f, 0);
    let worker = f.layout.assigned[0][0];
    let plan = [ShiftArrivals {
        arrival: vec![start - 8],
        late: vec![true],
    }];
    let estimate = TrainedEstimate::new(f.will_arrive()).with_model(constant(0.9));
    let mut rt = EnsembleRuntime::new(f.ml_ensembles(estimate).unwrap());
    let out = f.run_day_with(0, &plan, &mut rt, None, false);
    assert!(out
        .notifications
        .iter()
        .all(|(_, c, tag)| *c != worker || tag != "canceled"));
    assert_eq!(f.agent(worker).unwrap().workplace_arrival, Some(start));
    assert_eq!(out.shifts, vec![(0, 0, 0)]);

    // the same worker under the rigid rule is canceled at start - 16
    let mut rt = EnsembleRuntime::new(f.rigid_ensembles().unwrap());
    let out = f.run_day_with(0, &plan, &mut rt, None, false);
    assert!(out
        .notifications
        .contains(&(start - 16, worker, "canceled".into())));
}

#[test]
fn worker_inside_is_never_canceled_by_a_pessimistic_estimate() {
    // the gate opens at start - 30; the learned rule goes live ten minutes later
    let mut f = Factory::new(ScenarioConfig {
        ml_window: 20,
        ..small(2, 2)
    })
    .unwrap();
    let start = start_of(&f, 0);
    let (early, late) = (f.layout.assigned[0][0], f.layout.assigned[0][1]);
    let plan = [ShiftArrivals {
        arrival: vec![start - 40, start - 5],
        late: vec![false, true],
    }];
    let estimate = TrainedEstimate::new(f.will_arrive()).with_model(constant(0.1));
    let mut rt = EnsembleRuntime::new(f.ml_ensembles(estimate).unwrap());
    let out = f.run_day_with(0, &plan, &mut rt, None, false);
    let canceled: Vec<ComponentId> = out
        .notifications
        .iter()
        .filter(|(_, _, t)| t == "canceled")
        .map(|(_, c, _)| *c)
        .collect();
    assert!(!canceled.contains(&early));
    assert!(out
        .notifications
        .contains(&(start - 20, late, "canceled".into())));
}

#[test]
fn untrained_estimate_falls_back_to_the_rigid_cutoff() {
    let mut f = Factory::new(small(1, 1)).unwrap();
    let start = start_of(&f, 0);
    let worker = f.layout.assigned[0][0];
    let plan = [ShiftArrivals {
        arrival: vec![start - 8],
        late: vec![true],
    }];
    let estimate = TrainedEstimate::new(f.will_arrive());
    let diag = estimate.diagnostics.clone();
    let mut rt = EnsembleRuntime::new(f.ml_ensembles(estimate).unwrap());
    let out = f.run_day_with(0, &plan, &mut rt, None, false);
    assert!(out
        .notifications
        .contains(&(start - 16, worker, "canceled".into())));
    assert!(diag.snapshot().2 > 0);
}

#[test]
fn a_default_week_passes_the_audits() {
    let mut f = Factory::new(ScenarioConfig::default()).unwrap();
    let set = f.rigid_ensembles().unwrap();
    let rows = run_days(&mut f, set, 1, 0..7, Policy::Rigid, None, None);
    assert_eq!(rows.len(), 21);
    let d = &f.diagnostics;
    assert_eq!(d.unauthorized_entries, 0);
    assert_eq!(d.cancel_conflicts, 0);
    assert_eq!(d.duplicate_calls, 0);
    assert_eq!(d.infeasible_selections, 0);
    assert!(rows.iter().all(|r| r.standbys_called == r.canceled));
}
