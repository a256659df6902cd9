//! Worker behaviour: commute, gate, headgear dispenser, workplace.

use super::config::ScenarioConfig;
use super::layout::waypoint;
use crate::model::{ComponentId, PermissionSet, Position, Time};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    AtHome,
    /// On the way to the gate, or waiting at it.
    Traveling,
    AtFactory,
    HasHeadgear,
    AtWorkplace,
    Canceled,
    StandbyIdle,
    StandbyTraveling,
}

/// Resources a worker needs permissions for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resources {
    pub door: ComponentId,
    pub dispenser: ComponentId,
}

/// Something that happened to a worker during one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    EnteredFactory,
    TookHeadgear,
    ReachedWorkplace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerState {
    pub id: ComponentId,
    pub phase: Phase,
    pub position: Position,
    /// Minute the bus drops the worker off (assigned workers only).
    pub arrival_time: Option<Time>,
    /// Earliest tick at which the current movement leg is finished.
    pub ready_at: Time,
    pub canceled: bool,
    /// Shift the worker currently works for (a standby's once called in).
    pub serving: Option<usize>,
    pub workplace: Option<ComponentId>,
    pub workplace_arrival: Option<Time>,
}

impl WorkerState {
    pub fn assigned(
        id: ComponentId,
        shift: usize,
        workplace: ComponentId,
        arrival_time: Time,
    ) -> Self {
        Self {
            id,
            phase: Phase::AtHome,
            position: waypoint::HOME,
            arrival_time: Some(arrival_time),
            ready_at: arrival_time,
            canceled: false,
            serving: Some(shift),
            workplace: Some(workplace),
            workplace_arrival: None,
        }
    }

    pub fn standby(id: ComponentId) -> Self {
        Self {
            id,
            phase: Phase::StandbyIdle,
            position: waypoint::HOME,
            arrival_time: None,
            ready_at: Time::MAX,
            canceled: false,
            serving: None,
            workplace: None,
            workplace_arrival: None,
        }
    }

    pub fn is_at_factory(&self) -> bool {
        matches!(
            self.phase,
            Phase::AtFactory | Phase::HasHeadgear | Phase::AtWorkplace
        )
    }

    pub fn has_headgear(&self) -> bool {
        matches!(self.phase, Phase::HasHeadgear | Phase::AtWorkplace)
    }

    pub fn is_at_workplace(&self) -> bool {
        self.phase == Phase::AtWorkplace
    }

    /// `canceled` notification. Only a worker still outside is sent home;
    /// cancellation lasts for the rest of the day.
    pub fn cancel(&mut self) -> bool {
        if matches!(self.phase, Phase::AtHome | Phase::Traveling) {
            self.phase = Phase::Canceled;
            self.canceled = true;
            self.position = waypoint::HOME;
            true
        } else {
            false
        }
    }

    /// `calledIn` notification: an idle standby heads to the factory.
    pub fn call_in(
        &mut self,
        now: Time,
        shift: usize,
        workplace: ComponentId,
        config: &ScenarioConfig,
    ) -> bool {
        if self.phase != Phase::StandbyIdle {
            return false;
        }
        self.phase = Phase::StandbyTraveling;
        self.ready_at = now + config.standby_travel_time;
        self.serving = Some(shift);
        self.workplace = Some(workplace);
        true
    }

    /// Advances one tick under this tick's permissions. At most one transition per tick.
    pub fn step(
        &mut self,
        now: Time,
        permissions: &PermissionSet,
        resources: &Resources,
        config: &ScenarioConfig,
    ) -> Option<Event> {
        match self.phase {
            Phase::AtHome => {
                if self.arrival_time.is_some_and(|a| now >= a) {
                    self.phase = Phase::Traveling;
                    self.ready_at = now + config.walk_to_gate;
                    self.position = waypoint::GATE;
                }
                None
            }
            Phase::Traveling | Phase::StandbyTraveling => {
                if now >= self.ready_at && permissions.allows(self.id, resources.door, "enter") {
                    self.phase = Phase::AtFactory;
                    self.position = waypoint::DISPENSER;
                    self.ready_at = now + config.walk_to_dispenser;
                    Some(Event::EnteredFactory)
                } else {
                    None
                }
            }
            Phase::AtFactory => {
                if now >= self.ready_at && permissions.allows(self.id, resources.dispenser, "use") {
                    self.phase = Phase::HasHeadgear;
                    self.ready_at = now + config.walk_to_workplace;
                    Some(Event::TookHeadgear)
                } else {
                    None
                }
            }
            Phase::HasHeadgear => {
                let wp = self.workplace?;
                if now >= self.ready_at && permissions.allows(self.id, wp, "enter") {
                    self.phase = Phase::AtWorkplace;
                    self.position = Position {
                        x: waypoint::workplace(0).x,
                        y: self.serving.unwrap_or(0) as f64,
                    };
                    self.workplace_arrival = Some(now);
                    Some(Event::ReachedWorkplace)
                } else {
                    None
                }
            }
            Phase::AtWorkplace | Phase::Canceled | Phase::StandbyIdle => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Permission, PermissionSet};

    fn perms(list: &[(u32, u32, &str)]) -> PermissionSet {
        let mut set = PermissionSet::default();
        for &(c, r, op) in list {
            set.insert(Permission {
                component: ComponentId(c),
                resource: ComponentId(r),
                operation: op.into(),
            });
        }
        set
    }

    const RES: Resources = Resources {
        door: ComponentId(1),
        dispenser: ComponentId(2),
    };

    #[test]
    fn no_entry_permission_keeps_worker_outside() {
        let cfg = ScenarioConfig::default();
        let mut w = WorkerState::assigned(ComponentId(10), 0, ComponentId(3), 0);
        let none = PermissionSet::default();
        for t in 0..20 {
            w.step(t, &none, &RES, &cfg);
        }
        assert_eq!(w.phase, Phase::Traveling);
        assert!(!w.is_at_factory());
    }

    #[test]
    fn headgear_is_required_for_the_workplace() {
        let cfg = ScenarioConfig::default();
        let mut w = WorkerState::assigned(ComponentId(10), 0, ComponentId(3), 0);
        // entry and workplace allowed, dispenser not
        let p = perms(&[(10, 1, "enter"), (10, 3, "enter")]);
        for t in 0..30 {
            w.step(t, &p, &RES, &cfg);
        }
        assert_eq!(w.phase, Phase::AtFactory);
        assert!(!w.is_at_workplace());
    }

    #[test]
    fn full_walk_takes_the_configured_legs() {
        let cfg = ScenarioConfig::default();
        let mut w = WorkerState::assigned(ComponentId(10), 0, ComponentId(3), 100);
        let p = perms(&[(10, 1, "enter"), (10, 2, "use"), (10, 3, "enter")]);
        for t in 90..130 {
            w.step(t, &p, &RES, &cfg);
        }
        assert_eq!(w.workplace_arrival, Some(100 + 3 + 2 + 3));
    }

    #[test]
    fn standby_arrives_after_travel_time() {
        let cfg = ScenarioConfig::default();
        let mut s = WorkerState::standby(ComponentId(11));
        assert!(s.call_in(50, 0, ComponentId(3), &cfg));
        let p = perms(&[(11, 1, "enter")]);
        for t in 50..80 {
            s.step(t, &p, &RES, &cfg);
            assert!(!s.is_at_factory(), "inside too early at {t}");
        }
        s.step(80, &p, &RES, &cfg);
        assert!(s.is_at_factory());
    }

    #[test]
    fn cancellation_only_affects_absent_workers() {
        let mut w = WorkerState::assigned(ComponentId(10), 0, ComponentId(3), 0);
        assert!(w.cancel());
        assert_eq!(w.phase, Phase::Canceled);
        let mut inside = WorkerState::assigned(ComponentId(12), 0, ComponentId(3), 0);
        inside.phase = Phase::AtFactory;
        assert!(!inside.cancel());
    }
}
