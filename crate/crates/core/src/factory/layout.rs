//! Factory component types and the initial population.

use std::sync::Arc;

use super::config::ScenarioConfig;
use crate::model::{
    ComponentId, ComponentType, FieldKind, ModelError, Population, TypeHandle, TypeRegistry, Value,
};

/// Field positions of the `Worker` type.
pub mod worker {
    pub const POSITION: usize = 0;
    pub const HAS_HEADGEAR: usize = 1;
    pub const IS_AT_FACTORY: usize = 2;
    pub const IS_AT_WORKPLACE: usize = 3;
    pub const CANCELED: usize = 4;
    pub const SHIFT: usize = 5;
    pub const STANDBY: usize = 6;
}

/// Field positions of the `Shift` type.
pub mod shift {
    pub const WORK_PLACE: usize = 0;
    pub const START_TIME: usize = 1;
    pub const END_TIME: usize = 2;
    pub const ASSIGNED: usize = 3;
    pub const WORKERS: usize = 4;
    pub const STAND_BYS: usize = 5;
    pub const CALLED_STANDBYS: usize = 6;
    pub const CANCELLED: usize = 7;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactoryTypes {
    pub door: TypeHandle,
    pub dispenser: TypeHandle,
    pub workplace: TypeHandle,
    pub factory: TypeHandle,
    pub shift: TypeHandle,
    pub worker: TypeHandle,
}

/// Registers the six factory component types.
pub fn register_types(registry: &mut TypeRegistry) -> Result<FactoryTypes, ModelError> {
    let door =
        registry.register(ComponentType::new("Door").field("position", FieldKind::Position))?;
    let dispenser = registry
        .register(ComponentType::new("Dispenser").field("position", FieldKind::Position))?;
    let workplace = registry
        .register(ComponentType::new("WorkPlace").field("position", FieldKind::Position))?;
    let factory = registry.register(
        ComponentType::new("Factory")
            .field("entryDoor", FieldKind::Id)
            .field("dispenser", FieldKind::Id)
            .field("workplaces", FieldKind::Ids),
    )?;
    let shift = registry.register(
        ComponentType::new("Shift")
            .field("workPlace", FieldKind::Id)
            .field("startTime", FieldKind::Time)
            .field("endTime", FieldKind::Time)
            .field("assigned", FieldKind::Ids)
            .field("workers", FieldKind::Ids)
            .field("standBys", FieldKind::Ids)
            .field("calledStandbys", FieldKind::Ids)
            .field("cancelled", FieldKind::Ids),
    )?;
    let worker = registry.register(
        ComponentType::new("Worker")
            .field("position", FieldKind::Position)
            .field("hasHeadgear", FieldKind::Boolean)
            .field("isAtFactory", FieldKind::Boolean)
            .field("isAtWorkplace", FieldKind::Boolean)
            .field("canceled", FieldKind::Boolean)
            .field("shift", FieldKind::Id)
            .field("standby", FieldKind::Boolean)
            .beyond_control(),
    )?;
    Ok(FactoryTypes {
        door,
        dispenser,
        workplace,
        factory,
        shift,
        worker,
    })
}

/// Symbolic waypoints.
pub mod waypoint {
    use crate::model::Position;

    pub const HOME: Position = Position { x: 0.0, y: 0.0 };
    pub const GATE: Position = Position { x: 1.0, y: 0.0 };
    pub const DISPENSER: Position = Position { x: 2.0, y: 0.0 };

    pub fn workplace(index: usize) -> Position {
        Position {
            x: 3.0,
            y: index as f64,
        }
    }
}

/// Ids of everything in the factory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub door: ComponentId,
    pub dispenser: ComponentId,
    pub factory: ComponentId,
    pub workplaces: Vec<ComponentId>,
    pub shifts: Vec<ComponentId>,
    /// Assigned workers per shift.
    pub assigned: Vec<Vec<ComponentId>>,
    /// Standby pool per shift (the union is the global pool).
    pub standbys: Vec<Vec<ComponentId>>,
}

impl Layout {
    pub fn all_standbys(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.standbys.iter().flatten().copied()
    }

    pub fn shift_index(&self, id: ComponentId) -> Option<usize> {
        self.shifts.iter().position(|&s| s == id)
    }
}

/// Builds the population. Ids are dense and ascending: door, dispenser,
/// workplaces, factory, shifts, then each shift's workers followed by its standbys.
pub fn build_population(
    config: &ScenarioConfig,
    registry: Arc<TypeRegistry>,
    types: &FactoryTypes,
) -> Result<(Population, Layout), ModelError> {
    let mut pop = Population::new(registry);
    let mut next = 0u32;
    let mut fresh = || {
        next += 1;
        ComponentId(next)
    };
    let door = fresh();
    pop.insert(
        door,
        types.door,
        vec![("position", Value::Position(waypoint::GATE))],
    )?;
    let dispenser = fresh();
    pop.insert(
        dispenser,
        types.dispenser,
        vec![("position", Value::Position(waypoint::DISPENSER))],
    )?;
    let workplaces: Vec<ComponentId> = (0..config.shifts).map(|_| fresh()).collect();
    for (i, &wp) in workplaces.iter().enumerate() {
        pop.insert(
            wp,
            types.workplace,
            vec![("position", Value::Position(waypoint::workplace(i)))],
        )?;
    }
    let factory = fresh();
    pop.insert(
        factory,
        types.factory,
        vec![
            ("entryDoor", Value::Id(door)),
            ("dispenser", Value::Id(dispenser)),
            ("workplaces", Value::ids(workplaces.iter().copied())),
        ],
    )?;
    let shifts: Vec<ComponentId> = (0..config.shifts).map(|_| fresh()).collect();
    let mut assigned = Vec::new();
    let mut standbys = Vec::new();
    for _ in 0..config.shifts {
        assigned.push(
            (0..config.workers_per_shift)
                .map(|_| fresh())
                .collect::<Vec<_>>(),
        );
        standbys.push(
            (0..config.standbys_per_shift)
                .map(|_| fresh())
                .collect::<Vec<_>>(),
        );
    }
    for (i, &s) in shifts.iter().enumerate() {
        pop.insert(
            s,
            types.shift,
            vec![
                ("workPlace", Value::Id(workplaces[i])),
                ("startTime", Value::Time(0)),
                ("endTime", Value::Time(0)),
                ("assigned", Value::ids(assigned[i].iter().copied())),
                ("workers", Value::ids(assigned[i].iter().copied())),
                ("standBys", Value::ids(standbys[i].iter().copied())),
                ("calledStandbys", Value::ids([])),
                ("cancelled", Value::ids([])),
            ],
        )?;
        let members = assigned[i]
            .iter()
            .map(|&w| (w, false))
            .chain(standbys[i].iter().map(|&w| (w, true)));
        for (w, is_standby) in members {
            pop.insert(
                w,
                types.worker,
                vec![
                    ("position", Value::Position(waypoint::HOME)),
                    ("hasHeadgear", Value::Bool(false)),
                    ("isAtFactory", Value::Bool(false)),
                    ("isAtWorkplace", Value::Bool(false)),
                    ("canceled", Value::Bool(false)),
                    ("shift", Value::Id(s)),
                    ("standby", Value::Bool(is_standby)),
                ],
            )?;
        }
    }
    Ok((
        pop,
        Layout {
            door,
            dispenser,
            factory,
            workplaces,
            shifts,
            assigned,
            standbys,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_distinct_types_with_expected_field_order() {
        let mut reg = TypeRegistry::new();
        let t = register_types(&mut reg).unwrap();
        let handles = [
            t.door,
            t.dispenser,
            t.workplace,
            t.factory,
            t.shift,
            t.worker,
        ];
        let mut idx: Vec<usize> = handles.iter().map(|h| h.index()).collect();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 6);
        let w = reg.get(t.worker);
        assert!(w.is_beyond_control());
        assert_eq!(w.field_index("isAtFactory"), Some(worker::IS_AT_FACTORY));
        assert_eq!(w.field_index("canceled"), Some(worker::CANCELED));
        assert_eq!(w.field_index("standby"), Some(worker::STANDBY));
        let s = reg.get(t.shift);
        assert_eq!(
            s.field_index("calledStandbys"),
            Some(shift::CALLED_STANDBYS)
        );
        assert_eq!(s.field_index("cancelled"), Some(shift::CANCELLED));
        assert!(register_types(&mut reg).is_err());
    }

    #[test]
    fn population_has_every_worker_once() {
        let cfg = ScenarioConfig {
            shifts: 2,
            workers_per_shift: 4,
            standbys_per_shift: 3,
            ..ScenarioConfig::default()
        };
        let mut reg = TypeRegistry::new();
        let t = register_types(&mut reg).unwrap();
        let (pop, layout) = build_population(&cfg, Arc::new(reg), &t).unwrap();
        assert_eq!(pop.of_type(t.worker).count(), 14);
        assert_eq!(layout.all_standbys().count(), 6);
        assert_eq!(pop.of_type(t.shift).count(), 2);
    }
}
