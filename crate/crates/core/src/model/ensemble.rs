//! Declarative ensemble types: roles, situation, actions and nesting.

use std::fmt;
use std::sync::Arc;

use super::component::{ComponentId, ComponentInstance, Population, Time, TypeHandle};
use super::ModelError;
use crate::heuristics::SelectStrategy;

/// Read-only view handed to situations, membership conditions, and selector costs.
///
/// Role lookups search the instance being resolved first and then the
/// enclosing instances, innermost first.
pub struct RoleContext<'a> {
    pub population: &'a Population,
    pub now: Time,
    pub(crate) scope: &'a Scope<'a>,
}

impl<'a> RoleContext<'a> {
    /// Ids bound to `role` in this instance or an enclosing one.
    pub fn role(&self, role: &str) -> Option<&'a [ComponentId]> {
        self.scope.lookup(role)
    }

    /// First component bound to `role`; convenient for singleton static roles.
    pub fn member(&self, role: &str) -> Option<&'a ComponentInstance> {
        self.role(role)
            .and_then(|ids| ids.first())
            .and_then(|id| self.population.get(*id))
    }
}

pub(crate) type RoleBindings = [(Arc<str>, Vec<ComponentId>)];

/// Chain of role bindings: the partial instance being resolved, then its ancestors.
pub(crate) struct Scope<'a> {
    pub(crate) levels: Vec<&'a RoleBindings>,
}

impl<'a> Scope<'a> {
    pub(crate) fn lookup(&self, role: &str) -> Option<&'a [ComponentId]> {
        self.levels.iter().find_map(|level| {
            level
                .iter()
                .find(|(name, _)| &**name == role)
                .map(|(_, ids)| ids.as_slice())
        })
    }
}

pub type Situation = Arc<dyn Fn(&RoleContext<'_>) -> bool + Send + Sync>;
pub type Membership = Arc<dyn Fn(&RoleContext<'_>, &ComponentInstance) -> bool + Send + Sync>;
pub type SelectCost = Arc<dyn Fn(&RoleContext<'_>, &ComponentInstance) -> f64 + Send + Sync>;

/// Allowed size of a role binding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cardinality {
    /// Inclusive interval.
    Range(usize, usize),
    /// `[*]`: any size, including zero.
    Unbounded,
    /// Exactly as many members as the named, earlier-resolved role currently has.
    SizeOf(String),
}

impl Cardinality {
    pub fn exactly(n: usize) -> Self {
        Cardinality::Range(n, n)
    }
}

#[derive(Debug, Clone)]
pub struct StaticRoleSpec {
    pub name: String,
    pub component_type: TypeHandle,
    pub min: usize,
    pub max: usize,
}

/// How the members of a dynamic role are chosen.
#[derive(Clone)]
pub enum Selection {
    /// Every candidate satisfying the condition is selected.
    Filter(Membership),
    /// Candidates satisfying `eligible` are distributed exclusively among all
    /// competing instances of the ensemble type by an assignment heuristic.
    Exclusive {
        eligible: Membership,
        cost: Option<SelectCost>,
        strategy: SelectStrategy,
    },
}

#[derive(Clone)]
pub struct DynamicRoleSpec {
    pub name: String,
    pub component_type: TypeHandle,
    pub cardinality: Cardinality,
    pub selection: Selection,
}

impl DynamicRoleSpec {
    /// Condition-based role.
    pub fn filter<F>(
        name: &str,
        component_type: TypeHandle,
        cardinality: Cardinality,
        cond: F,
    ) -> Self
    where
        F: Fn(&RoleContext<'_>, &ComponentInstance) -> bool + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            component_type,
            cardinality,
            selection: Selection::Filter(Arc::new(cond)),
        }
    }

    /// Heuristic exclusive-selection role with the given source condition.
    pub fn exclusive<F>(
        name: &str,
        component_type: TypeHandle,
        cardinality: Cardinality,
        eligible: F,
    ) -> Self
    where
        F: Fn(&RoleContext<'_>, &ComponentInstance) -> bool + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            component_type,
            cardinality,
            selection: Selection::Exclusive {
                eligible: Arc::new(eligible),
                cost: None,
                strategy: SelectStrategy::Greedy,
            },
        }
    }

    /// Sets the preference cost of an exclusive role (lower is preferred).
    pub fn with_cost<F>(mut self, f: F) -> Self
    where
        F: Fn(&RoleContext<'_>, &ComponentInstance) -> f64 + Send + Sync + 'static,
    {
        if let Selection::Exclusive { cost, .. } = &mut self.selection {
            *cost = Some(Arc::new(f));
        }
        self
    }

    pub fn with_strategy(mut self, s: SelectStrategy) -> Self {
        if let Selection::Exclusive { strategy, .. } = &mut self.selection {
            *strategy = s;
        }
        self
    }
}

impl fmt::Debug for DynamicRoleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.selection {
            Selection::Filter(_) => "filter",
            Selection::Exclusive { .. } => "exclusive",
        };
        f.debug_struct("DynamicRoleSpec")
            .field("name", &self.name)
            .field("component_type", &self.component_type)
            .field("cardinality", &self.cardinality)
            .field("selection", &kind)
            .finish()
    }
}

/// Target resource of an `allow` action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResourceRef {
    Component(ComponentId),
    /// An `Id` field of the first component bound to a role, e.g. `shift.workPlace`.
    RoleField {
        role: String,
        field: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionKind {
    Allow {
        resource: ResourceRef,
        operation: String,
    },
    Notify {
        tag: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpec {
    pub target_role: String,
    pub kind: ActionKind,
}

impl ActionSpec {
    pub fn allow(role: &str, resource: ResourceRef, operation: &str) -> Self {
        Self {
            target_role: role.to_string(),
            kind: ActionKind::Allow {
                resource,
                operation: operation.to_string(),
            },
        }
    }

    pub fn notify(role: &str, tag: &str) -> Self {
        Self {
            target_role: role.to_string(),
            kind: ActionKind::Notify {
                tag: tag.to_string(),
            },
        }
    }
}

#[derive(Clone)]
pub struct EnsembleType {
    pub(crate) name: Arc<str>,
    pub(crate) static_roles: Vec<StaticRoleSpec>,
    pub(crate) situation: Option<Situation>,
    pub(crate) dynamic_roles: Vec<DynamicRoleSpec>,
    pub(crate) actions: Vec<ActionSpec>,
    pub(crate) inner: Vec<EnsembleType>,
}

impl fmt::Debug for EnsembleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnsembleType")
            .field("name", &self.name)
            .field("static_roles", &self.static_roles)
            .field("dynamic_roles", &self.dynamic_roles)
            .field("actions", &self.actions)
            .field("inner", &self.inner)
            .finish()
    }
}

impl EnsembleType {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            static_roles: Vec::new(),
            situation: None,
            dynamic_roles: Vec::new(),
            actions: Vec::new(),
            inner: Vec::new(),
        }
    }

    pub fn static_role(
        mut self,
        name: &str,
        component_type: TypeHandle,
        min: usize,
        max: usize,
    ) -> Self {
        self.static_roles.push(StaticRoleSpec {
            name: name.to_string(),
            component_type,
            min,
            max,
        });
        self
    }

    /// Without a situation the ensemble is wanted whenever its roles are satisfiable.
    pub fn situation<F>(mut self, f: F) -> Self
    where
        F: Fn(&RoleContext<'_>) -> bool + Send + Sync + 'static,
    {
        self.situation = Some(Arc::new(f));
        self
    }

    pub fn dynamic_role(mut self, role: DynamicRoleSpec) -> Self {
        self.dynamic_roles.push(role);
        self
    }

    pub fn action(mut self, action: ActionSpec) -> Self {
        self.actions.push(action);
        self
    }

    pub fn inner(mut self, inner: EnsembleType) -> Self {
        self.inner.push(inner);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn static_roles(&self) -> &[StaticRoleSpec] {
        &self.static_roles
    }

    pub fn dynamic_roles(&self) -> &[DynamicRoleSpec] {
        &self.dynamic_roles
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn inner_types(&self) -> &[EnsembleType] {
        &self.inner
    }

    /// Checks role naming, cardinalities, `SizeOf` references and action targets,
    /// recursively for inner types. `enclosing` lists role names visible from outside.
    pub(crate) fn validate(
        &self,
        enclosing: &[String],
        type_count: usize,
    ) -> Result<(), ModelError> {
        let err = |reason: String| ModelError::InvalidEnsemble {
            ensemble: self.name.to_string(),
            reason,
        };
        let mut visible: Vec<String> = enclosing.to_vec();
        let mut own: Vec<String> = Vec::new();
        let mut declare = |name: &str, visible: &mut Vec<String>| -> Result<(), ModelError> {
            if visible.iter().any(|n| n == name) {
                return Err(err(format!(
                    "role `{name}` is declared twice or shadows an enclosing role"
                )));
            }
            visible.push(name.to_string());
            own.push(name.to_string());
            Ok(())
        };

        for role in &self.static_roles {
            if role.component_type.0 >= type_count {
                return Err(err(format!(
                    "role `{}` has an unregistered component type",
                    role.name
                )));
            }
            if role.min < 1 || role.min > role.max {
                return Err(err(format!(
                    "static role `{}` needs 1 <= lo <= hi, got [{}, {}]",
                    role.name, role.min, role.max
                )));
            }
            declare(&role.name, &mut visible)?;
        }
        for role in &self.dynamic_roles {
            if role.component_type.0 >= type_count {
                return Err(err(format!(
                    "role `{}` has an unregistered component type",
                    role.name
                )));
            }
            if let Selection::Exclusive { .. } = role.selection {
                match role.cardinality {
                    Cardinality::Range(lo, hi) if lo == hi => {}
                    Cardinality::SizeOf(_) => {}
                    _ => {
                        return Err(err(format!(
                            "exclusive role `{}` needs an exact cardinality",
                            role.name
                        )))
                    }
                }
            }
            match &role.cardinality {
                Cardinality::Range(lo, hi) if lo > hi => {
                    return Err(err(format!("role `{}` has lo > hi", role.name)));
                }
                Cardinality::SizeOf(other) if !visible.iter().any(|n| n == other) => {
                    return Err(err(format!(
                        "cardinality of `{}` references `{other}`, which is not declared earlier",
                        role.name
                    )));
                }
                _ => {}
            }
            declare(&role.name, &mut visible)?;
        }
        for action in &self.actions {
            if !own.contains(&action.target_role) {
                return Err(err(format!(
                    "action targets `{}`, which is not a role of this ensemble",
                    action.target_role
                )));
            }
            if let ActionKind::Allow {
                resource: ResourceRef::RoleField { role, .. },
                ..
            } = &action.kind
            {
                if !visible.iter().any(|n| n == role) {
                    return Err(err(format!("allow resource reads unknown role `{role}`")));
                }
            }
        }
        for inner in &self.inner {
            inner.validate(&visible, type_count)?;
        }
        Ok(())
    }
}
