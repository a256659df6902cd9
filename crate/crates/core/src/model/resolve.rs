//! Per-step instantiation and dissolution of ensembles, and action execution.
//!
//! Resolution recomputes every instance from scratch each step. The only state
//! carried across steps lives in [`EnsembleRuntime`]: the notification ledger
//! and the activation time of instances that stay live.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use itertools::Itertools;

use super::component::{ComponentId, Population, Time, TypeRegistry};
use super::ensemble::{
    ActionKind, Cardinality, EnsembleType, ResourceRef, RoleBindings, RoleContext, Scope, Selection,
};
use super::ModelError;
use crate::heuristics::{select, Candidate, Demand, SelectionProblem};

/// Identity of an ensemble instance: its type path, its enclosing instance and
/// its static-role assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceKey {
    pub path: Arc<str>,
    pub parent: Option<Arc<InstanceKey>>,
    pub binding: Vec<(Arc<str>, Vec<ComponentId>)>,
}

impl InstanceKey {
    pub fn top_level(path: &str, binding: Vec<(Arc<str>, Vec<ComponentId>)>) -> Self {
        Self {
            path: path.into(),
            parent: None,
            binding,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleInstance {
    pub key: Arc<InstanceKey>,
    /// Static roles first (in declaration order), then dynamic roles.
    roles: Vec<(Arc<str>, Vec<ComponentId>)>,
    static_count: usize,
    /// Index of the enclosing instance in [`Resolution::instances`].
    pub parent: Option<usize>,
    pub active_since: Time,
}

impl EnsembleInstance {
    /// Dotted type path, e.g. `CancelLateWorkers.ReplaceLateWithStandbys`.
    pub fn type_path(&self) -> &str {
        &self.key.path
    }

    pub fn static_binding(&self) -> &[(Arc<str>, Vec<ComponentId>)] {
        &self.roles[..self.static_count]
    }

    pub fn dynamic_binding(&self) -> &[(Arc<str>, Vec<ComponentId>)] {
        &self.roles[self.static_count..]
    }

    pub fn role(&self, name: &str) -> Option<&[ComponentId]> {
        self.roles
            .iter()
            .find(|(n, _)| &**n == name)
            .map(|(_, ids)| ids.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permission {
    pub component: ComponentId,
    pub resource: ComponentId,
    pub operation: Arc<str>,
}

/// Permissions granted by the live instances of one step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PermissionSet {
    entries: BTreeSet<Permission>,
}

impl PermissionSet {
    pub fn allows(&self, component: ComponentId, resource: ComponentId, operation: &str) -> bool {
        self.entries.contains(&Permission {
            component,
            resource,
            operation: operation.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Permission> {
        self.entries.iter()
    }

    pub(crate) fn insert(&mut self, p: Permission) {
        self.entries.insert(p);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Notification {
    pub instance: Arc<InstanceKey>,
    pub component: ComponentId,
    pub tag: Arc<str>,
}

/// Output of one pure resolution pass.
#[derive(Debug, Clone, Default)]
pub struct Resolution {
    pub instances: Vec<EnsembleInstance>,
    pub permissions: PermissionSet,
    /// Every notify action of every live instance, before deduplication.
    pub pending: Vec<Notification>,
    /// Type paths whose exclusive selection was infeasible this step.
    pub infeasible: Vec<Arc<str>>,
}

impl Resolution {
    /// Line-oriented dump: `step;ensembleType;staticBinding;role=ids...`.
    pub fn dump(&self, step: Time) -> String {
        let mut out = String::new();
        for inst in &self.instances {
            let mut statics = Vec::new();
            let mut k = Some(&inst.key);
            let mut chain = Vec::new();
            while let Some(key) = k {
                chain.push(key);
                k = key.parent.as_ref();
            }
            for key in chain.iter().rev() {
                for (name, ids) in &key.binding {
                    statics.push(format!("{name}={}", ids.iter().join(",")));
                }
            }
            let _ = write!(out, "{step};{};{}", inst.type_path(), statics.join("&"));
            for (name, ids) in inst.dynamic_binding() {
                let _ = write!(out, ";{name}={}", ids.iter().join(","));
            }
            out.push('\n');
        }
        out
    }
}

/// A validated, immutable collection of top-level ensemble types.
///
/// Cheap to clone and safe to share between concurrently running simulations.
#[derive(Debug, Clone)]
pub struct EnsembleSet {
    types: Arc<Vec<EnsembleType>>,
    type_count: usize,
}

impl EnsembleSet {
    pub fn new(registry: &TypeRegistry) -> Self {
        Self {
            types: Arc::new(Vec::new()),
            type_count: registry.len(),
        }
    }

    pub fn register(&mut self, ty: EnsembleType) -> Result<(), ModelError> {
        if self.types.iter().any(|t| t.name() == ty.name()) {
            return Err(ModelError::DuplicateEnsemble(ty.name().to_string()));
        }
        ty.validate(&[], self.type_count)?;
        Arc::make_mut(&mut self.types).push(ty);
        Ok(())
    }

    pub fn types(&self) -> &[EnsembleType] {
        &self.types
    }

    /// Resolves all ensembles against the population at time `now`.
    pub fn resolve(&self, population: &Population, now: Time) -> Resolution {
        let mut res = Resolution::default();
        for ty in self.types.iter() {
            resolve_type(ty, ty.name.clone(), &[None], population, now, &mut res);
        }
        res
    }
}

struct Partial {
    parent: Option<usize>,
    key_parent: Option<Arc<InstanceKey>>,
    roles: Vec<(Arc<str>, Vec<ComponentId>)>,
}

fn scope_for<'a>(
    roles: &'a RoleBindings,
    parent: Option<usize>,
    instances: &'a [EnsembleInstance],
) -> Scope<'a> {
    let mut levels = vec![roles];
    let mut p = parent;
    while let Some(i) = p {
        levels.push(&instances[i].roles);
        p = instances[i].parent;
    }
    Scope { levels }
}

fn eval_cardinality(card: &Cardinality, scope: &Scope<'_>) -> (usize, usize) {
    match card {
        Cardinality::Range(lo, hi) => (*lo, *hi),
        Cardinality::Unbounded => (0, usize::MAX),
        Cardinality::SizeOf(role) => {
            let n = scope.lookup(role).map_or(0, |ids| ids.len());
            (n, n)
        }
    }
}

/// All static-role assignments in ascending-id lexicographic order.
fn static_assignments(
    ty: &EnsembleType,
    population: &Population,
) -> Vec<Vec<(Arc<str>, Vec<ComponentId>)>> {
    let per_role: Vec<Vec<Vec<ComponentId>>> = ty
        .static_roles
        .iter()
        .map(|role| {
            let ids: Vec<ComponentId> = population
                .of_type(role.component_type)
                .map(|c| c.id())
                .collect();
            (role.min..=role.max.min(ids.len()))
                .flat_map(|k| ids.iter().copied().combinations(k).collect::<Vec<_>>())
                .collect()
        })
        .collect();
    if per_role.is_empty() {
        return vec![Vec::new()];
    }
    per_role
        .into_iter()
        .multi_cartesian_product()
        .map(|choice| {
            ty.static_roles
                .iter()
                .zip(choice)
                .map(|(role, ids)| (Arc::<str>::from(role.name.as_str()), ids))
                .collect()
        })
        .collect()
}

fn resolve_type(
    ty: &EnsembleType,
    path: Arc<str>,
    parents: &[Option<usize>],
    population: &Population,
    now: Time,
    res: &mut Resolution,
) {
    let assignments = static_assignments(ty, population);
    let mut partials = Vec::new();
    for &parent in parents {
        let key_parent = parent.map(|i| res.instances[i].key.clone());
        for binding in &assignments {
            let roles = binding.clone();
            let wanted = match &ty.situation {
                None => true,
                Some(situation) => {
                    let scope = scope_for(&roles, parent, &res.instances);
                    situation(&RoleContext {
                        population,
                        now,
                        scope: &scope,
                    })
                }
            };
            if wanted {
                partials.push(Partial {
                    parent,
                    key_parent: key_parent.clone(),
                    roles,
                });
            }
        }
    }

    for role in &ty.dynamic_roles {
        if partials.is_empty() {
            break;
        }
        let role_name: Arc<str> = role.name.as_str().into();
        match &role.selection {
            Selection::Filter(cond) => {
                partials.retain_mut(|p| {
                    let scope = scope_for(&p.roles, p.parent, &res.instances);
                    let ctx = RoleContext {
                        population,
                        now,
                        scope: &scope,
                    };
                    let (lo, hi) = eval_cardinality(&role.cardinality, &scope);
                    let chosen: Vec<ComponentId> = population
                        .of_type(role.component_type)
                        .filter(|c| cond(&ctx, c))
                        .map(|c| c.id())
                        .collect();
                    drop(scope);
                    if chosen.len() < lo || chosen.len() > hi {
                        return false;
                    }
                    p.roles.push((role_name.clone(), chosen));
                    true
                });
            }
            Selection::Exclusive {
                eligible,
                cost,
                strategy,
            } => {
                let mut demands = Vec::with_capacity(partials.len());
                let mut eligibility: BTreeMap<ComponentId, Vec<usize>> = BTreeMap::new();
                let mut costs: HashMap<(ComponentId, usize), f64> = HashMap::new();
                for (pi, p) in partials.iter().enumerate() {
                    let scope = scope_for(&p.roles, p.parent, &res.instances);
                    let ctx = RoleContext {
                        population,
                        now,
                        scope: &scope,
                    };
                    let (count, _) = eval_cardinality(&role.cardinality, &scope);
                    demands.push(Demand {
                        instance: pi,
                        count,
                    });
                    for c in population.of_type(role.component_type) {
                        if eligible(&ctx, c) {
                            eligibility.entry(c.id()).or_default().push(pi);
                            if let Some(cost) = cost {
                                costs.insert((c.id(), pi), cost(&ctx, c));
                            }
                        }
                    }
                }
                let problem = SelectionProblem {
                    instances: demands,
                    candidates: eligibility
                        .into_iter()
                        .map(|(component, eligible)| Candidate {
                            component,
                            eligible,
                        })
                        .collect(),
                    cost: if costs.is_empty() {
                        None
                    } else {
                        Some(Arc::new(move |c, i| {
                            costs.get(&(c, i)).copied().unwrap_or(0.0)
                        }))
                    },
                };
                match select(*strategy, &problem) {
                    Some(assignment) => {
                        for (pi, p) in partials.iter_mut().enumerate() {
                            let ids = assignment.members(pi).to_vec();
                            p.roles.push((role_name.clone(), ids));
                        }
                    }
                    None => {
                        log::debug!(
                            "exclusive selection for {path}.{} infeasible at {now}",
                            role.name
                        );
                        res.infeasible.push(path.clone());
                        partials.clear();
                    }
                }
            }
        }
    }

    let first_new = res.instances.len();
    let static_count = ty.static_roles.len();
    for p in partials {
        let key = Arc::new(InstanceKey {
            path: path.clone(),
            parent: p.key_parent,
            binding: p.roles[..static_count].to_vec(),
        });
        res.instances.push(EnsembleInstance {
            key,
            roles: p.roles,
            static_count,
            parent: p.parent,
            active_since: now,
        });
    }
    let live: Vec<usize> = (first_new..res.instances.len()).collect();

    for &i in &live {
        collect_actions(ty, i, population, res);
    }

    if !live.is_empty() {
        let parents: Vec<Option<usize>> = live.iter().map(|&i| Some(i)).collect();
        for inner in &ty.inner {
            let inner_path: Arc<str> = format!("{path}.{}", inner.name).into();
            resolve_type(inner, inner_path, &parents, population, now, res);
        }
    }
}

fn collect_actions(ty: &EnsembleType, idx: usize, population: &Population, res: &mut Resolution) {
    let inst = &res.instances[idx];
    let mut perms = Vec::new();
    let mut notes = Vec::new();
    for action in &ty.actions {
        let Some(members) = inst.role(&action.target_role) else {
            continue;
        };
        match &action.kind {
            ActionKind::Allow {
                resource,
                operation,
            } => {
                let target = match resource {
                    ResourceRef::Component(id) => Some(*id),
                    ResourceRef::RoleField { role, field } => {
                        let scope = scope_for(&inst.roles, inst.parent, &res.instances);
                        scope
                            .lookup(role)
                            .and_then(|ids| ids.first())
                            .and_then(|id| population.get(*id))
                            .and_then(|c| c.get(field))
                            .and_then(|v| v.as_id())
                    }
                };
                let Some(resource) = target else {
                    log::debug!(
                        "allow action of {} has no resolvable resource",
                        inst.type_path()
                    );
                    continue;
                };
                let op: Arc<str> = operation.as_str().into();
                perms.extend(members.iter().map(|&component| Permission {
                    component,
                    resource,
                    operation: op.clone(),
                }));
            }
            ActionKind::Notify { tag } => {
                let tag: Arc<str> = tag.as_str().into();
                notes.extend(members.iter().map(|&component| Notification {
                    instance: inst.key.clone(),
                    component,
                    tag: tag.clone(),
                }));
            }
        }
    }
    for p in perms {
        res.permissions.insert(p);
    }
    res.pending.extend(notes);
}

/// Outcome of one runtime step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub resolution: Resolution,
    /// Notifications delivered this step, after suppressing redeliveries.
    pub delivered: Vec<Notification>,
}

/// Mutable per-simulation state around an [`EnsembleSet`].
#[derive(Debug, Clone)]
pub struct EnsembleRuntime {
    set: EnsembleSet,
    ledger: HashSet<(Arc<InstanceKey>, ComponentId, Arc<str>)>,
    active_since: HashMap<Arc<InstanceKey>, Time>,
}

impl EnsembleRuntime {
    pub fn new(set: EnsembleSet) -> Self {
        Self {
            set,
            ledger: HashSet::new(),
            active_since: HashMap::new(),
        }
    }

    pub fn ensembles(&self) -> &EnsembleSet {
        &self.set
    }

    /// Resolves and executes actions for one simulation step.
    pub fn step(&mut self, population: &Population, now: Time) -> StepOutcome {
        let mut resolution = self.set.resolve(population, now);
        let mut since = HashMap::with_capacity(resolution.instances.len());
        for inst in &mut resolution.instances {
            let t = self.active_since.get(&inst.key).copied().unwrap_or(now);
            inst.active_since = t;
            since.insert(inst.key.clone(), t);
        }
        self.active_since = since;
        let delivered = self.execute_actions(&resolution);
        StepOutcome {
            resolution,
            delivered,
        }
    }

    /// Delivers each pending notification at most once per (instance, component, tag)
    /// while the instance stays live. Ledger entries of dissolved instances are dropped.
    pub fn execute_actions(&mut self, resolution: &Resolution) -> Vec<Notification> {
        let live: HashSet<&Arc<InstanceKey>> =
            resolution.instances.iter().map(|i| &i.key).collect();
        self.ledger.retain(|(key, _, _)| live.contains(key));
        let mut delivered = Vec::new();
        for n in &resolution.pending {
            if self
                .ledger
                .insert((n.instance.clone(), n.component, n.tag.clone()))
            {
                delivered.push(n.clone());
            }
        }
        delivered
    }
}
