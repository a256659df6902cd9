//! Brute-force ensemble resolution used to cross-check [`EnsembleSet::resolve`].
//!
//! Static roles are enumerated over every subset of the population, filter
//! roles by testing every component. For exclusive roles the oracle decides
//! feasibility exhaustively; since several joint assignments can be valid, it
//! validates the engine's choice against the exhaustive candidate sets and
//! then continues with it.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matching;
use crate::heuristics::{Candidate, Demand, SelectStrategy, SelectionProblem};
use crate::model::ensemble::Scope;
use crate::model::{
    ActionKind, Cardinality, ComponentId, ComponentInstance, ComponentType, DynamicRoleSpec,
    EnsembleSet, EnsembleType, FieldKind, Population, Resolution, ResourceRef, RoleContext,
    Selection, Time, TypeHandle, TypeRegistry, Value,
};

/// Components considered by the subset enumeration.
pub const MAX_POPULATION: usize = 16;

pub type Binding = Vec<(String, Vec<ComponentId>)>;

type RoleBinding = Vec<(Arc<str>, Vec<ComponentId>)>;

/// An instance identified by its type path and the static bindings of itself
/// and its ancestors (outermost first).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId {
    pub path: String,
    pub statics: Vec<Binding>,
}

/// Order-independent summary of one resolution step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolutionView {
    /// Live instances with their dynamic bindings.
    pub instances: BTreeSet<(InstanceId, Binding)>,
    pub permissions: BTreeSet<(ComponentId, ComponentId, String)>,
    /// Pending notifications as a sorted multiset.
    pub notifications: Vec<(InstanceId, ComponentId, String)>,
    pub infeasible: BTreeSet<String>,
}

fn owned(binding: &[(Arc<str>, Vec<ComponentId>)]) -> Binding {
    binding
        .iter()
        .map(|(n, ids)| (n.to_string(), ids.clone()))
        .collect()
}

impl ResolutionView {
    pub fn of(res: &Resolution) -> Self {
        let mut view = ResolutionView::default();
        let mut ids = Vec::with_capacity(res.instances.len());
        for inst in &res.instances {
            let mut statics = Vec::new();
            let mut k = Some(&inst.key);
            while let Some(key) = k {
                statics.push(owned(&key.binding));
                k = key.parent.as_ref();
            }
            statics.reverse();
            let id = InstanceId {
                path: inst.type_path().to_string(),
                statics,
            };
            view.instances
                .insert((id.clone(), owned(inst.dynamic_binding())));
            ids.push((inst.key.clone(), id));
        }
        let by_key: HashMap<_, _> = ids.into_iter().collect();
        view.permissions = res
            .permissions
            .iter()
            .map(|p| (p.component, p.resource, p.operation.to_string()))
            .collect();
        view.notifications = res
            .pending
            .iter()
            .map(|n| (by_key[&n.instance].clone(), n.component, n.tag.to_string()))
            .collect();
        view.notifications.sort();
        view.infeasible = res.infeasible.iter().map(|p| p.to_string()).collect();
        view
    }

    /// Human-readable differences, empty when equal.
    pub fn diff(&self, other: &ResolutionView) -> Vec<String> {
        let mut out = Vec::new();
        for i in self.instances.difference(&other.instances) {
            out.push(format!("only left: {i:?}"));
        }
        for i in other.instances.difference(&self.instances) {
            out.push(format!("only right: {i:?}"));
        }
        for p in self.permissions.symmetric_difference(&other.permissions) {
            out.push(format!("permission differs: {p:?}"));
        }
        if self.notifications != other.notifications {
            out.push(format!(
                "notifications differ: {} vs {}",
                self.notifications.len(),
                other.notifications.len()
            ));
        }
        if self.infeasible != other.infeasible {
            out.push(format!(
                "infeasible differs: {:?} vs {:?}",
                self.infeasible, other.infeasible
            ));
        }
        out
    }
}

struct Node {
    id: InstanceId,
    /// Own roles, static first.
    roles: Vec<(Arc<str>, Vec<ComponentId>)>,
    /// Index of the parent in the oracle's node list.
    parent: Option<usize>,
}

struct Oracle<'a> {
    population: &'a Population,
    now: Time,
    engine: HashMap<InstanceId, Binding>,
    nodes: Vec<Node>,
    view: ResolutionView,
}

/// Resolves `set` by exhaustive enumeration. `engine` supplies the joint
/// choice for exclusive roles; an invalid or missing choice is an error.
pub fn brute_force_resolve(
    set: &EnsembleSet,
    population: &Population,
    now: Time,
    engine: &Resolution,
) -> Result<ResolutionView, String> {
    if population.len() > MAX_POPULATION {
        return Err(format!(
            "population of {} exceeds {MAX_POPULATION}",
            population.len()
        ));
    }
    let engine = ResolutionView::of(engine).instances.into_iter().collect();
    let mut oracle = Oracle {
        population,
        now,
        engine,
        nodes: Vec::new(),
        view: ResolutionView::default(),
    };
    for ty in set.types() {
        oracle.level(ty, ty.name(), &[None])?;
    }
    oracle.view.notifications.sort();
    Ok(oracle.view)
}

impl<'a> Oracle<'a> {
    fn scope<'s>(
        &'s self,
        roles: &'s [(Arc<str>, Vec<ComponentId>)],
        parent: Option<usize>,
    ) -> Scope<'s> {
        let mut levels = vec![roles];
        let mut p = parent;
        while let Some(i) = p {
            levels.push(&self.nodes[i].roles[..]);
            p = self.nodes[i].parent;
        }
        Scope { levels }
    }

    fn subsets(&self, ty: TypeHandle, lo: usize, hi: usize) -> Vec<Vec<ComponentId>> {
        let all: Vec<&ComponentInstance> = self.population.iter().collect();
        let mut out = Vec::new();
        for mask in 0u32..(1 << all.len()) {
            let picked: Vec<&ComponentInstance> = (0..all.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| all[i])
                .collect();
            if picked.len() >= lo
                && picked.len() <= hi
                && picked.iter().all(|c| c.type_handle() == ty)
            {
                let mut ids: Vec<ComponentId> = picked.iter().map(|c| c.id()).collect();
                ids.sort();
                out.push(ids);
            }
        }
        out
    }

    fn size_bounds(
        &self,
        card: &Cardinality,
        roles: &[(Arc<str>, Vec<ComponentId>)],
        parent: Option<usize>,
    ) -> (usize, usize) {
        match card {
            Cardinality::Range(lo, hi) => (*lo, *hi),
            Cardinality::Unbounded => (0, usize::MAX),
            Cardinality::SizeOf(r) => {
                let n = self.scope(roles, parent).lookup(r).map_or(0, <[_]>::len);
                (n, n)
            }
        }
    }

    fn level(
        &mut self,
        ty: &EnsembleType,
        path: &str,
        parents: &[Option<usize>],
    ) -> Result<(), String> {
        let per_role: Vec<Vec<Vec<ComponentId>>> = ty
            .static_roles()
            .iter()
            .map(|r| self.subsets(r.component_type, r.min, r.max))
            .collect();
        let mut combos: Vec<Vec<Vec<ComponentId>>> = vec![Vec::new()];
        for options in &per_role {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |o| {
                        let mut next = prefix.clone();
                        next.push(o.clone());
                        next
                    })
                })
                .collect();
        }

        let mut partials: Vec<(Option<usize>, RoleBinding)> = Vec::new();
        for &parent in parents {
            for combo in &combos {
                let roles: RoleBinding = ty
                    .static_roles()
                    .iter()
                    .zip(combo)
                    .map(|(r, ids)| (Arc::from(r.name.as_str()), ids.clone()))
                    .collect();
                let wanted = ty.situation.as_ref().is_none_or(|s| {
                    let scope = self.scope(&roles, parent);
                    s(&RoleContext {
                        population: self.population,
                        now: self.now,
                        scope: &scope,
                    })
                });
                if wanted {
                    partials.push((parent, roles));
                }
            }
        }

        let dynamic = ty.dynamic_roles();
        if let Some(pos) = dynamic
            .iter()
            .position(|r| matches!(r.selection, Selection::Exclusive { .. }))
        {
            if dynamic[pos..]
                .iter()
                .any(|r| matches!(r.selection, Selection::Filter(_)))
            {
                return Err(format!(
                    "{path}: filter roles after an exclusive role are not supported"
                ));
            }
        }

        let id_of = |oracle: &Self,
                     parent: Option<usize>,
                     roles: &[(Arc<str>, Vec<ComponentId>)]| {
            let mut statics = parent.map_or_else(Vec::new, |p| oracle.nodes[p].id.statics.clone());
            statics.push(owned(&roles[..ty.static_roles().len()]));
            InstanceId {
                path: path.to_string(),
                statics,
            }
        };

        for role in dynamic {
            if partials.is_empty() {
                break;
            }
            match &role.selection {
                Selection::Filter(cond) => {
                    let mut kept = Vec::new();
                    for (parent, mut roles) in partials {
                        let (lo, hi) = self.size_bounds(&role.cardinality, &roles, parent);
                        let chosen: Vec<ComponentId> = {
                            let scope = self.scope(&roles, parent);
                            let ctx = RoleContext {
                                population: self.population,
                                now: self.now,
                                scope: &scope,
                            };
                            let mut ids: Vec<ComponentId> = self
                                .population
                                .iter()
                                .filter(|c| c.type_handle() == role.component_type && cond(&ctx, c))
                                .map(|c| c.id())
                                .collect();
                            ids.sort();
                            ids
                        };
                        if (lo..=hi).contains(&chosen.len()) {
                            roles.push((role.name.as_str().into(), chosen));
                            kept.push((parent, roles));
                        }
                    }
                    partials = kept;
                }
                Selection::Exclusive { eligible, .. } => {
                    let mut problem = SelectionProblem::default();
                    let mut eligible_sets = Vec::new();
                    for (i, (parent, roles)) in partials.iter().enumerate() {
                        let (count, _) = self.size_bounds(&role.cardinality, roles, *parent);
                        problem.instances.push(Demand { instance: i, count });
                        let scope = self.scope(roles, *parent);
                        let ctx = RoleContext {
                            population: self.population,
                            now: self.now,
                            scope: &scope,
                        };
                        let set: BTreeSet<ComponentId> = self
                            .population
                            .iter()
                            .filter(|c| c.type_handle() == role.component_type && eligible(&ctx, c))
                            .map(|c| c.id())
                            .collect();
                        eligible_sets.push((count, set));
                    }
                    let mut ids: BTreeSet<ComponentId> = BTreeSet::new();
                    for (_, s) in &eligible_sets {
                        ids.extend(s);
                    }
                    problem.candidates = ids
                        .into_iter()
                        .map(|c| Candidate {
                            component: c,
                            eligible: (0..eligible_sets.len())
                                .filter(|&i| eligible_sets[i].1.contains(&c))
                                .collect(),
                        })
                        .collect();
                    if !matching::is_feasible(&problem) {
                        self.view.infeasible.insert(path.to_string());
                        partials.clear();
                        continue;
                    }
                    let mut used = BTreeSet::new();
                    for (i, (parent, roles)) in partials.iter_mut().enumerate() {
                        let id = id_of(self, *parent, roles);
                        let Some(binding) = self.engine.get(&id) else {
                            return Err(format!(
                                "{path}: feasible instance {:?} missing from the engine",
                                id.statics
                            ));
                        };
                        let Some((_, members)) = binding.iter().find(|(n, _)| *n == role.name)
                        else {
                            return Err(format!(
                                "{path}: engine instance lacks role {}",
                                role.name
                            ));
                        };
                        let (count, set) = &eligible_sets[i];
                        if members.len() != *count
                            || members.iter().any(|c| !set.contains(c))
                            || members.iter().any(|c| !used.insert(*c))
                        {
                            return Err(format!(
                                "{path}.{}: invalid engine choice {members:?}",
                                role.name
                            ));
                        }
                        roles.push((role.name.as_str().into(), members.clone()));
                    }
                }
            }
        }

        let mut live = Vec::new();
        for (parent, roles) in partials {
            let id = id_of(self, parent, &roles);
            let dynamics = owned(&roles[ty.static_roles().len()..]);
            self.view.instances.insert((id.clone(), dynamics));
            self.nodes.push(Node { id, roles, parent });
            let idx = self.nodes.len() - 1;
            self.actions(ty, idx);
            live.push(Some(idx));
        }
        if !live.is_empty() {
            for inner in ty.inner_types() {
                self.level(inner, &format!("{path}.{}", inner.name()), &live)?;
            }
        }
        Ok(())
    }

    fn actions(&mut self, ty: &EnsembleType, idx: usize) {
        let node = &self.nodes[idx];
        let mut perms = Vec::new();
        let mut notes = Vec::new();
        for action in ty.actions() {
            let Some((_, members)) = node.roles.iter().find(|(n, _)| **n == *action.target_role)
            else {
                continue;
            };
            match &action.kind {
                ActionKind::Allow {
                    resource,
                    operation,
                } => {
                    let target = match resource {
                        ResourceRef::Component(id) => Some(*id),
                        ResourceRef::RoleField { role, field } => self
                            .scope(&node.roles, node.parent)
                            .lookup(role)
                            .and_then(|ids| ids.first())
                            .and_then(|id| self.population.get(*id))
                            .and_then(|c| c.get(field))
                            .and_then(Value::as_id),
                    };
                    if let Some(r) = target {
                        perms.extend(members.iter().map(|&c| (c, r, operation.clone())));
                    }
                }
                ActionKind::Notify { tag } => {
                    notes.extend(members.iter().map(|&c| (node.id.clone(), c, tag.clone())));
                }
            }
        }
        self.view.permissions.extend(perms);
        self.view.notifications.extend(notes);
    }
}

/// A random population and ensemble set for oracle comparisons.
pub struct ResolutionCase {
    pub population: Population,
    pub set: EnsembleSet,
    pub now: Time,
}

fn level(c: &ComponentInstance) -> f64 {
    c.get("level").and_then(Value::as_number).unwrap_or(0.0)
}

fn link(c: &ComponentInstance) -> Option<ComponentId> {
    c.get("link")
        .or_else(|| c.get("target"))
        .and_then(Value::as_id)
}

fn first_level(ctx: &RoleContext<'_>, role: &str) -> f64 {
    ctx.member(role).map_or(0.0, level)
}

fn in_role(ctx: &RoleContext<'_>, role: &str, id: ComponentId) -> bool {
    ctx.role(role).is_some_and(|ids| ids.contains(&id))
}

struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    types: [TypeHandle; 2],
    ids: Vec<ComponentId>,
}

type BoxedSituation = Box<dyn Fn(&RoleContext<'_>) -> bool + Send + Sync>;
type BoxedCondition = Box<dyn Fn(&RoleContext<'_>, &ComponentInstance) -> bool + Send + Sync>;

impl Gen<'_> {
    fn situation(&mut self, statics: &[String]) -> Option<BoxedSituation> {
        let role = statics.choose(self.rng).cloned()?;
        let k = self.rng.gen_range(2..4) as i64;
        Some(match self.rng.gen_range(0..4) {
            0 => return None,
            1 => Box::new(move |ctx| {
                ctx.member(&role)
                    .is_some_and(|c| c.get("flag").and_then(Value::as_bool) != Some(false))
            }),
            2 => Box::new(move |ctx| (first_level(ctx, &role) as i64 + ctx.now) % k != 0),
            _ => Box::new(move |ctx| ctx.now as f64 >= first_level(ctx, &role)),
        })
    }

    fn condition(&mut self, visible: &[String]) -> BoxedCondition {
        let role = visible.choose(self.rng).cloned().unwrap_or_default();
        match self.rng.gen_range(0..5) {
            0 => Box::new(move |ctx, c| level(c) > first_level(ctx, &role)),
            1 => Box::new(|_, c| c.get("flag").and_then(Value::as_bool).unwrap_or(true)),
            2 => Box::new(move |ctx, c| link(c).is_some_and(|l| in_role(ctx, &role, l))),
            3 => Box::new(move |ctx, c| !in_role(ctx, &role, c.id())),
            _ => {
                let k = self.rng.gen_range(2..4) as i64;
                Box::new(move |ctx, c| (level(c) as i64 + ctx.now) % k == 0)
            }
        }
    }

    fn cardinality(&mut self, earlier: &[String]) -> Cardinality {
        match self.rng.gen_range(0..4) {
            0 => Cardinality::Unbounded,
            1 if !earlier.is_empty() => {
                Cardinality::SizeOf(earlier.choose(self.rng).cloned().expect("non-empty"))
            }
            _ => {
                let lo = self.rng.gen_range(0..3);
                Cardinality::Range(lo, lo + self.rng.gen_range(0..4))
            }
        }
    }

    /// One ensemble type. `enclosing` lists the roles visible from the parent.
    fn ensemble(&mut self, prefix: &str, enclosing: &[String], depth: usize) -> EnsembleType {
        let mut ty = EnsembleType::new(prefix);
        let mut visible = enclosing.to_vec();
        let mut statics = Vec::new();
        for s in 0..self.rng.gen_range(1..=2) {
            let name = format!("{prefix}s{s}");
            let max = self.rng.gen_range(1..=2);
            let t = *self.types.choose(self.rng).expect("two types");
            ty = ty.static_role(&name, t, 1, max);
            statics.push(name.clone());
            visible.push(name);
        }
        let mut sit_roles = statics.clone();
        sit_roles.extend(enclosing.iter().cloned());
        if let Some(f) = self.situation(&sit_roles) {
            ty = ty.situation(f);
        }
        let mut dynamics: Vec<String> = Vec::new();
        for d in 0..self.rng.gen_range(0..=2) {
            let name = format!("{prefix}d{d}");
            let card = self.cardinality(&dynamics);
            let cond = self.condition(&visible);
            let t = *self.types.choose(self.rng).expect("two types");
            ty = ty.dynamic_role(DynamicRoleSpec::filter(&name, t, card, cond));
            dynamics.push(name.clone());
            visible.push(name);
        }
        if self.rng.gen_bool(0.6) {
            let name = format!("{prefix}x");
            let card = if !dynamics.is_empty() && self.rng.gen_bool(0.4) {
                Cardinality::SizeOf(dynamics.choose(self.rng).cloned().expect("non-empty"))
            } else {
                Cardinality::exactly(self.rng.gen_range(0..=2))
            };
            let cond = self.condition(&visible);
            let t = *self.types.choose(self.rng).expect("two types");
            let anchor = statics[0].clone();
            ty = ty.dynamic_role(
                DynamicRoleSpec::exclusive(&name, t, card, cond)
                    .with_cost(move |ctx, c| (level(c) - first_level(ctx, &anchor)).abs())
                    .with_strategy(SelectStrategy::Exact),
            );
            visible.push(name.clone());
            dynamics.push(name);
        }
        let own: Vec<String> = statics.iter().chain(&dynamics).cloned().collect();
        for a in 0..self.rng.gen_range(0..=3) {
            let target = own
                .choose(self.rng)
                .cloned()
                .expect("at least one static role");
            let action = if self.rng.gen_bool(0.5) {
                crate::model::ActionSpec::notify(&target, &format!("tag{}", a % 2))
            } else if self.rng.gen_bool(0.5) {
                let r = *self.ids.choose(self.rng).expect("non-empty population");
                crate::model::ActionSpec::allow(&target, ResourceRef::Component(r), "use")
            } else {
                let role = visible.choose(self.rng).cloned().expect("non-empty");
                let field = if self.rng.gen_bool(0.5) {
                    "link"
                } else {
                    "target"
                };
                crate::model::ActionSpec::allow(
                    &target,
                    ResourceRef::RoleField {
                        role,
                        field: field.into(),
                    },
                    "enter",
                )
            };
            ty = ty.action(action);
        }
        if depth == 0 && self.rng.gen_bool(0.5) {
            ty = ty.inner(self.ensemble(&format!("{prefix}i"), &visible, depth + 1));
        }
        ty
    }
}

/// Random case with at most `max_components` components and `max_types` ensemble types.
pub fn random_case(seed: u64, max_components: usize, max_types: usize) -> ResolutionCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut registry = TypeRegistry::new();
    let node = registry
        .register(
            ComponentType::new("Node")
                .field("level", FieldKind::Number)
                .field("flag", FieldKind::Boolean)
                .field("link", FieldKind::Id),
        )
        .expect("fresh registry");
    let hub = registry
        .register(
            ComponentType::new("Hub")
                .field("level", FieldKind::Number)
                .field("target", FieldKind::Id),
        )
        .expect("fresh registry");
    let registry = Arc::new(registry);
    let n = rng.gen_range(0..=max_components.min(MAX_POPULATION));
    let mut ids: Vec<ComponentId> = (1..=(2 * n as u32 + 1)).map(ComponentId).collect();
    ids.shuffle(&mut rng);
    ids.truncate(n);
    ids.sort();
    let mut population = Population::new(registry.clone());
    for &id in &ids {
        let lvl = Value::Number(rng.gen_range(0..5) as f64);
        let target = Value::Id(ids.choose(&mut rng).copied().unwrap_or(id));
        if rng.gen_bool(0.6) {
            population
                .insert(
                    id,
                    node,
                    vec![
                        ("level", lvl),
                        ("flag", Value::Bool(rng.gen_bool(0.6))),
                        ("link", target),
                    ],
                )
                .expect("schema");
        } else {
            population
                .insert(id, hub, vec![("level", lvl), ("target", target)])
                .expect("schema");
        }
    }
    let now = rng.gen_range(0..8);
    let mut set = EnsembleSet::new(&registry);
    let count = rng.gen_range(1..=max_types.max(1));
    let mut gen = Gen {
        rng: &mut rng,
        types: [node, hub],
        ids: if ids.is_empty() {
            vec![ComponentId(0)]
        } else {
            ids
        },
    };
    for e in 0..count {
        let ty = gen.ensemble(&format!("e{e}"), &[], 0);
        set.register(ty)
            .expect("generated ensembles are well-formed");
    }
    ResolutionCase {
        population,
        set,
        now,
    }
}

/// Runs the engine and the oracle on one case; returns the differences.
pub fn check_case(case: &ResolutionCase) -> Vec<String> {
    let engine = case.set.resolve(&case.population, case.now);
    match brute_force_resolve(&case.set, &case.population, case.now, &engine) {
        Ok(view) => ResolutionView::of(&engine).diff(&view),
        Err(e) => vec![e],
    }
}
