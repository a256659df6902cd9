//! Exclusive selection of components for competing ensemble instances.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::model::ComponentId;

pub type CostFn = Arc<dyn Fn(ComponentId, usize) -> f64 + Send + Sync>;

/// Exact number of components an instance needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Demand {
    pub instance: usize,
    pub count: usize,
}

/// A component together with the instances it may serve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub component: ComponentId,
    pub eligible: Vec<usize>,
}

#[derive(Clone, Default)]
pub struct SelectionProblem {
    pub instances: Vec<Demand>,
    pub candidates: Vec<Candidate>,
    /// Preference cost, lower first. Absent means uniform zero cost.
    pub cost: Option<CostFn>,
}

impl fmt::Debug for SelectionProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SelectionProblem")
            .field("instances", &self.instances)
            .field("candidates", &self.candidates)
            .field("cost", &self.cost.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl SelectionProblem {
    fn cost_of(&self, c: ComponentId, i: usize) -> f64 {
        self.cost.as_ref().map_or(0.0, |f| f(c, i))
    }

    fn demand_of(&self, instance: usize) -> usize {
        self.instances
            .iter()
            .find(|d| d.instance == instance)
            .map_or(0, |d| d.count)
    }

    pub fn total_demand(&self) -> usize {
        self.instances.iter().map(|d| d.count).sum()
    }
}

/// Components chosen for each instance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    selected: BTreeMap<usize, Vec<ComponentId>>,
}

impl Assignment {
    pub fn members(&self, instance: usize) -> &[ComponentId] {
        self.selected.get(&instance).map_or(&[], |v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[ComponentId])> {
        self.selected.iter().map(|(i, v)| (*i, v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.selected.values().all(|v| v.is_empty())
    }

    /// Checks exclusivity, eligibility and exact demand against `problem`.
    pub fn violations(&self, problem: &SelectionProblem) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen: BTreeMap<ComponentId, usize> = BTreeMap::new();
        for (&inst, members) in &self.selected {
            for &c in members {
                if let Some(prev) = seen.insert(c, inst) {
                    out.push(format!("component {c} assigned to {prev} and {inst}"));
                }
                let eligible = problem
                    .candidates
                    .iter()
                    .any(|cand| cand.component == c && cand.eligible.contains(&inst));
                if !eligible {
                    out.push(format!("component {c} is not eligible for {inst}"));
                }
            }
        }
        for d in &problem.instances {
            let got = self.members(d.instance).len();
            if got != d.count {
                out.push(format!("instance {} got {got} of {}", d.instance, d.count));
            }
        }
        for &inst in self.selected.keys() {
            if !problem.instances.iter().any(|d| d.instance == inst) {
                out.push(format!("unknown instance {inst}"));
            }
        }
        out
    }
}

impl FromIterator<(usize, Vec<ComponentId>)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (usize, Vec<ComponentId>)>>(iter: I) -> Self {
        Self {
            selected: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectStrategy {
    /// Min-slack-first greedy pass; may report infeasible on feasible problems.
    #[default]
    Greedy,
    /// Augmenting-path b-matching; infeasible only when no assignment exists.
    Exact,
}

pub fn select(strategy: SelectStrategy, problem: &SelectionProblem) -> Option<Assignment> {
    match strategy {
        SelectStrategy::Greedy => exclusive_select(problem),
        SelectStrategy::Exact => exact_select(problem),
    }
}

/// Greedy exclusive selection.
///
/// Instances are served in ascending slack (eligible candidates minus demand),
/// ties by instance id. Each takes its cheapest still-free eligible candidates,
/// ties by component id. Returns `None` when some instance cannot be filled.
pub fn exclusive_select(problem: &SelectionProblem) -> Option<Assignment> {
    let eligible_count = |inst: usize| {
        problem
            .candidates
            .iter()
            .filter(|c| c.eligible.contains(&inst))
            .count()
    };
    let mut order: Vec<(i64, usize, usize)> = problem
        .instances
        .iter()
        .map(|d| {
            (
                eligible_count(d.instance) as i64 - d.count as i64,
                d.instance,
                d.count,
            )
        })
        .collect();
    order.sort_by_key(|&(slack, inst, _)| (slack, inst));

    let mut taken = vec![false; problem.candidates.len()];
    let mut assignment = Assignment::default();
    for (_, inst, count) in order {
        let mut pool: Vec<(f64, ComponentId, usize)> = problem
            .candidates
            .iter()
            .enumerate()
            .filter(|(k, c)| !taken[*k] && c.eligible.contains(&inst))
            .map(|(k, c)| (problem.cost_of(c.component, inst), c.component, k))
            .collect();
        if pool.len() < count {
            return None;
        }
        pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let chosen = assignment.selected.entry(inst).or_default();
        for &(_, component, k) in pool.iter().take(count) {
            taken[k] = true;
            chosen.push(component);
        }
        chosen.sort_unstable();
    }
    Some(assignment)
}

/// Exact feasibility-complete selection via augmenting paths on the
/// instance-slot/candidate bipartite graph. Candidates are tried cheapest first.
pub fn exact_select(problem: &SelectionProblem) -> Option<Assignment> {
    // one left vertex per demanded slot
    let slots: Vec<usize> = problem
        .instances
        .iter()
        .flat_map(|d| std::iter::repeat_n(d.instance, d.count))
        .collect();
    if slots.len() > problem.candidates.len() {
        return None;
    }
    let adjacency: Vec<Vec<usize>> = slots
        .iter()
        .map(|&inst| {
            let mut ks: Vec<usize> = (0..problem.candidates.len())
                .filter(|&k| problem.candidates[k].eligible.contains(&inst))
                .collect();
            ks.sort_by(|&a, &b| {
                let ca = &problem.candidates[a];
                let cb = &problem.candidates[b];
                problem
                    .cost_of(ca.component, inst)
                    .total_cmp(&problem.cost_of(cb.component, inst))
                    .then(ca.component.cmp(&cb.component))
            });
            ks
        })
        .collect();

    let mut owner: Vec<Option<usize>> = vec![None; problem.candidates.len()];
    for slot in 0..slots.len() {
        let mut visited = vec![false; problem.candidates.len()];
        if !augment(slot, &adjacency, &mut owner, &mut visited) {
            return None;
        }
    }
    let mut assignment = Assignment::default();
    for d in &problem.instances {
        assignment.selected.entry(d.instance).or_default();
    }
    for (k, slot) in owner.iter().enumerate() {
        if let Some(slot) = slot {
            assignment
                .selected
                .entry(slots[*slot])
                .or_default()
                .push(problem.candidates[k].component);
        }
    }
    for members in assignment.selected.values_mut() {
        members.sort_unstable();
    }
    debug_assert!(problem
        .instances
        .iter()
        .all(|d| assignment.members(d.instance).len() == problem.demand_of(d.instance)));
    Some(assignment)
}

fn augment(
    slot: usize,
    adjacency: &[Vec<usize>],
    owner: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    for &k in &adjacency[slot] {
        if visited[k] {
            continue;
        }
        visited[k] = true;
        if owner[k].is_none_or(|other| augment(other, adjacency, owner, visited)) {
            owner[k] = Some(slot);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(id: u32, eligible: &[usize]) -> Candidate {
        Candidate {
            component: ComponentId(id),
            eligible: eligible.to_vec(),
        }
    }

    #[test]
    fn zero_demand_gives_empty_assignment() {
        let p = SelectionProblem {
            instances: vec![
                Demand {
                    instance: 0,
                    count: 0,
                },
                Demand {
                    instance: 1,
                    count: 0,
                },
            ],
            candidates: vec![cand(1, &[0, 1])],
            cost: None,
        };
        let a = exclusive_select(&p).unwrap();
        assert!(a.is_empty());
        assert!(a.violations(&p).is_empty());
    }

    #[test]
    fn demand_beyond_supply_is_infeasible() {
        let p = SelectionProblem {
            instances: vec![
                Demand {
                    instance: 0,
                    count: 2,
                },
                Demand {
                    instance: 1,
                    count: 2,
                },
            ],
            candidates: vec![cand(1, &[0, 1]), cand(2, &[0, 1]), cand(3, &[0, 1])],
            cost: None,
        };
        assert!(exclusive_select(&p).is_none());
        assert!(exact_select(&p).is_none());
    }

    #[test]
    fn min_slack_first_avoids_a_trap() {
        // instance 1 can only use component 1; serving it first leaves 2 for instance 0
        let p = SelectionProblem {
            instances: vec![
                Demand {
                    instance: 0,
                    count: 1,
                },
                Demand {
                    instance: 1,
                    count: 1,
                },
            ],
            candidates: vec![cand(1, &[0, 1]), cand(2, &[0])],
            cost: None,
        };
        let a = exclusive_select(&p).unwrap();
        assert_eq!(a.members(1), &[ComponentId(1)]);
        assert_eq!(a.members(0), &[ComponentId(2)]);
    }

    #[test]
    fn cost_orders_candidates() {
        let p = SelectionProblem {
            instances: vec![Demand {
                instance: 0,
                count: 1,
            }],
            candidates: vec![cand(1, &[0]), cand(2, &[0])],
            cost: Some(Arc::new(|c, _| if c == ComponentId(2) { 0.0 } else { 1.0 })),
        };
        assert_eq!(exclusive_select(&p).unwrap().members(0), &[ComponentId(2)]);
        assert_eq!(exact_select(&p).unwrap().members(0), &[ComponentId(2)]);
    }

    #[test]
    fn exact_finds_what_greedy_misses() {
        // equal slack (0 vs 0) ties by id, instance 0 takes component 1 which
        // instance 1 needed; exact reroutes
        let p = SelectionProblem {
            instances: vec![
                Demand {
                    instance: 0,
                    count: 1,
                },
                Demand {
                    instance: 1,
                    count: 1,
                },
            ],
            candidates: vec![cand(1, &[0, 1]), cand(2, &[0]), cand(3, &[1, 2])],
            cost: None,
        };
        let exact = exact_select(&p).unwrap();
        assert!(exact.violations(&p).is_empty());
        if let Some(g) = exclusive_select(&p) {
            assert!(g.violations(&p).is_empty());
        }
    }
}
