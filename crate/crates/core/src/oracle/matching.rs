//! Exhaustive b-matching feasibility and random selection problems.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::heuristics::{Assignment, Candidate, Demand, SelectionProblem};
use crate::model::ComponentId;

/// Tries every way of giving each candidate to one eligible instance or to
/// none. Returns the per-instance members of the first complete assignment
/// found, or `None` when no assignment meets every demand exactly.
pub fn brute_force_assignment(
    problem: &SelectionProblem,
) -> Option<Vec<(usize, Vec<ComponentId>)>> {
    let mut remaining: Vec<(usize, usize)> = problem
        .instances
        .iter()
        .map(|d| (d.instance, d.count))
        .collect();
    let mut chosen: Vec<Option<usize>> = vec![None; problem.candidates.len()];
    if !search(problem, 0, &mut remaining, &mut chosen) {
        return None;
    }
    let mut out: Vec<(usize, Vec<ComponentId>)> = problem
        .instances
        .iter()
        .map(|d| (d.instance, Vec::new()))
        .collect();
    for (cand, slot) in problem.candidates.iter().zip(&chosen) {
        if let Some(inst) = slot {
            let entry = out
                .iter_mut()
                .find(|(i, _)| i == inst)
                .expect("known instance");
            entry.1.push(cand.component);
        }
    }
    for (_, members) in &mut out {
        members.sort();
    }
    Some(out)
}

fn search(
    problem: &SelectionProblem,
    next: usize,
    remaining: &mut [(usize, usize)],
    chosen: &mut [Option<usize>],
) -> bool {
    let left: usize = remaining.iter().map(|r| r.1).sum();
    if left == 0 {
        return true;
    }
    if next == problem.candidates.len() || left > problem.candidates.len() - next {
        return false;
    }
    for &inst in &problem.candidates[next].eligible {
        if let Some(slot) = remaining.iter_mut().find(|(i, n)| *i == inst && *n > 0) {
            slot.1 -= 1;
            chosen[next] = Some(inst);
            if search(problem, next + 1, remaining, chosen) {
                return true;
            }
            chosen[next] = None;
            let slot = remaining
                .iter_mut()
                .find(|(i, _)| *i == inst)
                .expect("known instance");
            slot.1 += 1;
        }
    }
    search(problem, next + 1, remaining, chosen)
}

pub fn is_feasible(problem: &SelectionProblem) -> bool {
    brute_force_assignment(problem).is_some()
}

/// Converts an oracle assignment so it can be checked with [`Assignment::violations`].
pub fn to_assignment(members: &[(usize, Vec<ComponentId>)]) -> Assignment {
    members.iter().cloned().collect()
}

/// Random problem with at most `max_candidates` candidates and 1..=4 instances.
///
/// Demands and eligibility densities vary so that roughly half of the
/// problems are feasible. Half of the problems carry a random cost.
pub fn random_problem(seed: u64, max_candidates: usize) -> SelectionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_inst = rng.gen_range(1..=4usize);
    let n_cand = rng.gen_range(1..=max_candidates.max(1));
    let density = rng.gen_range(0.2..0.9);
    let mut ids: Vec<u32> = (0..40).collect();
    ids.shuffle(&mut rng);
    let candidates: Vec<Candidate> = ids[..n_cand]
        .iter()
        .map(|&id| Candidate {
            component: ComponentId(id),
            eligible: (0..n_inst).filter(|_| rng.gen_bool(density)).collect(),
        })
        .collect();
    let budget = n_cand.div_ceil(n_inst) + 1;
    let instances = (0..n_inst)
        .map(|instance| Demand {
            instance,
            count: rng.gen_range(0..=budget.min(4)),
        })
        .collect();
    let cost = if rng.gen_bool(0.5) {
        let table: Vec<f64> = (0..40 * n_inst)
            .map(|_| rng.gen_range(0..4) as f64)
            .collect();
        let f: crate::heuristics::CostFn =
            Arc::new(move |c: ComponentId, i: usize| table[c.0 as usize * n_inst + i]);
        Some(f)
    } else {
        None
    };
    SelectionProblem {
        instances,
        candidates,
        cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_instances_sharing_one_candidate() {
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
            candidates: vec![Candidate {
                component: ComponentId(1),
                eligible: vec![0, 1],
            }],
            cost: None,
        };
        assert!(!is_feasible(&p));
    }

    #[test]
    fn oracle_assignment_has_no_violations() {
        for seed in 0..200 {
            let p = random_problem(seed, 8);
            if let Some(a) = brute_force_assignment(&p) {
                assert!(to_assignment(&a).violations(&p).is_empty(), "seed {seed}");
            }
        }
    }
}
