//! Splitting a component set among a known list of ensemble instances.

use std::collections::BTreeMap;

use super::HeuristicsError;
use crate::model::ComponentId;

/// Assigns every component to exactly one instance.
///
/// Components are taken in the given order; each goes to the instance with
/// the highest affinity. Ties go to the instance with the fewest members so
/// far, then the lowest instance id, which spreads symmetric cases round-robin.
pub fn partition<F>(
    components: &[ComponentId],
    instances: &[usize],
    affinity: F,
) -> Result<BTreeMap<ComponentId, usize>, HeuristicsError>
where
    F: Fn(ComponentId, usize) -> f64,
{
    if instances.is_empty() {
        return Err(HeuristicsError::NoInstances);
    }
    let mut load: BTreeMap<usize, usize> = instances.iter().map(|&i| (i, 0)).collect();
    let mut out = BTreeMap::new();
    for &c in components {
        let best = instances
            .iter()
            .copied()
            .max_by(|&a, &b| {
                affinity(c, a)
                    .total_cmp(&affinity(c, b))
                    .then(load[&b].cmp(&load[&a]))
                    .then(b.cmp(&a))
            })
            .expect("non-empty");
        *load.get_mut(&best).expect("known instance") += 1;
        out.insert(c, best);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<ComponentId> {
        v.iter().map(|&i| ComponentId(i)).collect()
    }

    #[test]
    fn single_instance_takes_everything() {
        let p = partition(&ids(&[1, 2, 3]), &[7], |_, _| 0.0).unwrap();
        assert!(p.values().all(|&i| i == 7));
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn symmetric_affinity_balances() {
        let p = partition(&ids(&[1, 2, 3, 4]), &[0, 1], |_, _| 1.0).unwrap();
        let zeros = p.values().filter(|&&i| i == 0).count();
        assert_eq!(zeros, 2);
    }

    #[test]
    fn no_instances_is_an_error() {
        assert_eq!(
            partition(&ids(&[1]), &[], |_, _| 0.0),
            Err(HeuristicsError::NoInstances)
        );
    }
}
