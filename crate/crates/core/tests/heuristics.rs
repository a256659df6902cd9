use ensemble_core::heuristics::{exact_select, exclusive_select, kmeans, partition};
use ensemble_core::model::ComponentId;
use ensemble_core::oracle::matching::{is_feasible, random_problem};
use ensemble_core::oracle::{best_partition, optimal_inertia};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn thousand_problems_greedy_is_valid_and_usually_succeeds() {
    let (mut feasible, mut greedy_ok, mut violations) = (0, 0, 0);
    for seed in 0..1000 {
        let p = random_problem(seed, 10);
        let oracle = is_feasible(&p);
        if let Some(a) = exclusive_select(&p) {
            violations += a.violations(&p).len();
            assert!(
                oracle,
                "seed {seed}: greedy solved a problem the oracle calls infeasible"
            );
            greedy_ok += 1;
        }
        feasible += oracle as usize;
    }
    assert_eq!(violations, 0);
    assert!(feasible >= 200, "only {feasible} feasible problems");
    let rate = greedy_ok as f64 / feasible as f64;
    assert!(rate >= 0.9, "greedy success rate {rate:.3}");
}

#[test]
fn exact_agrees_with_the_oracle() {
    for seed in 0..1000 {
        let p = random_problem(seed, 10);
        let got = exact_select(&p);
        assert_eq!(got.is_some(), is_feasible(&p), "seed {seed}");
        if let Some(a) = got {
            assert!(
                a.violations(&p).is_empty(),
                "seed {seed}: {:?}",
                a.violations(&p)
            );
        }
    }
}

#[test]
fn partition_on_a_line_matches_exhaustive() {
    let pos = [1.0, 2.0, 8.0, 9.0];
    let centers: [f64; 2] = [0.0, 10.0];
    let ids: Vec<ComponentId> = (1..=4).map(ComponentId).collect();
    let got = partition(&ids, &[0, 1], |c, i| {
        -(pos[c.0 as usize - 1] - centers[i]).abs()
    })
    .unwrap();
    let (_, best) = best_partition(4, 2, |c, i| -(pos[c] - centers[i]).abs());
    for (k, id) in ids.iter().enumerate() {
        assert_eq!(got[id], best[k]);
    }
}

#[test]
fn kmeans_on_separated_blobs_is_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers = [[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]];
    let mut points = Vec::new();
    let mut blob = Vec::new();
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..4 {
            points.push(vec![
                c[0] + rng.gen_range(-1.0..1.0),
                c[1] + rng.gen_range(-1.0..1.0),
            ]);
            blob.push(b);
        }
    }
    let km = kmeans(&points, 3, 11, 100, 1e-9).unwrap();
    for i in 0..points.len() {
        for j in 0..points.len() {
            assert_eq!(blob[i] == blob[j], km.labels[i] == km.labels[j]);
        }
    }
    let best = optimal_inertia(&points, 3);
    assert!(
        (km.inertia - best).abs() <= 1e-9 * best.max(1.0),
        "{} vs {best}",
        km.inertia
    );
}

proptest! {
    #[test]
    fn kmeans_inertia_never_increases(seed in 0u64..500, n in 3usize..30, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).collect();
        let km = kmeans(&points, k, seed, 50, 0.0).unwrap();
        for w in km.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn partition_assigns_every_component_once(n in 0usize..20, k in 1usize..5) {
        let ids: Vec<ComponentId> = (0..n as u32).map(ComponentId).collect();
        let inst: Vec<usize> = (0..k).collect();
        let p = partition(&ids, &inst, |c, i| ((c.0 as usize * 7 + i * 3) % 5) as f64).unwrap();
        prop_assert_eq!(p.len(), n);
        prop_assert!(p.values().all(|i| *i < k));
    }
}
