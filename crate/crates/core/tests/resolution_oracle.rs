use ensemble_core::oracle::resolution::{check_case, random_case};

#[test]
fn fifty_random_populations_match_enumeration() {
    let mut instances = 0;
    for seed in 0..50 {
        let case = random_case(seed, 8, 3);
        instances += case.set.resolve(&case.population, case.now).instances.len();
        let diff = check_case(&case);
        assert!(diff.is_empty(), "seed {seed}: {diff:#?}");
    }
    // the generator should not be vacuous
    assert!(instances > 50, "only {instances} instances over 50 cases");
}

#[test]
fn wider_sweep_matches_enumeration() {
    for seed in 1000..1300 {
        let case = random_case(seed, 8, 3);
        let diff = check_case(&case);
        assert!(diff.is_empty(), "seed {seed}: {diff:#?}");
    }
}
