use factorlab_core::properties::{run_suites, SUITES};

fn assert_all_pass(n: usize) {
    let results = run_suites(n, 7).unwrap();
    assert_eq!(results.iter().map(|r| r.name).collect::<Vec<_>>(), SUITES);
    for r in &results {
        assert!(r.checks > 0, "{} ran no checks", r.name);
        assert!(r.passed(), "N={n} {}: {:?}", r.name, &r.violations[..r.violations.len().min(5)]);
    }
}

#[test]
fn suites_pass_for_sl2() {
    assert_all_pass(2);
}

#[test]
fn suites_pass_for_sl3() {
    assert_all_pass(3);
}
