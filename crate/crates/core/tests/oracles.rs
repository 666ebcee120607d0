use vrn_core::oracle;

fn assert_report(r: oracle::OracleReport) {
    println!("{}: {} ({})", r.name, if r.passed { "pass" } else { "FAIL" }, r.detail);
    assert!(r.passed, "{}: {}", r.name, r.detail);
}

#[test]
fn softmax_matches_scalar_reference() {
    assert_report(oracle::softmax_suite(3).unwrap());
}

#[test]
fn scope_matches_bfs() {
    assert_report(oracle::scope_suite(3, 30, 2000).unwrap());
}

#[test]
fn elbo_bounds() {
    assert_report(oracle::elbo_suite(3, 200).unwrap());
}

#[test]
fn gradients_match_finite_differences() {
    assert_report(oracle::gradient_suite(3).unwrap());
}

#[test]
fn reinforce_is_unbiased() {
    assert_report(oracle::reinforce_suite(3, 100_000).unwrap());
}

#[test]
fn generated_data_matches_path_execution() {
    assert_report(oracle::dataset_suite(3, 2000).unwrap());
}
