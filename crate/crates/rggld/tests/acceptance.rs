//! Acceptance suite: runs every criterion at its stated tolerance and
//! prints one pass/fail line per criterion.
//!
//! The same checks back `rggld verify`.

#[test]
fn acceptance_criteria() {
    let results = rggld::verify::run_all();
    for result in &results {
        println!("{}", result.line());
    }
    let failures: Vec<&str> = results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name)
        .collect();
    assert!(
        failures.is_empty(),
        "{} of {} criteria failed: {failures:?}",
        failures.len(),
        results.len()
    );
}
