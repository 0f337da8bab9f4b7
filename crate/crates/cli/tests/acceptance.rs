//! Acceptance suite as an integration test: every criterion runs at its
//! pinned tolerance and prints one pass/fail line.

use hyplab_cli::accept;

#[test]
fn acceptance_criteria() {
    let results = accept::run_all(None);
    assert_eq!(results.len(), 14, "all criteria must run");
    let mut all_pass = true;
    for r in &results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {:>2}. {:<40} ({:.1}s) {}",
            r.id, r.name, r.seconds, r.details
        );
        all_pass &= r.pass;
    }
    assert!(all_pass, "acceptance criteria failed; see lines above");
}
