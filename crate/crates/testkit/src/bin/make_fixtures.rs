//! Regenerate the committed replay fixture set under fixtures/replay20.
//!
//! Output is byte-stable: rerunning on an unchanged plan reproduces the
//! exact same files.

use fobar_testkit::fixtures;

fn main() {
    let pack = fixtures::repo_prompts_pack();
    let dir = fixtures::repo_fixture_dir();
    fixtures::write_fixtures(&dir, &pack).expect("write fixtures");
    println!("wrote fixture set to {}", dir.display());
    println!(
        "expected correct counts: combined {}/{}, forward-only {}/{}, backward-only {}/{}",
        fixtures::EXPECTED_CORRECT_COMBINED,
        fixtures::QUESTION_COUNT,
        fixtures::EXPECTED_CORRECT_FORWARD_ONLY,
        fixtures::QUESTION_COUNT,
        fixtures::EXPECTED_CORRECT_BACKWARD_ONLY,
        fixtures::QUESTION_COUNT,
    );
}
