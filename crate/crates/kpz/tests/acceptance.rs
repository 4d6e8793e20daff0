//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

use kpz::checks::{run_criterion, COUNT};
use kpz::Rayon;

fn main() {
    let mut failed = Vec::new();
    for id in 1..=COUNT {
        let out = run_criterion(id, &Rayon);
        println!("{out}");
        if !out.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {COUNT} criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
