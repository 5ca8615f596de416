//! Acceptance criteria 1–11, one line each.

use nlfb_cli::verify::run_criterion;

fn main() {
    let mut failed = 0;
    for id in 1..=11 {
        let r = run_criterion(id, 7);
        println!("{}", r.line());
        if !r.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
