//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Runs without the libtest harness so the table is always printed.
//! Positional arguments select criteria by number.

use lrex::verify::run_criteria;

fn main() {
    let ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let reports = run_criteria(&ids, |r| println!("{}", r.line()));
    if reports.iter().any(|r| !r.pass) {
        std::process::exit(1);
    }
}
