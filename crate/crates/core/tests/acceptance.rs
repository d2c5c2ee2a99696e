//! Runs every acceptance criterion and prints one line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use mcf_core::acceptance::{run_acceptance, Subset};

fn main() -> ExitCode {
    let subset = match std::env::var("MCF_ACCEPTANCE_SUBSET") {
        Ok(s) => s.parse().expect("MCF_ACCEPTANCE_SUBSET must be `all`, `fuzz` or a list of ids"),
        Err(_) => Subset::All,
    };
    let mut clock = Instant::now();
    let report = run_acceptance(&subset, |c| {
        println!("{} ({:.1} s)", c.line(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    })
    .expect("acceptance run failed to execute");
    let failed: Vec<u8> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", report.criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
