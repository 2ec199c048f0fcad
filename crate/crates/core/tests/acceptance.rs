use std::process::ExitCode;

use isinglab::verify::{run_check, CHECK_COUNT};

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for id in 1..=CHECK_COUNT {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        match run_check(id) {
            Ok(report) => {
                failed += !report.pass as usize;
                println!("{report}");
            }
            Err(e) => {
                failed += 1;
                println!("[FAIL] {id:>2}: error: {e}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    }
}
