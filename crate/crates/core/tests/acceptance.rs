//! Runs the eleven numerical acceptance criteria and prints one line each.
//! Built without the libtest harness so the lines show in `cargo test`.

use std::process::ExitCode;

use dtnwave::verify;

fn main() -> ExitCode {
    let reports = verify::run_all();
    for r in &reports {
        println!("{}", r.line());
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!("{}/{} criteria passed", reports.len() - failed.len(), reports.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
