//! Runs the full default sweep and prints the per-scenario summary.
use freqlab::experiments::{default_sweep, run_sweep, SweepEntry};

fn main() -> freqlab::Result<()> {
    let jobs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    for entry in run_sweep(&default_sweep(), jobs)? {
        match entry {
            SweepEntry::Report(r) => println!("{:<28} {}", r.id, r.verdict.name()),
            SweepEntry::Failed { id, error, .. } => println!("{id:<28} error: {error}"),
        }
    }
    Ok(())
}
