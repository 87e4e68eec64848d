//! Runs one scenario of the default sweep on its coarse and refined grids.
//!
//! `cargo run --example scenario -- stability_bump`
use freqlab::experiments::{default_sweep, run_scenario};

fn main() -> freqlab::Result<()> {
    let id = std::env::args().nth(1).unwrap_or_else(|| "iso_cascade_holder".into());
    let Some(cfg) = default_sweep().into_iter().find(|c| c.id == id) else {
        let ids: Vec<String> = default_sweep().into_iter().map(|c| c.id).collect();
        eprintln!("unknown scenario {id}; known: {}", ids.join(", "));
        std::process::exit(2);
    };
    let report = run_scenario(&cfg)?;
    println!("{} ({}): {:?}", report.id, report.scenario, report.verdict);
    for m in &report.margins {
        println!("  {:<32} {:>12.4e} -> {:>12.4e}", m.label, m.value, m.fine_value);
    }
    for c in &report.constants {
        println!("  {:<32} {:>12.4e} -> {:>12.4e}  stable {}", c.name, c.value, c.fine_value, c.stable);
    }
    Ok(())
}
