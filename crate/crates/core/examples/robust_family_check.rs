//! Run the robust-family checks on a scenario file (default: the H^{2,1}
//! oracle under data/) and print the margin table.

use robust_families::harness::{render_summary, render_table, run_all, Context, Scenario};

fn main() -> robust_families::error::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/h21_oracle.toml").to_string());
    let mut scenario = Scenario::load(std::path::Path::new(&path))?;
    // quick run
    scenario.grid = scenario.grid.min(17);
    let ctx = Context::build(scenario)?;
    let reports: Vec<_> = run_all(&ctx).into_iter().collect::<Result<_, _>>()?;
    print!("{}", render_table(&reports));
    println!();
    print!("{}", render_summary(&ctx.scenario.name, &reports));
    Ok(())
}
