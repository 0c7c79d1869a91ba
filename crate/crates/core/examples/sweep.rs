//! Fixed-headway sweep on the single-lane merge with every vehicle a CAV.

use headway::control::sweep_fixed_headway;
use headway::ScenarioConfig;

fn main() -> headway::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut cfg = ScenarioConfig::single_lane();
    cfg.demand.cav_fraction = 1.0;
    let seeds: Vec<u64> = (0..seeds).collect();
    let result = sweep_fixed_headway(&cfg, &[1.5, 2.0, 2.5, 3.0, 3.5], &seeds)?;
    for row in &result.rows {
        println!(
            "T = {:.1} s  mean dV = {:+.4}  95% CI [{:+.4}, {:+.4}]",
            row.headway, row.delta_v.mean, row.delta_v.low, row.delta_v.high
        );
    }
    println!("best T = {:.1} s", result.best_headway);
    Ok(())
}
