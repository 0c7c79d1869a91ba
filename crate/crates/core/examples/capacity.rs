//! Human-only single-lane road fed at 1800 veh/h without ramp traffic:
//! entry queue, insertions and downstream throughput.

use headway::control::NullController;
use headway::engine::run_episode;
use headway::ScenarioConfig;

fn main() -> headway::Result<()> {
    let mut cfg = ScenarioConfig::single_lane();
    cfg.demand.ramp_inflow = 0.0;
    for seed in 0..3 {
        let rec = run_episode(&cfg, &mut NullController, seed)?;
        let inserted = rec.vehicles.iter().filter(|v| v.actual_entry.is_some()).count();
        let exits = rec.exits_between(300.0, 500.0);
        println!(
            "seed {seed}: scheduled {} inserted {inserted} max queue {} throughput {:.0} veh/h min gap {:.2} m",
            rec.vehicles.len(),
            rec.max_queue(),
            exits as f64 * 3600.0 / 200.0,
            rec.min_gap(),
        );
    }
    Ok(())
}
