//! Step a simulation by hand with a custom controller and save the record.

use headway::control::{ControlContext, Controller, HeadwayCommand};
use headway::engine::run_episode;
use headway::network::Road;
use headway::ScenarioConfig;

/// Lengthens the headway while the ramp is busy.
struct RampAware;

impl Controller for RampAware {
    fn act(&mut self, ctx: &ControlContext<'_>) -> headway::Result<HeadwayCommand> {
        let on_ramp = ctx.vehicles.iter().filter(|v| v.road == Road::Ramp).count();
        let k = ctx.network.controlled_segments().len();
        HeadwayCommand::uniform(k, if on_ramp > 2 { 2.5 } else { 1.5 })
    }
}

fn main() -> headway::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "episode_out".into());
    let mut cfg = ScenarioConfig::single_lane();
    cfg.demand.cav_fraction = 0.5;
    let rec = run_episode(&cfg, &mut RampAware, 7)?;
    let done = rec.vehicles.iter().filter(|v| v.completed()).count();
    println!(
        "{} vehicles, {done} completed, return {:.5}, max queue {}, min gap {:.2} m",
        rec.vehicles.len(),
        rec.total_reward(),
        rec.max_queue(),
        rec.min_gap()
    );
    rec.save_dir(&out)?;
    println!("wrote {out}/vehicles.csv, steps.csv, record.json");
    Ok(())
}
