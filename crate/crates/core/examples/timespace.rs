//! Time-space speed diagram of the human-driven single-lane merge, printed
//! as a coarse text grid (rows are 25 s bins, columns 100 m segments).

use headway::control::NullController;
use headway::engine::{run_episode, StepTable};
use headway::experiment::{timespace_grid, Quantity};
use headway::ScenarioConfig;

fn main() -> headway::Result<()> {
    let quantity: Quantity = std::env::args().nth(1).as_deref().unwrap_or("speed").parse()?;
    let cfg = ScenarioConfig::single_lane();
    let rec = run_episode(&cfg, &mut NullController, 0)?;
    let grid = timespace_grid(&StepTable::from_record(&rec), quantity, 25.0)?;
    for (t, row) in grid.times.iter().zip(&grid.values) {
        let cells: String = row.iter().map(|v| format!("{v:6.1}")).collect();
        println!("{t:5.0} {cells}");
    }
    Ok(())
}
