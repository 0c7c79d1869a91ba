//! Scenario configuration as TOML: print the defaults, or load and validate
//! a file given on the command line.

use headway::network::build_merge_network;
use headway::ScenarioConfig;

fn main() -> headway::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::multi_lane(),
    };
    cfg.validate()?;
    let network = build_merge_network(&cfg)?;
    print!("{}", cfg.to_toml_string());
    println!(
        "# {} segments, controlled {:?}, digest {}",
        network.num_segments(),
        network.controlled_segments(),
        cfg.digest()
    );
    Ok(())
}
