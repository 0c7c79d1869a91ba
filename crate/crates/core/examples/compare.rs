//! Paired comparison of one controller against human driving on the same
//! arrivals, across CAV penetration rates.

use headway::experiment::{simulate, ControllerSpec, ExperimentSpec, ScenarioKind};

fn main() -> headway::Result<()> {
    let mut args = std::env::args().skip(1);
    let controller: ControllerSpec = args.next().as_deref().unwrap_or("fixed:2").parse()?;
    let kind: ScenarioKind = args.next().as_deref().unwrap_or("single-lane").parse()?;
    let mut spec = ExperimentSpec::new(kind.config(), controller);
    spec.seeds = 10;
    let report = simulate(&spec)?;
    for f in &report.fractions {
        println!(
            "p = {:.1}  dV = {:+.4} [{:+.4}, {:+.4}]  return {:.5} vs human {:.5}",
            f.fraction, f.delta_v.mean, f.delta_v.low, f.delta_v.high, f.control_return.mean, f.baseline_return.mean
        );
    }
    Ok(())
}
