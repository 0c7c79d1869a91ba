//! Constant headway against constant speed limit on the controlled stretch.
//!
//! `cargo run --release --example fig2c [headway] [speed_limit] [inflow]`

use headway::experiment::Fig2cSetup;

fn main() -> headway::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>());
    let mut setup = Fig2cSetup::default();
    if let Some(Ok(t)) = args.next() {
        setup.headway = t;
    }
    if let Some(Ok(v)) = args.next() {
        setup.speed_limit = v;
    }
    if let Some(Ok(q)) = args.next() {
        setup.inflow = q;
    }
    let out = setup.run()?;
    let h = out.density_ratio(&out.headway);
    let s = out.density_ratio(&out.speed_limit);
    println!("{:>6} {:>9} {:>11}", "time", "headway", "speed_limit");
    for (a, b) in h.iter().zip(&s).step_by(10) {
        println!("{:>6.1} {:>9.3} {:>11.3}", a.0, a.1, b.1);
    }
    println!("headway keeps density <= 90%: {}", out.headway_holds(0.9));
    println!("speed limit returns within 5%: {}", out.speed_limit_recovers(0.05));
    Ok(())
}
