use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use headway::control::sweep_fixed_headway;
use headway::engine::StepTable;
use headway::experiment::{
    simulate, timespace_grid, ControllerSpec, ExperimentSpec, Fig2cSetup, Quantity, ScenarioKind,
};
use headway::learn::{train_from, Checkpoint, TrainConfig};
use headway::{Error, Result, ScenarioConfig};

#[derive(Parser)]
#[command(name = "headway", version, about = "Highway merge simulator with time-headway control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// single-lane, multi-lane or desk.
    #[arg(long, default_value = "single-lane")]
    scenario: String,
    /// TOML scenario file; replaces --scenario.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        match (&self.config, self.scenario.as_str()) {
            (Some(path), _) => ScenarioConfig::load(path),
            (None, "desk") => Ok(ScenarioConfig::desk()),
            (None, name) => Ok(name.parse::<ScenarioKind>()?.config()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every (fraction, seed) cell against its paired human baseline.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.4, 0.6, 0.8, 1.0])]
        fractions: Vec<f64>,
        /// human, fixed:T, fixed:sweep or policy:PATH.
        #[arg(long, default_value = "human")]
        controller: String,
        #[arg(long, default_value_t = 30)]
        seeds: usize,
        /// Headway grid used by fixed:sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [2.0, 2.5, 3.0, 3.5])]
        grid: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every control and baseline episode record.
        #[arg(long)]
        save_records: bool,
    },
    /// Fixed-headway parameter sweep.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [2.0, 2.5, 3.0, 3.5])]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 30)]
        seeds: usize,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a headway policy with PPO.
    Train {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// TOML file with training hyperparameters.
        #[arg(long)]
        train_config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the episode budget.
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Continue from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "train_out")]
        out: PathBuf,
    },
    /// Export a time-bin by segment grid from a steps.csv record.
    Timespace {
        record: PathBuf,
        /// speed, throughput or density.
        #[arg(long, default_value = "speed")]
        quantity: String,
        /// Time bin, s.
        #[arg(long, default_value_t = 10.0)]
        bin: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Constant headway against constant speed limit on the controlled stretch.
    Fig2c {
        #[arg(long, default_value_t = 100.0)]
        duration: f64,
        #[arg(long, default_value_t = 3.0)]
        headway: f64,
        #[arg(long, default_value_t = 15.0)]
        speed_limit: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10.0)]
        bin: f64,
        #[arg(long, default_value = "fig2c_out")]
        out: PathBuf,
    },
}

fn writer(out: Option<&Path>) -> Result<Box<dyn std::io::Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(std::fs::File::create(p)?)
        }
        None => Box::new(std::io::stdout()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scenario, fractions, controller, seeds, grid, out, save_records } => {
            let mut spec = ExperimentSpec::new(scenario.load()?, controller.parse::<ControllerSpec>()?);
            spec.fractions = fractions;
            spec.seeds = seeds;
            spec.sweep_grid = grid;
            spec.out_dir = out;
            spec.save_records = save_records;
            let report = simulate(&spec)?;
            report.write_summary_csv(std::io::stdout())?;
        }
        Command::Sweep { scenario, fraction, grid, seeds, out } => {
            let mut cfg = scenario.load()?;
            cfg.demand.cav_fraction = fraction;
            cfg.validate()?;
            let seeds: Vec<u64> = (0..seeds as u64).collect();
            let result = sweep_fixed_headway(&cfg, &grid, &seeds)?;
            result.write_csv(writer(out.as_deref())?)?;
            eprintln!("best headway: {}", result.best_headway);
        }
        Command::Train { scenario, train_config, seed, episodes, workers, checkpoint, out } => {
            let cfg = scenario.load()?;
            let mut tcfg: TrainConfig = match &train_config {
                Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
                None => TrainConfig::default(),
            };
            if let Some(e) = episodes {
                tcfg.episodes = e;
            }
            if let Some(w) = workers {
                tcfg.workers = w;
            }
            let start = match &checkpoint {
                Some(p) => Checkpoint::load(p)?,
                None => Checkpoint::fresh(&cfg, &tcfg, seed)?,
            };
            let outcome = train_from(&cfg, &tcfg, start, Some(&out))?;
            if let Some(last) = outcome.curve.last() {
                eprintln!("episodes {} mean return {:.6}", last.episodes, last.mean_return);
            }
            eprintln!("wrote {}", out.display());
        }
        Command::Timespace { record, quantity, bin, out } => {
            let quantity: Quantity = quantity.parse()?;
            let table = StepTable::load(&record)?;
            timespace_grid(&table, quantity, bin)?.write_csv(writer(out.as_deref())?)?;
        }
        Command::Fig2c { duration, headway, speed_limit, seed, bin, out } => {
            let setup = Fig2cSetup { duration, headway, speed_limit, seed, ..Fig2cSetup::default() };
            let outcome = setup.run()?;
            outcome.write_grids(&out, bin)?;
            for (name, record) in [("headway", &outcome.headway), ("speed_limit", &outcome.speed_limit)] {
                let ratios = outcome.density_ratio(record);
                let max = ratios.iter().map(|r| r.1).fold(f64::NAN, f64::max);
                let min = ratios.iter().map(|r| r.1).fold(f64::NAN, f64::min);
                println!("{name}: downstream density ratio in window [{min:.3}, {max:.3}]");
            }
            println!("headway holds <= 0.9: {}", outcome.headway_holds(0.9));
            println!("speed limit recovers within 5%: {}", outcome.speed_limit_recovers(0.05));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Collision { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
