//! `wsnguard`: train the neighbor predictor, run scenarios, check scenario files.
//!
//! Log verbosity comes from `WSNGUARD_LOG` (`error`, `warn`, `info`, `debug`, ...).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use wsnguard::nn::{load_net, save_net, LmConfig, NeuralNet, TrainingReport};
use wsnguard::sim::{run_simulation, train_predictor, RunOptions, Scenario, BUILTIN_SCENARIOS};
use wsnguard::{Error, ErrorClass, Result};

const LOG_ENV: &str = "WSNGUARD_LOG";

#[derive(Parser)]
#[command(
    name = "wsnguard",
    version,
    about = "Malicious sensor-node discovery and self-destruction simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate attack-free training data and fit the neighbor predictor.
    Train {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Where to write the trained net.
        #[arg(long)]
        out: PathBuf,
        /// Seed for training data, weight init and the held-out split.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        lm: LmOverrides,
    },
    /// Run a scenario and write per-node CSVs, the event log and a summary.
    Run {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Trained net; trained in-process when omitted.
        #[arg(long)]
        net: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Simulation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run the per-node phase on all cores.
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        lm: LmOverrides,
    },
    /// Check a scenario (and optionally a net) and list every problem.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        net: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArg {
    /// Built-in scenario name (case1, case2) or path to a TOML file.
    #[arg(long)]
    scenario: String,
}

#[derive(Args)]
struct LmOverrides {
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    mu_init: Option<f64>,
}

impl LmOverrides {
    fn apply(&self, lm: &mut LmConfig) {
        if let Some(e) = self.max_epochs {
            lm.max_epochs = e;
        }
        if let Some(mu) = self.mu_init {
            lm.mu_init = mu;
        }
    }
}

fn load_scenario(arg: &ScenarioArg) -> Result<Scenario> {
    if BUILTIN_SCENARIOS.contains(&arg.scenario.as_str()) {
        return Ok(Scenario::builtin(&arg.scenario).expect("listed built-in exists"));
    }
    let text = fs::read_to_string(&arg.scenario)
        .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", arg.scenario)))?;
    Scenario::from_toml_str(&text)
}

fn read_net(path: &Path) -> Result<NeuralNet<f64>> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read net {}: {e}", path.display())))?;
    load_net(&bytes)
}

fn print_training(report: &TrainingReport) {
    println!("epochs: {}", report.epochs);
    println!("stop reason: {:?}", report.stop_reason);
    println!("training rmse: {:.4}", report.rmse);
    if let Some(v) = report.validation_rmse.get(report.best_epoch) {
        println!("held-out rmse: {v:.4} (epoch {})", report.best_epoch);
    }
    println!("final mu: {:.3e}", report.final_mu);
}

fn train(scenario: &Scenario) -> Result<NeuralNet<f64>> {
    let started = Instant::now();
    let (net, report) = train_predictor(scenario, &scenario.lm)?;
    if report.epochs == 0 {
        log::warn!("no training epochs ran; the net holds its initial weights");
    }
    print_training(&report);
    log::info!("training took {:.2?}", started.elapsed());
    Ok(net)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train {
            scenario,
            out,
            seed,
            lm,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                s.training.seed = seed;
                s.lm.seed = seed;
            }
            lm.apply(&mut s.lm);
            s.validate()?;
            let net = train(&s)?;
            fs::write(&out, save_net(&net))?;
            println!("net written to {}", out.display());
        }
        Command::Run {
            scenario,
            net,
            out,
            seed,
            parallel,
            lm,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            lm.apply(&mut s.lm);
            s.validate()?;
            let net = match net {
                Some(path) => read_net(&path)?,
                None => train(&s)?,
            };
            let started = Instant::now();
            let report = run_simulation(&s, &net, RunOptions { parallel })?;
            log::info!("simulation took {:.2?}", started.elapsed());
            report.write_to_dir(&out)?;
            print!("{}", report.summary);
            println!("output written to {}", out.display());
        }
        Command::Validate { scenario, net } => {
            let s = load_scenario(&scenario)?;
            let mut problems = s.violations();
            if let Some(path) = net {
                let net = read_net(&path)?;
                let want = s.topology().layer_sizes;
                if net.spec().layer_sizes != want {
                    problems.push(format!(
                        "net has layers {:?}, scenario needs {want:?}",
                        net.spec().layer_sizes
                    ));
                }
            }
            if !problems.is_empty() {
                for p in &problems {
                    println!("{p}");
                }
                return Err(Error::Config(format!(
                    "{} problem(s) in {}",
                    problems.len(),
                    s.name
                )));
            }
            println!("{}: ok", s.name);
        }
    }
    Ok(())
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 3,
        ErrorClass::Training => 4,
        ErrorClass::Runtime => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
