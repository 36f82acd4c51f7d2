use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fabrics_harness::config::{self, MethodName};
use fabrics_harness::runner;

#[derive(Parser)]
#[command(
    name = "fabrics-harness",
    about = "Runs fabric motion scenarios: rollouts, variant comparisons, metrics and plot data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write trajectories, metrics and plots.
    Run {
        scenario: PathBuf,
        /// Output directory (default: runs/<scenario-name>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the integrator time step in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the rollout duration in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Override the integrator (euler|rk4).
        #[arg(long)]
        integrator: Option<String>,
        /// Run only the named variant (e.g. geometric-v2-gated).
        #[arg(long)]
        variant: Option<String>,
        /// Override the recorded seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute the metrics report from a finished run directory.
    Metrics { run_dir: PathBuf },
    /// Schema-check a scenario file without running it.
    Validate { scenario: PathBuf },
}

const EXIT_ROLLOUT_FAILURE: u8 = 1;
const EXIT_CONFIG_ERROR: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            scenario,
            out,
            dt,
            duration,
            integrator,
            variant,
            seed,
        } => {
            let mut cfg = match config::load_scenario(&scenario) {
                Ok(cfg) => cfg,
                Err(e) => return config_error(e),
            };
            if let Some(dt) = dt {
                cfg.integrator.dt = dt;
            }
            if let Some(duration) = duration {
                cfg.integrator.duration = duration;
            }
            if let Some(name) = integrator {
                cfg.integrator.method = match name.as_str() {
                    "euler" => MethodName::Euler,
                    "rk4" => MethodName::Rk4,
                    other => {
                        return config_error(anyhow::anyhow!("unknown integrator {other:?}"))
                    }
                };
            }
            if let Some(seed) = seed {
                cfg.scenario.seed = seed;
            }
            if let Err(e) = config::validate(&cfg) {
                return config_error(e);
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from("runs").join(&cfg.scenario.name));
            match runner::run_scenario(&cfg, &out_dir, variant.as_deref()) {
                Ok(outcome) => {
                    for style in &outcome.report.styles {
                        println!(
                            "{}: {}/{} converged, mean final distance {:.3e}{}",
                            style.style,
                            style.converged,
                            style.rollouts,
                            style.mean_final_goal_distance,
                            style
                                .mean_cross_speed_path_difference
                                .map(|l| format!(", mean cross-speed L {l:.4}"))
                                .unwrap_or_default()
                        );
                    }
                    println!("artifacts in {}", outcome.out_dir.display());
                    if outcome.failures > 0 {
                        eprintln!("{} rollout(s) failed", outcome.failures);
                        ExitCode::from(EXIT_ROLLOUT_FAILURE)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    // errors after config validation are run failures unless
                    // the variant filter matched nothing
                    let msg = format!("{e:#}");
                    eprintln!("error: {msg}");
                    if msg.contains("no variant named") {
                        ExitCode::from(EXIT_CONFIG_ERROR)
                    } else {
                        ExitCode::from(EXIT_ROLLOUT_FAILURE)
                    }
                }
            }
        }
        Command::Metrics { run_dir } => match runner::recompute_metrics(&run_dir) {
            Ok(report) => {
                let json = match serde_json::to_string_pretty(&report) {
                    Ok(json) => json,
                    Err(e) => return config_error(e.into()),
                };
                if let Err(e) = std::fs::write(run_dir.join("metrics.json"), json.clone() + "\n") {
                    eprintln!("error: cannot update metrics.json: {e}");
                    return ExitCode::from(EXIT_ROLLOUT_FAILURE);
                }
                println!("{json}");
                ExitCode::SUCCESS
            }
            Err(e) => config_error(e),
        },
        Command::Validate { scenario } => match config::load_scenario(&scenario) {
            Ok(cfg) => {
                println!(
                    "OK: {} ({} initial states, {} variants)",
                    cfg.scenario.name,
                    cfg.initial_states.len(),
                    runner::expand_variants(&cfg).len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => config_error(e),
        },
    }
}

fn config_error(e: anyhow::Error) -> ExitCode {
    eprintln!("config error: {e:#}");
    ExitCode::from(EXIT_CONFIG_ERROR)
}
