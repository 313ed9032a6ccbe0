use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scenopt::confidence::CollapsePolicy;
use scenopt::harness::{
    beta_bar_from_trace, beta_growth_report, preset, report::report_csv, run_experiment, scaling_csv, scaling_study,
    write_experiment, ExperimentConfig, PRESET_NAMES,
};
use scenopt::Error;

#[derive(Parser)]
#[command(
    name = "scenopt",
    version,
    about = "Safe Bayesian optimization with scenario-based noise bounds"
)]
struct Cli {
    /// Replace the seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces plus summary.json.
    Run {
        /// Use a named preset instead of --config.
        #[arg(long)]
        preset: Option<String>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Abort on a confidence collapse instead of resetting.
        #[arg(long)]
        strict: bool,
        /// Override the iteration budget.
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Tabulate the scenario count m_t.
    ScaleStudy {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.01")]
        nu: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.001")]
        kappa: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
        outputs: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
        t: Vec<u64>,
    },
    /// Growth of beta_bar_t read from a trace CSV.
    BetaReport { trace: PathBuf },
    /// List presets, or print one as JSON.
    Presets { name: Option<String> },
}

/// Prints a line, ignoring a closed stdout.
fn say(line: String) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn load_config(cli: &Cli, preset_name: Option<&str>) -> scenopt::Result<ExperimentConfig> {
    match (preset_name, &cli.config) {
        (Some(_), Some(_)) => Err(Error::Config("--preset and --config are mutually exclusive".into())),
        (Some(name), None) => preset(name).ok_or_else(|| Error::Config(format!("unknown preset {name:?}"))),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)
        }
        (None, None) => Err(Error::Config("either --preset or --config is required".into())),
    }
}

fn write_or_print(out: Option<&Path>, name: &str, text: &str) -> scenopt::Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text)?;
        }
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> scenopt::Result<()> {
    match &cli.command {
        Command::Run {
            preset,
            jobs,
            strict,
            max_iterations,
        } => {
            let mut config = load_config(cli, preset.as_deref())?;
            if let Some(seed) = cli.seed {
                config.seeds = vec![seed];
            }
            if let Some(n) = max_iterations {
                config.max_iterations = *n;
            }
            if *strict {
                config.collapse = CollapsePolicy::Strict;
            }
            config.validate()?;
            let out = cli
                .out
                .clone()
                .or_else(|| config.output_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("results").join(&config.name));
            let result = run_experiment(&config, *jobs)?;
            let files = write_experiment(&result, &out)?;
            for agg in &result.aggregate {
                say(format!(
                    "{:<9} runs={} experiments={} violations={} rate={:.4} seeds_with_violation={} mean_best={:.4}",
                    agg.beta_mode.label(),
                    agg.runs,
                    agg.experiments,
                    agg.violations,
                    agg.violation_rate,
                    agg.seeds_with_violation,
                    agg.mean_final_best_reward
                ));
            }
            say(format!("wrote {} files to {}", files.len(), out.display()));
        }
        Command::ScaleStudy { nu, kappa, outputs, t } => {
            let rows = scaling_study(nu, kappa, outputs, t)?;
            write_or_print(cli.out.as_deref(), "scaling.csv", &scaling_csv(&rows)?)?;
        }
        Command::BetaReport { trace } => {
            let series = beta_bar_from_trace(fs::File::open(trace)?)?;
            let report = beta_growth_report(&series);
            write_or_print(cli.out.as_deref(), "beta_report.csv", &report_csv(&report)?)?;
            eprintln!(
                "monotone={} exceedances_of_sqrt_t={}",
                report.monotone, report.exceedances
            );
        }
        Command::Presets { name } => match name {
            None => PRESET_NAMES.iter().for_each(|n| say(n.to_string())),
            Some(n) => {
                let p = preset(n).ok_or_else(|| Error::Config(format!("unknown preset {n:?}")))?;
                say(p.to_json()?);
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SAFE_BO_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidParameter { .. } => 2,
                Error::ConfidenceCollapse { .. } => 3,
                _ => 1,
            })
        }
    }
}
