use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use snake_locomanip_cli::{compare, load_config, plan, run::output_dir, simulate, CliResult, Overrides};

#[derive(Parser)]
#[command(name = "snake-locomanip", version, about = "Snake robot loco-manipulation simulator and planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out a scenario and export trajectories, contacts and metrics.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        gait: Option<String>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune gait parameters toward a box goal and export the best rollout.
    Plan {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Box goal as x,y,z in metres.
        #[arg(long, value_parser = parse_goal)]
        goal: Option<[f64; 3]>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank finished runs and write comparison plot data.
    Compare {
        #[arg(long, value_delimiter = ',', required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config file and print its resolved form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_goal(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "expected three comma-separated numbers".to_string())
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Simulate {
            config,
            scenario,
            gait,
            duration,
            out,
        } => {
            let o = Overrides {
                scenario,
                gait,
                duration,
                ..Default::default()
            };
            let c = load_config(config.as_deref(), &o)?;
            let dir = output_dir(&c, out.as_deref());
            simulate(&c, &dir)?;
            println!("wrote {}", dir.display());
        }
        Command::Plan {
            config,
            goal,
            budget,
            out,
        } => {
            let o = Overrides {
                goal,
                budget,
                ..Default::default()
            };
            let c = load_config(config.as_deref(), &o)?;
            let dir = output_dir(&c, out.as_deref());
            let r = plan(&c, &dir)?;
            println!("wrote {} (goal error {})", dir.display(), r.manifest["goal_error"]);
        }
        Command::Compare { runs, out } => {
            let report = compare(&runs, &out)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("distance ranking: {}", report.rankings.distance.join(", "));
        }
        Command::Validate { config } => {
            let c = load_config(Some(&config), &Overrides::default())?;
            println!("{}", snake_locomanip_cli::run::resolved(&c).to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
