use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fixpoint_cli::runner::{run_scenario, run_suite, EXIT_PARSE};
use fixpoint_cli::scenario::{Action, Overrides};

#[derive(Parser)]
#[command(name = "fixpoint", version, about = "Certify and compute fixed points on finite metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's certificate scan.
    Certify(Common),
    /// Certify, then compute a fixed point with the matching solver.
    Solve(Common),
    /// Check the recursion condition and run value iteration.
    Bellman(Common),
    /// Enumerate fixed points, or run a seeded random-instance sweep.
    Oracle(Common),
    /// Run every scenario in a directory (`--config <DIR>`) with its own action.
    Suite(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file, or a directory for `suite`.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports, traces and summaries.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Absolute and relative slack on certificate inequalities.
    #[arg(long)]
    slack: Option<f64>,
    /// Condition name, e.g. `banach`, `multi_gauge`, `mt`.
    #[arg(long)]
    condition: Option<String>,
}

impl Common {
    fn overrides(&self, action: Option<Action>) -> Overrides {
        Overrides {
            action,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            slack: self.slack,
            condition: self.condition.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, action) = match &cli.command {
        Command::Certify(c) => (c, Some(Action::Certify)),
        Command::Solve(c) => (c, Some(Action::Solve)),
        Command::Bellman(c) => (c, Some(Action::Bellman)),
        Command::Oracle(c) => (c, Some(Action::Oracle)),
        Command::Suite(c) => (c, None),
    };
    let overrides = common.overrides(action);
    let code = match action {
        Some(_) => {
            let r = run_scenario(&common.config, &common.out, &overrides);
            match &r.message {
                Some(m) if r.exit_code != 0 => eprintln!("{}: {} (exit {})", r.name, m, r.exit_code),
                _ => {}
            }
            if let Some(p) = &r.report_path {
                println!("{} {} {} -> {}", r.name, r.action, if r.passed { "PASS" } else { "FAIL" }, p.display());
            }
            r.exit_code
        }
        None => match run_suite(&common.config, &common.out, &overrides) {
            Ok(suite) => {
                for r in &suite.rows {
                    println!(
                        "{:<32} {:<8} {} (exit {})",
                        r.name,
                        r.action,
                        if r.passed { "PASS" } else { "FAIL" },
                        r.exit_code
                    );
                }
                println!("summary: {}", suite.summary_path.display());
                suite.exit_code()
            }
            Err(e) => {
                eprintln!("suite {}: {e}", common.config.display());
                EXIT_PARSE
            }
        },
    };
    ExitCode::from(code as u8)
}
