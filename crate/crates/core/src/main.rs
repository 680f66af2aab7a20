use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carnot_core::runner::{self, Format, RunConfig, SweepParam};

#[derive(Parser)]
#[command(name = "carnot", version, about = "Certify curvature inequalities on heat-flow scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file with one or more [[scenario]] tables.
    config: PathBuf,
    /// Certifiers to run, comma separated; defaults to each scenario's suite.
    #[arg(long, value_delimiter = ',')]
    suite: Option<Vec<String>>,
    #[arg(long, env = "CARNOT_OUT_DIR", default_value = "carnot-out")]
    out: PathBuf,
    #[arg(long, default_value = "both")]
    format: Format,
    /// Overrides the seed of every scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 or unset uses every core.
    #[arg(long, env = "CARNOT_JOBS")]
    jobs: Option<usize>,
}

impl Common {
    fn run_config(self) -> RunConfig {
        RunConfig {
            config: self.config,
            suite: self.suite,
            out: self.out,
            format: self.format,
            jobs: self.jobs.filter(|&j| j > 0),
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite and write reports.
    Run(Common),
    /// One run per parameter value, plus a convergence table.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => {
            let rc = c.run_config();
            runner::run(&rc).map(|s| {
                eprintln!(
                    "{} reports: {} pass, {} fail, {} degenerate ({:.1} s) -> {}",
                    s.counts.total,
                    s.counts.pass,
                    s.counts.fail,
                    s.counts.degenerate,
                    s.wall_seconds,
                    rc.out.display()
                );
                s.exit_code()
            })
        }
        Command::Sweep { common, param, values } => {
            let rc = common.run_config();
            runner::sweep(&rc, param, &values).map(|c| {
                eprintln!("{} reports over {} values: {} fail -> {}", c.total, values.len(), c.fail, rc.out.display());
                if c.fail > 0 {
                    2
                } else {
                    0
                }
            })
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
