//! Command-line front end of the staged pipeline.
//!
//! Exit status: 0 when every enabled assertion passes, 1 when an assertion
//! fails, 2 when a stage raises an error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavepencil::pipeline::{run, run_stage, RunConfig, RunOutcome, Stage};

#[derive(Parser)]
#[command(name = "wavepencil", version, about = "Normal waves of a dielectric-loaded rectangular waveguide")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the `output` field of the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run only the named verification suite.
    #[arg(long, value_name = "CHECKNAME")]
    only: Option<String>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the cross-section mesh.
    Mesh(Common),
    /// Assemble the pencil coefficients.
    Assemble(Common),
    /// Solve the pencil and extract Jordan chains.
    Solve(Common),
    /// Build waves and run the verification suites.
    Verify(Common),
    /// Aggregate the results into summary.txt.
    Report(Common),
    /// Run the pipeline from the mesh up to --stage (default: report).
    Run {
        #[command(flatten)]
        common: Common,
        /// Last stage to run.
        #[arg(long, value_name = "NAME")]
        stage: Option<String>,
    },
}

fn execute(common: &Common, single: Option<Stage>, until: Option<&str>) -> wavepencil::Result<RunOutcome> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(name) = &common.only {
        cfg.diagnostics.only(name)?;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output.clone());
    match single {
        Some(stage) => run_stage(&cfg, &out, stage),
        None => run(&cfg, &out, until.map(Stage::parse).transpose()?.unwrap_or(Stage::Report)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, single, until) = match &cli.command {
        Command::Mesh(c) => (c, Some(Stage::Mesh), None),
        Command::Assemble(c) => (c, Some(Stage::Assemble), None),
        Command::Solve(c) => (c, Some(Stage::Solve), None),
        Command::Verify(c) => (c, Some(Stage::Verify), None),
        Command::Report(c) => (c, Some(Stage::Report), None),
        Command::Run { common, stage } => (common, None, stage.as_deref()),
    };
    match execute(common, single, until) {
        Ok(outcome) => {
            if !common.quiet {
                if let Some(s) = &outcome.summary {
                    print!("{s}");
                }
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed assertions: {}", outcome.failed.join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.stage());
            ExitCode::from(2)
        }
    }
}
