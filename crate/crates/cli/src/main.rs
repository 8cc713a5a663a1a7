// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use headergen_cli::{
    annotate_dir, annotate_file, batch_summary, cmd_analyze, cmd_bench, cmd_eval, pr_json, AnnotateConfig, Engine,
    Failure, OutputMode,
};

/// Annotates data-science notebooks with the ML operations of each cell.
#[derive(Parser)]
#[command(name = "headergen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Databases {
    /// Directory of `*.stub.json` files replacing the bundled stubs.
    #[arg(long, value_name = "DIR")]
    stubs: Option<PathBuf>,
    /// Taxonomy file replacing the bundled one.
    #[arg(long, value_name = "FILE")]
    taxonomy: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the callsite report of a notebook.
    Analyze {
        notebook: PathBuf,
        #[command(flatten)]
        db: Databases,
        /// Write the report here instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Write the assignment graph as Graphviz.
        #[arg(long, value_name = "PATH")]
        dump_eag: Option<PathBuf>,
    },
    /// Add headers, an operation index and a table of contents.
    Annotate {
        /// A notebook, or a directory whose notebooks are processed in parallel.
        path: PathBuf,
        #[command(flatten)]
        db: Databases,
        /// Output notebook (or directory in batch mode).
        #[arg(long, value_name = "PATH", group = "mode")]
        out: Option<PathBuf>,
        /// Overwrite the input notebooks.
        #[arg(long, group = "mode")]
        inplace: bool,
        /// Only produce the callsite report.
        #[arg(long, group = "mode")]
        report_only: bool,
        /// Also write the callsite report (a directory in batch mode).
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        dump_eag: Option<PathBuf>,
    },
    /// Score a callsite report against ground truth.
    Eval { report: PathBuf, truth: PathBuf },
    /// Run every case of a benchmark suite.
    Bench {
        suite: PathBuf,
        #[command(flatten)]
        db: Databases,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Analyze { notebook, db, out, dump_eag } => {
            let engine = Engine::load(db.stubs.as_deref(), db.taxonomy.as_deref())?;
            let report = cmd_analyze(&engine, &notebook, dump_eag.as_deref())?;
            emit(&report, out.as_ref())?;
        }
        Command::Annotate { path, db, out, inplace, report_only, report, dump_eag } => {
            let mode = match (out, inplace, report_only) {
                (Some(p), _, _) => OutputMode::Out(p),
                (None, true, _) => OutputMode::InPlace,
                (None, false, true) => OutputMode::ReportOnly,
                _ => return Err(Failure::input("choose one of --out, --inplace or --report-only")),
            };
            let engine = Engine::load(db.stubs.as_deref(), db.taxonomy.as_deref())?;
            let config = AnnotateConfig { mode, report, dump_eag };
            if path.is_dir() {
                let outcomes = annotate_dir(&engine, &path, &config)?;
                let mut worst: Option<Failure> = None;
                for o in &outcomes {
                    if let Err(e) = &o.result {
                        eprintln!("headergen: {e}");
                        if worst.as_ref().map_or(true, |w| w.exit_code() > e.exit_code()) {
                            worst = Some(e.clone());
                        }
                    }
                }
                let summary = batch_summary(&outcomes);
                eprintln!("{}", serde_json::to_string(&summary).expect("json"));
                return Ok(worst.map_or(ExitCode::SUCCESS, |w| ExitCode::from(w.exit_code() as u8)));
            }
            if let Some(report) = annotate_file(&engine, &path, &config)? {
                emit(&report, None)?;
            }
        }
        Command::Eval { report, truth } => emit(&pr_json(&cmd_eval(&report, &truth)?), None)?,
        Command::Bench { suite, db, json } => {
            let engine = Engine::load(db.stubs.as_deref(), db.taxonomy.as_deref())?;
            let summary = cmd_bench(&engine, &suite)?;
            let text = if json { summary.to_json_string() } else { summary.to_table() };
            emit(&text, None)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("headergen: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
