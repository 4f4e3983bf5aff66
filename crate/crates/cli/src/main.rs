use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loewner_lab::plot::{emit_plot, PlotKind};
use loewner_lab::scenario::{exit_code_for, gallery_list, run_scenario, Operation, RunOptions, ScenarioConfig};
use loewner_lab::trace::TraceRecord;
use loewner_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "loewner", version, about = "Loewner-theory scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gallery field such as `g64:1` when no config is given.
    #[arg(long)]
    field: Option<String>,
    /// Output directory for traces and plots.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the verdict block as JSON.
    #[arg(long)]
    json: bool,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Multiplies every default tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    Evolve(RunArgs),
    Spectral(RunArgs),
    Classify(RunArgs),
    ChainCheck(RunArgs),
    Embed(RunArgs),
    ProductFormula(RunArgs),
    /// List the built-in fields.
    Gallery {
        #[arg(long)]
        json: bool,
    },
    /// Render an SVG from a JSON trace.
    Plot {
        /// JSON trace written by a previous run.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        kind: PlotKind,
        /// Target file; defaults to the trace path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn scenario(op: Operation, args: &RunArgs) -> Result<i32> {
    let mut cfg = match (&args.config, &args.field) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(field)) => ScenarioConfig::default_for(op, field)?,
        (None, None) => {
            return Err(Error::Config { line: 0, column: 0, message: "give --config or --field".into() });
        }
    };
    match cfg.operation {
        Some(declared) if declared != op => {
            return Err(Error::Config {
                line: 0,
                column: 0,
                message: format!("config declares operation {}, not {}", declared.name(), op.name()),
            });
        }
        _ => cfg.operation = Some(op),
    }
    let opts = RunOptions { out_dir: args.out.clone(), parallel: args.parallel.max(1), tol_scale: args.tol_scale, write_files: true };
    let outcome = run_scenario(&cfg, &opts)?;
    if args.json {
        let v = serde_json_verdicts(&outcome.trace);
        println!("{v}");
    } else {
        for (k, v) in &outcome.trace.verdicts {
            if k != "evidence" {
                println!("{k}: {v}");
            }
        }
        for p in &outcome.written {
            println!("wrote {}", p.display());
        }
    }
    for v in &outcome.violations {
        eprintln!("violation: {v}");
    }
    Ok(outcome.exit_code())
}

fn serde_json_verdicts(trace: &TraceRecord) -> String {
    let v = trace.to_json();
    let block = serde_json::json!({
        "scenario": v["scenario"],
        "field": v["field"],
        "verdicts": v["verdicts"],
    });
    serde_json::to_string_pretty(&block).expect("valid JSON")
}

fn run(cli: Cli) -> Result<i32> {
    let (op, args) = match cli.command {
        Command::Gallery { json } => {
            print!("{}", gallery_list(json));
            return Ok(0);
        }
        Command::Plot { trace, kind, out } => {
            let record = TraceRecord::read_json(&trace)?;
            let out = out.unwrap_or_else(|| trace.with_extension("svg"));
            emit_plot(&record, kind, &out)?;
            println!("wrote {}", out.display());
            return Ok(0);
        }
        Command::Evolve(a) => (Operation::Evolve, a),
        Command::Spectral(a) => (Operation::Spectral, a),
        Command::Classify(a) => (Operation::Classify, a),
        Command::ChainCheck(a) => (Operation::ChainCheck, a),
        Command::Embed(a) => (Operation::Embed, a),
        Command::ProductFormula(a) => (Operation::ProductFormula, a),
    };
    scenario(op, &args)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            match &e {
                Error::Config { line, column, message } if *line > 0 => {
                    eprintln!("error: config {line}:{column}: {message}");
                }
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
