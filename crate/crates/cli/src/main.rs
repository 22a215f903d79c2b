use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coplanar::pipeline::{exit_code, run_pipeline, status, verify_outputs, RunConfig};
use coplanar::scenarios::scenario_catalog;
use coplanar::{pseudo_svd, Error, Result, SquareMatrix};
use log::debug;

/// Simulates (d+1)-body motion in d-space and checks how often the bodies
/// become coplanar.
#[derive(Debug, Parser)]
#[command(name = "coplanar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a run config and write the series, events and report.
    Simulate { config: PathBuf },
    /// Re-analyze the series (and events, if present) named in a config.
    Verify {
        config: PathBuf,
        /// Also write the report to this path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    Scenarios {
        #[arg(long)]
        json: bool,
    },
    /// Pseudo-SVD of a whitespace-separated square matrix.
    Svd {
        matrix: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(status::CONFIG as u8);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Error::Io { source, .. }) if source.kind() == ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("COPLANAR_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("COPLANAR_THREADS must be a positive integer, got {value:?}")))?;
    debug!("using {threads} worker threads");
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

/// `println!` that reports write failures instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        emit(format_args!($($arg)*))
    };
}

fn emit(args: std::fmt::Arguments) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    stdout.write_fmt(args).and_then(|_| stdout.write_all(b"\n")).map_err(|e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Simulate { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = run_pipeline(&cfg)?;
            let r = &out.report;
            let osc = &r.oscillation;
            out!("samples       {}", r.samples)?;
            out!("events        {}", r.event_count)?;
            out!("word          {}", r.word)?;
            out!("c_observed    {}", osc.c_observed)?;
            out!("window        {}", osc.window)?;
            out!("max gap       {}", osc.max_gap)?;
            out!("violations    {}", osc.violations.len())?;
            out!(
                "flags         nonzero_J={} unbounded_suspected={} collision_truncated={}",
                osc.hypothesis_flags.nonzero_j,
                osc.hypothesis_flags.unbounded_suspected,
                osc.hypothesis_flags.collision_truncated
            )?;
            if let Some(c) = &r.conservation {
                out!("energy drift  {:e}", c.max_rel_energy_drift)?;
                out!("max |J|       {:e}", c.max_j_norm)?;
            }
            out!("report        {}", cfg.outputs.report_json.display())?;
            Ok(out.exit_status())
        }
        Command::Verify { config, output } => {
            let cfg = RunConfig::load(&config)?;
            let report = verify_outputs(&cfg)?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
            out!("{text}")?;
            if let Some(path) = output {
                std::fs::write(&path, format!("{text}\n")).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
            }
            Ok(report.exit_status)
        }
        Command::Scenarios { json } => {
            let catalog = scenario_catalog();
            if json {
                let text = serde_json::to_string_pretty(&catalog).map_err(|e| Error::Config(e.to_string()))?;
                out!("{text}")?;
            } else {
                for s in catalog {
                    out!("{:<24} d={}  {}", s.name, s.dimension, s.description)?;
                }
            }
            Ok(status::OK)
        }
        Command::Svd { matrix, json } => {
            let q = read_matrix(&matrix)?;
            let p = pseudo_svd(&q);
            if json {
                let rows = |m: &coplanar::DMatrix<f64>| -> Vec<Vec<f64>> {
                    m.row_iter().map(|r| r.iter().copied().collect()).collect()
                };
                let value = serde_json::json!({
                    "g1": rows(&p.g1),
                    "x": p.x,
                    "g2": rows(&p.g2),
                    "S": p.signed_distance(),
                    "margin": p.margin(),
                    "det": p.determinant(),
                });
                out!("{value:#}")?;
            } else {
                out!("g1 =\n{}", format_matrix(&p.g1))?;
                out!("x  = {:?}", p.x)?;
                out!("g2 =\n{}", format_matrix(&p.g2))?;
                out!("S      = {}", p.signed_distance())?;
                out!("margin = {}", p.margin())?;
                out!("det    = {}", p.determinant())?;
            }
            Ok(status::OK)
        }
    }
}

fn read_matrix(path: &Path) -> Result<SquareMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let entries = text
        .split_whitespace()
        .map(|w| {
            w.parse::<f64>()
                .map_err(|_| Error::Config(format!("{}: not a number: {w:?}", path.display())))
        })
        .collect::<Result<Vec<f64>>>()?;
    let d = (entries.len() as f64).sqrt().round() as usize;
    if d == 0 || d * d != entries.len() {
        return Err(Error::Config(format!(
            "{}: {} entries do not form a square matrix",
            path.display(),
            entries.len()
        )));
    }
    SquareMatrix::from_rows(d, &entries).map_err(|e| Error::Config(e.to_string()))
}

fn format_matrix(m: &coplanar::DMatrix<f64>) -> String {
    m.row_iter()
        .map(|r| {
            r.iter()
                .map(|x| format!("{x:>22.15e}"))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
