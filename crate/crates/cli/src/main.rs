use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chemotax::RunStatus;
use chemotax_cli::commands::{
    classify_config, constants_table, constants_text, plot, probe_blowup, probe_text, run, verdict_table,
};
use chemotax_cli::output::report_block;
use chemotax_cli::sweep::{parse_grid, resolve_jobs, sweep, sweep_csv};
use chemotax_cli::{status_exit_code, CliError, RunConfig, EXIT_BLOWUP, EXIT_FAILURE, EXIT_OK};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chemotax", version, about = "Two-species chemotaxis simulations and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation; CSV diagnostics go to [output].csv or stdout.
    Run { config: PathBuf },
    /// Sweep the initial masses over a Cartesian grid.
    Sweep {
        config: PathBuf,
        /// `m1=a:b:n,m2=c:d:n`
        #[arg(long)]
        grid: String,
        /// Concurrent points; CHEMOTAX_JOBS overrides.
        #[arg(long)]
        jobs: Option<usize>,
        /// Aggregate CSV path (stdout when absent).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the regime verdict table followed by a JSON record.
    Classify {
        config: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        line_tol: f64,
        /// Also write the JSON record here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Estimate the domain constants.
    Constants { config: PathBuf },
    /// Repeat the run for several Gaussian widths of u0 and report blow-up indicators.
    ProbeBlowup {
        config: PathBuf,
        /// Comma-separated widths; defaults to [probe].widths.
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<f64>>,
    },
    /// Write `<column>.dat` files (t, value) for gnuplot.
    Plot {
        csv: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Comma-separated columns; all but `t` when absent.
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<String>>,
    },
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    let src = fs::read_to_string(path)?;
    Ok(RunConfig::parse(&src)?)
}

fn execute(cmd: Command) -> Result<i32, CliError> {
    let stdout = std::io::stdout();
    match cmd {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let mut lock = stdout.lock();
            let sink: Option<&mut dyn Write> = if cfg.output.csv.is_none() { Some(&mut lock) } else { None };
            let out = run(&cfg, sink)?;
            eprint!("{}", report_block(&out.report));
            Ok(status_exit_code(out.report.status))
        }
        Command::Sweep { config, grid, jobs, output } => {
            let cfg = load(&config)?;
            let (m1, m2) = parse_grid(&grid)?;
            let rows = sweep(&cfg, &m1, &m2, resolve_jobs(jobs))?;
            for r in rows.iter().filter(|r| r.message.is_some()) {
                eprintln!("m1={} m2={}: {}: {}", r.m1, r.m2, r.observed_status, r.message.as_deref().unwrap_or(""));
            }
            let text = sweep_csv(&rows)?;
            match output {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(EXIT_OK)
        }
        Command::Classify { config, line_tol, json } => {
            let cfg = load(&config)?;
            let v = classify_config(&cfg, line_tol)?;
            let record = serde_json::to_string(&v)?;
            print!("{}", verdict_table(&v));
            println!("{record}");
            if let Some(p) = json {
                fs::write(p, record + "\n")?;
            }
            Ok(EXIT_OK)
        }
        Command::Constants { config } => {
            let cfg = load(&config)?;
            print!("{}", constants_text(&constants_table(&cfg)?));
            Ok(EXIT_OK)
        }
        Command::ProbeBlowup { config, widths } => {
            let cfg = load(&config)?;
            let widths = widths.unwrap_or_else(|| cfg.probe.widths.clone());
            let rows = probe_blowup(&cfg, &widths)?;
            print!("{}", probe_text(&rows));
            let code = if rows.iter().any(|r| r.report.status == RunStatus::BlowupIndicated) {
                EXIT_BLOWUP
            } else if rows.iter().all(|r| r.report.status == RunStatus::Completed) {
                EXIT_OK
            } else {
                EXIT_FAILURE
            };
            Ok(code)
        }
        Command::Plot { csv, out_dir, columns } => {
            for f in plot(&csv, &out_dir, columns.as_deref())? {
                println!("{}", f.display());
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
