use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use mcf_core::acceptance::{run_verify, Subset};
use mcf_core::config::RunConfig;
use mcf_core::run::{run_simulation, EXIT_CONFIG};
use mcf_core::scenarios::ScenarioSpec;

/// Overrides every output directory when set.
const OUTPUT_ENV: &str = "MCF_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "mcflow", version, about = "Mean curvature flow in arbitrary codimension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write report, series and snapshots.
    Simulate {
        config: PathBuf,
        /// Output directory (default: the config's `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite and print one line per criterion.
    Verify {
        /// `all`, `fuzz`, or comma-separated criterion numbers.
        #[arg(long, default_value = "all")]
        subset: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in scenarios with their default parameters.
    DescribeScenarios,
}

fn output_dir(flag: Option<PathBuf>, fallback: &str) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(fallback))
}

fn simulate(path: &Path, out: Option<PathBuf>) -> mcf_core::Result<i32> {
    let cfg = RunConfig::load(path)?;
    let dir = output_dir(out, &cfg.output.dir);
    let (manifest, report) = run_simulation(&cfg, Some(path), &dir)?;
    println!("scenario {} grid {:?} status {:?}", report.scenario, report.grid, report.status);
    for m in &report.monitors {
        println!("  {:<22} {}", m.name, m.verdict.as_str());
        if let Some(note) = &m.note {
            println!("  {:<22} note: {note}", "");
        }
    }
    println!("wrote {} files to {}", manifest.artifacts.len(), dir.display());
    Ok(manifest.exit_status)
}

fn verify(subset: &str, out: Option<PathBuf>) -> mcf_core::Result<i32> {
    let subset: Subset = subset.parse()?;
    let dir = output_dir(out, "mcf-verify");
    let mut clock = Instant::now();
    let (report, manifest) = run_verify(&subset, &dir, |c| {
        println!("{} ({:.1} s)", c.line(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    })?;
    let failed = report.criteria.iter().filter(|c| !c.passed).count();
    println!("{} of {} criteria passed; report in {}", report.criteria.len() - failed, report.criteria.len(), dir.display());
    Ok(manifest.exit_status)
}

fn describe() -> mcf_core::Result<i32> {
    for spec in ScenarioSpec::catalogue() {
        let info = spec.info();
        let ext = info.extinction_time.map_or("none".to_string(), |t| format!("{t}"));
        println!(
            "{:<20} m={} n={} compact={} flat_normal_bundle={} extinction={ext}  {}",
            info.id, info.m, info.n, info.compact, info.flat_normal_bundle, info.description
        );
        let table = toml::to_string(&spec).map_err(|e| mcf_core::McfError::Config(e.to_string()))?;
        for line in table.lines() {
            println!("    {line}");
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG as u8),
            };
        }
    };
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Verify { subset, out } => verify(&subset, out),
        Command::DescribeScenarios => describe(),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
