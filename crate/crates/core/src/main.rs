use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use plansteer::annotate::{annotate_suite, validate_annotations, write_dataset};
use plansteer::bench::{latency_breakdown, report, run_suite, self_checks, BenchConfig};
use plansteer::taskworld::SuiteTag;

#[derive(Parser)]
#[command(name = "plansteer", version, about = "Virtual-time steering benchmark for plan-then-act policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark sweep described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate, segment and validate expert demonstrations.
    Annotate {
        #[arg(long, default_value = "id", value_parser = parse_suite)]
        suite: SuiteTag,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset path (JSON Lines); the report goes next to it as `<out>.report.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild summary.csv and latency.csv from a trials CSV.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_suite(s: &str) -> Result<SuiteTag, String> {
    SuiteTag::parse(s).ok_or_else(|| {
        let known: Vec<_> = SuiteTag::ALL.iter().map(|t| t.as_str()).collect();
        format!("unknown suite {s:?}; expected one of {}", known.join(", "))
    })
}

fn run(config: PathBuf, out: Option<PathBuf>) -> Result<bool, Box<dyn std::error::Error>> {
    let text = fs::read_to_string(&config)?;
    let mut cfg = BenchConfig::from_json(&text)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let result = run_suite(&cfg)?;
    println!("{} episodes written to {}", result.records.len(), cfg.output_dir.display());
    for row in latency_breakdown(&result.records)? {
        println!(
            "  {:<8} k={:<3} sample {:>7.1} ms/step  verify wait {:>7.1} ms/step  total {:>7.1} ms/step",
            row.strategy, row.k, row.sample_ms_per_step, row.verify_wait_ms_per_step, row.total_ms_per_step
        );
    }
    let mut ok = true;
    for check in self_checks(&result) {
        println!("[{}] {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
        ok &= check.passed;
    }
    Ok(ok)
}

fn annotate(suite: SuiteTag, episodes: usize, seed: u64, out: PathBuf) -> Result<bool, Box<dyn std::error::Error>> {
    let data = annotate_suite(suite, episodes, seed)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_dataset(&out, &data)?;
    let rep = validate_annotations(&data);
    let mut rep_path = out.clone().into_os_string();
    rep_path.push(".report.json");
    fs::write(&rep_path, serde_json::to_string_pretty(&rep)?)?;
    println!(
        "{} episodes, {} segments: {} passed, {} failed, {} violations",
        rep.episodes,
        rep.segments,
        rep.passed_segments,
        rep.failed_segments,
        rep.violations.len()
    );
    for v in rep.violations.iter().take(10) {
        println!("  episode {} segment {:?} {:?}: {}", v.episode, v.segment, v.kind, v.detail);
    }
    Ok(rep.is_clean())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Annotate { suite, episodes, seed, out } => annotate(suite, episodes, seed, out),
        Command::Report { input, out } => report(&input, &out).map(|rows| {
            println!("{} summary rows written to {}", rows.len(), out.display());
            true
        }).map_err(Into::into),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
