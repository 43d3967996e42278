use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod report;

use report::Report;

#[derive(Parser, Debug)]
#[command(name = "certrand", version, about = "Desk-scale certified randomness laboratory")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Compare results with their targets; exit 1 if any comparison fails.
    #[arg(long, global = true)]
    check: bool,

    /// Override the tolerance used by `--check`.
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file (stdout when omitted). For `llqsv` this is the list file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Walsh-Hadamard spectrum of a random or stored function.
    Wht(commands::WhtArgs),
    /// Heaviness-band probabilities of a device's outputs.
    Pgpb(commands::PgpbArgs),
    /// Heavy-output score of a device.
    Hog(commands::HogArgs),
    /// Mean of φ over squared-forrelation pairs.
    Sqforr(commands::SqforrArgs),
    /// Rejection-sampling heavy-output score.
    Rhog(commands::RhogArgs),
    /// Heavy-to-light perturbation of one coefficient.
    Perturb(commands::PerturbArgs),
    /// Stability of the rejection-sampling derandomizer.
    Derandomize(commands::DerandomizeArgs),
    /// Generate a long list of (function, sample) pairs.
    Llqsv(commands::LlqsvArgs),
    /// Run the certified-randomness protocol once.
    Protocol(commands::ProtocolArgs),
    /// Quick versions of every check.
    CheckAll(CheckAllArgs),
}

#[derive(Args, Debug)]
struct CheckAllArgs {}

/// Accepts plain integers and integral scientific notation such as `1e5`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(format!("'{s}' is not a non-negative integer")),
    }
}

fn emit(report: &Report, cli: &Cli, to_stdout: bool) -> io::Result<()> {
    let mut sink: Box<dyn Write> = match (&cli.out, to_stdout) {
        (Some(path), false) => Box::new(BufWriter::new(File::create(path)?)),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match cli.format {
        Format::Json => report.write_json(&mut sink)?,
        Format::Csv => report.write_csv(&mut sink)?,
    }
    sink.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Wht(a) => commands::wht(a, &cli),
        Command::Pgpb(a) => commands::pgpb(a, &cli),
        Command::Hog(a) => commands::hog(a, &cli),
        Command::Sqforr(a) => commands::sqforr(a, &cli),
        Command::Rhog(a) => commands::rhog(a, &cli),
        Command::Perturb(a) => commands::perturb(a, &cli),
        Command::Derandomize(a) => commands::derandomize(a, &cli),
        Command::Llqsv(a) => commands::llqsv(a, &cli),
        Command::Protocol(a) => commands::protocol(a, &cli),
        Command::CheckAll(_) => commands::check_all(&cli),
    };
    let report = match outcome {
        Ok(report) => report,
        Err(certrand::Error::Io(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let to_stdout = matches!(cli.command, Command::Llqsv(_));
    if let Err(e) = emit(&report, &cli, to_stdout) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let checking = cli.check || matches!(cli.command, Command::CheckAll(_));
    if checking {
        for c in &report.checks {
            eprintln!(
                "check {}: {} (value {:.6}, target {:.6}, tolerance {:.6})",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.value,
                c.target,
                c.tolerance
            );
        }
        if !report.all_checks_pass() {
            return ExitCode::from(1);
        }
    }
    ExitCode::SUCCESS
}

impl Cli {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    pub fn out(&self) -> Option<&PathBuf> {
        self.out.as_ref()
    }
}
