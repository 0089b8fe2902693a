use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use maxboot::harness::{self, RunConfig};
use maxboot::theorycheck::{self, Suite};
use maxboot::{Error, SeedSpec};

#[derive(Parser)]
#[command(
    name = "maxboot",
    version,
    about = "Bootstrap inference for maxima of high-dimensional sums"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare bootstrap laws with the Monte Carlo truth
    Run(Box<RunArgs>),
    /// Numerical checks of the smooth max and interpolation identities
    Check {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Rate certificates for a data matrix
    Certify {
        /// CSV file, one observation per row
        #[arg(long)]
        input: PathBuf,
        /// Smoothing parameter; derived from the data when omitted
        #[arg(long)]
        bn: Option<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// I, II, or `all` with --sweep
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    /// Gamma shape of the marginals
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// Simulated datasets per setting
    #[arg(long)]
    outer: Option<String>,
    /// Datasets for the truth law
    #[arg(long)]
    truth: Option<String>,
    /// Bootstrap replicates per dataset
    #[arg(long)]
    breps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// onesided or abs
    #[arg(long)]
    mode: Option<String>,
    /// Comma list of g, m, r, e, mix
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    mix_p0: Option<String>,
    #[arg(long)]
    alpha_level: Option<String>,
    /// indicator or truth_cdf
    #[arg(long)]
    coverage: Option<String>,
    /// desk or paper
    #[arg(long)]
    preset: Option<String>,
    /// Visit ρ ∈ {0.2, 0.8} × shape ∈ {3, 1}
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    threads: Option<String>,
    /// Results file; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Directory for per-replicate figure data
    #[arg(long)]
    figures: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let text = [
            ("experiment", &self.experiment),
            ("rho", &self.rho),
            ("shape", &self.shape),
            ("n", &self.n),
            ("p", &self.p),
            ("outer", &self.outer),
            ("truth", &self.truth),
            ("breps", &self.breps),
            ("seed", &self.seed),
            ("mode", &self.mode),
            ("schemes", &self.schemes),
            ("mix_p0", &self.mix_p0),
            ("alpha_level", &self.alpha_level),
            ("coverage", &self.coverage),
            ("preset", &self.preset),
            ("threads", &self.threads),
            ("format", &self.format),
        ];
        for (k, v) in text {
            if let Some(v) = v {
                m.insert(k.to_string(), v.clone());
            }
        }
        for (k, v) in [("output", &self.output), ("figures", &self.figures)] {
            if let Some(v) = v {
                m.insert(k.to_string(), v.display().to_string());
            }
        }
        if self.sweep {
            m.insert("sweep".into(), "true".into());
        }
        m
    }
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let mut settings = match &args.config {
        Some(path) => harness::read_config_file(path)?,
        None => BTreeMap::new(),
    };
    settings.extend(args.overrides());
    let run = RunConfig::from_settings(&settings)?;
    let rows = harness::run_all(&run)?;
    if run.output.is_none() {
        harness::print_results(&rows, run.format)?;
    }
    Ok(())
}

fn check(suite: &str, seed: u64) -> Result<bool, Error> {
    let suite: Suite = suite.parse()?;
    let reports = theorycheck::run_suite(suite, SeedSpec::new(seed, 0))?;
    let mut out = std::io::stdout().lock();
    let mut ok = true;
    for r in &reports {
        ok &= r.passed;
        let line = serde_json::to_string(r).expect("report serializes");
        writeln!(out, "{line}").map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })?;
    }
    Ok(ok)
}

fn certify(input: &Path, bn: Option<f64>) -> Result<(), Error> {
    let data = harness::read_matrix_csv(input)?;
    let report = harness::certify(&data, bn)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    // Usage errors are configuration errors (exit 1); 2 is reserved for
    // failed checks.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        Command::Run(args) => match run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => exit_for(&e),
        },
        Command::Check { suite, seed } => match check(suite, *seed) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => {
                eprintln!("check suite failed");
                ExitCode::from(2)
            }
            Err(e) => exit_for(&e),
        },
        Command::Certify { input, bn } => match certify(input, *bn) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => exit_for(&e),
        },
    }
}
