use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use limsup_lab::{execute, output_dir, reverify_file, scenario, scenario_commands, with_threads, Command, Outcome};

#[derive(Debug, Parser)]
#[command(name = "limsup-lab", version)]
#[command(about = "Exact overlap, trimming and certification reports for ball families on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,

    /// Output directory; defaults to the scenario's `output`, then `out/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Partial sums of μ(E_i) and tail unions μ(E_t ∪ ... ∪ E_N)
    Sums(Common),
    /// Overlap sums and Kochen–Stone ratios on the Q grid
    Overlap(Common),
    /// Chung–Erdős pairwise constant
    Pairwise(Common),
    /// Greedy 5r selection and its exact verification
    Cover(Common),
    /// Cores, blocks and the trimmed subsequence
    Trim(Common),
    /// Full-measure certificate over the ball grid
    CertifyFull(Common),
    /// Positive-measure certificate (needs params.mu_est)
    CertifyPositive(Common),
    /// Lower and upper estimates of the limsup measure
    Bounds(Common),
    /// Ratio hypothesis μ(aB_i) ≤ bμ(B_i), diameter decay and doubling ratio
    Vb8(Common),
    /// Local density μ(E∩B) ≥ cμ(B) over the ball grid
    DensityCheck(Common),
    /// Every command listed in the scenario (all of them if none are listed)
    Run(Common),
    /// Re-verify a certificate JSON from its own data
    Reverify {
        #[arg(long)]
        certificate: PathBuf,
    },
}

fn print(outcome: &Outcome) {
    let verdict = match outcome.verdict {
        limsup_lab::report::Verdict::Pass => "pass",
        limsup_lab::report::Verdict::Fail => "FAIL",
        limsup_lab::report::Verdict::Report => "ok",
    };
    println!("{}: {verdict}: {}", outcome.command.name(), outcome.summary);
    for f in &outcome.files {
        println!("  wrote {}", f.display());
    }
}

fn run_commands(common: &Common, commands: Option<Vec<Command>>) -> limsup_lab::Result<u8> {
    let loaded = scenario::load(&common.scenario)?;
    let dir = output_dir(&loaded, common.out.as_deref());
    let commands = commands.unwrap_or_else(|| scenario_commands(&loaded));
    let mut code = 0;
    for cmd in commands {
        let outcome = with_threads(common.threads, || execute(cmd, &loaded, &dir))??;
        print(&outcome);
        code = code.max(outcome.exit_code());
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Sub::Sums(c) => run_commands(c, Some(vec![Command::Sums])),
        Sub::Overlap(c) => run_commands(c, Some(vec![Command::Overlap])),
        Sub::Pairwise(c) => run_commands(c, Some(vec![Command::Pairwise])),
        Sub::Cover(c) => run_commands(c, Some(vec![Command::Cover])),
        Sub::Trim(c) => run_commands(c, Some(vec![Command::Trim])),
        Sub::CertifyFull(c) => run_commands(c, Some(vec![Command::CertifyFull])),
        Sub::CertifyPositive(c) => run_commands(c, Some(vec![Command::CertifyPositive])),
        Sub::Bounds(c) => run_commands(c, Some(vec![Command::Bounds])),
        Sub::Vb8(c) => run_commands(c, Some(vec![Command::Vb8])),
        Sub::DensityCheck(c) => run_commands(c, Some(vec![Command::DensityCheck])),
        Sub::Run(c) => run_commands(c, None),
        Sub::Reverify { certificate } => reverify_file(certificate).map(|cert| {
            println!("reverify: {}: certificate is consistent", if cert.passed { "pass" } else { "FAIL" });
            u8::from(!cert.passed)
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
