//! Scenario runner for the `limsup-core` machinery.
//!
//! A scenario file fixes a measure, a ball family, the constants `a`, `b`,
//! `λ` and the horizons; each subcommand writes a JSON report and CSV
//! tables into the output directory.

pub mod commands;
pub mod error;
pub mod report;
pub mod scenario;

use std::path::{Path, PathBuf};

pub use commands::{execute, reverify_file, Outcome};
pub use error::{CliError, Result};
pub use scenario::{Command, Loaded, Scenario};

/// `--out`, else the scenario's `output`, else `out/<name>`.
pub fn output_dir(loaded: &Loaded, out: Option<&Path>) -> PathBuf {
    match (out, &loaded.scenario.output) {
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(dir)) => dir.clone(),
        (None, None) => PathBuf::from("out").join(&loaded.scenario.name),
    }
}

/// Commands listed by the scenario, or every command when it lists none.
pub fn scenario_commands(loaded: &Loaded) -> Vec<Command> {
    if loaded.scenario.commands.is_empty() {
        Command::ALL.to_vec()
    } else {
        loaded.scenario.commands.clone()
    }
}

/// Runs `f` on a dedicated pool when a thread count is given.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Threads(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
