//! Support code for the acceptance suite: locating benchmark datasets and
//! the `fgat` binary, and printing one verdict line per criterion.

use std::env;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

/// `FGAT_DATA_DIR` when set, else `data/` at the workspace root.
pub fn data_dir() -> PathBuf {
    match env::var_os("FGAT_DATA_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// First existing `data_dir()/<name>` among `names`.
pub fn find_dataset(names: &[&str]) -> Option<PathBuf> {
    let dir = data_dir();
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

/// Path to the `fgat` binary of this workspace, building it when the
/// current test run did not.
pub fn fgat_binary() -> Result<PathBuf, String> {
    let exe = env::current_exe().map_err(|e| e.to_string())?;
    // target/<profile>/deps/acceptance-<hash>
    let profile_dir = exe
        .parent()
        .and_then(Path::parent)
        .ok_or("unexpected test binary location")?;
    let bin = profile_dir.join(format!("fgat{}", env::consts::EXE_SUFFIX));
    if bin.is_file() {
        return Ok(bin);
    }
    let cargo = env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let status = Command::new(cargo)
        .args(["build", "-p", "fgat-cli", "--bin", "fgat"])
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() && bin.is_file() {
        Ok(bin)
    } else {
        Err(format!("could not build {}", bin.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

/// Collected verdicts; prints each line as it is recorded.
#[derive(Debug, Default)]
pub struct Report {
    entries: Vec<(Verdict, String)>,
}

impl Report {
    pub fn record(&mut self, name: &str, passed: bool, detail: impl fmt::Display) {
        let verdict = if passed { Verdict::Pass } else { Verdict::Fail };
        println!("{verdict}  {name}: {detail}");
        self.entries.push((verdict, name.to_string()));
    }

    pub fn failures(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(v, _)| *v == Verdict::Fail)
            .map(|(_, n)| n.as_str())
            .collect()
    }

    /// Prints the tally; failure exit code when any criterion failed.
    pub fn finish(&self) -> ExitCode {
        let failed = self.failures();
        println!(
            "acceptance: {} passed, {} failed",
            self.entries.len() - failed.len(),
            failed.len()
        );
        if failed.is_empty() {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }
    }
}
