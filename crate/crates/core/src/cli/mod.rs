//! Command-line harness. Every subcommand writes a JSON report (config echo,
//! seed, version, result) plus CSV or circuit files into the output
//! directory, and wall-clock timing into a `meta.json` sidecar so the
//! reports themselves stay byte-identical across identical runs.

mod commands;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search::{DiffuserSchedule, Family};

/// Default output directory when `--out` is absent.
pub const OUT_ENV: &str = "SEARCHKIT_OUT";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file or inputs; exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// A checked property did not hold; exit code 1.
    #[error("check failed: {0}")]
    Check(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
        }
    }
}

fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Flags shared by every subcommand. Each may also come from the TOML file
/// given by `--config` (keys as the flag names); flags win.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct CommonArgs {
    /// Number of search qubits.
    #[arg(long)]
    pub n: Option<usize>,
    /// Schedule parameter; blocks grow as (x+1)j.
    #[arg(long)]
    pub x: Option<usize>,
    /// Explicit diffuser block sizes, e.g. 4,3.
    #[arg(long)]
    pub schedule: Option<DiffuserSchedule>,
    /// Comma-separated marked elements.
    #[arg(long, value_delimiter = ',')]
    pub oracle_marked: Option<Vec<u64>>,
    /// DIMACS CNF file used as the oracle.
    #[arg(long)]
    pub cnf: Option<PathBuf>,
    /// Hash output width.
    #[arg(long)]
    pub k: Option<usize>,
    /// Target success probability of repeated trials.
    #[arg(long)]
    pub p: Option<f64>,
    /// Independent runs.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: $SEARCHKIT_OUT, else ./searchkit-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tolerance for the checks a subcommand performs.
    #[arg(long)]
    pub tol: Option<f64>,
    /// TOML file supplying defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    /// Fills every unset flag from `file`.
    pub fn merged_with(self, file: CommonArgs) -> CommonArgs {
        CommonArgs {
            n: self.n.or(file.n),
            x: self.x.or(file.x),
            schedule: self.schedule.or(file.schedule),
            oracle_marked: self.oracle_marked.or(file.oracle_marked),
            cnf: self.cnf.or(file.cnf),
            k: self.k.or(file.k),
            p: self.p.or(file.p),
            trials: self.trials.or(file.trials),
            seed: self.seed.or(file.seed),
            out: self.out.or(file.out),
            tol: self.tol.or(file.tol),
            config: self.config,
        }
    }

    fn resolve(self) -> Result<CommonArgs, CliError> {
        let Some(path) = &self.config else { return Ok(self) };
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
        let file: CommonArgs = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Ok(self.merged_with(file))
    }
}

/// Inclusive range written `a..b` or `a..=b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NRange(pub RangeInclusive<usize>);

impl FromStr for NRange {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, found {s:?}"))?;
        let b = b.strip_prefix('=').unwrap_or(b);
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
        let (a, b) = (parse(a)?, parse(b)?);
        if a > b {
            return Err(format!("empty range {s:?}"));
        }
        Ok(NRange(a..=b))
    }
}

impl TryFrom<String> for NRange {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<NRange> for String {
    fn from(r: NRange) -> String {
        format!("{}..{}", r.0.start(), r.0.end())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    Queries,
    Gates,
}

#[derive(Parser, Debug)]
#[command(name = "searchkit", version, about = "Nested-diffuser search circuits: synthesis, simulation and telemetry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case", rename_all_fields = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Emit the nested or tree search circuit as text and JSON.
    Generate {
        #[command(flatten)]
        #[serde(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "nested")]
        family: Family,
        /// Emit the full amplified pipeline instead of the bare family circuit.
        #[arg(long)]
        pipeline: bool,
    },
    /// Simulate the single-point pipeline: success probability and amplitude trace.
    Simulate {
        #[command(flatten)]
        #[serde(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "nested")]
        family: Family,
        /// Also write the final statevector as <out>/state.bin + state.json.
        #[arg(long)]
        dump: bool,
    },
    /// Tabulate the amplitude recurrences against simulation.
    Recurrence {
        #[command(flatten)]
        #[serde(flatten)]
        common: CommonArgs,
    },
    /// Apply the partial-uncompute rewrite to the nested search over a compiled oracle.
    UncomputeRewrite {
        #[command(flatten)]
        #[serde(flatten)]
        common: CommonArgs,
        /// Oracle circuit (`O_u`, `O_p`, `O_u†`) in JSON, used with --manifest instead of --cnf.
        #[arg(long, requires = "manifest")]
        oracle_circuit: Option<PathBuf>,
        /// Manifest naming the gate ranges of `O_u` and `O_p` in --oracle-circuit.
        #[arg(long, requires = "oracle_circuit")]
        manifest: Option<PathBuf>,
    },
    /// Multi-element search trials with random affine hashes.
    Multipoint {
        #[command(flatten)]
        #[serde(flatten)]
        common: CommonArgs,
        /// Mark this many random elements instead of --oracle-marked or --cnf.
        #[arg(long)]
        marked_count: Option<usize>,
    },
    /// Compile a CNF formula into an oracle and solve it if it has a unique model.
    Ksat {
        #[command(flatten)]
        #[serde(flatten)]
        common: CommonArgs,
        /// Clause count for a random unique formula over --n variables (used without --cnf).
        #[arg(long)]
        clauses: Option<usize>,
        #[arg(long, default_value_t = 3)]
        width: usize,
        /// Stop after compiling.
        #[arg(long)]
        compile_only: bool,
        /// Keep the variable order instead of relabeling by dependency.
        #[arg(long)]
        no_relabel: bool,
    },
    /// Query and gate telemetry over a range of n against the optimal-query reference.
    Bench {
        #[command(flatten)]
        #[serde(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "queries")]
        mode: BenchMode,
        #[arg(long, default_value = "6..14")]
        n_range: NRange,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Simulate { .. } => "simulate",
            Command::Recurrence { .. } => "recurrence",
            Command::UncomputeRewrite { .. } => "uncompute-rewrite",
            Command::Multipoint { .. } => "multipoint",
            Command::Ksat { .. } => "ksat",
            Command::Bench { .. } => "bench",
        }
    }

    fn common_mut(&mut self) -> &mut CommonArgs {
        match self {
            Command::Generate { common, .. }
            | Command::Simulate { common, .. }
            | Command::Recurrence { common }
            | Command::UncomputeRewrite { common, .. }
            | Command::Multipoint { common, .. }
            | Command::Ksat { common, .. }
            | Command::Bench { common, .. } => common,
        }
    }
}

/// Collects the files of one run and writes its report.
pub struct Output {
    dir: PathBuf,
    command: &'static str,
    config: serde_json::Value,
    seed: Option<u64>,
    files: Vec<String>,
    started: Instant,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    version: &'static str,
    command: &'static str,
    config: &'a serde_json::Value,
    seed: Option<u64>,
    files: &'a [String],
    result: T,
}

#[derive(Serialize)]
struct Meta {
    command: &'static str,
    wall_clock_seconds: f64,
}

impl Output {
    fn new(dir: PathBuf, command: &'static str, config: serde_json::Value) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
        Ok(Output { dir, command, config, seed: None, files: Vec::new(), started: Instant::now() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn track(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    fn finish(mut self, result: impl Serialize) -> Result<PathBuf, CliError> {
        let name = format!("{}.json", self.command);
        let report = Report {
            version: VERSION,
            command: self.command,
            config: &self.config,
            seed: self.seed,
            files: &self.files,
            result,
        };
        let json = serde_json::to_string_pretty(&report).expect("reports serialize");
        let path = self.dir.join(&name);
        fs::write(&path, json + "\n").map_err(|source| CliError::Io { path: path.clone(), source })?;
        let meta = Meta { command: self.command, wall_clock_seconds: self.started.elapsed().as_secs_f64() };
        let meta_path = self.dir.join("meta.json");
        fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("meta serializes"))
            .map_err(|source| CliError::Io { path: meta_path, source })?;
        self.files.clear();
        Ok(path)
    }
}

fn output_dir(common: &CommonArgs) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("searchkit-out"))
}

/// Runs one parsed command and returns the path of its JSON report.
pub fn run(mut command: Command) -> Result<PathBuf, CliError> {
    let resolved = command.common_mut().clone().resolve()?;
    *command.common_mut() = resolved;
    let dir = output_dir(command.common_mut());
    let config = serde_json::to_value(&command).expect("config serializes");
    let out = Output::new(dir, command.name(), config)?;
    commands::dispatch(command, out)
}

/// Parses `args`, runs the command and reports diagnostics on stderr.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(report) => {
            println!("report: {}", report.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!("6..14".parse::<NRange>().unwrap().0, 6..=14);
        assert_eq!("3..=3".parse::<NRange>().unwrap().0, 3..=3);
        assert!("5..2".parse::<NRange>().is_err());
        assert!("5".parse::<NRange>().is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let file: CommonArgs = toml::from_str("n = 9\nx = 2\nschedule = [4, 5]\noracle-marked = [1, 2]\n").unwrap();
        assert_eq!(file.schedule.as_ref().unwrap().ks(), &[4, 5]);
        let flags = CommonArgs { n: Some(7), ..Default::default() };
        let merged = flags.merged_with(file);
        assert_eq!(merged.n, Some(7));
        assert_eq!(merged.x, Some(2));
        assert_eq!(merged.oracle_marked, Some(vec![1, 2]));
        assert!(toml::from_str::<CommonArgs>("bogus = 1").is_err());
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["searchkit", "generate", "--n", "7", "--x", "1"]).unwrap();
        assert!(matches!(cli.command, Command::Generate { ref common, .. } if common.n == Some(7)));
        let cli = Cli::try_parse_from(["searchkit", "bench", "--mode", "gates", "--n-range", "6..8"]).unwrap();
        assert!(matches!(cli.command, Command::Bench { mode: BenchMode::Gates, .. }));
        let cli = Cli::try_parse_from(["searchkit", "simulate", "--oracle-marked", "3,5", "--schedule", "2,2"]).unwrap();
        let Command::Simulate { common, .. } = cli.command else { panic!() };
        assert_eq!(common.oracle_marked, Some(vec![3, 5]));
        assert_eq!(common.schedule.unwrap().ks(), &[2, 2]);
        assert!(Cli::try_parse_from(["searchkit", "bench", "--n-range", "x"]).is_err());
    }
}
