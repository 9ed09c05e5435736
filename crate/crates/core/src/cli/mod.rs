// SPDX-License-Identifier: Apache-2.0

//! Command-line front end. `run` parses arguments, dispatches and maps
//! failures to exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use commands::{build_matrix, pairwise_summaries, PairwiseSummary};
pub use manifest::RunManifest;

use crate::features::Scheme;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const SEED_ENV: &str = "HASHCLUST_SEED";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Data(_) => "data",
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Data(e.to_string())
            }
        }
    )*};
}

data_error!(
    crate::corpus::CorpusError,
    crate::features::FeatureError,
    crate::clustering::ClusterError,
    std::io::Error,
    csv::Error,
    serde_json::Error
);

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "hashclust", version, about = "Cluster executables by SSDeep, TLSH and IMPHash digests")]
pub struct Cli {
    /// Report errors on stderr as a JSON object.
    #[arg(long, global = true)]
    pub error_json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Generate a planted-family corpus of inert PE files.
    Synth(SynthArgs),
    /// Compute SHA-256, SSDeep, TLSH and IMPHash for every file in a directory.
    Hash(HashArgs),
    /// Join metadata with digests and drop incomplete records.
    Join(JoinArgs),
    /// Vectorize, standardize and cluster with K-Means.
    Cluster(ClusterArgs),
    /// Silhouette score over a range of K.
    Sweep(SweepArgs),
    /// Family distribution, pairwise summaries and contingency tables.
    Report(ReportArgs),
    /// Re-run the invocation recorded in a run manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Ssdeep,
    Tlsh,
    Imphash,
}

impl SchemeArg {
    pub const ALL: [Self; 3] = [Self::Ssdeep, Self::Tlsh, Self::Imphash];

    pub fn scheme(self) -> Scheme {
        match self {
            Self::Ssdeep => Scheme::Ssdeep,
            Self::Tlsh => Scheme::Tlsh,
            Self::Imphash => Scheme::ImphashOnehot,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ssdeep => "ssdeep",
            Self::Tlsh => "tlsh",
            Self::Imphash => "imphash",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn at_least(min: usize) -> impl Fn(&str) -> Result<usize, String> + Clone {
    move |s| {
        let v: usize = s.parse().map_err(|_| format!("{s:?} is not a non-negative integer"))?;
        if v >= min {
            Ok(v)
        } else {
            Err(format!("must be at least {min}"))
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeedArg {
    /// Seed for every random choice.
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Output directory; receives samples/ and manifest.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6, value_parser = at_least(2))]
    pub families: usize,
    #[arg(long, default_value_t = 20, value_parser = at_least(2))]
    pub samples_per_family: usize,
    /// Fraction of payload bytes changed per variant, in [0, 1].
    #[arg(long, default_value_t = 0.02, value_parser = unit_interval)]
    pub mutation_rate: f64,
    /// Chance that a variant gets an extra data section, in [0, 1].
    #[arg(long, default_value_t = 0.25, value_parser = unit_interval)]
    pub section_probability: f64,
    /// first_seen and last_seen written to the manifest.
    #[arg(long, default_value = "2024-01-01")]
    pub date: NaiveDate,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HashArgs {
    /// Directory of sample files.
    pub dir: PathBuf,
    /// Digest CSV: sha256,size,ssdeep,tlsh,imphash.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct JoinArgs {
    /// Metadata CSV: sha256,family,first_seen,last_seen.
    #[arg(long)]
    pub metadata: PathBuf,
    /// Digest CSV from `hash`.
    #[arg(long)]
    pub digests: PathBuf,
    /// Unified CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Drop report JSON. Defaults to <out>.drops.json.
    #[arg(long)]
    pub drops: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClusterArgs {
    /// Unified CSV from `join`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    #[arg(long, value_parser = at_least(2))]
    pub k: usize,
    /// Output prefix.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 2, value_parser = at_least(2))]
    pub k_min: usize,
    #[arg(long, default_value_t = 10, value_parser = at_least(2))]
    pub k_max: usize,
    /// Silhouette curve output.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Clusters for the contingency tables. Defaults to the number of families.
    #[arg(long, value_parser = at_least(2))]
    pub k: Option<usize>,
    /// Sample directory; enables the IMPHash Jaccard table.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReplayArgs {
    /// Run manifest written by an earlier invocation.
    pub manifest: PathBuf,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Synth(_) => "synth",
            Self::Hash(_) => "hash",
            Self::Join(_) => "join",
            Self::Cluster(_) => "cluster",
            Self::Sweep(_) => "sweep",
            Self::Report(_) => "report",
            Self::Replay(_) => "replay",
        }
    }

    fn seed_mut(&mut self) -> Option<&mut u64> {
        match self {
            Self::Synth(a) => Some(&mut a.seed.seed),
            Self::Cluster(a) => Some(&mut a.seed.seed),
            Self::Sweep(a) => Some(&mut a.seed.seed),
            Self::Report(a) => Some(&mut a.seed.seed),
            Self::Hash(_) | Self::Join(_) | Self::Replay(_) => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        self.clone().seed_mut().map(|s| *s)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let error_json = args.iter().any(|a| a == "--error-json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            if error_json {
                report(&CliError::Usage(e.kind().to_string() + ": " + &e.to_string()), true);
            } else {
                eprint!("{e}");
            }
            return EXIT_USAGE;
        }
    };
    let raw: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, raw) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report(&e, cli.error_json);
            e.exit_code()
        }
    }
}

fn report(e: &CliError, json: bool) {
    if json {
        let v = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() }, "exit_code": e.exit_code() });
        eprintln!("{v}");
    } else {
        eprintln!("error: {e}");
    }
}

fn execute(command: Command, raw_args: Vec<String>) -> Result<(), CliError> {
    if let Command::Replay(r) = &command {
        let m = RunManifest::read(&r.manifest)?;
        let mut argv = vec!["hashclust".to_owned()];
        argv.extend(m.args.iter().cloned());
        let mut cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Usage(format!("manifest arguments: {e}")))?;
        if let (Some(slot), Some(seed)) = (cli.command.seed_mut(), m.seed) {
            *slot = seed;
        }
        if matches!(cli.command, Command::Replay(_)) {
            return Err(CliError::Usage("a replay manifest cannot point at another replay".into()));
        }
        return execute(cli.command, m.args);
    }
    let started = std::time::Instant::now();
    let record = commands::dispatch(&command)?;
    let manifest = RunManifest::new(&command, raw_args, record, started.elapsed());
    manifest.write_next_to(&commands::primary_output(&command))?;
    Ok(())
}
