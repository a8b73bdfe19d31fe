//! Command-line driver.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::corpus::{read_corpus, CorpusError};
use crate::metrics::{align, evaluate, EvalError, EvalOptions, Regime};
use crate::ontology::{ChapterTable, Hierarchy, Level, OntologyError, DEFAULT_CHAPTER_TABLE};
use crate::report::{sha256_hex, ReportConfig, ReportDocument};

#[derive(Debug, Parser)]
#[command(
    name = "cophe",
    version,
    about = "Flat, set-based and count-preserving hierarchical evaluation of ICD-9 code predictions"
)]
pub struct Args {
    /// Predicted labels (.jsonl or .csv)
    #[arg(long)]
    pub pred: PathBuf,

    /// Gold labels (.jsonl or .csv)
    #[arg(long)]
    pub gold: PathBuf,

    #[arg(long, value_enum, default_value_t = ModeArg::All)]
    pub mode: ModeArg,

    /// Highest level to augment to
    #[arg(long = "max-level", value_enum, default_value_t = MaxLevelArg::Chapter)]
    pub max_level: MaxLevelArg,

    /// Chapter table (TSV); defaults to the bundled ICD-9-CM block table
    #[arg(long)]
    pub chapters: Option<PathBuf>,

    /// Show per-level rows in the table output
    #[arg(long)]
    pub per_level: bool,

    /// Include per-node (per-code for flat) breakdowns
    #[arg(long)]
    pub per_code: bool,

    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,

    /// Reject duplicate codes and categories outside the chapter table
    #[arg(long)]
    pub strict: bool,

    /// Write the report here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Flat,
    Set,
    Cophe,
    All,
}

impl ModeArg {
    fn regimes(self) -> BTreeSet<Regime> {
        match self {
            ModeArg::Flat => [Regime::Flat].into(),
            ModeArg::Set => [Regime::SetBased].into(),
            ModeArg::Cophe => [Regime::Cophe].into(),
            ModeArg::All => Regime::ALL.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaxLevelArg {
    E1,
    E0,
    Chapter,
}

impl From<MaxLevelArg> for Level {
    fn from(l: MaxLevelArg) -> Level {
        match l {
            MaxLevelArg::E1 => Level::E1,
            MaxLevelArg::E0 => Level::E0,
            MaxLevelArg::Chapter => Level::Chapter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),

    #[error("{0}")]
    Alignment(EvalError),

    #[error("chapter table {path}: {error}")]
    ChapterTable { path: String, error: OntologyError },

    #[error("configuration: {0}")]
    Config(OntologyError),

    #[error("{path}: {error}")]
    Output { path: String, error: io::Error },
}

impl CliError {
    /// 1 for bad input data, 2 for bad configuration.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Corpus(_) | CliError::Alignment(_) | CliError::Output { .. } => 1,
            CliError::ChapterTable { .. } | CliError::Config(_) => 2,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Ontology(o) => CliError::Config(o),
            other => CliError::Alignment(other),
        }
    }
}

fn load_hierarchy(args: &Args) -> Result<(Hierarchy, String, String), CliError> {
    let (bytes, name) = match &args.chapters {
        Some(path) => {
            let name = path.display().to_string();
            let bytes = fs::read(path).map_err(|e| CliError::ChapterTable {
                path: name.clone(),
                error: OntologyError::Io(e.to_string()),
            })?;
            (bytes, name)
        }
        None => (DEFAULT_CHAPTER_TABLE.as_bytes().to_vec(), "bundled".to_owned()),
    };
    let table = ChapterTable::load(bytes.as_slice()).map_err(|error| CliError::ChapterTable {
        path: name.clone(),
        error,
    })?;
    let hierarchy = Hierarchy::new(table, args.max_level.into(), args.strict).map_err(CliError::Config)?;
    Ok((hierarchy, name, sha256_hex(&bytes)))
}

/// Run an evaluation and render the report, without writing it anywhere.
pub fn render(args: &Args) -> Result<String, CliError> {
    let (hierarchy, table_name, checksum) = load_hierarchy(args)?;
    let pred = read_corpus(&args.pred, args.strict)?;
    let gold = read_corpus(&args.gold, args.strict)?;
    let corpus = align(pred.documents, gold.documents)?;

    let options = EvalOptions {
        regimes: args.mode.regimes(),
        per_node: args.per_code,
    };
    let report = evaluate(&corpus, &hierarchy, &options)?;

    let config = ReportConfig {
        max_level: hierarchy.max_level(),
        regimes: options.regimes.iter().copied().collect(),
        strict: args.strict,
        chapter_table: table_name,
        chapter_table_sha256: checksum,
    };
    let mut warnings = pred.warnings;
    warnings.extend(gold.warnings);
    let document = ReportDocument::new(config, report, warnings);
    Ok(match args.format {
        OutputFormat::Table => document.to_table(args.per_level),
        OutputFormat::Json => document.to_json(),
    })
}

/// Replace `path` with `contents` in one step.
fn write_atomically(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let rendered = render(args)?;
    match &args.output {
        Some(path) => write_atomically(path, &rendered).map_err(|error| CliError::Output {
            path: path.display().to_string(),
            error,
        }),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(rendered.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|error| CliError::Output {
                    path: "<stdout>".to_owned(),
                    error,
                })
        }
    }
}
