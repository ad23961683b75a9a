//! `c2`: build concept indexes, annotate tables, evaluate annotations.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use c2_core::error::{Error, IndexError};
use c2_core::eval::{evaluate, load_synonyms, CaseSet};
use c2_core::output::render;
use c2_core::table::read_table;
use c2_core::util::write_atomic;
use c2_core::{annotate, build_index, load_indexes, CorpusManifest, EstimatorConfig, Indexes, OutputFormat};
use clap::{Args, Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INDEX: u8 = 3;

#[derive(Parser)]
#[command(name = "c2", version, about = "Annotate table columns with concepts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a corpus manifest and write all indexes to a directory
    BuildIndex {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank candidate concepts for every column of a table
    Annotate {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        topk: u64,
        #[arg(long, default_value = "jsonl")]
        format: OutputFormat,
        /// Write here (atomically) instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Score annotations against ground truth, synonym-aware
    Evaluate {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        cases: PathBuf,
        /// Tab-separated synonym sets, one per line
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
}

/// Overrides of the configuration stored with the index.
#[derive(Args)]
struct Tuning {
    #[arg(long)]
    no_belief_sharing: bool,
    #[arg(long)]
    no_tuple_validation: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    similarity_threshold: Option<f64>,
}

impl Tuning {
    fn apply(&self, mut config: EstimatorConfig) -> EstimatorConfig {
        if self.no_belief_sharing {
            config.belief_sharing = false;
        }
        if self.no_tuple_validation {
            config.tuple_validation = false;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(e) = self.epsilon {
            config.epsilon = e;
        }
        if let Some(b) = self.beam_width {
            config.beam_width = b;
        }
        if let Some(t) = self.similarity_threshold {
            config.similarity_threshold = t;
        }
        config
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Index(_) => EXIT_INDEX,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn index_failure(e: IndexError) -> Failure {
    Failure {
        code: EXIT_INDEX,
        message: e.to_string(),
    }
}

fn open_index(dir: &Path, tuning: &Tuning) -> Result<(Indexes, EstimatorConfig), Failure> {
    let (indexes, meta) = load_indexes(dir).map_err(index_failure)?;
    let config = tuning.apply(meta.estimator);
    config.validate().map_err(|e| Failure {
        code: EXIT_USAGE,
        message: e.to_string(),
    })?;
    Ok((indexes, config))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    let io_failure = |what: String, e: std::io::Error| Failure {
        code: EXIT_DATA,
        message: format!("cannot write {what}: {e}"),
    };
    match out {
        Some(path) => write_atomic(path, text.as_bytes()).map_err(|e| io_failure(path.display().to_string(), e)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| io_failure("stdout".into(), e)),
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::BuildIndex { manifest, out } => {
            let manifest = CorpusManifest::load(&manifest).map_err(Error::from)?;
            let summary = build_index(&manifest, &out)?;
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            emit(None, &(text + "\n"))
        }
        Command::Annotate {
            index,
            table,
            topk,
            format,
            out,
            tuning,
        } => {
            let (indexes, config) = open_index(&index, &tuning)?;
            let table = read_table(&table)?;
            let result = annotate(&table, &indexes, &config).map_err(Error::from)?;
            emit(out.as_deref(), &render(&result, topk as usize, format))
        }
        Command::Evaluate {
            index,
            cases,
            synonyms,
            out,
            tuning,
        } => {
            let (indexes, config) = open_index(&index, &tuning)?;
            let cases = CaseSet::load(&cases).map_err(Error::from)?;
            let synonyms = match synonyms {
                Some(p) => load_synonyms(&p).map_err(Error::from)?,
                None => String::new(),
            };
            let report = evaluate(&cases, &indexes, &config, &synonyms).map_err(Error::from)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            emit(out.as_deref(), &(text + "\n"))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("c2: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
