//! `lingomerge` command-line front-end.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 I/O error,
//! 3 numerical error. Diagnostics go to stderr as a single line
//! `error[CODE]: message`.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use lingomerge::container;
use lingomerge::cost::{self, CostScenario, Stage};
use lingomerge::lowrank::refactor_to_adapter;
use lingomerge::metrics::report::{evaluate, Task};
use lingomerge::similarity::{similarity_matrix_with, SimilarityMode};
use lingomerge::{
    compute_delta, load_adapter, load_as_delta, merge, save_adapter, save_delta, Delta, Error, MergeConfig,
};

#[derive(Debug, Parser)]
#[command(name = "lingomerge", version, about = "Merge LoRA language adapters and compare merge-vs-retrain cost")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Merge adapters or deltas into one delta (or a refactored adapter).
    Merge {
        /// JSON merge config.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        density: Option<f64>,
        #[arg(long = "drop-rate")]
        drop_rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated, one per input.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Write a rank-R adapter (truncated SVD) instead of a delta.
        #[arg(long = "refactor-rank")]
        refactor_rank: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Compute the per-layer delta (alpha/r)·B·A of an adapter.
    Delta {
        #[arg(long)]
        out: PathBuf,
        adapter: PathBuf,
    },
    /// Pairwise cosine similarity of language vectors, as CSV.
    Similarity {
        #[arg(long)]
        csv: PathBuf,
        /// Average per-layer cosines instead of one cosine over the flattened vector.
        #[arg(long = "per-layer")]
        per_layer: bool,
        #[arg(required = true, num_args = 2..)]
        deltas: Vec<PathBuf>,
    },
    /// Training time/cost comparison table.
    Cost {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluation metrics over a JSON-lines file.
    Metrics {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print a container's header, metadata and tensors.
    Inspect { file: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Initial,
    Update,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Sentiment,
    Reasoning,
    Summarization,
    Extraction,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Sentiment => Task::Sentiment,
            TaskArg::Reasoning => Task::Reasoning,
            TaskArg::Summarization => Task::Summarization,
            TaskArg::Extraction => Task::Extraction,
        }
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            eprintln!("error[E_USAGE]: {first}");
            return 1;
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            e.class().exit_code()
        }
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Load every input as a delta. Unlabeled inputs take their file stem so
/// that per-model random streams stay distinct.
fn load_inputs(paths: &[PathBuf]) -> Result<Vec<Delta>, Error> {
    paths
        .iter()
        .map(|p| {
            let d = load_as_delta(p)?;
            if d.label().is_empty() {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Ok(d.with_label(stem))
            } else {
                Ok(d)
            }
        })
        .collect()
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), Error> {
    match command {
        Command::Merge {
            config,
            density,
            drop_rate,
            seed,
            weights,
            refactor_rank,
            out: out_path,
            inputs,
        } => {
            let mut cfg = MergeConfig::from_json(&read_text(&config)?)?;
            if let Some(d) = density {
                cfg.density = d;
            }
            if let Some(p) = drop_rate {
                cfg.drop_rate = Some(p);
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = weights {
                cfg.weights = Some(w);
            }
            let pipeline = cfg.validate()?;
            if pipeline.uses_knots() && inputs.len() < 2 {
                return Err(Error::Parameter(format!(
                    "{pipeline} needs at least 2 inputs, got {}",
                    inputs.len()
                )));
            }
            cfg.weights_for(inputs.len())?;
            let deltas = load_inputs(&inputs)?;
            let merged = merge(&deltas, &cfg)?;
            match refactor_rank {
                Some(r) => save_adapter(&refactor_to_adapter(&merged, r)?, &out_path)?,
                None => save_delta(&merged, &out_path)?,
            }
            writeln!(out, "wrote {} ({})", out_path.display(), merged.label()).map_err(stdout_err)?;
        }
        Command::Delta { out: out_path, adapter } => {
            let delta = compute_delta(&load_adapter(&adapter)?);
            save_delta(&delta, &out_path)?;
            writeln!(out, "wrote {} ({} layers)", out_path.display(), delta.layers().len()).map_err(stdout_err)?;
        }
        Command::Similarity { csv, per_layer, deltas } => {
            let loaded = load_inputs(&deltas)?;
            let mode = if per_layer {
                SimilarityMode::LayerMean
            } else {
                SimilarityMode::Flattened
            };
            let m = similarity_matrix_with(&loaded, mode)?;
            write_file(&csv, m.to_csv().as_bytes())?;
            out.write_all(m.to_csv().as_bytes()).map_err(stdout_err)?;
        }
        Command::Cost { scenario, mode, json } => {
            let s = CostScenario::from_json(&read_text(&scenario)?)?;
            let stage = mode.map(|m| match m {
                Mode::Initial => Stage::Initial,
                Mode::Update => Stage::Update,
            });
            let report = cost::report(&s, stage)?;
            out.write_all(cost::render_table(&report).as_bytes()).map_err(stdout_err)?;
            if let Some(path) = json {
                let mut text = serde_json::to_string_pretty(&report)?;
                text.push('\n');
                write_file(&path, text.as_bytes())?;
            }
        }
        Command::Metrics { task, input, json } => {
            let file = fs::File::open(&input).map_err(|e| Error::io(&input, e))?;
            let report = evaluate(task.into(), BufReader::new(file))?;
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            out.write_all(text.as_bytes()).map_err(stdout_err)?;
            if let Some(path) = json {
                write_file(&path, text.as_bytes())?;
            }
        }
        Command::Inspect { file } => {
            let bytes = container::read_bytes(&file)?;
            let (header, data) = container::parse_header(&bytes)?;
            let mut text = format!("header: {}\n", header.raw_json);
            text.push_str(&format!("data bytes: {}\n", data.len()));
            text.push_str("metadata:\n");
            for (k, v) in &header.metadata {
                text.push_str(&format!("  {k} = {v}\n"));
            }
            text.push_str("tensors:\n");
            let mut entries = header.entries.clone();
            entries.sort_by(|a, b| a.name.cmp(&b.name));
            for e in &entries {
                text.push_str(&format!(
                    "  {}  {}  {:?}  [{}, {}]\n",
                    e.name, e.dtype, e.shape, e.data_offsets.0, e.data_offsets.1
                ));
            }
            out.write_all(text.as_bytes()).map_err(stdout_err)?;
        }
    }
    Ok(())
}
