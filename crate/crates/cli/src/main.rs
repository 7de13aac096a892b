//! `driftlab` command-line tool.

mod build;
mod config;
mod plot;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use driftlab::datamodel::{Chunk, ChunkSource, ScoreTensor};
use driftlab::evaluators::{export_scores, Evaluator};
use driftlab::generator::StreamGenerator;
use driftlab::learners::Learner;
use driftlab::stream_io::{write_stream, ArffReader, CsvReader, Format, StreamIoError, StreamLayout};
use thiserror::Error;
use toml::Value;

use config::{format_from_path, Document, StreamSource};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or unknown names; exit status 2.
    #[error("{0}")]
    Invalid(String),
    /// Runtime failure (I/O, parsing, learner fault); exit status 1.
    #[error("{0}")]
    Failed(String),
    /// Standard output closed early, e.g. piped into `head`.
    #[error("broken pipe")]
    Pipe,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Failed(_) => 1,
            CliError::Pipe => 0,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return CliError::Pipe;
        }
        CliError::Failed(format!("I/O error: {e}"))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Arff,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Arff => Format::Arff,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "driftlab", version, about = "Generate, inspect and evaluate drifting data streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic stream to disk.
    Generate(GenerateArgs),
    /// Print per-chunk class counts and imbalance ratios of a stream file.
    Inspect(InspectArgs),
    /// Run an experiment described by a config file.
    Run(RunArgs),
}

#[derive(Debug, clap::Args)]
struct GenerateArgs {
    /// Config file; only its [stream] section is used.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `stream.n_features=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    n_chunks: Option<usize>,
    #[arg(long)]
    chunk_size: Option<usize>,
    #[arg(long)]
    n_drifts: Option<usize>,
    /// sudden, gradual or incremental.
    #[arg(long)]
    drift_type: Option<String>,
    #[arg(long)]
    recurring: bool,
    #[arg(long)]
    n_features: Option<usize>,
    /// Static class weights, e.g. `0.9,0.1`.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output format; defaults to the output file extension, else ARFF.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct InspectArgs {
    path: PathBuf,
    #[arg(long, default_value_t = 200)]
    chunk_size: usize,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Number of classes in a CSV stream.
    #[arg(long, default_value_t = 2)]
    n_classes: usize,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Experiment config file.
    config: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Overrides stream.random_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Scores CSV path; overrides output.scores. Standard output when neither is set.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// SVG plot path; overrides output.plot.
    #[arg(long)]
    plot: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Inspect(a) => inspect(a),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Pipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn document(path: Option<&Path>, overrides: &[String]) -> Result<Document, CliError> {
    let mut doc = match path {
        Some(p) => Document::load(p)?,
        None => Document::default(),
    };
    for o in overrides {
        doc.set(o)?;
    }
    Ok(doc)
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let mut doc = document(a.config.as_deref(), &a.overrides)?;
    let mut flag = |key: &str, v: Option<Value>| -> Result<(), CliError> {
        match v {
            Some(v) => doc.set_value(&format!("stream.{key}"), v),
            None => Ok(()),
        }
    };
    let int = |v: Option<usize>| v.map(|n| Value::Integer(n as i64));
    flag("n_chunks", int(a.n_chunks))?;
    flag("chunk_size", int(a.chunk_size))?;
    flag("n_drifts", int(a.n_drifts))?;
    flag("n_features", int(a.n_features))?;
    flag("drift_type", a.drift_type.map(Value::String))?;
    flag("recurring", a.recurring.then_some(Value::Boolean(true)))?;
    flag("weights", a.weights.map(|w| Value::Array(w.into_iter().map(Value::Float).collect())))?;
    flag("random_seed", a.seed.map(|s| Value::Integer(s as i64)))?;
    let config = doc.stream_config()?;

    let format = a
        .format
        .map(Format::from)
        .or_else(|| a.output.as_deref().map(format_from_path))
        .unwrap_or(Format::Arff);
    let generator = StreamGenerator::new(config.clone()).map_err(|e| CliError::Invalid(e.to_string()))?;
    let chunks: Vec<Chunk> = generator.collect();
    let layout = StreamLayout { relation: "driftlab".into(), n_features: config.n_features, n_classes: config.n_classes };
    let rows = match &a.output {
        Some(path) => {
            let mut sink = BufWriter::new(File::create(path)?);
            write_stream(&mut sink, &layout, &chunks, format).map_err(io_failure)?
        }
        None => write_stream(&mut BufWriter::new(io::stdout().lock()), &layout, &chunks, format).map_err(io_failure)?,
    };

    let mut totals = vec![0usize; config.n_classes];
    for c in &chunks {
        for (t, n) in totals.iter_mut().zip(c.class_counts(config.n_classes)) {
            *t += n;
        }
    }
    let summary = format!(
        "n_chunks: {}\nchunk_size: {}\nrows: {rows}\n{}",
        config.n_chunks,
        config.chunk_size,
        totals.iter().enumerate().map(|(k, n)| format!("class {k}: {n}")).collect::<Vec<_>>().join("\n")
    );
    if a.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn io_failure(e: StreamIoError) -> CliError {
    CliError::Failed(e.to_string())
}

/// Open stream file as a chunk source.
enum FileStream {
    Arff(ArffReader<BufReader<File>>),
    Csv(CsvReader<BufReader<File>>),
}

impl FileStream {
    fn open(path: &Path, format: Format, chunk_size: usize, n_classes: usize) -> Result<Self, CliError> {
        let file = File::open(path).map_err(|e| CliError::Failed(format!("cannot open {}: {e}", path.display())))?;
        let reader = BufReader::new(file);
        let describe = |e: StreamIoError| CliError::Failed(format!("{}: {e}", path.display()));
        Ok(match format {
            Format::Arff => FileStream::Arff(ArffReader::new(reader, chunk_size).map_err(describe)?),
            Format::Csv => FileStream::Csv(CsvReader::new(reader, chunk_size, n_classes).map_err(describe)?),
        })
    }
}

impl ChunkSource for FileStream {
    type Error = StreamIoError;

    fn classes(&self) -> Vec<usize> {
        match self {
            FileStream::Arff(r) => r.classes(),
            FileStream::Csv(r) => r.classes(),
        }
    }

    fn next_chunk(&mut self) -> Option<Result<Chunk, StreamIoError>> {
        match self {
            FileStream::Arff(r) => r.next_chunk(),
            FileStream::Csv(r) => r.next_chunk(),
        }
    }
}

fn inspect(a: InspectArgs) -> Result<(), CliError> {
    if a.chunk_size == 0 {
        return Err(CliError::Invalid("--chunk-size must be positive".into()));
    }
    let format = a.format.map(Format::from).unwrap_or_else(|| format_from_path(&a.path));
    let mut stream = FileStream::open(&a.path, format, a.chunk_size, a.n_classes)?;
    let n_classes = stream.classes().len();
    let out = io::stdout();
    let mut out = out.lock();
    let header: Vec<String> = (0..n_classes).map(|k| format!("{:>9}", format!("class_{k}"))).collect();
    writeln!(out, "{:>6} {} {:>9}", "chunk", header.join(" "), "ratio")?;
    let mut totals = vec![0usize; n_classes];
    let mut k = 0;
    while let Some(chunk) = stream.next_chunk() {
        let chunk = chunk.map_err(|e| CliError::Failed(format!("{}: {e}", a.path.display())))?;
        let counts = chunk.class_counts(n_classes);
        for (t, n) in totals.iter_mut().zip(&counts) {
            *t += n;
        }
        let cells: Vec<String> = counts.iter().map(|n| format!("{n:>9}")).collect();
        writeln!(out, "{k:>6} {} {:>9}", cells.join(" "), ratio(&counts))?;
        k += 1;
    }
    let cells: Vec<String> = totals.iter().map(|n| format!("{n:>9}")).collect();
    writeln!(out, "{:>6} {} {:>9}", "total", cells.join(" "), ratio(&totals))?;
    Ok(())
}

/// Majority-to-minority ratio over the classes present in the declaration.
fn ratio(counts: &[usize]) -> String {
    let max = counts.iter().copied().max().unwrap_or(0);
    let min = counts.iter().copied().min().unwrap_or(0);
    if min == 0 {
        "inf".into()
    } else {
        format!("{:.3}", max as f64 / min as f64)
    }
}

fn run(a: RunArgs) -> Result<(), CliError> {
    let mut doc = document(Some(&a.config), &a.overrides)?;
    if let Some(seed) = a.seed {
        doc.set_value("stream.random_seed", Value::Integer(seed as i64))?;
    }
    let exp = doc.experiment()?;
    let seed = match &exp.stream {
        StreamSource::Synthetic(c) => c.random_seed,
        StreamSource::File { .. } => driftlab::datamodel::StreamConfig::default().random_seed,
    };
    let mut learners: Vec<Box<dyn Learner>> =
        exp.classifiers.iter().map(|c| build::build(c, seed)).collect::<Result<_, _>>()?;
    let names: Vec<String> = exp.classifiers.iter().map(|c| c.name.clone()).collect();
    let evaluator = Evaluator::new(exp.metrics.clone(), exp.protocol);

    let tensor = match &exp.stream {
        StreamSource::Synthetic(c) => {
            let g = StreamGenerator::new(c.clone()).map_err(|e| CliError::Invalid(e.to_string()))?;
            evaluator.process_named(g, &mut learners, names)
        }
        StreamSource::File { path, format, chunk_size, n_classes } => {
            let s = FileStream::open(path, *format, *chunk_size, *n_classes)?;
            evaluator.process_named(s, &mut learners, names)
        }
    }
    .map_err(|e| CliError::Failed(e.to_string()))?;

    let scores = a.output.or(exp.scores);
    let plot = a.plot.or(exp.plot);
    write_outputs(&tensor, scores.as_deref(), plot.as_deref())
}

fn write_outputs(tensor: &ScoreTensor, scores: Option<&Path>, plot: Option<&Path>) -> Result<(), CliError> {
    let rows = match scores {
        Some(path) => export_scores(tensor, &mut BufWriter::new(File::create(path)?))?,
        None => export_scores(tensor, &mut io::stdout().lock())?,
    };
    if let Some(path) = plot {
        std::fs::write(path, plot::render(tensor))?;
    }
    let (c, s, m) = tensor.shape();
    eprintln!("{rows} score rows ({c} classifiers x {s} chunks x {m} metrics)");
    Ok(())
}
