//! Command-line entry point for the distractor generation pipeline.
//!
//! Stages read and write JSONL artifacts so each one can be re-run and
//! diffed independently. Exit codes: 0 success, 1 data error, 2
//! configuration error.

use clap::{Args, Parser, Subcommand};
use clozegen::candidates::{read_candidates_jsonl, write_candidates_jsonl};
use clozegen::corpus::{read_items_jsonl, write_items_jsonl};
use clozegen::metrics::EvalReport;
use clozegen::pipeline::{
    self, AblationAxis, AblationRow, DatasetFormat, PipelineConfig, PipelineError,
};
use clozegen::selector::{read_ranked_jsonl, write_ranked_jsonl, SimilarityMode};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "clozegen", version, about = "Cloze distractor generation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw CLOTH or DGen dataset into canonical items JSONL.
    Prepare {
        /// Raw dataset file (JSONL, one record per line).
        input: PathBuf,
        /// Dataset layout: cloth|dgen.
        #[arg(long)]
        format: DatasetFormat,
        #[arg(short, long)]
        output: PathBuf,
        /// Skip malformed records instead of failing the run.
        #[arg(long)]
        skip_bad: bool,
    },
    /// Generate candidate sets from items with a masked-LM backend.
    Generate {
        /// Items JSONL.
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Rank candidate sets with the feature-based selector.
    Rank {
        /// Candidates JSONL.
        input: PathBuf,
        /// Items JSONL (for answers, stems and gold sets).
        #[arg(long)]
        items: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score ranked lists against gold distractors.
    Evaluate {
        /// Ranked JSONL.
        input: PathBuf,
        #[arg(long)]
        items: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Report values as fractions or x100.
        #[arg(long, default_value = "fraction")]
        scale: String,
    },
    /// Run the pipeline once per variant along one axis and emit a
    /// comparison table.
    Ablate {
        /// Items JSONL.
        input: PathBuf,
        /// strategy|weights-preset|components.
        #[arg(long)]
        axis: AblationAxis,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Pretty-print an evaluation report or ablation table.
    Report {
        /// Report JSON or ablation JSON file.
        input: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; individual flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// naive|answer.
    #[arg(long)]
    strategy: Option<clozegen::backend::Strategy>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated w0,w1,w2,w3.
    #[arg(long)]
    weights: Option<String>,
    /// printed|cosine.
    #[arg(long)]
    similarity_mode: Option<SimilarityMode>,
    /// stub:PATH or model:ID.
    #[arg(long)]
    backend: Option<String>,
    /// Un-fine-tuned backend for component ablation (stub:PATH or model:ID).
    #[arg(long)]
    backend_base: Option<String>,
    /// table:PATH or hashed:DIM:SEED.
    #[arg(long)]
    word_embedder: Option<String>,
    /// table:PATH or hashed:DIM:SEED.
    #[arg(long)]
    sentence_embedder: Option<String>,
    /// lexicon:PATH.
    #[arg(long)]
    pos_tagger: Option<String>,
    #[arg(long)]
    jobs: Option<usize>,
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_toml(&read(path)?)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.strategy {
            cfg.strategy = s;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(w) = &self.weights {
            cfg.weights = parse_weights(w)?;
        }
        if let Some(m) = self.similarity_mode {
            cfg.similarity_mode = m;
        }
        if let Some(b) = &self.backend {
            cfg.backend = b.clone();
        }
        if let Some(b) = &self.backend_base {
            cfg.backend_base = Some(b.clone());
        }
        if let Some(e) = &self.word_embedder {
            cfg.word_embedder = e.clone();
        }
        if let Some(e) = &self.sentence_embedder {
            cfg.sentence_embedder = e.clone();
        }
        if let Some(t) = &self.pos_tagger {
            cfg.pos_tagger = t.clone();
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_weights(s: &str) -> Result<[f64; 4], PipelineError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| PipelineError::Config(format!("bad weights {s:?}: {e}")))?;
    parts
        .try_into()
        .map_err(|_| PipelineError::Config(format!("expected 4 weights, got {s:?}")))
}

fn read(path: &PathBuf) -> Result<String, PipelineError> {
    std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &PathBuf, content: &str) -> Result<(), PipelineError> {
    std::fs::write(path, content)
        .map_err(|e| PipelineError::Data(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Prepare { input, format, output, skip_bad } => {
            let (items, errors) = pipeline::prepare(&read(&input)?, format);
            for (line, err) in &errors {
                eprintln!("{}:{line}: {err}", input.display());
            }
            if !errors.is_empty() && !skip_bad {
                return Err(PipelineError::Data(format!(
                    "{} malformed record(s); pass --skip-bad to drop them",
                    errors.len()
                )));
            }
            write(&output, &write_items_jsonl(&items))?;
            eprintln!("prepared {} item(s)", items.len());
            Ok(())
        }
        Command::Generate { input, output, config } => {
            let cfg = config.build()?;
            let items = read_items_jsonl(&read(&input)?)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let backend = cfg.resolve_backend()?;
            let (sets, errors) = pipeline::run_generate(&items, backend.as_ref(), &cfg)?;
            for e in &errors {
                eprintln!("warning: {e}");
            }
            write(&output, &write_candidates_jsonl(&sets))?;
            eprintln!("generated {} candidate set(s), {} failure(s)", sets.len(), errors.len());
            Ok(())
        }
        Command::Rank { input, items, output, config } => {
            let cfg = config.build()?;
            let sets = read_candidates_jsonl(&read(&input)?)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let items = read_items_jsonl(&read(&items)?)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let ranked = pipeline::run_rank(&sets, &items, &cfg)?;
            write(&output, &write_ranked_jsonl(&ranked))?;
            eprintln!("ranked {} item(s)", ranked.len());
            Ok(())
        }
        Command::Evaluate { input, items, output, scale } => {
            let ranked = read_ranked_jsonl(&read(&input)?)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let items = read_items_jsonl(&read(&items)?)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let report = pipeline::run_evaluate(&ranked, &items)?;
            let report = match scale.as_str() {
                "fraction" => report,
                "x100" => report.scaled_x100(),
                other => {
                    return Err(PipelineError::Config(format!(
                        "unknown scale {other:?} (expected fraction|x100)"
                    )))
                }
            };
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            write(&output, &json)?;
            print_report(&report);
            Ok(())
        }
        Command::Ablate { input, axis, output, config } => {
            let cfg = config.build()?;
            let items = read_items_jsonl(&read(&input)?)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let rows = pipeline::run_ablate(&items, &cfg, axis)?;
            let json = serde_json::to_string_pretty(&rows)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            write(&output, &json)?;
            print_rows(&rows);
            Ok(())
        }
        Command::Report { input } => {
            let text = read(&input)?;
            if let Ok(rows) = serde_json::from_str::<Vec<AblationRow>>(&text) {
                print_rows(&rows);
                return Ok(());
            }
            let report: EvalReport = serde_json::from_str(&text)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", input.display())))?;
            print_report(&report);
            Ok(())
        }
    }
}

fn print_report(report: &EvalReport) {
    let a = &report.aggregate;
    println!(
        "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "scale", "P@1", "F1@3", "F1@10", "MRR@10", "NDCG@10"
    );
    println!(
        "{:<10} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
        a.scale, a.p1, a.f1_3, a.f1_10, a.mrr10, a.ndcg10
    );
    println!("({} items)", report.per_item.len());
}

fn print_rows(rows: &[AblationRow]) {
    println!(
        "{:<28} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "variant", "P@1", "F1@3", "F1@10", "MRR@10", "NDCG@10"
    );
    for r in rows {
        println!(
            "{:<28} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.variant, r.p1, r.f1_3, r.f1_10, r.mrr10, r.ndcg10
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
