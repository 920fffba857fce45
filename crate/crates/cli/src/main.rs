//! Command-line front end. Exit status is 0 on success, 1 when an input or
//! config fails validation and 2 for any other failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lsdgnn::convgraph::{build_dag, Omega};
use lsdgnn::curriculum::{dataset_difficulties, difficulty_report, DifficultyParams, EmotionWheel, SimilarityTable};
use lsdgnn::datasets::{generate_synthetic, load_dataset, save_dataset, SynthConfig};
use lsdgnn::harness::{
    evaluate, load_checkpoint, model_gradcheck, save_checkpoint, train, train_seeds, RunConfig, RunData,
};
use lsdgnn::numerics::GradCheckConfig;
use lsdgnn::{Error, Result};

#[derive(Parser)]
#[command(name = "lsdgnn", version, about = "Long/short distance DAG networks for emotion recognition in conversation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the conversation graph of every conversation in a dataset as
    /// edge lists, each preceded by a `# <id>` line.
    BuildGraph {
        /// Same-speaker look-back: a positive integer or `unbounded`.
        #[arg(long)]
        omega: Omega,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print `id difficulty` lines for a dataset, easiest first.
    Difficulty {
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 0.4)]
        b: f64,
        /// Wheel file; defaults to the dataset's own wheel, then the bundled one.
        #[arg(long)]
        wheel: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate a synthetic dataset.
    Synth {
        /// Generator settings (TOML); omitted keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a model. Prints the per-epoch log as JSON lines.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Train once per seed and print mean and per-seed scores instead.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Checkpoint path, overriding `paths.checkpoint_out`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset and print the report as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Finite-difference check of the full objective for a run config's model.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        utterances: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<String> {
    match command {
        Command::BuildGraph { omega, input, output } => {
            let data = load_dataset(&input)?;
            let mut text = String::new();
            for c in &data.conversations {
                let dag = build_dag(c, omega)?;
                let _ = writeln!(text, "# {}", c.id);
                text.push_str(&dag.to_edge_list());
            }
            write(&output, &text)?;
            Ok(String::new())
        }
        Command::Difficulty { k, b, wheel, input } => {
            let params = DifficultyParams { k, b };
            params.validate()?;
            let data = load_dataset(&input)?;
            let wheel = match (wheel, &data.wheel) {
                (Some(p), _) => EmotionWheel::load(p)?,
                (None, Some(p)) => EmotionWheel::load(input.parent().unwrap_or(Path::new(".")).join(p))?,
                (None, None) => EmotionWheel::default_wheel(),
            };
            let table = SimilarityTable::new(&wheel, &data.emotion_labels)?;
            Ok(difficulty_report(&dataset_difficulties(&data, &table, params)?))
        }
        Command::Synth { config, seed, output } => {
            let mut cfg = match config {
                Some(p) => SynthConfig::load(p)?,
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            save_dataset(&generate_synthetic(&cfg)?, &output)?;
            Ok(String::new())
        }
        Command::Train { config, seeds, checkpoint } => {
            let run = RunConfig::load(&config)?;
            let data = RunData::load(&run)?;
            if let Some(seeds) = seeds {
                let report = train_seeds(&run, &data, &seeds)?;
                return Ok(to_json(&report) + "\n");
            }
            let outcome = train(&run, &data)?;
            if let Some(path) = checkpoint.or_else(|| run.paths.checkpoint_out.clone()) {
                save_checkpoint(&outcome.checkpoint, path)?;
            }
            Ok(outcome.log.to_jsonl())
        }
        Command::Eval { checkpoint, data } => {
            let ckpt = load_checkpoint(checkpoint)?;
            let data = load_dataset(data)?;
            Ok(to_json(&evaluate(&ckpt, &data)?) + "\n")
        }
        Command::Gradcheck { config, utterances, seed, epsilon, tolerance } => {
            let run = RunConfig::load(&config)?;
            let check = GradCheckConfig {
                epsilon,
                tolerance,
                ..GradCheckConfig::default()
            };
            let report = model_gradcheck(&run.model, utterances, seed.unwrap_or(run.seed), &check)?;
            let mut out = String::new();
            for p in &report.params {
                let _ = writeln!(out, "{} checked={} max_rel_error={:.3e}", p.name, p.checked, p.max_rel_error);
            }
            let _ = writeln!(
                out,
                "elements={} max_rel_error={:.3e}",
                report.elements_checked(),
                report.max_rel_error()
            );
            if !report.is_clean() {
                print!("{out}");
                let flagged: usize = report.params.iter().map(|p| p.flagged.len()).sum();
                return Err(Error::Check(format!("{flagged} elements exceed tolerance {tolerance}")));
            }
            Ok(out)
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report serialises")
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
