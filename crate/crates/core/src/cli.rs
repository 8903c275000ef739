//! The `tfnet` command line.
//!
//! Results go to stdout; progress and warnings to stderr. On failure a
//! single line `error\tkind=<kind>\tmessage=<text>` is written to stderr and
//! the exit code is nonzero (2 for usage errors, 1 otherwise).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigError;
use crate::corpus::{
    build_vocabulary, compute_stats, CorpusError, generate_synthetic, load_manifest, resolve_frames, FrameArchive, Split,
    SynthConfig,
};
use crate::decode::beam_decode;
use crate::nnkernel::{Checkpoint, Scalar};
use crate::tfnet::ModelConfig;
use crate::trainer::{
    check_vocabulary, eval_video, evaluate, restore_model, run_ablation, train, AblationRow, Dataset, ModelRecognizer,
    Precision, TrainConfig, TrainError, ABLATION_ROWS,
};

#[derive(Debug, Parser)]
#[command(name = "tfnet", version, about = "Continuous sign language recognition with time-frequency features")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct GlobalFlags {
    /// Overrides the seed of the training configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    #[arg(long, global = true)]
    pub beam_width: Option<usize>,
    #[arg(long, global = true)]
    pub no_temporal_branch: bool,
    #[arg(long, global = true)]
    pub no_frequency_branch: bool,
    #[arg(long, global = true)]
    pub no_vae_t: bool,
    #[arg(long, global = true)]
    pub no_vae_f: bool,
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-split corpus statistics.
    Stats { manifest: PathBuf },
    /// Writes a synthetic corpus (manifest plus frame archives).
    GenSynth { config: PathBuf, outdir: PathBuf },
    /// Trains a model; writes metrics and checkpoints to `outdir`.
    Train {
        manifest: PathBuf,
        model_config: PathBuf,
        train_config: PathBuf,
        outdir: PathBuf,
    },
    /// Scores a checkpoint on one split of a corpus.
    Eval {
        manifest: PathBuf,
        split: Split,
        checkpoint: PathBuf,
    },
    /// Decodes one frame archive.
    Decode { frames: PathBuf, checkpoint: PathBuf },
    /// Trains and scores every branch and loss combination.
    Ablate {
        manifest: PathBuf,
        model_config: PathBuf,
        train_config: PathBuf,
        outdir: PathBuf,
        /// `loss`, `branch` or `all`.
        #[arg(long, default_value = "all")]
        table: String,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Output(_) => "io",
            CliError::Train(e) => match e {
                TrainError::Config(_) => "config",
                TrainError::Corpus(CorpusError::Io { .. }) | TrainError::Io { .. } => "io",
                TrainError::Corpus(_) | TrainError::EmptySplit(_) => "corpus",
                TrainError::VocabMismatch(_) => "vocabulary",
                TrainError::Kernel(_) | TrainError::State(_) => "checkpoint",
                TrainError::Model(_) => "model",
                TrainError::NonFiniteGradient { .. } | TrainError::NonFiniteLoss { .. } => "numeric",
                _ => "train",
            },
        }
    }
}

impl GlobalFlags {
    fn apply_model(&self, cfg: &mut ModelConfig) -> Result<(), ConfigError> {
        if self.no_temporal_branch {
            cfg.temporal_branch = false;
        }
        if self.no_frequency_branch {
            cfg.frequency_branch = false;
        }
        cfg.validate()
    }

    fn apply_train(&self, cfg: &mut TrainConfig) -> Result<(), ConfigError> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(p) = self.precision {
            cfg.precision = p;
        }
        if let Some(w) = self.beam_width {
            cfg.beam_width = w;
        }
        if self.no_vae_t {
            cfg.losses.vae_t = false;
        }
        if self.no_vae_f {
            cfg.losses.vae_f = false;
        }
        cfg.validate()
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let _ = writeln!(err, "error\tkind=usage\tmessage={}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\t'], " ");
            let _ = writeln!(err, "error\tkind={}\tmessage={msg}", e.kind());
            if matches!(e, CliError::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Stats { manifest } => stats(manifest, out),
        Command::GenSynth { config, outdir } => {
            let mut cfg = SynthConfig::load(config)?;
            if let Some(seed) = g.seed {
                cfg.seed = seed;
            }
            let (path, warnings) = generate_synthetic(&cfg, outdir).map_err(TrainError::from)?;
            for w in warnings {
                writeln!(err, "warning: {w}")?;
            }
            writeln!(out, "{}", path.display())?;
            Ok(())
        }
        Command::Train {
            manifest,
            model_config,
            train_config,
            outdir,
        } => {
            let (model_cfg, train_cfg) = load_configs(g, model_config, train_config)?;
            let data = Dataset::load(manifest)?;
            match train_cfg.precision {
                Precision::F32 => run_train::<f32>(&data, &model_cfg, &train_cfg, outdir, out, err),
                Precision::F64 => run_train::<f64>(&data, &model_cfg, &train_cfg, outdir, out, err),
            }
        }
        Command::Eval {
            manifest,
            split,
            checkpoint,
        } => match g.precision.unwrap_or_default() {
            Precision::F32 => run_eval::<f32>(g, manifest, *split, checkpoint, out),
            Precision::F64 => run_eval::<f64>(g, manifest, *split, checkpoint, out),
        },
        Command::Decode { frames, checkpoint } => match g.precision.unwrap_or_default() {
            Precision::F32 => run_decode::<f32>(g, frames, checkpoint, out),
            Precision::F64 => run_decode::<f64>(g, frames, checkpoint, out),
        },
        Command::Ablate {
            manifest,
            model_config,
            train_config,
            outdir,
            table,
        } => {
            let rows: Vec<AblationRow> = ABLATION_ROWS
                .iter()
                .filter(|r| table == "all" || r.table == table)
                .copied()
                .collect();
            if rows.is_empty() {
                return Err(CliError::Usage(format!("unknown ablation table {table:?}, expected loss, branch or all")));
            }
            let (model_cfg, train_cfg) = load_configs(g, model_config, train_config)?;
            let data = Dataset::load(manifest)?;
            let mut emit = |r: &crate::trainer::AblationResult| {
                let _ = writeln!(out, "{}", r.to_line());
            };
            match train_cfg.precision {
                Precision::F32 => run_ablation::<f32>(&data, &model_cfg, &train_cfg, &rows, Some(outdir), &mut emit)?,
                Precision::F64 => run_ablation::<f64>(&data, &model_cfg, &train_cfg, &rows, Some(outdir), &mut emit)?,
            };
            Ok(())
        }
    }
}

fn load_configs(g: &GlobalFlags, model: &Path, train: &Path) -> Result<(ModelConfig, TrainConfig), CliError> {
    let mut model_cfg = ModelConfig::load(model)?;
    g.apply_model(&mut model_cfg)?;
    let mut train_cfg = TrainConfig::load(train)?;
    g.apply_train(&mut train_cfg)?;
    Ok((model_cfg, train_cfg))
}

fn stats(manifest: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let entries = load_manifest(manifest).map_err(TrainError::from)?;
    let vocab = build_vocabulary(entries.iter().filter(|e| e.split == Split::Train));
    let mut stats = compute_stats(&entries, &vocab);
    let mut sizes = std::collections::BTreeSet::new();
    for e in &entries {
        if let Ok((_, _, h, w)) = FrameArchive::read_header(&resolve_frames(manifest, e)) {
            sizes.insert((w, h));
        }
    }
    stats.resolution = match sizes.len() {
        0 => "unknown".into(),
        1 => {
            let (w, h) = sizes.first().copied().unwrap_or_default();
            format!("{w}×{h}")
        }
        _ => "varying".into(),
    };
    write!(out, "{}", stats.render())?;
    Ok(())
}

fn run_train<S: Scalar>(
    data: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    outdir: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    for w in &data.warnings {
        writeln!(err, "warning: {w}")?;
    }
    let start = Instant::now();
    let mut progress = |r: &crate::trainer::MetricsRecord| {
        let _ = writeln!(out, "{}", r.to_line());
        let _ = writeln!(err, "epoch {} done after {:.1}s", r.epoch, start.elapsed().as_secs_f64());
    };
    let outcome = train::<S>(data, model_cfg, train_cfg, Some(outdir), &mut progress)?;
    for w in &outcome.warnings {
        writeln!(err, "warning: {w}")?;
    }
    Ok(())
}

fn run_eval<S: Scalar>(
    g: &GlobalFlags,
    manifest: &Path,
    split: Split,
    checkpoint: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let loaded = restore_model::<S>(&Checkpoint::load(checkpoint).map_err(TrainError::from)?)?;
    let entries = load_manifest(manifest).map_err(TrainError::from)?;
    let corpus_vocab = build_vocabulary(entries.iter().filter(|e| e.split == Split::Train));
    check_vocabulary(&loaded.vocab, &corpus_vocab)?;
    let selected: Vec<_> = entries.into_iter().filter(|e| e.split == split).collect();
    let data = Dataset::from_entries(manifest, &selected, loaded.vocab.clone())?;
    let beam_width = g
        .beam_width
        .or(loaded.train_config.as_ref().map(|c| c.beam_width))
        .unwrap_or(10);
    let mut rec = ModelRecognizer {
        model: &loaded.model,
        vocab: &loaded.vocab,
        beam_width,
    };
    let outcome = evaluate(data.split(split), &mut rec)?;
    write!(out, "{}", outcome.render())?;
    Ok(())
}

fn run_decode<S: Scalar>(g: &GlobalFlags, frames: &Path, checkpoint: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = restore_model::<S>(&Checkpoint::load(checkpoint).map_err(TrainError::from)?)?;
    let archive = FrameArchive::read(frames).map_err(TrainError::from)?;
    let video = eval_video(&loaded.model, &archive)?;
    let logits = loaded.model.logits(&video).map_err(TrainError::from)?;
    let beam_width = g
        .beam_width
        .or(loaded.train_config.as_ref().map(|c| c.beam_width))
        .unwrap_or(10);
    let result = beam_decode(&logits.0, beam_width).map_err(TrainError::from)?;
    writeln!(
        out,
        "hyp={}\tlog_score={}\tbeam_width={}",
        loaded.vocab.decode(&result.glosses).join("/"),
        result.log_score,
        beam_width
    )?;
    Ok(())
}
