//! Command-line surface: train / decode / eval / synth.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use segalign::data::{
    generate_corpus, load_feature_dir, save_feature_dir, write_atomic, SyntheticSpec,
};
use segalign::decoder::{viterbi, DecodeMode, DecodeRequest};
use segalign::error::{Result, SegalignError};
use segalign::eval::{evaluate, EvalReport};
use segalign::grammar::TranscriptGrammar;
use segalign::io::{
    load_checkpoint, load_ground_truth, load_sparse_labels, load_transcripts, save_checkpoint,
    save_ground_truth, save_sparse_labels, save_transcripts,
};
use segalign::lengthprior::PriorKind;
use segalign::training::{sample_sparse_labels, train, Supervision, TrainConfig, TrainData};
use segalign::types::{alignment_to_segmentation, LabelSet, Segmentation, Transcript};

#[derive(Parser)]
#[command(
    name = "segalign",
    about = "Weakly, semi- and fully supervised temporal action segmentation",
    version
)]
struct Cli {
    /// Worker threads for per-video parallelism (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with exact ground truth.
    Synth {
        /// JSON file with the corpus spec.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write sparse frame labels sampled at this fraction.
        #[arg(long)]
        label_fraction: Option<f64>,
    },
    /// Run iterative training under the configured supervision.
    Train {
        /// JSON file with the training config.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long)]
        sparse_labels: Option<PathBuf>,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode videos with a trained checkpoint.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Transcripts: per-video in alignment mode, pooled into the
        /// grammar in segmentation mode.
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long, value_enum, default_value_t = CliMode::Alignment)]
        mode: CliMode,
        /// Override the checkpoint's length prior.
        #[arg(long, value_enum)]
        length_prior: Option<PriorKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate predictions against ground truth.
    Eval {
        /// predictions.json written by `decode`.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::All)]
        metric: Metric,
        /// Write the JSON report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Alignment,
    Segmentation,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Mof,
    Iod,
    Iou,
    All,
}

/// Self-describing prediction file: label names plus per-video segments.
#[derive(Serialize, Deserialize)]
struct Predictions {
    labels: LabelSet,
    alignment_mode: bool,
    videos: Vec<Segmentation>,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(value)?)
}

fn write_run_json(out_dir: &Path, subcommand: &str, resolved: serde_json::Value) -> Result<()> {
    let run = serde_json::json!({
        "tool": "segalign",
        "subcommand": subcommand,
        "resolved": resolved,
    });
    write_json(&run, &out_dir.join("run.json"))
}

fn seed_override() -> Option<u64> {
    std::env::var("SEGALIGN_SEED").ok().and_then(|v| v.parse().ok())
}

fn cmd_synth(spec_path: &Path, out: &Path, label_fraction: Option<f64>) -> Result<()> {
    let text = std::fs::read_to_string(spec_path)?;
    let mut spec: SyntheticSpec = serde_json::from_str(&text)?;
    if let Some(seed) = seed_override() {
        spec.seed = seed;
    }
    let corpus = generate_corpus(&spec)?;
    std::fs::create_dir_all(out.join("features"))?;
    save_feature_dir(&corpus.features, &out.join("features"))?;
    save_transcripts(&corpus.transcripts, &corpus.labels, &out.join("transcripts.txt"))?;
    save_ground_truth(&corpus.ground_truth, &corpus.labels, &out.join("ground_truth.txt"))?;
    if let Some(fraction) = label_fraction {
        let sparse = sample_sparse_labels(&corpus.ground_truth, fraction, spec.seed);
        save_sparse_labels(&sparse, &corpus.labels, &out.join("sparse_labels.txt"))?;
    }
    write_run_json(
        out,
        "synth",
        serde_json::json!({ "spec": spec, "label_fraction": label_fraction }),
    )?;
    eprintln!(
        "wrote {} videos ({} actions) to {}",
        corpus.features.len(),
        corpus.labels.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train(
    config_path: &Path,
    features_dir: &Path,
    transcripts_path: &Path,
    sparse_path: Option<&Path>,
    gt_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let mut config: TrainConfig = serde_json::from_str(&text)?;
    if let Some(seed) = seed_override() {
        config.seed = seed;
    }
    config.validate()?;
    let features = load_feature_dir(features_dir)?;
    let mut labels = LabelSet::new();
    let all_transcripts = load_transcripts(transcripts_path, &mut labels)?;
    // order transcripts to match the feature list
    let transcripts: Vec<Transcript> = features
        .iter()
        .map(|x| {
            all_transcripts
                .iter()
                .find(|t| t.video_id == x.video_id)
                .cloned()
                .ok_or_else(|| SegalignError::MissingData {
                    what: "transcript",
                    video: x.video_id.clone(),
                })
        })
        .collect::<Result<_>>()?;
    let sparse = match sparse_path {
        Some(p) => Some(load_sparse_labels(p, &mut labels)?),
        None => None,
    };
    let ground_truth = match gt_path {
        Some(p) => Some(load_ground_truth(p, &mut labels)?),
        None => None,
    };
    match (&config.supervision, &sparse, &ground_truth) {
        (Supervision::Sparse { .. }, None, _) => {
            return Err(SegalignError::InvalidConfig(
                "sparse supervision requires --sparse-labels".into(),
            ))
        }
        (Supervision::Full, _, None) => {
            return Err(SegalignError::InvalidConfig(
                "full supervision requires --ground-truth".into(),
            ))
        }
        _ => {}
    }
    let data = TrainData {
        features: &features,
        transcripts: &transcripts,
        labels: &labels,
        sparse: sparse.as_ref(),
        ground_truth: ground_truth.as_deref(),
    };
    let output = train(&config, &data)?;
    std::fs::create_dir_all(out)?;
    save_checkpoint(&output.checkpoint, &out.join("checkpoint.json"))?;
    write_json(&output.reports, &out.join("reports.json"))?;
    // final training-set predictions for quick inspection
    let preds = Predictions {
        labels: labels.clone(),
        alignment_mode: true,
        videos: output
            .alignments
            .iter()
            .map(|al| alignment_to_segmentation(al, &output.vocab))
            .collect(),
    };
    write_json(&preds, &out.join("train_predictions.json"))?;
    write_run_json(out, "train", serde_json::json!({ "config": config }))?;
    for r in &output.reports {
        eprintln!(
            "iter {:2}: change rate {:.4}, K = {:?}, skip states {:.3}{}",
            r.iteration,
            r.frame_change_rate,
            r.k_per_action,
            r.skip_state_fraction,
            r.train_mof
                .map(|v| format!(", train MoF {v:.3}"))
                .unwrap_or_default()
        );
    }
    eprintln!(
        "stopped {} after {} iterations",
        if output.stopped_by_threshold {
            "below change threshold"
        } else {
            "at the iteration cap"
        },
        output.reports.len()
    );
    Ok(())
}

fn cmd_decode(
    model: &Path,
    features_dir: &Path,
    transcripts_path: &Path,
    mode: CliMode,
    prior_override: Option<PriorKind>,
    out: &Path,
) -> Result<()> {
    let ckpt = load_checkpoint(model)?;
    let features = load_feature_dir(features_dir)?;
    let mut labels = ckpt.labels.clone();
    let transcripts = load_transcripts(transcripts_path, &mut labels)?;
    if labels.len() > ckpt.labels.len() {
        return Err(SegalignError::InvalidConfig(
            "transcripts mention actions the model was not trained on".into(),
        ));
    }
    let prior = prior_override.unwrap_or(ckpt.length_prior);
    let pooled_grammar = TranscriptGrammar::build(&transcripts)?;
    let mut videos = Vec::with_capacity(features.len());
    for x in &features {
        let scores = ckpt.scorer.score(&ckpt.state_prior, x)?;
        let result = match mode {
            CliMode::Alignment => {
                let tr = transcripts
                    .iter()
                    .find(|t| t.video_id == x.video_id)
                    .ok_or_else(|| SegalignError::MissingData {
                        what: "transcript",
                        video: x.video_id.clone(),
                    })?;
                let grammar = TranscriptGrammar::single_path(tr);
                viterbi(&DecodeRequest {
                    video_id: &x.video_id,
                    scores: &scores,
                    grammar: &grammar,
                    hmm: &ckpt.hmm,
                    prior,
                    mode: DecodeMode::Alignment,
                    l_max: None,
                })?
            }
            CliMode::Segmentation => viterbi(&DecodeRequest {
                video_id: &x.video_id,
                scores: &scores,
                grammar: &pooled_grammar,
                hmm: &ckpt.hmm,
                prior,
                mode: DecodeMode::Segmentation,
                l_max: None,
            })?,
        };
        videos.push(result.segmentation);
    }
    std::fs::create_dir_all(out)?;
    let preds = Predictions {
        labels: labels.clone(),
        alignment_mode: matches!(mode, CliMode::Alignment),
        videos,
    };
    write_json(&preds, &out.join("predictions.json"))?;
    write_run_json(
        out,
        "decode",
        serde_json::json!({
            "model": model.display().to_string(),
            "mode": match mode { CliMode::Alignment => "alignment", CliMode::Segmentation => "segmentation" },
            "length_prior": prior,
        }),
    )?;
    eprintln!("decoded {} videos to {}", preds.videos.len(), out.display());
    Ok(())
}

fn cmd_eval(pred_path: &Path, gt_path: &Path, metric: Metric, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(pred_path)?;
    let mut preds: Predictions = serde_json::from_str(&text)?;
    preds.labels.rebuild_index();
    let mut labels = preds.labels.clone();
    let gt = load_ground_truth(gt_path, &mut labels)?;
    let report: EvalReport = evaluate(&preds.videos, &gt, &labels, preds.alignment_mode)?;
    let value = |r: &EvalReport, m: Metric| match m {
        Metric::Mof => serde_json::json!({ "mof": r.mof }),
        Metric::Iod => serde_json::json!({ "iod": r.iod }),
        Metric::Iou => serde_json::json!({ "iou": r.iou }),
        Metric::All => serde_json::to_value(r).unwrap(),
    };
    let json = value(&report, metric);
    println!("{}", serde_json::to_string_pretty(&json)?);
    // plain-text table
    eprintln!("videos: {}", report.videos);
    eprintln!("MoF  {:.4}", report.mof);
    eprintln!("IoD  {:.4}", report.iod);
    eprintln!("IoU  {:.4}", report.iou);
    for (class, acc) in &report.per_class {
        eprintln!("  {class:<16} {acc:.4}");
    }
    if let Some(path) = out {
        write_json(&json, path)?;
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| SegalignError::InvalidConfig(format!("--jobs: {e}")))?;
    }
    match &cli.command {
        Command::Synth {
            spec,
            out,
            label_fraction,
        } => cmd_synth(spec, out, *label_fraction),
        Command::Train {
            config,
            features,
            transcripts,
            sparse_labels,
            ground_truth,
            out,
        } => cmd_train(
            config,
            features,
            transcripts,
            sparse_labels.as_deref(),
            ground_truth.as_deref(),
            out,
        ),
        Command::Decode {
            model,
            features,
            transcripts,
            mode,
            length_prior,
            out,
        } => cmd_decode(model, features, transcripts, *mode, *length_prior, out),
        Command::Eval {
            pred,
            gt,
            metric,
            out,
        } => cmd_eval(pred, gt, *metric, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
