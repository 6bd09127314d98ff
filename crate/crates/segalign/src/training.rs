//! The iterative realign-and-reestimate training loop across the three
//! supervision regimes.
//!
//! Weak supervision starts from a linear split of every video over its
//! transcript, then alternates: fit scorer and transition model on the
//! current hard alignment, realign every video under its transcript,
//! optionally snap boundaries to sparse frame annotations, and re-estimate
//! the number of subaction states per action from the updated mean action
//! lengths. The loop stops when fewer than `stop_threshold` of the frames
//! change action label between iterations, or after `max_iterations`.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::constrain_alignment;
use crate::decoder::align_to_transcript;
use crate::error::{Result, SegalignError};
use crate::eval::mof;
use crate::hmm::{skip_state_fraction, HmmModel};
use crate::io::Checkpoint;
use crate::lengthprior::PriorKind;
use crate::observation::{fit, Scorer, ScorerConfig, ScorerKind, StatePrior};
use crate::types::{
    alignment_to_segmentation, ActionId, AlignedFrame, LabelSet, Segmentation, SparseLabel,
    StateAlignment, StateVocab, Transcript,
};
use crate::data::FeatureSequence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Supervision {
    /// Transcripts only.
    Weak,
    /// Transcripts plus sparse frame annotations.
    Sparse { fraction: f64 },
    /// Full ground-truth segmentations.
    Full,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Target frames per subaction state.
    pub m: usize,
    pub scorer: ScorerKind,
    pub scorer_config: ScorerConfig,
    pub prior: PriorKind,
    pub max_iterations: usize,
    /// Stop once the frame change rate drops below this.
    pub stop_threshold: f64,
    pub supervision: Supervision,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            m: 10,
            scorer: ScorerKind::Gaussian,
            scorer_config: ScorerConfig::default(),
            prior: PriorKind::None,
            max_iterations: 15,
            stop_threshold: 0.05,
            supervision: Supervision::Weak,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(SegalignError::InvalidConfig("m must be >= 1".into()));
        }
        if !(self.stop_threshold > 0.0 && self.stop_threshold < 1.0) {
            return Err(SegalignError::InvalidConfig(
                "stop threshold must lie in (0, 1)".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(SegalignError::InvalidConfig(
                "max_iterations must be >= 1".into(),
            ));
        }
        if let Supervision::Sparse { fraction } = self.supervision {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(SegalignError::InvalidConfig(
                    "sparse fraction must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub frame_change_rate: f64,
    pub k_per_action: Vec<usize>,
    pub skip_state_fraction: f64,
    pub train_mof: Option<f64>,
    /// Wall time is logged but excluded from serialized reports so reruns
    /// with the same seed produce byte-identical artifacts.
    #[serde(skip)]
    pub wall_time_secs: f64,
    /// Videos that could not be realigned this iteration and kept their
    /// previous alignment.
    pub skipped_videos: Vec<String>,
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub vocab: StateVocab,
    pub alignments: Vec<StateAlignment>,
    pub reports: Vec<IterationReport>,
    pub stopped_by_threshold: bool,
}

/// Everything training consumes. `sparse` and `ground_truth` are required
/// only by their supervision modes; `ground_truth` additionally enables the
/// per-iteration training MoF.
pub struct TrainData<'a> {
    pub features: &'a [FeatureSequence],
    pub transcripts: &'a [Transcript],
    pub labels: &'a LabelSet,
    pub sparse: Option<&'a BTreeMap<String, Vec<SparseLabel>>>,
    pub ground_truth: Option<&'a [Segmentation]>,
}

/// Uniform split: every video is divided into one equal segment per
/// transcript action, remainder frames going to the earliest segments; each
/// segment is subdivided equally over its action's `K_a` states.
pub fn linear_init(
    features: &[FeatureSequence],
    transcripts: &[Transcript],
    num_actions: usize,
    m: usize,
) -> Result<(StateVocab, Vec<StateAlignment>)> {
    if features.len() != transcripts.len() {
        return Err(SegalignError::EmptyTranscripts);
    }
    // corpus-level frame and instance counts per action under the equal
    // split
    let mut frames_of = vec![0u64; num_actions];
    let mut instances_of = vec![0u64; num_actions];
    for (x, tr) in features.iter().zip(transcripts) {
        let t = x.num_frames();
        let n = tr.actions.len();
        if t < n {
            return Err(SegalignError::VideoTooShort {
                video: x.video_id.clone(),
                frames: t,
                actions: n,
            });
        }
        for (i, &a) in tr.actions.iter().enumerate() {
            frames_of[a.index()] += (t / n + usize::from(i < t % n)) as u64;
            instances_of[a.index()] += 1;
        }
    }
    let counts: Vec<usize> = (0..num_actions)
        .map(|a| {
            if instances_of[a] == 0 {
                1
            } else {
                let k = frames_of[a] as f64 / (instances_of[a] as f64 * m as f64);
                (k.round() as usize).max(1)
            }
        })
        .collect();
    let vocab = StateVocab::new(counts);
    let alignments = features
        .iter()
        .zip(transcripts)
        .map(|(x, tr)| split_uniform(x.video_id.clone(), x.num_frames(), tr, &vocab))
        .collect();
    Ok((vocab, alignments))
}

/// Splits `t` frames equally over the transcript's actions, then each
/// action segment equally over its states (remainders to the earliest).
fn split_uniform(
    video_id: String,
    t: usize,
    transcript: &Transcript,
    vocab: &StateVocab,
) -> StateAlignment {
    let n = transcript.actions.len();
    let mut frames = Vec::with_capacity(t);
    for (i, &a) in transcript.actions.iter().enumerate() {
        let seg_len = t / n + usize::from(i < t % n);
        push_uniform_segment(&mut frames, i as u32, a, seg_len, vocab);
    }
    StateAlignment { video_id, frames }
}

/// Appends `seg_len` frames for one action instance, spreading the chain's
/// states uniformly. With fewer frames than states, the earliest states get
/// one frame each and the rest are skipped.
fn push_uniform_segment(
    frames: &mut Vec<AlignedFrame>,
    segment: u32,
    action: ActionId,
    seg_len: usize,
    vocab: &StateVocab,
) {
    let k = vocab.k(action);
    let base = seg_len / k;
    let extra = seg_len % k;
    for idx in 0..k {
        let count = base + usize::from(idx < extra);
        let state = vocab.state(action, idx);
        frames.extend((0..count).map(|_| AlignedFrame { segment, state }));
    }
}

/// Re-estimates `K_a = round(mean instance length / m)` (floor 1) from the
/// current alignments and redistributes the new states uniformly within
/// every action segment, preserving action boundaries exactly.
pub fn reestimate_subactions(
    alignments: &[StateAlignment],
    vocab: &StateVocab,
    m: usize,
) -> (StateVocab, Vec<StateAlignment>) {
    let num_actions = vocab.num_actions();
    let mut frames_of = vec![0u64; num_actions];
    let mut instances_of = vec![0u64; num_actions];
    let mut per_video: Vec<Vec<(ActionId, usize)>> = Vec::with_capacity(alignments.len());
    for al in alignments {
        let mut segs: Vec<(ActionId, usize)> = Vec::new();
        for f in &al.frames {
            let action = vocab.describe(f.state).action;
            let last_idx = segs.len().wrapping_sub(1) as u32;
            if let Some((a, len)) = segs.last_mut() {
                if f.segment == last_idx && *a == action {
                    *len += 1;
                    continue;
                }
            }
            segs.push((action, 1));
        }
        for &(a, len) in &segs {
            frames_of[a.index()] += len as u64;
            instances_of[a.index()] += 1;
        }
        per_video.push(segs);
    }
    let counts: Vec<usize> = (0..num_actions)
        .map(|a| {
            if instances_of[a] == 0 {
                1
            } else {
                let mean = frames_of[a] as f64 / instances_of[a] as f64;
                ((mean / m as f64).round() as usize).max(1)
            }
        })
        .collect();
    let new_vocab = StateVocab::new(counts);
    let new_alignments = alignments
        .iter()
        .zip(&per_video)
        .map(|(al, segs)| {
            let mut frames = Vec::with_capacity(al.frames.len());
            for (i, &(a, len)) in segs.iter().enumerate() {
                push_uniform_segment(&mut frames, i as u32, a, len, &new_vocab);
            }
            debug_assert_eq!(frames.len(), al.frames.len());
            StateAlignment {
                video_id: al.video_id.clone(),
                frames,
            }
        })
        .collect();
    (new_vocab, new_alignments)
}

/// Fraction of frames whose action label differs between two alignment
/// sets. State ids are renumbered by reestimation, so only action labels
/// are compared.
pub fn frame_change_rate(
    prev: &[StateAlignment],
    prev_vocab: &StateVocab,
    new: &[StateAlignment],
    new_vocab: &StateVocab,
) -> Result<f64> {
    let mut changed = 0u64;
    let mut total = 0u64;
    for (a, b) in prev.iter().zip(new) {
        if a.len() != b.len() {
            return Err(SegalignError::LengthMismatch {
                video: a.video_id.clone(),
                left: a.len(),
                right: b.len(),
            });
        }
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            total += 1;
            if prev_vocab.describe(fa.state).action != new_vocab.describe(fb.state).action {
                changed += 1;
            }
        }
    }
    Ok(if total == 0 {
        0.0
    } else {
        changed as f64 / total as f64
    })
}

/// Realigns every video to its own transcript in parallel. Infeasible
/// videos keep their previous alignment; their ids are returned.
pub fn realign_all(
    scorer: &Scorer,
    state_prior: &StatePrior,
    hmm: &HmmModel,
    prior: PriorKind,
    features: &[FeatureSequence],
    transcripts: &[Transcript],
    previous: &[StateAlignment],
) -> (Vec<StateAlignment>, Vec<String>) {
    let results: Vec<(StateAlignment, Option<String>)> = features
        .par_iter()
        .zip(transcripts.par_iter())
        .zip(previous.par_iter())
        .map(|((x, tr), prev)| {
            let out = scorer
                .score(state_prior, x)
                .and_then(|scores| align_to_transcript(&x.video_id, &scores, tr, hmm, prior));
            match out {
                Ok(res) => (res.alignment, None),
                Err(_) => (prev.clone(), Some(x.video_id.clone())),
            }
        })
        .collect();
    let mut alignments = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (al, skip) in results {
        alignments.push(al);
        if let Some(id) = skip {
            skipped.push(id);
        }
    }
    (alignments, skipped)
}

/// Samples sparse frame annotations uniformly over all frames of the
/// ground truth at the given fraction (at least one frame per video for
/// positive fractions).
pub fn sample_sparse_labels(
    ground_truth: &[Segmentation],
    fraction: f64,
    seed: u64,
) -> BTreeMap<String, Vec<SparseLabel>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeMap::new();
    if fraction <= 0.0 {
        return out;
    }
    for gt in ground_truth {
        let labels = gt.frame_labels();
        let t = labels.len();
        let count = ((t as f64 * fraction).round() as usize).clamp(1, t);
        let mut frames: Vec<usize> = (0..t).collect();
        frames.shuffle(&mut rng);
        frames.truncate(count);
        frames.sort_unstable();
        let list = frames
            .into_iter()
            .map(|f| SparseLabel {
                frame: f,
                label: labels[f],
            })
            .collect();
        out.insert(gt.video_id.clone(), list);
    }
    out
}

fn fit_models(
    config: &TrainConfig,
    features: &[FeatureSequence],
    alignments: &[StateAlignment],
    vocab: &StateVocab,
    seed: u64,
) -> Result<(Scorer, StatePrior, HmmModel)> {
    let dataset: Vec<(&FeatureSequence, &StateAlignment)> =
        features.iter().zip(alignments.iter()).collect();
    let mut scorer_config = config.scorer_config.clone();
    scorer_config.seed = seed;
    let (scorer, prior) = fit(config.scorer, &dataset, vocab.num_states(), &scorer_config)?;
    let hmm = HmmModel::estimate(vocab, alignments, config.m as f64)?;
    Ok((scorer, prior, hmm))
}

fn training_mof(
    alignments: &[StateAlignment],
    vocab: &StateVocab,
    ground_truth: Option<&[Segmentation]>,
) -> Option<f64> {
    let gt = ground_truth?;
    let preds: Vec<Segmentation> = alignments
        .iter()
        .map(|al| alignment_to_segmentation(al, vocab))
        .collect();
    mof(&preds, gt).ok()
}

/// Ground-truth segmentations converted to alignments with
/// `K_a = round(mean GT instance length / m)` states spread uniformly.
fn full_supervision_init(
    ground_truth: &[Segmentation],
    features: &[FeatureSequence],
    num_actions: usize,
    m: usize,
) -> Result<(StateVocab, Vec<StateAlignment>)> {
    let mut frames_of = vec![0u64; num_actions];
    let mut instances_of = vec![0u64; num_actions];
    for gt in ground_truth {
        for s in &gt.segments {
            frames_of[s.action.index()] += s.len() as u64;
            instances_of[s.action.index()] += 1;
        }
    }
    let counts: Vec<usize> = (0..num_actions)
        .map(|a| {
            if instances_of[a] == 0 {
                1
            } else {
                let mean = frames_of[a] as f64 / instances_of[a] as f64;
                ((mean / m as f64).round() as usize).max(1)
            }
        })
        .collect();
    let vocab = StateVocab::new(counts);
    let alignments: Result<Vec<StateAlignment>> = features
        .iter()
        .map(|x| {
            let gt = ground_truth
                .iter()
                .find(|g| g.video_id == x.video_id)
                .ok_or_else(|| SegalignError::MissingData {
                    what: "ground truth",
                    video: x.video_id.clone(),
                })?;
            if gt.num_frames() != x.num_frames() {
                return Err(SegalignError::LengthMismatch {
                    video: x.video_id.clone(),
                    left: gt.num_frames(),
                    right: x.num_frames(),
                });
            }
            let mut frames = Vec::with_capacity(x.num_frames());
            for (i, s) in gt.segments.iter().enumerate() {
                push_uniform_segment(&mut frames, i as u32, s.action, s.len(), &vocab);
            }
            Ok(StateAlignment {
                video_id: x.video_id.clone(),
                frames,
            })
        })
        .collect();
    Ok((vocab, alignments?))
}

/// Runs the full training procedure for the configured supervision mode.
pub fn train(config: &TrainConfig, data: &TrainData) -> Result<TrainOutput> {
    config.validate()?;
    let num_actions = data.labels.len();
    if let Supervision::Full = config.supervision {
        let gt = data.ground_truth.ok_or(SegalignError::MissingData {
            what: "ground truth",
            video: "<corpus>".into(),
        })?;
        let start = Instant::now();
        let (vocab, alignments) =
            full_supervision_init(gt, data.features, num_actions, config.m)?;
        let (scorer, state_prior, hmm) =
            fit_models(config, data.features, &alignments, &vocab, config.seed)?;
        let report = IterationReport {
            iteration: 0,
            frame_change_rate: 0.0,
            k_per_action: (0..num_actions)
                .map(|a| vocab.k(ActionId(a as u32)))
                .collect(),
            skip_state_fraction: skip_state_fraction(&alignments),
            train_mof: training_mof(&alignments, &vocab, data.ground_truth),
            wall_time_secs: start.elapsed().as_secs_f64(),
            skipped_videos: Vec::new(),
        };
        return Ok(TrainOutput {
            checkpoint: Checkpoint {
                labels: data.labels.clone(),
                scorer,
                state_prior,
                hmm,
                length_prior: config.prior,
            },
            vocab,
            alignments,
            reports: vec![report],
            stopped_by_threshold: true,
        });
    }

    let sparse = match &config.supervision {
        Supervision::Sparse { .. } => Some(data.sparse.ok_or(SegalignError::MissingData {
            what: "sparse labels",
            video: "<corpus>".into(),
        })?),
        _ => None,
    };

    let (mut vocab, mut alignments) =
        linear_init(data.features, data.transcripts, num_actions, config.m)?;
    let mut reports = Vec::new();
    let mut stopped = false;
    for iteration in 1..=config.max_iterations {
        let start = Instant::now();
        let seed = config.seed.wrapping_add(iteration as u64);
        let (scorer, state_prior, hmm) =
            fit_models(config, data.features, &alignments, &vocab, seed)?;
        let (mut realigned, skipped) = realign_all(
            &scorer,
            &state_prior,
            &hmm,
            config.prior,
            data.features,
            data.transcripts,
            &alignments,
        );
        if let Some(sparse) = sparse {
            for al in realigned.iter_mut() {
                if let Some(labels) = sparse.get(&al.video_id) {
                    if let Ok(adjusted) = constrain_alignment(al, &vocab, labels) {
                        *al = adjusted;
                    }
                }
            }
        }
        let rate = frame_change_rate(&alignments, &vocab, &realigned, &vocab)?;
        let (new_vocab, new_alignments) = reestimate_subactions(&realigned, &vocab, config.m);
        vocab = new_vocab;
        alignments = new_alignments;
        reports.push(IterationReport {
            iteration,
            frame_change_rate: rate,
            k_per_action: (0..num_actions)
                .map(|a| vocab.k(ActionId(a as u32)))
                .collect(),
            skip_state_fraction: skip_state_fraction(&realigned),
            train_mof: training_mof(&alignments, &vocab, data.ground_truth),
            wall_time_secs: start.elapsed().as_secs_f64(),
            skipped_videos: skipped,
        });
        if rate < config.stop_threshold {
            stopped = true;
            break;
        }
    }
    // final models consistent with the final vocabulary
    let (scorer, state_prior, hmm) = fit_models(
        config,
        data.features,
        &alignments,
        &vocab,
        config.seed.wrapping_add(config.max_iterations as u64 + 1),
    )?;
    Ok(TrainOutput {
        checkpoint: Checkpoint {
            labels: data.labels.clone(),
            scorer,
            state_prior,
            hmm,
            length_prior: config.prior,
        },
        vocab,
        alignments,
        reports,
        stopped_by_threshold: stopped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_corpus, SyntheticSpec};
    use approx::assert_relative_eq;
    use ndarray::Array2;

    fn feat(id: &str, t: usize) -> FeatureSequence {
        FeatureSequence {
            video_id: id.into(),
            data: Array2::zeros((t, 1)),
        }
    }

    fn two_labels() -> (LabelSet, ActionId, ActionId) {
        let mut labels = LabelSet::new();
        let a = labels.intern("a");
        let b = labels.intern("b");
        (labels, a, b)
    }

    #[test]
    fn subaction_count_from_corpus_totals() {
        // one action, 200 frames over 4 instances, m=10 -> K = 5
        let (labels, a, _) = two_labels();
        let features = vec![feat("v1", 100), feat("v2", 100)];
        let transcripts = vec![
            Transcript::new("v1", vec![a, a]).unwrap(),
            Transcript::new("v2", vec![a, a]).unwrap(),
        ];
        let (vocab, _) = linear_init(&features, &transcripts, labels.len(), 10).unwrap();
        assert_eq!(vocab.k(a), 5);
    }

    #[test]
    fn equal_split_with_remainder_to_earliest() {
        let (labels, a, b) = two_labels();
        let features = vec![feat("v", 101)];
        let transcripts = vec![Transcript::new("v", vec![a, b]).unwrap()];
        let (vocab, als) = linear_init(&features, &transcripts, labels.len(), 10).unwrap();
        let seg = alignment_to_segmentation(&als[0], &vocab);
        assert_eq!(seg.segments[0].len(), 51);
        assert_eq!(seg.segments[1].len(), 50);
        // T=100 -> 50/50
        let features = vec![feat("v", 100)];
        let (vocab, als) = linear_init(&features, &transcripts, labels.len(), 10).unwrap();
        let seg = alignment_to_segmentation(&als[0], &vocab);
        assert_eq!(seg.segments[0].len(), 50);
        assert_eq!(seg.segments[1].len(), 50);
    }

    #[test]
    fn too_short_video_errors() {
        let (labels, a, b) = two_labels();
        let features = vec![feat("v", 1)];
        let transcripts = vec![Transcript::new("v", vec![a, b]).unwrap()];
        assert!(linear_init(&features, &transcripts, labels.len(), 10).is_err());
    }

    #[test]
    fn reestimate_rounding_rules() {
        // single action, instances of 47 frames -> K = round(4.7) = 5
        let (labels, a, _) = two_labels();
        let features = vec![feat("v", 47)];
        let transcripts = vec![Transcript::new("v", vec![a]).unwrap()];
        let (vocab, als) = linear_init(&features, &transcripts, labels.len(), 10).unwrap();
        let (vocab2, _) = reestimate_subactions(&als, &vocab, 10);
        assert_eq!(vocab2.k(a), 5);
        // mean shorter than m -> floor at 1
        let features = vec![feat("v", 6)];
        let (vocab, als) = linear_init(&features, &transcripts, labels.len(), 10).unwrap();
        let (vocab2, _) = reestimate_subactions(&als, &vocab, 10);
        assert_eq!(vocab2.k(a), 1);
    }

    #[test]
    fn reestimate_preserves_action_boundaries() {
        let (labels, a, b) = two_labels();
        let features = vec![feat("v", 37)];
        let transcripts = vec![Transcript::new("v", vec![a, b, a]).unwrap()];
        let (vocab, als) = linear_init(&features, &transcripts, labels.len(), 4).unwrap();
        let before = alignment_to_segmentation(&als[0], &vocab);
        let (vocab2, als2) = reestimate_subactions(&als, &vocab, 9);
        let after = alignment_to_segmentation(&als2[0], &vocab2);
        assert_eq!(before.segments.len(), after.segments.len());
        for (x, y) in before.segments.iter().zip(&after.segments) {
            assert_eq!((x.action, x.start, x.end), (y.action, y.start, y.end));
        }
    }

    #[test]
    fn change_rate_values() {
        let (labels, a, b) = two_labels();
        let features = vec![feat("v", 100)];
        let transcripts = vec![Transcript::new("v", vec![a, b]).unwrap()];
        let (vocab, als) = linear_init(&features, &transcripts, labels.len(), 10).unwrap();
        assert_eq!(frame_change_rate(&als, &vocab, &als, &vocab).unwrap(), 0.0);
        // shift the boundary by one frame -> 1/100
        let mut shifted = als[0].clone();
        let donor = shifted.frames[50].clone();
        shifted.frames[49] = AlignedFrame {
            segment: donor.segment,
            state: donor.state,
        };
        let rate = frame_change_rate(&als, &vocab, &[shifted], &vocab).unwrap();
        assert_relative_eq!(rate, 0.01);
        // fully swapped labels -> 1.0
        let transcripts_rev = vec![Transcript::new("v", vec![b, a]).unwrap()];
        let (vocab2, als_rev) =
            linear_init(&features, &transcripts_rev, labels.len(), 10).unwrap();
        assert_eq!(
            frame_change_rate(&als, &vocab, &als_rev, &vocab2).unwrap(),
            1.0
        );
    }

    fn toy_spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            num_actions: 3,
            states_per_action: vec![2, 2, 2],
            feature_dim: 2,
            mean_state_duration: 5.0,
            noise_scale: 0.3,
            transcript_templates: vec![
                vec!["a0".into(), "a1".into(), "a2".into()],
                vec!["a1".into(), "a2".into(), "a0".into()],
                vec!["a2".into(), "a0".into(), "a1".into()],
            ],
            videos_per_template: 4,
            seed,
        }
    }

    #[test]
    fn weak_training_improves_over_linear_init() {
        let corpus = generate_corpus(&toy_spec(31)).unwrap();
        let config = TrainConfig {
            m: 5,
            prior: PriorKind::HalfGaussian,
            max_iterations: 6,
            seed: 9,
            ..Default::default()
        };
        let data = TrainData {
            features: &corpus.features,
            transcripts: &corpus.transcripts,
            labels: &corpus.labels,
            sparse: None,
            ground_truth: Some(&corpus.ground_truth),
        };
        // linear-init baseline MoF
        let (vocab0, als0) = linear_init(
            &corpus.features,
            &corpus.transcripts,
            corpus.labels.len(),
            config.m,
        )
        .unwrap();
        let base = training_mof(&als0, &vocab0, Some(&corpus.ground_truth)).unwrap();
        let out = train(&config, &data).unwrap();
        let final_mof = out.reports.last().unwrap().train_mof.unwrap();
        assert!(
            final_mof > base,
            "final MoF {final_mof} vs linear init {base}"
        );
        assert!(!out.reports.is_empty());
        for r in &out.reports {
            assert!((0.0..=1.0).contains(&r.frame_change_rate));
        }
    }

    #[test]
    fn deterministic_reruns() {
        let corpus = generate_corpus(&toy_spec(5)).unwrap();
        let config = TrainConfig {
            m: 5,
            prior: PriorKind::Box,
            max_iterations: 3,
            seed: 77,
            ..Default::default()
        };
        let data = TrainData {
            features: &corpus.features,
            transcripts: &corpus.transcripts,
            labels: &corpus.labels,
            sparse: None,
            ground_truth: Some(&corpus.ground_truth),
        };
        let a = train(&config, &data).unwrap();
        let b = train(&config, &data).unwrap();
        assert_eq!(
            serde_json::to_string(&a.reports).unwrap(),
            serde_json::to_string(&b.reports).unwrap()
        );
        assert_eq!(
            serde_json::to_string(&a.checkpoint).unwrap(),
            serde_json::to_string(&b.checkpoint).unwrap()
        );
    }

    #[test]
    fn full_supervision_uses_ground_truth_lengths() {
        let corpus = generate_corpus(&toy_spec(13)).unwrap();
        let config = TrainConfig {
            m: 5,
            supervision: Supervision::Full,
            seed: 3,
            ..Default::default()
        };
        let data = TrainData {
            features: &corpus.features,
            transcripts: &corpus.transcripts,
            labels: &corpus.labels,
            sparse: None,
            ground_truth: Some(&corpus.ground_truth),
        };
        let out = train(&config, &data).unwrap();
        assert_eq!(out.reports.len(), 1);
        // alignments reproduce GT boundaries exactly
        assert_relative_eq!(out.reports[0].train_mof.unwrap(), 1.0);
    }

    #[test]
    fn sparse_annotations_are_satisfied_after_training() {
        let corpus = generate_corpus(&toy_spec(21)).unwrap();
        let sparse = sample_sparse_labels(&corpus.ground_truth, 0.05, 123);
        let config = TrainConfig {
            m: 5,
            prior: PriorKind::HalfGaussian,
            max_iterations: 3,
            supervision: Supervision::Sparse { fraction: 0.05 },
            seed: 11,
            ..Default::default()
        };
        let data = TrainData {
            features: &corpus.features,
            transcripts: &corpus.transcripts,
            labels: &corpus.labels,
            sparse: Some(&sparse),
            ground_truth: Some(&corpus.ground_truth),
        };
        let out = train(&config, &data).unwrap();
        // every annotated frame carries its annotated action in the final
        // alignment
        let mut checked = 0usize;
        let mut satisfied = 0usize;
        for al in &out.alignments {
            if let Some(list) = sparse.get(&al.video_id) {
                for l in list {
                    checked += 1;
                    if out.vocab.describe(al.frames[l.frame].state).action == l.label {
                        satisfied += 1;
                    }
                }
            }
        }
        assert!(checked > 0);
        let frac = satisfied as f64 / checked as f64;
        assert!(frac >= 0.95, "only {satisfied}/{checked} satisfied");
    }

    #[test]
    fn sample_fraction_one_covers_every_frame() {
        let corpus = generate_corpus(&toy_spec(2)).unwrap();
        let sparse = sample_sparse_labels(&corpus.ground_truth, 1.0, 0);
        for gt in &corpus.ground_truth {
            assert_eq!(sparse[&gt.video_id].len(), gt.num_frames());
        }
        assert!(sample_sparse_labels(&corpus.ground_truth, 0.0, 0).is_empty());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = TrainConfig::default();
        c.m = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.stop_threshold = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.supervision = Supervision::Sparse { fraction: 1.5 };
        assert!(c.validate().is_err());
    }
}
