//! Feature I/O and the synthetic corpus generator used for desk-scale
//! verification.
//!
//! Feature files are little-endian binary: the magic string, u32 frame and
//! dimension counts, then T*D 32-bit floats row-major. A plain-text manifest
//! maps video ids to file paths.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SegalignError};
use crate::types::{
    AlignedFrame, LabelSet, Segment, Segmentation, StateAlignment, StateVocab, Transcript,
};

const MAGIC: &[u8; 4] = b"SGAF";

/// Per-video T x D matrix of frame features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub video_id: String,
    pub data: Array2<f64>,
}

impl FeatureSequence {
    pub fn num_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

pub fn save_features(seq: &FeatureSequence, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + seq.data.len() * 4);
    buf.write_all(MAGIC)?;
    buf.write_u32::<LittleEndian>(seq.num_frames() as u32)?;
    buf.write_u32::<LittleEndian>(seq.dim() as u32)?;
    for v in seq.data.iter() {
        buf.write_f32::<LittleEndian>(*v as f32)?;
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_features(path: &Path) -> Result<FeatureSequence> {
    let bytes = std::fs::read(path)?;
    let err = |offset: u64, msg: &str| SegalignError::MalformedFeatureFile {
        path: path.display().to_string(),
        offset,
        msg: msg.to_string(),
    };
    let mut cursor = std::io::Cursor::new(&bytes);
    let mut magic = [0u8; 4];
    cursor
        .read_exact(&mut magic)
        .map_err(|_| err(0, "truncated magic"))?;
    if &magic != MAGIC {
        return Err(err(0, "bad magic"));
    }
    let t = cursor
        .read_u32::<LittleEndian>()
        .map_err(|_| err(4, "truncated frame count"))? as usize;
    let d = cursor
        .read_u32::<LittleEndian>()
        .map_err(|_| err(8, "truncated dimension"))? as usize;
    if t == 0 || d == 0 {
        return Err(err(4, "zero frames or dimensions"));
    }
    let expected = 12 + 4 * t * d;
    if bytes.len() != expected {
        return Err(err(
            bytes.len().min(expected) as u64,
            &format!("expected {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(t * d);
    for i in 0..t * d {
        let v = cursor
            .read_f32::<LittleEndian>()
            .map_err(|_| err((12 + 4 * i) as u64, "truncated payload"))?;
        if !v.is_finite() {
            return Err(err((12 + 4 * i) as u64, "non-finite entry"));
        }
        data.push(v as f64);
    }
    let video_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(FeatureSequence {
        video_id,
        data: Array2::from_shape_vec((t, d), data).expect("shape checked above"),
    })
}

/// Writes per-video feature files plus a `features.manifest` into `dir`.
pub fn save_feature_dir(sequences: &[FeatureSequence], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for seq in sequences {
        let file = format!("{}.sgaf", seq.video_id);
        save_features(seq, &dir.join(&file))?;
        manifest.push_str(&format!("{}\t{}\n", seq.video_id, file));
    }
    std::fs::write(dir.join("features.manifest"), manifest)?;
    Ok(())
}

pub fn load_feature_dir(dir: &Path) -> Result<Vec<FeatureSequence>> {
    let manifest_path = dir.join("features.manifest");
    let text = std::fs::read_to_string(&manifest_path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let (id, file) = match (parts.next(), parts.next()) {
            (Some(id), Some(file)) => (id, file),
            _ => {
                return Err(SegalignError::Parse {
                    path: manifest_path.display().to_string(),
                    line: i + 1,
                    msg: "expected `video_id<TAB>path`".into(),
                })
            }
        };
        let mut seq = load_features(&dir.join(file))?;
        seq.video_id = id.to_string();
        out.push(seq);
    }
    Ok(out)
}

/// Configuration of the synthetic corpus generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_actions: usize,
    /// Subaction states per action; length must equal `num_actions`.
    pub states_per_action: Vec<usize>,
    pub feature_dim: usize,
    /// Expected duration in frames of each subaction state (geometric).
    pub mean_state_duration: f64,
    /// Standard deviation of the Gaussian emission noise.
    pub noise_scale: f64,
    /// Transcript templates over action names "a0".."aN-1".
    pub transcript_templates: Vec<Vec<String>>,
    pub videos_per_template: usize,
    pub seed: u64,
}

/// A fully generated corpus with exact ground truth.
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub labels: LabelSet,
    pub vocab: StateVocab,
    pub features: Vec<FeatureSequence>,
    pub transcripts: Vec<Transcript>,
    pub ground_truth: Vec<Segmentation>,
    pub alignments: Vec<StateAlignment>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SegalignError::InvalidSpec(msg));
        if self.num_actions == 0 || self.feature_dim == 0 {
            return fail("num_actions and feature_dim must be positive".into());
        }
        if self.states_per_action.len() != self.num_actions {
            return fail("states_per_action length must equal num_actions".into());
        }
        if self.states_per_action.iter().any(|&k| k == 0) {
            return fail("every action needs at least one state".into());
        }
        if !(self.mean_state_duration >= 1.0) {
            return fail("mean_state_duration must be >= 1".into());
        }
        if self.noise_scale < 0.0 {
            return fail("noise_scale must be non-negative".into());
        }
        if self.transcript_templates.is_empty() || self.videos_per_template == 0 {
            return fail("need at least one template and one video per template".into());
        }
        self.check_learnability()
    }

    /// Every action must appear with at least two distinct predecessors and
    /// two distinct successors across the templates (template boundaries
    /// count as a virtual start/end context).
    fn check_learnability(&self) -> Result<()> {
        use std::collections::{HashMap, HashSet};
        let mut preds: HashMap<&str, HashSet<&str>> = HashMap::new();
        let mut succs: HashMap<&str, HashSet<&str>> = HashMap::new();
        for template in &self.transcript_templates {
            if template.is_empty() {
                return Err(SegalignError::InvalidSpec("empty transcript template".into()));
            }
            for (i, a) in template.iter().enumerate() {
                let p = if i == 0 { "<s>" } else { template[i - 1].as_str() };
                let s = if i + 1 == template.len() {
                    "</s>"
                } else {
                    template[i + 1].as_str()
                };
                preds.entry(a).or_default().insert(p);
                succs.entry(a).or_default().insert(s);
            }
        }
        for (a, ps) in &preds {
            if ps.len() < 2 || succs[a].len() < 2 {
                return Err(SegalignError::InvalidSpec(format!(
                    "action `{a}` lacks two distinct predecessors and successors"
                )));
            }
        }
        Ok(())
    }
}

/// Samples 1 + Geometric so durations are at least one frame with the
/// configured mean.
fn sample_duration(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 1.0 {
        return 1;
    }
    let p = 1.0 / mean;
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    1 + (u.ln() / (1.0 - p).ln()).floor() as usize
}

/// Generates features, transcripts and exact ground truth for a spec.
/// Deterministic given the seed.
pub fn generate_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut labels = LabelSet::new();
    for a in 0..spec.num_actions {
        labels.intern(&format!("a{a}"));
    }
    let vocab = StateVocab::new(spec.states_per_action.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // per-state emission means, drawn once
    let num_states = vocab.num_states();
    let mut means = Array2::zeros((num_states, spec.feature_dim));
    for mut row in means.rows_mut() {
        for v in row.iter_mut() {
            *v = rng.gen_range(-1.0..1.0) * 4.0;
        }
    }

    let mut features = Vec::new();
    let mut transcripts = Vec::new();
    let mut ground_truth = Vec::new();
    let mut alignments = Vec::new();

    for (ti, template) in spec.transcript_templates.iter().enumerate() {
        let actions: Vec<_> = template
            .iter()
            .map(|name| {
                labels
                    .get(name)
                    .ok_or_else(|| SegalignError::UnknownLabel(name.clone()))
            })
            .collect::<Result<_>>()?;
        for v in 0..spec.videos_per_template {
            let video_id = format!("vid{ti:02}_{v:03}");
            let mut rows: Vec<f64> = Vec::new();
            let mut frames = Vec::new();
            let mut segments = Vec::new();
            let transcript = Transcript::new(video_id.clone(), actions.clone())?;
            for (seg_idx, &action) in transcript.actions.iter().enumerate() {
                let seg_start = frames.len();
                for k in 0..vocab.k(action) {
                    let state = vocab.state(action, k);
                    let dur = sample_duration(&mut rng, spec.mean_state_duration);
                    for _ in 0..dur {
                        for d in 0..spec.feature_dim {
                            let noise: f64 = StandardNormal.sample(&mut rng);
                            let value = means[(state.index(), d)] + spec.noise_scale * noise;
                            // quantize so the on-disk f32 round-trip is exact
                            rows.push(value as f32 as f64);
                        }
                        frames.push(AlignedFrame {
                            segment: seg_idx as u32,
                            state,
                        });
                    }
                }
                segments.push(Segment {
                    action,
                    start: seg_start,
                    end: frames.len() - 1,
                });
            }
            let t_total = frames.len();
            features.push(FeatureSequence {
                video_id: video_id.clone(),
                data: Array2::from_shape_vec((t_total, spec.feature_dim), rows)
                    .expect("row count matches"),
            });
            transcripts.push(transcript);
            ground_truth.push(Segmentation {
                video_id: video_id.clone(),
                segments,
            });
            alignments.push(StateAlignment { video_id, frames });
        }
    }

    Ok(SyntheticCorpus {
        labels,
        vocab,
        features,
        transcripts,
        ground_truth,
        alignments,
    })
}

/// Resolves a path for atomically written outputs: write to a temp file in
/// the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp: PathBuf = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
