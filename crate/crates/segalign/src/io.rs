//! Plain-text corpus formats and the JSON model checkpoint.
//!
//! Transcript file: one video per line, `video_id<TAB>label label label …`.
//! Sparse labels file: lines `video_id<TAB>frame<TAB>label`.
//! Ground-truth segmentation file: lines `video_id<TAB>label<TAB>start<TAB>end`
//! with inclusive frame indices.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::write_atomic;
use crate::error::{Result, SegalignError};
use crate::hmm::HmmModel;
use crate::lengthprior::PriorKind;
use crate::observation::{Scorer, StatePrior};
use crate::types::{LabelSet, Segment, Segmentation, SparseLabel, Transcript};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> SegalignError {
    SegalignError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Loads transcripts, interning any new action labels.
pub fn load_transcripts(path: &Path, labels: &mut LabelSet) -> Result<Vec<Transcript>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (video_id, rest) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, i + 1, "expected `video_id<TAB>labels...`"))?;
        let actions: Vec<_> = rest
            .split_whitespace()
            .map(|name| labels.intern(name))
            .collect();
        out.push(Transcript::new(video_id, actions)?);
    }
    if out.is_empty() {
        return Err(SegalignError::EmptyTranscripts);
    }
    Ok(out)
}

pub fn save_transcripts(
    transcripts: &[Transcript],
    labels: &LabelSet,
    path: &Path,
) -> Result<()> {
    let mut text = String::new();
    for tr in transcripts {
        let names: Vec<&str> = tr.actions.iter().map(|&a| labels.name(a)).collect();
        text.push_str(&format!("{}\t{}\n", tr.video_id, names.join(" ")));
    }
    write_atomic(path, text.as_bytes())
}

/// Loads sparse labels grouped per video, sorted by frame.
pub fn load_sparse_labels(
    path: &Path,
    labels: &mut LabelSet,
) -> Result<BTreeMap<String, Vec<SparseLabel>>> {
    let text = fs::read_to_string(path)?;
    let mut out: BTreeMap<String, Vec<SparseLabel>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(parse_err(path, i + 1, "expected `video_id<TAB>frame<TAB>label`"));
        }
        let frame: usize = parts[1]
            .parse()
            .map_err(|e| parse_err(path, i + 1, format!("bad frame index: {e}")))?;
        let label = labels.intern(parts[2]);
        out.entry(parts[0].to_owned())
            .or_default()
            .push(SparseLabel { frame, label });
    }
    for list in out.values_mut() {
        list.sort_by_key(|l| l.frame);
    }
    Ok(out)
}

pub fn save_sparse_labels(
    sparse: &BTreeMap<String, Vec<SparseLabel>>,
    labels: &LabelSet,
    path: &Path,
) -> Result<()> {
    let mut text = String::new();
    for (video, list) in sparse {
        for l in list {
            text.push_str(&format!("{video}\t{}\t{}\n", l.frame, labels.name(l.label)));
        }
    }
    write_atomic(path, text.as_bytes())
}

/// Loads ground-truth segmentations, validating that each video's segments
/// tile the frame range contiguously from 0.
pub fn load_ground_truth(path: &Path, labels: &mut LabelSet) -> Result<Vec<Segmentation>> {
    let text = fs::read_to_string(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut by_video: BTreeMap<String, Vec<(usize, Segment)>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(parse_err(
                path,
                i + 1,
                "expected `video_id<TAB>label<TAB>start<TAB>end`",
            ));
        }
        let start: usize = parts[2]
            .parse()
            .map_err(|e| parse_err(path, i + 1, format!("bad start: {e}")))?;
        let end: usize = parts[3]
            .parse()
            .map_err(|e| parse_err(path, i + 1, format!("bad end: {e}")))?;
        if end < start {
            return Err(parse_err(path, i + 1, "end before start"));
        }
        if !by_video.contains_key(parts[0]) {
            order.push(parts[0].to_owned());
        }
        by_video.entry(parts[0].to_owned()).or_default().push((
            i + 1,
            Segment {
                action: labels.intern(parts[1]),
                start,
                end,
            },
        ));
    }
    let mut out = Vec::new();
    for video in order {
        let mut entries = by_video.remove(&video).unwrap();
        entries.sort_by_key(|(_, s)| s.start);
        let mut next = 0usize;
        for (line, s) in &entries {
            if s.start != next {
                return Err(parse_err(
                    path,
                    *line,
                    format!("segments of `{video}` do not tile: gap or overlap at frame {next}"),
                ));
            }
            next = s.end + 1;
        }
        out.push(Segmentation {
            video_id: video,
            segments: entries.into_iter().map(|(_, s)| s).collect(),
        });
    }
    Ok(out)
}

pub fn save_ground_truth(
    segmentations: &[Segmentation],
    labels: &LabelSet,
    path: &Path,
) -> Result<()> {
    let mut text = String::new();
    for seg in segmentations {
        for s in &seg.segments {
            text.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                seg.video_id,
                labels.name(s.action),
                s.start,
                s.end
            ));
        }
    }
    write_atomic(path, text.as_bytes())
}

/// A complete decodable model: label names, frame scorer, state prior,
/// transition model and the length-prior kind it was trained with.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub labels: LabelSet,
    pub scorer: Scorer,
    pub state_prior: StatePrior,
    pub hmm: HmmModel,
    pub length_prior: PriorKind,
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let json = serde_json::to_vec_pretty(ckpt)?;
    write_atomic(path, &json)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let mut ckpt: Checkpoint = serde_json::from_str(&text)?;
    ckpt.labels.rebuild_index();
    Ok(ckpt)
}
