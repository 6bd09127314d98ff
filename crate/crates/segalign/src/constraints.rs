//! Sparse frame-annotation handling: the label-to-segment distance, its
//! dynamic-programming minimization over monotone assignments, and the
//! boundary adjustment that makes a decoded alignment satisfy every
//! annotation.
//!
//! The two-step order is fixed: decode under the transcript first, then
//! adjust the resulting boundaries to the annotated frames.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SegalignError};
use crate::types::{
    alignment_to_segmentation, AlignedFrame, Segmentation, SparseLabel, StateAlignment, StateId,
    StateVocab,
};

/// Minimizing monotone map from annotation index to segment index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnotationAssignment {
    pub segment_of: Vec<usize>,
    pub total_distance: f64,
}

/// Distance between an annotated frame and a segment: 0 inside a same-class
/// segment, the frame gap to the nearer boundary outside it, infinite on a
/// class mismatch.
pub fn label_segment_distance(label: &SparseLabel, segment: &crate::types::Segment) -> f64 {
    if label.label != segment.action {
        return f64::INFINITY;
    }
    if label.frame < segment.start {
        (segment.start - label.frame) as f64
    } else if label.frame > segment.end {
        (label.frame - segment.end) as f64
    } else {
        0.0
    }
}

/// Minimizes the summed distance over all monotone (order-preserving)
/// assignments of annotations to segments. Ties break toward earlier
/// segments.
pub fn assign_annotations(
    seg: &Segmentation,
    labels: &[SparseLabel],
) -> Result<AnnotationAssignment> {
    let f = labels.len();
    let n = seg.segments.len();
    if f == 0 {
        return Ok(AnnotationAssignment {
            segment_of: Vec::new(),
            total_distance: 0.0,
        });
    }
    debug_assert!(labels.windows(2).all(|w| w[0].frame <= w[1].frame));
    // rest[i][j]: minimal cost of assigning labels i.. with every segment
    // index >= j
    let mut rest = vec![vec![0.0f64; n + 1]; f + 1];
    for i in (0..f).rev() {
        rest[i][n] = f64::INFINITY;
        for j in (0..n).rev() {
            let here = label_segment_distance(&labels[i], &seg.segments[j]) + rest[i + 1][j];
            rest[i][j] = here.min(rest[i][j + 1]);
        }
    }
    if !rest[0][0].is_finite() {
        let offending: Vec<usize> = (0..f)
            .filter(|&i| {
                seg.segments
                    .iter()
                    .all(|s| !label_segment_distance(&labels[i], s).is_finite())
            })
            .collect();
        return Err(SegalignError::UnassignableLabels(offending));
    }
    // reconstruct the lexicographically smallest optimum
    let mut segment_of = Vec::with_capacity(f);
    let mut cur = 0usize;
    for i in 0..f {
        let want = rest[i][cur];
        let mut j = cur;
        loop {
            let here = label_segment_distance(&labels[i], &seg.segments[j]) + rest[i + 1][j];
            if here == want {
                break;
            }
            j += 1;
        }
        segment_of.push(j);
        cur = j;
    }
    Ok(AnnotationAssignment {
        segment_of,
        total_distance: rest[0][0],
    })
}

/// Moves segment boundaries minimally so every annotation lands inside its
/// assigned segment, shrinking neighbors but never below one frame per
/// visited state. States inside a resized segment are redistributed
/// uniformly; untouched segments keep their exact frames.
pub fn adjust_boundaries(
    al: &StateAlignment,
    vocab: &StateVocab,
    labels: &[SparseLabel],
    assignment: &AnnotationAssignment,
) -> Result<StateAlignment> {
    let seg = alignment_to_segmentation(al, vocab);
    let n = seg.segments.len();
    let t_total = al.len();
    // ordered distinct states visited per segment and the implied minimum
    // widths
    let mut visited: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for frame in &al.frames {
        let v = &mut visited[frame.segment as usize];
        if v.last() != Some(&frame.state) {
            v.push(frame.state);
        }
    }
    let minw: Vec<usize> = visited.iter().map(Vec::len).collect();
    // tightest annotated frame per segment on each side
    let mut ann_min = vec![usize::MAX; n];
    let mut ann_max = vec![0usize; n];
    let mut has_ann = vec![false; n];
    for (i, &j) in assignment.segment_of.iter().enumerate() {
        let frame = labels[i].frame;
        ann_min[j] = ann_min[j].min(frame);
        ann_max[j] = ann_max[j].max(frame);
        has_ann[j] = true;
    }
    // cut[j] = new start of segment j; cut[0] = 0 fixed.
    // backward pass: upper bounds from annotations and suffix min widths
    let mut hi = vec![0usize; n + 1];
    hi[n] = t_total;
    for j in (1..n).rev() {
        let mut bound = hi[j + 1].saturating_sub(minw[j]);
        if has_ann[j] {
            bound = bound.min(ann_min[j]);
        }
        hi[j] = bound;
    }
    // forward pass: lower bounds, clamping each cut as close as possible to
    // its current position
    let mut cut = vec![0usize; n + 1];
    cut[n] = t_total;
    for j in 1..n {
        let mut lo = cut[j - 1] + minw[j - 1];
        if has_ann[j - 1] {
            lo = lo.max(ann_max[j - 1] + 1);
        }
        if lo > hi[j] {
            return Err(SegalignError::AdjustmentInfeasible {
                segment: j,
                min: minw[j],
            });
        }
        cut[j] = seg.segments[j].start.clamp(lo, hi[j]);
    }
    if n > 0 && cut[n - 1] + minw[n - 1] > t_total {
        return Err(SegalignError::AdjustmentInfeasible {
            segment: n - 1,
            min: minw[n - 1],
        });
    }
    // rebuild: untouched segments keep their frames, resized ones spread
    // their visited states uniformly (remainder frames to the earliest
    // states)
    let mut frames = Vec::with_capacity(t_total);
    for j in 0..n {
        let (start, end) = (cut[j], cut[j + 1]);
        if start == seg.segments[j].start && end == seg.segments[j].end + 1 {
            frames.extend(
                al.frames[start..end]
                    .iter()
                    .map(|fr| AlignedFrame { segment: j as u32, state: fr.state }),
            );
            continue;
        }
        let span = end - start;
        let states = &visited[j];
        let base = span / states.len();
        let extra = span % states.len();
        for (si, &state) in states.iter().enumerate() {
            let count = base + usize::from(si < extra);
            frames.extend((0..count).map(|_| AlignedFrame {
                segment: j as u32,
                state,
            }));
        }
    }
    debug_assert_eq!(frames.len(), t_total);
    Ok(StateAlignment {
        video_id: al.video_id.clone(),
        frames,
    })
}

/// Decode-then-adjust convenience wrapper used by sparse training.
pub fn constrain_alignment(
    al: &StateAlignment,
    vocab: &StateVocab,
    labels: &[SparseLabel],
) -> Result<StateAlignment> {
    let seg = alignment_to_segmentation(al, vocab);
    let assignment = assign_annotations(&seg, labels)?;
    adjust_boundaries(al, vocab, labels, &assignment)
}
