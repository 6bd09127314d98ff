//! Shared domain types: action labels, subaction states, alignments and
//! segmentations.
//!
//! Frames are 0-indexed everywhere. A [`StateAlignment`] stores, per frame,
//! both the action-instance (segment) index within the video's transcript and
//! the global subaction state id, so back-to-back repeats of the same action
//! stay unambiguous.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SegalignError};

/// Dense integer id of an action class.
#[derive(
    Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize,
)]
pub struct ActionId(pub u32);

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense integer id of a subaction state, global over all actions.
#[derive(
    Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize,
)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Interned action label vocabulary. Ids are dense and stable in
/// first-seen order.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LabelSet {
    names: Vec<String>,
    #[serde(skip)]
    by_name: HashMap<String, ActionId>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> ActionId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = ActionId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.by_name.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<ActionId> {
        if self.by_name.is_empty() && !self.names.is_empty() {
            // deserialized without the lookup map; fall back to a scan
            return self
                .names
                .iter()
                .position(|n| n == name)
                .map(|i| ActionId(i as u32));
        }
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ActionId) -> &str {
        &self.names[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Rebuild the name lookup after deserialization.
    pub fn rebuild_index(&mut self) {
        self.by_name = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), ActionId(i as u32)))
            .collect();
    }
}

/// Ordered list of the actions occurring in one video.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub video_id: String,
    pub actions: Vec<ActionId>,
}

impl Transcript {
    pub fn new(video_id: impl Into<String>, actions: Vec<ActionId>) -> Result<Self> {
        let video_id = video_id.into();
        if actions.is_empty() {
            return Err(SegalignError::EmptyTranscript(video_id));
        }
        Ok(Self { video_id, actions })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A subaction state in fully spelled-out form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubactionState {
    pub action: ActionId,
    /// 0-based index within the action's chain.
    pub index: usize,
    pub global_id: StateId,
}

/// Per-action subaction chains with a dense global state numbering.
///
/// Action `a` owns the contiguous id range `offset(a) .. offset(a) + k(a)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVocab {
    counts: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl StateVocab {
    /// `counts[a]` is the number of subaction states of action `a`. Every
    /// count must be at least 1.
    pub fn new(counts: Vec<usize>) -> Self {
        assert!(counts.iter().all(|&k| k >= 1), "every action needs K_a >= 1");
        let mut offsets = Vec::with_capacity(counts.len());
        let mut total = 0;
        for &k in &counts {
            offsets.push(total);
            total += k;
        }
        Self {
            counts,
            offsets,
            total,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.counts.len()
    }

    pub fn num_states(&self) -> usize {
        self.total
    }

    pub fn k(&self, action: ActionId) -> usize {
        self.counts[action.index()]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn state(&self, action: ActionId, index: usize) -> StateId {
        debug_assert!(index < self.k(action));
        StateId((self.offsets[action.index()] + index) as u32)
    }

    pub fn describe(&self, id: StateId) -> SubactionState {
        let i = id.index();
        debug_assert!(i < self.total);
        let action = match self.offsets.binary_search(&i) {
            Ok(a) => a,
            Err(a) => a - 1,
        };
        SubactionState {
            action: ActionId(action as u32),
            index: i - self.offsets[action],
            global_id: id,
        }
    }

    pub fn action_of(&self, id: StateId) -> ActionId {
        self.describe(id).action
    }

    pub fn states_of(&self, action: ActionId) -> impl Iterator<Item = StateId> {
        let off = self.offsets[action.index()];
        (off..off + self.counts[action.index()]).map(|i| StateId(i as u32))
    }
}

/// One aligned frame: which transcript segment it belongs to and which
/// subaction state it carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedFrame {
    pub segment: u32,
    pub state: StateId,
}

/// Per-frame mapping from frames to subaction states, the latent variable
/// of the whole system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateAlignment {
    pub video_id: String,
    pub frames: Vec<AlignedFrame>,
}

impl StateAlignment {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Checks the feed-forward monotonicity invariant against the video's
    /// transcript: within a segment the state stays or advances to the next
    /// state of the same chain; a segment change enters the next segment's
    /// first state. The first frame must sit in segment 0, state index 0.
    pub fn validate(&self, transcript: &Transcript, vocab: &StateVocab) -> Result<()> {
        let err = |frame| SegalignError::NonMonotoneAlignment {
            video: self.video_id.clone(),
            frame,
        };
        if self.frames.is_empty() {
            return Err(err(0));
        }
        let first = self.frames[0];
        let d0 = vocab.describe(first.state);
        if first.segment != 0 || d0.index != 0 || d0.action != transcript.actions[0] {
            return Err(err(0));
        }
        for t in 1..self.frames.len() {
            let prev = self.frames[t - 1];
            let cur = self.frames[t];
            let dp = vocab.describe(prev.state);
            let dc = vocab.describe(cur.state);
            let ok = if cur.segment == prev.segment {
                dc.action == dp.action && (dc.index == dp.index || dc.index == dp.index + 1)
            } else if cur.segment == prev.segment + 1 {
                let seg = cur.segment as usize;
                seg < transcript.len() && dc.action == transcript.actions[seg] && dc.index == 0
            } else {
                false
            };
            if !ok {
                return Err(err(t));
            }
        }
        // The last segment must belong to the transcript; partial transcripts
        // are not representable.
        if self.frames.last().unwrap().segment as usize != transcript.len() - 1 {
            return Err(err(self.frames.len() - 1));
        }
        Ok(())
    }

    /// Per-frame action labels, via the state vocabulary.
    pub fn action_labels(&self, vocab: &StateVocab) -> Vec<ActionId> {
        self.frames
            .iter()
            .map(|f| vocab.action_of(f.state))
            .collect()
    }
}

/// One labeled segment, inclusive frame bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub action: ActionId,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }
}

/// A tiling of `[0, T-1]` into labeled segments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub video_id: String,
    pub segments: Vec<Segment>,
}

impl Segmentation {
    pub fn num_frames(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end + 1)
    }

    /// Expands to one action label per frame.
    pub fn frame_labels(&self) -> Vec<ActionId> {
        let mut out = Vec::with_capacity(self.num_frames());
        for seg in &self.segments {
            out.extend(std::iter::repeat(seg.action).take(seg.len()));
        }
        out
    }

    pub fn transcript_actions(&self) -> Vec<ActionId> {
        self.segments.iter().map(|s| s.action).collect()
    }
}

/// A single sparse frame-level annotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseLabel {
    pub frame: usize,
    pub label: ActionId,
}

/// Run-length collapse of a monotone alignment to its action sequence.
/// Instance boundaries are the explicit segment indices, so `[A, A]` stays
/// two occurrences.
pub fn extract_actions(al: &StateAlignment, vocab: &StateVocab) -> Vec<ActionId> {
    let mut out = Vec::new();
    let mut last_seg = None;
    for f in &al.frames {
        if last_seg != Some(f.segment) {
            out.push(vocab.action_of(f.state));
            last_seg = Some(f.segment);
        }
    }
    out
}

/// Converts a monotone alignment into the segmentation it induces.
pub fn alignment_to_segmentation(al: &StateAlignment, vocab: &StateVocab) -> Segmentation {
    let mut segments: Vec<Segment> = Vec::new();
    for (t, f) in al.frames.iter().enumerate() {
        let action = vocab.action_of(f.state);
        match segments.last_mut() {
            Some(seg)
                if al.frames[seg.start].segment == f.segment =>
            {
                seg.end = t;
                debug_assert_eq!(seg.action, action);
            }
            _ => segments.push(Segment {
                action,
                start: t,
                end: t,
            }),
        }
    }
    Segmentation {
        video_id: al.video_id.clone(),
        segments,
    }
}
