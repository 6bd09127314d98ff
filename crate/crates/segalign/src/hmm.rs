//! The coarse model: per-action feed-forward subaction chains with
//! transition probabilities and mean state lengths estimated from hard
//! alignments.
//!
//! Transitions are counted from the current training alignment. A state run
//! is a maximal stretch of frames carrying the same (segment, state) pair, so
//! back-to-back instances of a single-state action stay separate runs.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SegalignError};
use crate::types::{StateAlignment, StateId, StateVocab};

/// Per-state transition log probabilities and mean lengths for all chains.
///
/// `log_advance` of a chain-final state is the mass spent on leaving the
/// action; the grammar transition itself contributes log 1 = 0 when the path
/// is admissible.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HmmModel {
    pub vocab: StateVocab,
    pub log_self: Vec<f64>,
    pub log_advance: Vec<f64>,
    pub mean_len: Vec<f64>,
}

impl HmmModel {
    /// Estimates transitions and mean lengths from the given alignments.
    /// States never seen in any alignment fall back to a 0.5/0.5 split and
    /// `default_len` frames.
    pub fn estimate(
        vocab: &StateVocab,
        alignments: &[StateAlignment],
        default_len: f64,
    ) -> Result<Self> {
        let (log_self, log_advance) = estimate_transitions(vocab, alignments)?;
        let mean_len = mean_state_lengths(vocab, alignments, default_len);
        Ok(Self {
            vocab: vocab.clone(),
            log_self,
            log_advance,
            mean_len,
        })
    }

    pub fn is_chain_final(&self, s: StateId) -> bool {
        let d = self.vocab.describe(s);
        d.index + 1 == self.vocab.k(d.action)
    }
}

/// Counts self vs. outgoing transitions per state, pooled over all videos.
///
/// Chain-final states are fixed at a 0.5/0.5 split between self-loop and
/// action-exit regardless of counts; interior states use relative
/// frequencies, with unobserved sources smoothed to 0.5.
pub fn estimate_transitions(
    vocab: &StateVocab,
    alignments: &[StateAlignment],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if alignments.is_empty() {
        return Err(SegalignError::EmptyTranscripts);
    }
    let n = vocab.num_states();
    let mut self_count = vec![0u64; n];
    let mut total_count = vec![0u64; n];
    for al in alignments {
        for w in al.frames.windows(2) {
            let s = w[0].state.index();
            total_count[s] += 1;
            if w[0] == w[1] {
                self_count[s] += 1;
            }
        }
    }
    let mut log_self = vec![0.0; n];
    let mut log_advance = vec![0.0; n];
    for i in 0..n {
        let d = vocab.describe(StateId(i as u32));
        let chain_final = d.index + 1 == vocab.k(d.action);
        let p_self = if chain_final || total_count[i] == 0 {
            0.5
        } else {
            self_count[i] as f64 / total_count[i] as f64
        };
        log_self[i] = p_self.ln();
        log_advance[i] = (1.0 - p_self).ln();
    }
    Ok((log_self, log_advance))
}

/// `len(s)` = frames aligned to `s` divided by the number of maximal runs
/// of `s`. States with zero instances get `default_len`.
pub fn mean_state_lengths(
    vocab: &StateVocab,
    alignments: &[StateAlignment],
    default_len: f64,
) -> Vec<f64> {
    let n = vocab.num_states();
    let mut frames = vec![0u64; n];
    let mut runs = vec![0u64; n];
    for al in alignments {
        for (t, f) in al.frames.iter().enumerate() {
            frames[f.state.index()] += 1;
            if t == 0 || al.frames[t - 1] != *f {
                runs[f.state.index()] += 1;
            }
        }
    }
    (0..n)
        .map(|i| {
            if runs[i] == 0 {
                default_len
            } else {
                frames[i] as f64 / runs[i] as f64
            }
        })
        .collect()
}

/// Fraction of visited state instances whose run length is exactly one
/// frame.
pub fn skip_state_fraction(alignments: &[StateAlignment]) -> f64 {
    let mut runs = 0u64;
    let mut skips = 0u64;
    for al in alignments {
        let mut run_len = 0usize;
        for (t, f) in al.frames.iter().enumerate() {
            if t == 0 || al.frames[t - 1] != *f {
                if run_len == 1 {
                    skips += 1;
                }
                runs += 1;
                run_len = 1;
            } else {
                run_len += 1;
            }
        }
        if run_len == 1 {
            skips += 1;
        }
    }
    if runs == 0 {
        0.0
    } else {
        skips as f64 / runs as f64
    }
}
