//! Transcript grammar: the accumulated set of admissible action sequences,
//! stored as a prefix-merged trie whose language is exactly the set of
//! accumulated transcripts.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SegalignError};
use crate::types::{ActionId, Transcript};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct TrieNode {
    edges: Vec<(ActionId, usize)>,
    accepting: bool,
}

/// Prefix trie over action labels. Node 0 is the root.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TranscriptGrammar {
    nodes: Vec<TrieNode>,
    paths: Vec<Vec<ActionId>>,
}

impl TranscriptGrammar {
    /// Accumulates all training transcripts; duplicates collapse to one path.
    pub fn build(transcripts: &[Transcript]) -> Result<Self> {
        if transcripts.is_empty() {
            return Err(SegalignError::EmptyTranscripts);
        }
        let mut g = TranscriptGrammar {
            nodes: vec![TrieNode::default()],
            paths: Vec::new(),
        };
        for t in transcripts {
            g.insert(&t.actions);
        }
        Ok(g)
    }

    /// A grammar whose language is exactly `{t}`, used for alignment mode.
    pub fn single_path(t: &Transcript) -> Self {
        let mut g = TranscriptGrammar {
            nodes: vec![TrieNode::default()],
            paths: Vec::new(),
        };
        g.insert(&t.actions);
        g
    }

    fn insert(&mut self, actions: &[ActionId]) {
        debug_assert!(!actions.is_empty());
        let mut node = 0;
        for &a in actions {
            node = match self.nodes[node].edges.iter().find(|(e, _)| *e == a) {
                Some(&(_, next)) => next,
                None => {
                    let next = self.nodes.len();
                    self.nodes.push(TrieNode::default());
                    self.nodes[node].edges.push((a, next));
                    next
                }
            };
        }
        if !self.nodes[node].accepting {
            self.nodes[node].accepting = true;
            self.paths.push(actions.to_vec());
        }
    }

    /// The accepted language, in insertion order.
    pub fn language(&self) -> &[Vec<ActionId>] {
        &self.paths
    }

    pub fn accepts(&self, actions: &[ActionId]) -> bool {
        let mut node = 0;
        for a in actions {
            match self.nodes[node].edges.iter().find(|(e, _)| e == a) {
                Some(&(_, next)) => node = next,
                None => return false,
            }
        }
        self.nodes[node].accepting
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_single_path(&self) -> bool {
        self.paths.len() == 1
    }

    pub(crate) fn edges(&self, node: usize) -> &[(ActionId, usize)] {
        &self.nodes[node].edges
    }

    pub(crate) fn is_accepting(&self, node: usize) -> bool {
        self.nodes[node].accepting
    }
}
