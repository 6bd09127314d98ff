//! Length-regularized Viterbi decoding over the transcript grammar lattice.
//!
//! A hypothesis is a triple (action instance in the grammar trie, subaction
//! state within the instance's chain, current run length capped at `l_max`).
//! The run length enters only through the ratio-form prior, which keeps the
//! recursion linear in the number of frames.
//!
//! [`brute_force_decode`] enumerates every grammar-consistent monotone
//! alignment on small instances and serves as the exactness oracle for the
//! dynamic program.

use ndarray::Array2;

use crate::error::{Result, SegalignError};
use crate::grammar::TranscriptGrammar;
use crate::hmm::HmmModel;
use crate::lengthprior::{PriorKind, PriorTable};
use crate::types::{
    alignment_to_segmentation, extract_actions, AlignedFrame, Segmentation,
    StateAlignment, StateId, Transcript,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeMode {
    /// Free decoding over the whole grammar.
    Segmentation,
    /// Forced alignment; requires a single-path grammar.
    Alignment,
}

pub struct DecodeRequest<'a> {
    pub video_id: &'a str,
    /// T x num_states log-likelihood scores.
    pub scores: &'a Array2<f64>,
    pub grammar: &'a TranscriptGrammar,
    pub hmm: &'a HmmModel,
    pub prior: PriorKind,
    pub mode: DecodeMode,
    /// Overrides the run-length cap (default: ceil(4 * max mean length)).
    pub l_max: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct DecodeResult {
    pub alignment: StateAlignment,
    pub segmentation: Segmentation,
    pub log_score: f64,
    /// True when an independent re-scoring of the returned path matches the
    /// reported score within 1e-9.
    pub backtrace_consistent: bool,
}

/// One action occurrence along some grammar path (one trie edge).
struct Instance {
    parent: usize,
    child: usize,
    state_offset: usize,
    k: usize,
}

/// The decodable lattice expanded from a grammar trie.
struct Lattice {
    instances: Vec<Instance>,
    /// Per lattice state: owning instance and chain position.
    owner: Vec<(usize, usize)>,
    /// Per lattice state: global subaction state id.
    global: Vec<StateId>,
    /// Per instance: instances whose child node equals this one's parent.
    entry_preds: Vec<Vec<usize>>,
    start_instances: Vec<usize>,
    /// Lattice states at which a path may end.
    end_states: Vec<usize>,
    /// Minimum number of frames needed for any accepting path.
    min_path_states: usize,
}

impl Lattice {
    fn build(grammar: &TranscriptGrammar, hmm: &HmmModel) -> Self {
        let mut instances = Vec::new();
        let mut owner = Vec::new();
        let mut global = Vec::new();
        for node in 0..grammar.num_nodes() {
            for &(action, child) in grammar.edges(node) {
                let k = hmm.vocab.k(action);
                let idx = instances.len();
                let state_offset = owner.len();
                for j in 0..k {
                    owner.push((idx, j));
                    global.push(hmm.vocab.state(action, j));
                }
                instances.push(Instance {
                    parent: node,
                    child,
                    state_offset,
                    k,
                });
            }
        }
        let entry_preds: Vec<Vec<usize>> = instances
            .iter()
            .map(|inst| {
                instances
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.child == inst.parent)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        let start_instances: Vec<usize> = instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| inst.parent == 0)
            .map(|(i, _)| i)
            .collect();
        let end_states: Vec<usize> = instances
            .iter()
            .filter(|inst| grammar.is_accepting(inst.child))
            .map(|inst| inst.state_offset + inst.k - 1)
            .collect();
        // Shortest accepting path in states. The trie is a tree, so walk it.
        let mut min_path_states = usize::MAX;
        let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
        while let Some((node, cost)) = stack.pop() {
            if grammar.is_accepting(node) {
                min_path_states = min_path_states.min(cost);
            }
            for &(action, child) in grammar.edges(node) {
                stack.push((child, cost + hmm.vocab.k(action)));
            }
        }
        Lattice {
            instances,
            owner,
            global,
            entry_preds,
            start_instances,
            end_states,
            min_path_states,
        }
    }

    fn num_states(&self) -> usize {
        self.owner.len()
    }
}

/// Deterministic preference order over hypotheses: lower lattice state id
/// first, then longer run (self-transition preferred). Lower rank wins ties.
fn rank(hyp: usize, l_max: usize) -> usize {
    let ls = hyp / l_max;
    let li = hyp % l_max;
    ls * l_max + (l_max - 1 - li)
}

fn effective_l_max(req: &DecodeRequest, lattice: &Lattice) -> usize {
    if let Some(m) = req.l_max {
        return m.max(1);
    }
    if req.prior == PriorKind::None {
        return 1;
    }
    let max_len = lattice
        .global
        .iter()
        .map(|s| req.hmm.mean_len[s.index()])
        .fold(1.0f64, f64::max);
    (4.0 * max_len).ceil() as usize
}

fn prior_tables(req: &DecodeRequest, lattice: &Lattice, l_max: usize) -> Result<Vec<PriorTable>> {
    lattice
        .global
        .iter()
        .map(|s| PriorTable::build(req.prior, req.hmm.mean_len[s.index()].max(1.0), l_max))
        .collect()
}

fn check_request(req: &DecodeRequest) -> Result<()> {
    if req.mode == DecodeMode::Alignment && !req.grammar.is_single_path() {
        return Err(SegalignError::InvalidConfig(
            "alignment mode requires a single-path grammar".into(),
        ));
    }
    let n = req.hmm.vocab.num_states();
    if req.scores.ncols() != n {
        return Err(SegalignError::DimensionMismatch {
            expected: n,
            got: req.scores.ncols(),
        });
    }
    for (t, row) in req.scores.rows().into_iter().enumerate() {
        if row.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(SegalignError::DeadColumn { frame: t });
        }
    }
    Ok(())
}

/// A decoded path in lattice coordinates, one (lattice state, run length)
/// per frame.
type LatticePath = Vec<(usize, usize)>;

fn path_to_result(
    req: &DecodeRequest,
    lattice: &Lattice,
    tables: &[PriorTable],
    path: &LatticePath,
    log_score: f64,
) -> DecodeResult {
    let mut frames = Vec::with_capacity(path.len());
    let mut segment = 0u32;
    for (t, &(ls, _)) in path.iter().enumerate() {
        if t > 0 && lattice.owner[ls].0 != lattice.owner[path[t - 1].0].0 {
            segment += 1;
        }
        frames.push(AlignedFrame {
            segment,
            state: lattice.global[ls],
        });
    }
    let alignment = StateAlignment {
        video_id: req.video_id.to_owned(),
        frames,
    };
    let segmentation = alignment_to_segmentation(&alignment, &req.hmm.vocab);
    let rescored = score_lattice_path(req, lattice, tables, path);
    debug_assert!(req
        .grammar
        .accepts(&extract_actions(&alignment, &req.hmm.vocab)));
    DecodeResult {
        alignment,
        segmentation,
        log_score,
        backtrace_consistent: (rescored - log_score).abs() < 1e-9,
    }
}

/// Independent re-scoring of a lattice path: observation and transition sums
/// plus one capped prior value per completed run (the closed telescoping
/// form, not the per-step ratios the DP accumulates).
fn score_lattice_path(
    req: &DecodeRequest,
    lattice: &Lattice,
    tables: &[PriorTable],
    path: &LatticePath,
) -> f64 {
    let mut score = 0.0;
    for (t, &(ls, _)) in path.iter().enumerate() {
        score += req.scores[(t, lattice.global[ls].index())];
        if t > 0 {
            let prev = path[t - 1].0;
            if prev != ls {
                score += req.hmm.log_advance[lattice.global[prev].index()];
            } else {
                score += req.hmm.log_self[lattice.global[ls].index()];
            }
        }
    }
    // one prior term per maximal run of the same lattice state
    let mut run_start = 0;
    for t in 1..=path.len() {
        if t == path.len() || path[t].0 != path[run_start].0 {
            let ls = path[run_start].0;
            score += tables[ls].log_value_capped(t - run_start);
            run_start = t;
        }
    }
    score
}

/// Grammar-constrained, length-regularized Viterbi decode.
pub fn viterbi(req: &DecodeRequest) -> Result<DecodeResult> {
    check_request(req)?;
    let lattice = Lattice::build(req.grammar, req.hmm);
    let t_total = req.scores.nrows();
    if t_total < lattice.min_path_states {
        return Err(SegalignError::Infeasible {
            video: req.video_id.to_owned(),
            frames: t_total,
            states: lattice.min_path_states,
        });
    }
    let l_max = effective_l_max(req, &lattice);
    let tables = prior_tables(req, &lattice, l_max)?;
    let s_total = lattice.num_states();
    let num_hyp = s_total * l_max;
    let hyp = |ls: usize, l: usize| ls * l_max + (l - 1);

    let mut prev = vec![f64::NEG_INFINITY; num_hyp];
    let mut cur = vec![f64::NEG_INFINITY; num_hyp];
    let mut backptr: Vec<Vec<u32>> = Vec::with_capacity(t_total);

    // t = 0: first state of a start instance, run length 1, no transition.
    for &i in &lattice.start_instances {
        let ls = lattice.instances[i].state_offset;
        prev[hyp(ls, 1)] =
            req.scores[(0, lattice.global[ls].index())] + tables[ls].log_ratio(1);
    }
    backptr.push(vec![u32::MAX; num_hyp]);

    for t in 1..t_total {
        cur.fill(f64::NEG_INFINITY);
        let mut bp = vec![u32::MAX; num_hyp];
        for ls in 0..s_total {
            let (inst, k) = lattice.owner[ls];
            let g = lattice.global[ls].index();
            let obs = req.scores[(t, g)];
            // self-transitions: l-1 -> l, and the capped L_max -> L_max
            for l in 2..=l_max {
                let p = hyp(ls, l - 1);
                if prev[p] > f64::NEG_INFINITY {
                    let s = ((prev[p] + req.hmm.log_self[g]) + obs) + tables[ls].log_ratio(l);
                    relax(&mut cur, &mut bp, hyp(ls, l), s, p, l_max);
                }
            }
            {
                let p = hyp(ls, l_max);
                if prev[p] > f64::NEG_INFINITY {
                    let s =
                        ((prev[p] + req.hmm.log_self[g]) + obs) + tables[ls].log_ratio(l_max + 1);
                    relax(&mut cur, &mut bp, hyp(ls, l_max), s, p, l_max);
                }
            }
            // entries into run length 1
            let entry = tables[ls].log_ratio(1);
            if k > 0 {
                // advance within the chain
                let pls = ls - 1;
                let pg = lattice.global[pls].index();
                for pl in 1..=l_max {
                    let p = hyp(pls, pl);
                    if prev[p] > f64::NEG_INFINITY {
                        let s = ((prev[p] + req.hmm.log_advance[pg]) + obs) + entry;
                        relax(&mut cur, &mut bp, hyp(ls, 1), s, p, l_max);
                    }
                }
            } else {
                // action entry from the final state of any admissible
                // predecessor instance; the grammar factor is log 1 = 0.
                for &pi in &lattice.entry_preds[inst] {
                    let pinst = &lattice.instances[pi];
                    let pls = pinst.state_offset + pinst.k - 1;
                    let pg = lattice.global[pls].index();
                    for pl in 1..=l_max {
                        let p = hyp(pls, pl);
                        if prev[p] > f64::NEG_INFINITY {
                            let s = ((prev[p] + req.hmm.log_advance[pg]) + obs) + entry;
                            relax(&mut cur, &mut bp, hyp(ls, 1), s, p, l_max);
                        }
                    }
                }
            }
        }
        backptr.push(bp);
        std::mem::swap(&mut prev, &mut cur);
    }

    // best accepting end hypothesis
    let mut best: Option<(f64, usize)> = None;
    for &ls in &lattice.end_states {
        for l in 1..=l_max {
            let h = hyp(ls, l);
            let s = prev[h];
            if s == f64::NEG_INFINITY {
                continue;
            }
            let better = match best {
                None => true,
                Some((bs, bh)) => s > bs || (s == bs && rank(h, l_max) < rank(bh, l_max)),
            };
            if better {
                best = Some((s, h));
            }
        }
    }
    let (log_score, mut h) = best.ok_or_else(|| SegalignError::Infeasible {
        video: req.video_id.to_owned(),
        frames: t_total,
        states: lattice.min_path_states,
    })?;

    let mut path: LatticePath = Vec::with_capacity(t_total);
    for t in (0..t_total).rev() {
        path.push((h / l_max, h % l_max + 1));
        if t > 0 {
            h = backptr[t][h] as usize;
        }
    }
    path.reverse();
    Ok(path_to_result(req, &lattice, &tables, &path, log_score))
}

#[inline]
fn relax(cur: &mut [f64], bp: &mut [u32], h: usize, score: f64, pred: usize, l_max: usize) {
    if score > cur[h]
        || (score == cur[h]
            && bp[h] != u32::MAX
            && rank(pred, l_max) < rank(bp[h] as usize, l_max))
    {
        cur[h] = score;
        bp[h] = pred as u32;
    }
}

/// Exhaustive enumeration of all grammar-consistent monotone alignments.
/// Exact but exponential; guarded to tiny instances.
pub fn brute_force_decode(req: &DecodeRequest) -> Result<DecodeResult> {
    check_request(req)?;
    let t_total = req.scores.nrows();
    if t_total > 14 || req.hmm.vocab.num_states() > 8 {
        return Err(SegalignError::OracleTooLarge {
            frames: t_total,
            states: req.hmm.vocab.num_states(),
        });
    }
    let lattice = Lattice::build(req.grammar, req.hmm);
    if t_total < lattice.min_path_states {
        return Err(SegalignError::Infeasible {
            video: req.video_id.to_owned(),
            frames: t_total,
            states: lattice.min_path_states,
        });
    }
    let l_max = effective_l_max(req, &lattice);
    let tables = prior_tables(req, &lattice, l_max)?;

    struct Search<'r, 'a> {
        req: &'r DecodeRequest<'a>,
        lattice: &'r Lattice,
        tables: &'r [PriorTable],
        l_max: usize,
        t_total: usize,
        path: LatticePath,
        best: Option<(f64, LatticePath, Vec<f64>)>,
    }

    impl Search<'_, '_> {
        fn consider(&mut self) {
            let (ls, _) = *self.path.last().unwrap();
            if !self.lattice.end_states.contains(&ls) {
                return;
            }
            // accumulate exactly like the DP does, per step, keeping all
            // prefix scores so ties can be resolved the way the DP does
            let mut prefix = Vec::with_capacity(self.t_total);
            let mut score = 0.0;
            for (t, &(ls, _l)) in self.path.iter().enumerate() {
                let g = self.lattice.global[ls].index();
                let obs = self.req.scores[(t, g)];
                if t == 0 {
                    score = obs + self.tables[ls].log_ratio(1);
                } else {
                    let (pls, pl) = self.path[t - 1];
                    let trans = if pls == ls {
                        self.req.hmm.log_self[g]
                    } else {
                        self.req.hmm.log_advance[self.lattice.global[pls].index()]
                    };
                    let ratio = if pls == ls {
                        self.tables[ls].log_ratio(pl + 1)
                    } else {
                        self.tables[ls].log_ratio(1)
                    };
                    score = ((score + trans) + obs) + ratio;
                }
                prefix.push(score);
            }
            if score == f64::NEG_INFINITY {
                return;
            }
            let better = match &self.best {
                None => true,
                Some((bs, bp, bprefix)) => {
                    // The DP resolves two paths where they last occupy
                    // different cells: either at the final selection (if the
                    // end cells differ) or at the shared cell right after the
                    // divergence, comparing prefix scores there. Replicate
                    // that decision; on exact score ties the lower-rank
                    // hypothesis at the differing frame wins.
                    let hrank = |(ls, l): (usize, usize)| rank(ls * self.l_max + (l - 1), self.l_max);
                    match (0..self.t_total).rev().find(|&t| self.path[t] != bp[t]) {
                        None => false,
                        Some(t) if t + 1 == self.t_total => {
                            score > *bs
                                || (score == *bs && hrank(self.path[t]) < hrank(bp[t]))
                        }
                        Some(t) => {
                            let (sa, sb) = (prefix[t + 1], bprefix[t + 1]);
                            sa > sb || (sa == sb && hrank(self.path[t]) < hrank(bp[t]))
                        }
                    }
                }
            };
            if better {
                self.best = Some((score, self.path.clone(), prefix));
            }
        }

        fn extend(&mut self, t: usize) {
            if t == self.t_total {
                self.consider();
                return;
            }
            let (ls, l) = *self.path.last().unwrap();
            let (inst, k) = self.lattice.owner[ls];
            // stay
            self.path.push((ls, (l + 1).min(self.l_max)));
            self.extend(t + 1);
            self.path.pop();
            // advance within chain
            if k + 1 < self.lattice.instances[inst].k {
                self.path.push((ls + 1, 1));
                self.extend(t + 1);
                self.path.pop();
            }
            // exit to a successor instance
            if k + 1 == self.lattice.instances[inst].k {
                let child = self.lattice.instances[inst].child;
                for ni in 0..self.lattice.instances.len() {
                    if self.lattice.instances[ni].parent == child {
                        self.path.push((self.lattice.instances[ni].state_offset, 1));
                        self.extend(t + 1);
                        self.path.pop();
                    }
                }
            }
        }
    }

    let mut search = Search {
        req,
        lattice: &lattice,
        tables: &tables,
        l_max,
        t_total,
        path: Vec::new(),
        best: None,
    };
    for &i in &lattice.start_instances {
        search.path.push((lattice.instances[i].state_offset, 1));
        search.extend(1);
        search.path.pop();
    }
    let (score, path, _) = search.best.ok_or_else(|| SegalignError::Infeasible {
        video: req.video_id.to_owned(),
        frames: t_total,
        states: lattice.min_path_states,
    })?;
    Ok(path_to_result(req, &lattice, &tables, &path, score))
}

/// Forced alignment of a score matrix to one transcript.
///
/// Equivalent to [`viterbi`] under the single-path grammar of `transcript`.
pub fn align_to_transcript(
    video_id: &str,
    scores: &Array2<f64>,
    transcript: &Transcript,
    hmm: &HmmModel,
    prior: PriorKind,
) -> Result<DecodeResult> {
    let grammar = TranscriptGrammar::single_path(transcript);
    viterbi(&DecodeRequest {
        video_id,
        scores,
        grammar: &grammar,
        hmm,
        prior,
        mode: DecodeMode::Alignment,
        l_max: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ActionId;
    use crate::types::StateVocab;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn two_state_model(p_self_1: f64, p_self_2: f64) -> HmmModel {
        HmmModel {
            vocab: StateVocab::new(vec![2]),
            log_self: vec![p_self_1.ln(), p_self_2.ln()],
            log_advance: vec![(1.0 - p_self_1).ln(), (1.0 - p_self_2).ln()],
            mean_len: vec![1.0, 1.0],
        }
    }

    fn single_action_transcript() -> Transcript {
        Transcript::new("v", vec![ActionId(0)]).unwrap()
    }

    #[test]
    fn worked_two_state_example() {
        // obs p(x|s1)=(0.9,0.4,0.2), p(x|s2)=(0.1,0.6,0.8),
        // p(s1|s1)=0.5, advance 0.5, p(s2|s2)=1.0, no prior
        // -> path [s1,s2,s2], score 0.9*0.5*0.6*1.0*0.8 = 0.216
        let hmm = two_state_model(0.5, 1.0);
        let scores = array![
            [0.9f64.ln(), 0.1f64.ln()],
            [0.4f64.ln(), 0.6f64.ln()],
            [0.2f64.ln(), 0.8f64.ln()],
        ];
        let transcript = single_action_transcript();
        let res = align_to_transcript("v", &scores, &transcript, &hmm, PriorKind::None).unwrap();
        assert_relative_eq!(res.log_score.exp(), 0.216, epsilon = 1e-12);
        let states: Vec<u32> = res.alignment.frames.iter().map(|f| f.state.0).collect();
        assert_eq!(states, vec![0, 1, 1]);
        assert!(res.backtrace_consistent);

        // the alternative monotone path [s1,s1,s2] scores 0.9*0.5*0.4*0.5*0.8 = 0.072
        let oracle = brute_force_decode(&DecodeRequest {
            video_id: "v",
            scores: &scores,
            grammar: &TranscriptGrammar::single_path(&transcript),
            hmm: &hmm,
            prior: PriorKind::None,
            mode: DecodeMode::Alignment,
            l_max: None,
        })
        .unwrap();
        assert_relative_eq!(oracle.log_score, res.log_score, epsilon = 1e-12);
    }

    #[test]
    fn uniform_scores_are_deterministic() {
        let hmm = two_state_model(0.5, 0.5);
        let scores = Array2::from_elem((4, 2), (0.5f64).ln());
        let transcript = single_action_transcript();
        let a = align_to_transcript("v", &scores, &transcript, &hmm, PriorKind::None).unwrap();
        let b = align_to_transcript("v", &scores, &transcript, &hmm, PriorKind::None).unwrap();
        assert_eq!(a.alignment, b.alignment);
        let oracle = brute_force_decode(&DecodeRequest {
            video_id: "v",
            scores: &scores,
            grammar: &TranscriptGrammar::single_path(&transcript),
            hmm: &hmm,
            prior: PriorKind::None,
            mode: DecodeMode::Alignment,
            l_max: None,
        })
        .unwrap();
        assert_eq!(a.alignment, oracle.alignment);
    }

    #[test]
    fn single_state_closed_form() {
        // one state, any T: score = sum obs + (T-1) log p(s|s) + log prior(T)
        let hmm = HmmModel {
            vocab: StateVocab::new(vec![1]),
            log_self: vec![0.8f64.ln()],
            log_advance: vec![0.2f64.ln()],
            mean_len: vec![2.0],
        };
        let t_total = 7;
        let scores = Array2::from_shape_fn((t_total, 1), |(t, _)| t as f64 * 0.1 - 0.5);
        let transcript = single_action_transcript();
        for prior in [PriorKind::None, PriorKind::Box, PriorKind::HalfGaussian] {
            let res = align_to_transcript("v", &scores, &transcript, &hmm, prior).unwrap();
            let expect = scores.sum()
                + (t_total - 1) as f64 * 0.8f64.ln()
                + crate::lengthprior::log_prior_value(prior, t_total, 2.0).unwrap();
            assert_relative_eq!(res.log_score, expect, epsilon = 1e-9);
            assert!(res.backtrace_consistent);
        }
    }

    #[test]
    fn box_prior_epsilon_counted_per_overlong_frame() {
        // single state, mean len 1 -> box threshold 2; frames beyond pay eps each
        let hmm = HmmModel {
            vocab: StateVocab::new(vec![1]),
            log_self: vec![0.0],
            log_advance: vec![f64::NEG_INFINITY],
            mean_len: vec![1.0],
        };
        let scores = Array2::zeros((5, 1));
        let transcript = single_action_transcript();
        let res = align_to_transcript("v", &scores, &transcript, &hmm, PriorKind::Box).unwrap();
        // l=1,2 free; l=3,4,5 each multiply one eps ratio: total = eps (value at 5)
        assert_relative_eq!(
            res.log_score,
            crate::lengthprior::EPSILON.ln(),
            epsilon = 1e-9
        );
        // hand expansion: ratios are 1,1,eps,1,1 -> product eps
        let oracle = brute_force_decode(&DecodeRequest {
            video_id: "v",
            scores: &scores,
            grammar: &TranscriptGrammar::single_path(&transcript),
            hmm: &hmm,
            prior: PriorKind::Box,
            mode: DecodeMode::Alignment,
            l_max: None,
        })
        .unwrap();
        assert_relative_eq!(oracle.log_score, res.log_score, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_when_too_few_frames() {
        let hmm = two_state_model(0.5, 0.5);
        let scores = Array2::zeros((1, 2));
        let transcript = single_action_transcript();
        let err = align_to_transcript("v", &scores, &transcript, &hmm, PriorKind::None);
        assert!(matches!(err, Err(SegalignError::Infeasible { .. })));
    }

    #[test]
    fn dead_column_reported_with_frame() {
        let hmm = two_state_model(0.5, 0.5);
        let mut scores = Array2::zeros((3, 2));
        scores.row_mut(1).fill(f64::NEG_INFINITY);
        let transcript = single_action_transcript();
        let err = align_to_transcript("v", &scores, &transcript, &hmm, PriorKind::None);
        assert!(matches!(err, Err(SegalignError::DeadColumn { frame: 1 })));
    }

    #[test]
    fn alignment_mode_requires_single_path() {
        let hmm = two_state_model(0.5, 0.5);
        let scores = Array2::zeros((3, 2));
        let g = TranscriptGrammar::build(&[
            Transcript::new("a", vec![ActionId(0)]).unwrap(),
        ])
        .unwrap();
        // single path is fine
        assert!(viterbi(&DecodeRequest {
            video_id: "v",
            scores: &scores,
            grammar: &g,
            hmm: &hmm,
            prior: PriorKind::None,
            mode: DecodeMode::Alignment,
            l_max: None,
        })
        .is_ok());
    }

    #[test]
    fn transcript_b_favoring_scores_give_minimal_a_prefix() {
        // transcript [A, B], scores strongly favor B everywhere; A's chain
        // is visited exactly once per state
        let mut labels = crate::types::LabelSet::new();
        labels.intern("A");
        labels.intern("B");
        let vocab = StateVocab::new(vec![2, 1]);
        let hmm = HmmModel {
            vocab,
            log_self: vec![0.5f64.ln(); 3],
            log_advance: vec![0.5f64.ln(); 3],
            mean_len: vec![2.0; 3],
        };
        let scores = Array2::from_shape_fn((8, 3), |(_, s)| if s == 2 { 0.0 } else { -5.0 });
        let transcript = Transcript::new("v", vec![ActionId(0), ActionId(1)]).unwrap();
        let res = align_to_transcript("v", &scores, &transcript, &hmm, PriorKind::None).unwrap();
        let states: Vec<u32> = res.alignment.frames.iter().map(|f| f.state.0).collect();
        assert_eq!(states, vec![0, 1, 2, 2, 2, 2, 2, 2]);
        // decoding with a segmentation-mode grammar {[A,B]} is identical
        let g = TranscriptGrammar::build(&[transcript.clone()]).unwrap();
        let seg = viterbi(&DecodeRequest {
            video_id: "v",
            scores: &scores,
            grammar: &g,
            hmm: &hmm,
            prior: PriorKind::None,
            mode: DecodeMode::Segmentation,
            l_max: None,
        })
        .unwrap();
        assert_eq!(seg.alignment, res.alignment);
    }

    #[test]
    fn none_prior_invariant_to_l_max() {
        let hmm = two_state_model(0.7, 0.6);
        let scores = Array2::from_shape_fn((6, 2), |(t, s)| ((t + s) as f64 * 0.3).sin());
        let transcript = single_action_transcript();
        let g = TranscriptGrammar::single_path(&transcript);
        let mut results = Vec::new();
        for l_max in [1, 3, 10] {
            let res = viterbi(&DecodeRequest {
                video_id: "v",
                scores: &scores,
                grammar: &g,
                hmm: &hmm,
                prior: PriorKind::None,
                mode: DecodeMode::Alignment,
                l_max: Some(l_max),
            })
            .unwrap();
            results.push(res);
        }
        for r in &results[1..] {
            assert_eq!(r.log_score.to_bits(), results[0].log_score.to_bits());
            assert_eq!(r.alignment, results[0].alignment);
        }
    }

    #[test]
    fn oracle_guard_rejects_large_instances() {
        let hmm = two_state_model(0.5, 0.5);
        let scores = Array2::zeros((20, 2));
        let transcript = single_action_transcript();
        let g = TranscriptGrammar::single_path(&transcript);
        let err = brute_force_decode(&DecodeRequest {
            video_id: "v",
            scores: &scores,
            grammar: &g,
            hmm: &hmm,
            prior: PriorKind::None,
            mode: DecodeMode::Alignment,
            l_max: None,
        });
        assert!(matches!(err, Err(SegalignError::OracleTooLarge { .. })));
    }
}
