//! Pluggable per-frame scorers producing state-conditional log scores
//! p(x_t | s).
//!
//! Neural scorers output a posterior p(s | x_t) over all subaction states;
//! Bayes' rule converts it to p(x_t | s) = const * p(s|x_t) / p(s). The
//! constant is uniform over states and cancels in argmax decoding, so the
//! converted score is simply log p(s|x_t) - log p(s).
//!
//! Training operates on chunks x[t-20, t]; chunks reaching before the video
//! start are left-padded by replicating frame 0.

mod gaussian;
mod gru;
mod mlp;

pub use gaussian::GaussianStateModel;
pub use gru::Gru;
pub use mlp::Mlp;

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureSequence;
use crate::error::{Result, SegalignError};
use crate::types::StateAlignment;

/// Temporal context length of one training chunk (the frame itself plus the
/// 20 preceding frames).
pub const CHUNK_LEN: usize = 21;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default,
)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    #[default]
    Gaussian,
    Feedforward,
    Recurrent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub variance_floor: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 2,
            seed: 0,
            variance_floor: 1e-4,
        }
    }
}

/// Floored per-state prior p(s) used in the Bayes conversion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatePrior {
    pub log_p: Vec<f64>,
}

impl StatePrior {
    /// Relative frame frequency of each state, floored at
    /// `1 / (10 * num_states)`.
    pub fn fit(num_states: usize, alignments: &[StateAlignment]) -> Self {
        let mut counts = vec![0u64; num_states];
        let mut total = 0u64;
        for al in alignments {
            for f in &al.frames {
                counts[f.state.index()] += 1;
                total += 1;
            }
        }
        let floor = 1.0 / (10.0 * num_states as f64);
        let log_p = counts
            .iter()
            .map(|&c| {
                let p = if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                };
                p.max(floor).ln()
            })
            .collect();
        Self { log_p }
    }

    pub fn uniform(num_states: usize) -> Self {
        Self {
            log_p: vec![-(num_states as f64).ln(); num_states],
        }
    }
}

/// A trained frame scorer. Immutable after fitting; `score` is pure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Scorer {
    Gaussian(GaussianStateModel),
    Feedforward(Mlp),
    Recurrent(Gru),
}

impl Scorer {
    pub fn kind(&self) -> ScorerKind {
        match self {
            Scorer::Gaussian(_) => ScorerKind::Gaussian,
            Scorer::Feedforward(_) => ScorerKind::Feedforward,
            Scorer::Recurrent(_) => ScorerKind::Recurrent,
        }
    }

    pub fn num_states(&self) -> usize {
        match self {
            Scorer::Gaussian(g) => g.num_states(),
            Scorer::Feedforward(m) => m.num_states(),
            Scorer::Recurrent(g) => g.num_states(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Scorer::Gaussian(g) => g.dim(),
            Scorer::Feedforward(m) => m.input_dim(),
            Scorer::Recurrent(g) => g.input_dim(),
        }
    }

    /// T x num_states log scores. Gaussian scorers return log densities;
    /// neural scorers return the Bayes-converted log p(s|x_t) - log p(s).
    pub fn score(&self, prior: &StatePrior, x: &FeatureSequence) -> Result<Array2<f64>> {
        if x.dim() != self.input_dim() {
            return Err(SegalignError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.dim(),
            });
        }
        let t_total = x.num_frames();
        let n = self.num_states();
        let mut out = Array2::zeros((t_total, n));
        match self {
            Scorer::Gaussian(g) => {
                for t in 0..t_total {
                    out.row_mut(t).assign(&g.log_density(x.data.row(t)));
                }
            }
            Scorer::Feedforward(m) => {
                for t in 0..t_total {
                    let log_post = m.log_posterior(x.data.row(t));
                    for s in 0..n {
                        out[(t, s)] = log_post[s] - prior.log_p[s];
                    }
                }
            }
            Scorer::Recurrent(g) => {
                for t in 0..t_total {
                    let chunk = chunk_at(&x.data, t);
                    let log_post = g.log_posterior(chunk.view());
                    for s in 0..n {
                        out[(t, s)] = log_post[s] - prior.log_p[s];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Extracts the chunk x[t-20, t], replicating frame 0 on the left edge.
pub fn chunk_at(data: &Array2<f64>, t: usize) -> Array2<f64> {
    let d = data.ncols();
    let mut chunk = Array2::zeros((CHUNK_LEN, d));
    for (i, row) in chunk.rows_mut().into_iter().enumerate() {
        let src = (t + i + 1).saturating_sub(CHUNK_LEN);
        let src = src.min(t);
        let mut row = row;
        row.assign(&data.row(src));
    }
    chunk
}

pub(crate) fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let log_z = logits.mapv(|v| (v - max).exp()).sum().ln() + max;
    logits.mapv(|v| v - log_z)
}

/// Shared surface of the two trainable networks.
pub(crate) trait Net: Clone {
    type Grads;
    fn new_grads(&self) -> Self::Grads;
    /// Cross-entropy loss of one chunk and its gradient, accumulated into
    /// `grads`.
    fn accumulate(&self, chunk: ArrayView2<f64>, target: usize, grads: &mut Self::Grads) -> f64;
    fn sgd_step(&mut self, grads: &Self::Grads, scale: f64);
    fn flat_params(&self) -> Vec<f64>;
    fn set_flat_params(&mut self, flat: &[f64]);
    fn flat_grads(grads: &Self::Grads) -> Vec<f64>;
}

fn train_net<N: Net>(
    net: &mut N,
    dataset: &[(&FeatureSequence, &StateAlignment)],
    config: &ScorerConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut chunks: Vec<(usize, usize)> = dataset
        .iter()
        .enumerate()
        .flat_map(|(vi, (x, _))| (0..x.num_frames()).map(move |t| (vi, t)))
        .collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        chunks.shuffle(rng);
        let mut epoch_loss = 0.0;
        for batch in chunks.chunks(config.batch_size) {
            let mut grads = net.new_grads();
            let mut loss = 0.0;
            for &(vi, t) in batch {
                let (x, al) = &dataset[vi];
                let chunk = chunk_at(&x.data, t);
                loss += net.accumulate(chunk.view(), al.frames[t].state.index(), &mut grads);
            }
            let scale = config.learning_rate / batch.len() as f64;
            net.sgd_step(&grads, scale);
            epoch_loss += loss;
        }
        epoch_losses.push(epoch_loss / chunks.len() as f64);
    }
    epoch_losses
}

/// Fits a scorer of the requested kind on hard-aligned data and estimates
/// the state prior from the same alignments.
pub fn fit(
    kind: ScorerKind,
    dataset: &[(&FeatureSequence, &StateAlignment)],
    num_states: usize,
    config: &ScorerConfig,
) -> Result<(Scorer, StatePrior)> {
    if dataset.is_empty() {
        return Err(SegalignError::EmptyTranscripts);
    }
    for (x, al) in dataset {
        if x.num_frames() != al.len() {
            return Err(SegalignError::LengthMismatch {
                video: x.video_id.clone(),
                left: x.num_frames(),
                right: al.len(),
            });
        }
    }
    let alignments: Vec<StateAlignment> = dataset.iter().map(|(_, al)| (*al).clone()).collect();
    let prior = StatePrior::fit(num_states, &alignments);
    let dim = dataset[0].0.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scorer = match kind {
        ScorerKind::Gaussian => Scorer::Gaussian(GaussianStateModel::fit(
            dataset,
            num_states,
            config.variance_floor,
        )),
        ScorerKind::Feedforward => {
            let mut net = Mlp::new(dim, config.hidden, num_states, &mut rng);
            train_net(&mut net, dataset, config, &mut rng);
            Scorer::Feedforward(net)
        }
        ScorerKind::Recurrent => {
            let mut net = Gru::new(dim, config.hidden, num_states, &mut rng);
            train_net(&mut net, dataset, config, &mut rng);
            Scorer::Recurrent(net)
        }
    };
    Ok((scorer, prior))
}

/// Per-epoch mean training losses; exposed for convergence checks.
pub fn fit_neural_with_losses(
    kind: ScorerKind,
    dataset: &[(&FeatureSequence, &StateAlignment)],
    num_states: usize,
    config: &ScorerConfig,
) -> Result<(Scorer, Vec<f64>)> {
    let dim = dataset[0].0.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match kind {
        ScorerKind::Feedforward => {
            let mut net = Mlp::new(dim, config.hidden, num_states, &mut rng);
            let losses = train_net(&mut net, dataset, config, &mut rng);
            Ok((Scorer::Feedforward(net), losses))
        }
        ScorerKind::Recurrent => {
            let mut net = Gru::new(dim, config.hidden, num_states, &mut rng);
            let losses = train_net(&mut net, dataset, config, &mut rng);
            Ok((Scorer::Recurrent(net), losses))
        }
        ScorerKind::Gaussian => Err(SegalignError::InvalidConfig(
            "loss tracking applies to neural scorers".into(),
        )),
    }
}

/// Compares analytic gradients of the chunk cross-entropy against central
/// finite differences. Returns the maximum relative error over all
/// parameters.
pub fn gradient_check(scorer: &Scorer, chunk: ArrayView2<f64>, target: usize) -> Result<f64> {
    match scorer {
        Scorer::Feedforward(net) => Ok(gradient_check_net(net, chunk, target)),
        Scorer::Recurrent(net) => Ok(gradient_check_net(net, chunk, target)),
        Scorer::Gaussian(_) => Err(SegalignError::InvalidConfig(
            "gradient check applies to neural scorers".into(),
        )),
    }
}

fn gradient_check_net<N: Net>(net: &N, chunk: ArrayView2<f64>, target: usize) -> f64 {
    const STEP: f64 = 1e-5;
    let mut grads = net.new_grads();
    net.accumulate(chunk, target, &mut grads);
    let analytic = N::flat_grads(&grads);
    let base = net.flat_params();
    let mut worst = 0.0f64;
    let mut probe = net.clone();
    for i in 0..base.len() {
        let mut params = base.clone();
        params[i] = base[i] + STEP;
        probe.set_flat_params(&params);
        let plus = probe.accumulate(chunk, target, &mut probe.new_grads());
        params[i] = base[i] - STEP;
        probe.set_flat_params(&params);
        let minus = probe.accumulate(chunk, target, &mut probe.new_grads());
        let numeric = (plus - minus) / (2.0 * STEP);
        let denom = (analytic[i].abs() + numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}
