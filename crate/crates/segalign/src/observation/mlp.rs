//! Single-hidden-layer ReLU network scoring one frame at a time.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{log_softmax, Net};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: Array2<f64>, // H x D
    pub b1: Array1<f64>, // H
    pub w2: Array2<f64>, // S x H
    pub b2: Array1<f64>, // S
}

#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Mlp {
    pub fn new(input_dim: usize, hidden: usize, num_states: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut init = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-0.05..0.05))
        };
        let w1 = init(hidden, input_dim);
        let w2 = init(num_states, hidden);
        Self {
            w1,
            w2,
            b1: Array1::zeros(hidden),
            b2: Array1::zeros(num_states),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn num_states(&self) -> usize {
        self.w2.nrows()
    }

    fn forward(&self, x: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let a1 = self.w1.dot(&x) + &self.b1;
        let h = a1.mapv(|v| v.max(0.0));
        let logits = self.w2.dot(&h) + &self.b2;
        (a1, h, logits)
    }

    pub fn log_posterior(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let (_, _, logits) = self.forward(x);
        log_softmax(&logits)
    }
}

impl Net for Mlp {
    type Grads = MlpGrads;

    fn new_grads(&self) -> MlpGrads {
        MlpGrads {
            w1: Array2::zeros(self.w1.dim()),
            b1: Array1::zeros(self.b1.dim()),
            w2: Array2::zeros(self.w2.dim()),
            b2: Array1::zeros(self.b2.dim()),
        }
    }

    fn accumulate(&self, chunk: ArrayView2<f64>, target: usize, grads: &mut MlpGrads) -> f64 {
        // the feed-forward scorer only looks at the chunk's last frame
        let x = chunk.row(chunk.nrows() - 1);
        let (a1, h, logits) = self.forward(x);
        let log_post = log_softmax(&logits);
        let loss = -log_post[target];
        let mut d_logits = log_post.mapv(f64::exp);
        d_logits[target] -= 1.0;
        for s in 0..self.num_states() {
            for j in 0..h.len() {
                grads.w2[(s, j)] += d_logits[s] * h[j];
            }
            grads.b2[s] += d_logits[s];
        }
        let d_h = self.w2.t().dot(&d_logits);
        for j in 0..h.len() {
            if a1[j] > 0.0 {
                let g = d_h[j];
                for k in 0..x.len() {
                    grads.w1[(j, k)] += g * x[k];
                }
                grads.b1[j] += g;
            }
        }
        loss
    }

    fn sgd_step(&mut self, grads: &MlpGrads, scale: f64) {
        self.w1.scaled_add(-scale, &grads.w1);
        self.b1.scaled_add(-scale, &grads.b1);
        self.w2.scaled_add(-scale, &grads.w2);
        self.b2.scaled_add(-scale, &grads.b2);
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for v in self.w1.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.b1.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.w2.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.b2.iter_mut() {
            *v = *it.next().unwrap();
        }
        assert!(it.next().is_none());
    }

    fn flat_grads(grads: &MlpGrads) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(grads.w1.iter());
        out.extend(grads.b1.iter());
        out.extend(grads.w2.iter());
        out.extend(grads.b2.iter());
        out
    }
}
