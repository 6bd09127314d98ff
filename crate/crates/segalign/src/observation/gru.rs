//! Gated recurrent network scoring a frame from its 21-frame left context.
//!
//! The recurrence is the standard GRU cell
//!   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
//!   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
//!   c_t = tanh(Wc x_t + Uc (r_t * h_{t-1}) + bc)
//!   h_t = (1 - z_t) * h_{t-1} + z_t * c_t
//! with h_0 = 0. The last hidden state feeds a linear softmax layer, and
//! training backpropagates through the full chunk.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{log_softmax, Net};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Gru {
    pub wz: Array2<f64>, // H x D
    pub uz: Array2<f64>, // H x H
    pub bz: Array1<f64>,
    pub wr: Array2<f64>,
    pub ur: Array2<f64>,
    pub br: Array1<f64>,
    pub wc: Array2<f64>,
    pub uc: Array2<f64>,
    pub bc: Array1<f64>,
    pub wo: Array2<f64>, // S x H
    pub bo: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct GruGrads {
    pub wz: Array2<f64>,
    pub uz: Array2<f64>,
    pub bz: Array1<f64>,
    pub wr: Array2<f64>,
    pub ur: Array2<f64>,
    pub br: Array1<f64>,
    pub wc: Array2<f64>,
    pub uc: Array2<f64>,
    pub bc: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

struct StepCache {
    h_prev: Array1<f64>,
    z: Array1<f64>,
    r: Array1<f64>,
    c: Array1<f64>,
}

impl Gru {
    pub fn new(input_dim: usize, hidden: usize, num_states: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut init = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-0.05..0.05))
        };
        Self {
            wz: init(hidden, input_dim),
            uz: init(hidden, hidden),
            bz: Array1::zeros(hidden),
            wr: init(hidden, input_dim),
            ur: init(hidden, hidden),
            br: Array1::zeros(hidden),
            wc: init(hidden, input_dim),
            uc: init(hidden, hidden),
            bc: Array1::zeros(hidden),
            wo: init(num_states, hidden),
            bo: Array1::zeros(num_states),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.wz.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.wz.nrows()
    }

    pub fn num_states(&self) -> usize {
        self.wo.nrows()
    }

    fn step(&self, x: ArrayView1<f64>, h_prev: &Array1<f64>) -> (Array1<f64>, StepCache) {
        let z = (self.wz.dot(&x) + self.uz.dot(h_prev) + &self.bz).mapv(sigmoid);
        let r = (self.wr.dot(&x) + self.ur.dot(h_prev) + &self.br).mapv(sigmoid);
        let gated = &r * h_prev;
        let c = (self.wc.dot(&x) + self.uc.dot(&gated) + &self.bc).mapv(f64::tanh);
        let h = (1.0 - &z) * h_prev + &z * &c;
        (
            h,
            StepCache {
                h_prev: h_prev.clone(),
                z,
                r,
                c,
            },
        )
    }

    fn run(&self, chunk: ArrayView2<f64>) -> (Array1<f64>, Vec<StepCache>) {
        let mut h = Array1::zeros(self.hidden());
        let mut caches = Vec::with_capacity(chunk.nrows());
        for row in chunk.rows() {
            let (next, cache) = self.step(row, &h);
            caches.push(cache);
            h = next;
        }
        (h, caches)
    }

    pub fn log_posterior(&self, chunk: ArrayView2<f64>) -> Array1<f64> {
        let (h, _) = self.run(chunk);
        log_softmax(&(self.wo.dot(&h) + &self.bo))
    }
}

impl Net for Gru {
    type Grads = GruGrads;

    fn new_grads(&self) -> GruGrads {
        GruGrads {
            wz: Array2::zeros(self.wz.dim()),
            uz: Array2::zeros(self.uz.dim()),
            bz: Array1::zeros(self.bz.dim()),
            wr: Array2::zeros(self.wr.dim()),
            ur: Array2::zeros(self.ur.dim()),
            br: Array1::zeros(self.br.dim()),
            wc: Array2::zeros(self.wc.dim()),
            uc: Array2::zeros(self.uc.dim()),
            bc: Array1::zeros(self.bc.dim()),
            wo: Array2::zeros(self.wo.dim()),
            bo: Array1::zeros(self.bo.dim()),
        }
    }

    fn accumulate(&self, chunk: ArrayView2<f64>, target: usize, grads: &mut GruGrads) -> f64 {
        let (h_last, caches) = self.run(chunk);
        let log_post = log_softmax(&(self.wo.dot(&h_last) + &self.bo));
        let loss = -log_post[target];
        let mut d_logits = log_post.mapv(f64::exp);
        d_logits[target] -= 1.0;
        for s in 0..self.num_states() {
            for j in 0..self.hidden() {
                grads.wo[(s, j)] += d_logits[s] * h_last[j];
            }
            grads.bo[s] += d_logits[s];
        }
        let mut d_h = self.wo.t().dot(&d_logits);
        for (t, cache) in caches.iter().enumerate().rev() {
            let x = chunk.row(t);
            let StepCache { h_prev, z, r, c } = cache;
            // pre-activation gradients of the three gates
            let dz_pre = (&d_h * &(c - h_prev)) * z * &(1.0 - z);
            let dc_pre = (&d_h * z) * (1.0 - c * c).view();
            let d_gated = self.uc.t().dot(&dc_pre);
            let dr_pre = (&d_gated * h_prev) * r * &(1.0 - r);
            outer_add(&mut grads.wz, &dz_pre, &x);
            outer_add(&mut grads.uz, &dz_pre, &h_prev.view());
            grads.bz += &dz_pre;
            outer_add(&mut grads.wr, &dr_pre, &x);
            outer_add(&mut grads.ur, &dr_pre, &h_prev.view());
            grads.br += &dr_pre;
            let gated = r * h_prev;
            outer_add(&mut grads.wc, &dc_pre, &x);
            outer_add(&mut grads.uc, &dc_pre, &gated.view());
            grads.bc += &dc_pre;
            d_h = &d_h * &(1.0 - z)
                + self.uz.t().dot(&dz_pre)
                + self.ur.t().dot(&dr_pre)
                + &d_gated * r;
        }
        loss
    }

    fn sgd_step(&mut self, grads: &GruGrads, scale: f64) {
        self.wz.scaled_add(-scale, &grads.wz);
        self.uz.scaled_add(-scale, &grads.uz);
        self.bz.scaled_add(-scale, &grads.bz);
        self.wr.scaled_add(-scale, &grads.wr);
        self.ur.scaled_add(-scale, &grads.ur);
        self.br.scaled_add(-scale, &grads.br);
        self.wc.scaled_add(-scale, &grads.wc);
        self.uc.scaled_add(-scale, &grads.uc);
        self.bc.scaled_add(-scale, &grads.bc);
        self.wo.scaled_add(-scale, &grads.wo);
        self.bo.scaled_add(-scale, &grads.bo);
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for m in [
            &self.wz, &self.uz, &self.wr, &self.ur, &self.wc, &self.uc, &self.wo,
        ] {
            out.extend(m.iter());
        }
        for v in [&self.bz, &self.br, &self.bc, &self.bo] {
            out.extend(v.iter());
        }
        out
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for m in [
            &mut self.wz,
            &mut self.uz,
            &mut self.wr,
            &mut self.ur,
            &mut self.wc,
            &mut self.uc,
            &mut self.wo,
        ] {
            for v in m.iter_mut() {
                *v = *it.next().unwrap();
            }
        }
        for b in [&mut self.bz, &mut self.br, &mut self.bc, &mut self.bo] {
            for v in b.iter_mut() {
                *v = *it.next().unwrap();
            }
        }
        assert!(it.next().is_none());
    }

    fn flat_grads(grads: &GruGrads) -> Vec<f64> {
        let mut out = Vec::new();
        for m in [
            &grads.wz, &grads.uz, &grads.wr, &grads.ur, &grads.wc, &grads.uc, &grads.wo,
        ] {
            out.extend(m.iter());
        }
        for v in [&grads.bz, &grads.br, &grads.bc, &grads.bo] {
            out.extend(v.iter());
        }
        out
    }
}

fn outer_add(acc: &mut Array2<f64>, col: &Array1<f64>, row: &ArrayView1<f64>) {
    for i in 0..col.len() {
        if col[i] != 0.0 {
            for j in 0..row.len() {
                acc[(i, j)] += col[i] * row[j];
            }
        }
    }
}
