//! Diagonal-covariance Gaussian per subaction state.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::FeatureSequence;
use crate::types::StateAlignment;

/// One diagonal Gaussian per state: `means` and `vars` are `S x D`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianStateModel {
    pub means: Array2<f64>,
    pub vars: Array2<f64>,
}

impl GaussianStateModel {
    /// Maximum-likelihood fit on hard-aligned frames. Variances are the
    /// population variances floored at `variance_floor`; states with no
    /// aligned frames fall back to the global mean and variance.
    pub fn fit(
        dataset: &[(&FeatureSequence, &StateAlignment)],
        num_states: usize,
        variance_floor: f64,
    ) -> Self {
        let d = dataset[0].0.dim();
        let mut sum = Array2::<f64>::zeros((num_states, d));
        let mut sum_sq = Array2::<f64>::zeros((num_states, d));
        let mut count = vec![0u64; num_states];
        let mut g_sum = Array1::<f64>::zeros(d);
        let mut g_sum_sq = Array1::<f64>::zeros(d);
        let mut g_count = 0u64;
        for (x, al) in dataset {
            for (t, frame) in al.frames.iter().enumerate() {
                let s = frame.state.index();
                let row = x.data.row(t);
                count[s] += 1;
                g_count += 1;
                for j in 0..d {
                    sum[(s, j)] += row[j];
                    sum_sq[(s, j)] += row[j] * row[j];
                    g_sum[j] += row[j];
                    g_sum_sq[j] += row[j] * row[j];
                }
            }
        }
        let g_mean = &g_sum / g_count.max(1) as f64;
        let g_var = (&g_sum_sq / g_count.max(1) as f64 - &g_mean * &g_mean)
            .mapv(|v| v.max(variance_floor));
        let mut means = Array2::zeros((num_states, d));
        let mut vars = Array2::zeros((num_states, d));
        for s in 0..num_states {
            if count[s] == 0 {
                means.row_mut(s).assign(&g_mean);
                vars.row_mut(s).assign(&g_var);
            } else {
                let c = count[s] as f64;
                for j in 0..d {
                    let m = sum[(s, j)] / c;
                    means[(s, j)] = m;
                    vars[(s, j)] = (sum_sq[(s, j)] / c - m * m).max(variance_floor);
                }
            }
        }
        Self { means, vars }
    }

    pub fn num_states(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// Log density of one frame under every state's Gaussian.
    pub fn log_density(&self, x: ArrayView1<f64>) -> Array1<f64> {
        const LN_2PI: f64 = 1.8378770664093453; // ln(2*pi)
        let mut out = Array1::zeros(self.num_states());
        for s in 0..self.num_states() {
            let mut acc = 0.0;
            for j in 0..self.dim() {
                let var = self.vars[(s, j)];
                let diff = x[j] - self.means[(s, j)];
                acc += -0.5 * (LN_2PI + var.ln()) - diff * diff / (2.0 * var);
            }
            out[s] = acc;
        }
        out
    }
}
