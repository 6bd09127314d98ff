//! Monotone length decay functions and the ratio-form prior folded into the
//! Viterbi recursion.
//!
//! All four decay functions are normalized so their sup is one and floored at
//! `EPSILON` so log scores stay finite. The ratio form replaces the previously
//! multiplied length factor by the current one on every self-transition, which
//! keeps decoding linear in the number of frames.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SegalignError};
use crate::types::StateId;

/// Floor value shared by all decay functions.
pub const EPSILON: f64 = 0.001;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default,
)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    #[default]
    None,
    Box,
    LinearDecay,
    HalfPoisson,
    HalfGaussian,
}

/// Decay value for a run of length `l` in a state with mean length `len`.
///
/// `l` counts frames spent in the state so far, starting at 1.
pub fn prior_value(kind: PriorKind, l: usize, len: f64) -> Result<f64> {
    if !(len > 0.0) {
        return Err(SegalignError::NonPositiveLength(len));
    }
    debug_assert!(l >= 1);
    let lf = l as f64;
    let v = match kind {
        PriorKind::None => 1.0,
        PriorKind::Box => {
            if lf <= 2.0 * len {
                1.0
            } else {
                EPSILON
            }
        }
        PriorKind::LinearDecay => {
            if lf <= len {
                1.0
            } else if lf < 2.0 * len {
                (1.0 - (lf - len) / len).max(EPSILON)
            } else {
                EPSILON
            }
        }
        PriorKind::HalfPoisson => {
            // Plateau through the first integer past len; the tail is the
            // Poisson pmf with rate len, normalized so its first point is 1.
            // pmf(l)/pmf(l-1) = len/l, so the tail is a telescoping product.
            let plateau_end = len.floor() as usize + 1;
            if l <= plateau_end {
                1.0
            } else {
                let mut log_v = 0.0;
                for k in plateau_end + 1..=l {
                    log_v += (len / k as f64).ln();
                }
                log_v.exp().max(EPSILON)
            }
        }
        PriorKind::HalfGaussian => (-(lf * lf) / (len * len)).exp().max(EPSILON),
    };
    Ok(v)
}

/// Log of [`prior_value`].
pub fn log_prior_value(kind: PriorKind, l: usize, len: f64) -> Result<f64> {
    Ok(prior_value(kind, l, len)?.ln())
}

/// Log-additive factor applied when a hypothesis reaches run length `l`:
/// `p̃(l)/p̃(l-1)` on a self-transition, `p̃(1)` on state entry.
pub fn ratio_prior(kind: PriorKind, l: usize, len: f64) -> Result<f64> {
    if l == 1 {
        log_prior_value(kind, 1, len)
    } else {
        Ok(log_prior_value(kind, l, len)? - log_prior_value(kind, l - 1, len)?)
    }
}

/// Recursive run-length tracker: grows by one on a self-transition, resets
/// to one otherwise (including the first frame).
pub fn run_length_update(prev_state: Option<StateId>, cur_state: StateId, prev_l: usize) -> usize {
    if prev_state == Some(cur_state) {
        prev_l + 1
    } else {
        1
    }
}

/// Precomputed per-state log prior and log ratio up to a run-length cap.
///
/// Index 0 corresponds to l = 1. Past the cap the ratio is held at its value
/// at the cap, which is exact for box and linear decay (their ratio is
/// constant there) and a controlled approximation for the two tails.
#[derive(Clone, Debug)]
pub struct PriorTable {
    log_value: Vec<f64>,
    log_ratio: Vec<f64>,
}

impl PriorTable {
    pub fn build(kind: PriorKind, len: f64, l_max: usize) -> Result<Self> {
        assert!(l_max >= 1);
        let mut log_value = Vec::with_capacity(l_max);
        let mut log_ratio = Vec::with_capacity(l_max);
        let mut prev = 0.0;
        for l in 1..=l_max {
            let lv = log_prior_value(kind, l, len)?;
            log_value.push(lv);
            log_ratio.push(if l == 1 { lv } else { lv - prev });
            prev = lv;
        }
        Ok(Self {
            log_value,
            log_ratio,
        })
    }

    pub fn l_max(&self) -> usize {
        self.log_value.len()
    }

    /// Log ratio factor for reaching run length `l` (capped).
    pub fn log_ratio(&self, l: usize) -> f64 {
        debug_assert!(l >= 1);
        self.log_ratio[l.min(self.l_max()) - 1]
    }

    /// Capped log prior of a completed run of length `l`: the telescoping
    /// sum of the capped ratios.
    pub fn log_value_capped(&self, l: usize) -> f64 {
        debug_assert!(l >= 1);
        let m = self.l_max();
        if l <= m {
            self.log_value[l - 1]
        } else {
            self.log_value[m - 1] + (l - m) as f64 * self.log_ratio[m - 1]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn box_boundary_and_epsilon() {
        let len = 7.0;
        assert_eq!(prior_value(PriorKind::Box, 14, len).unwrap(), 1.0);
        assert_eq!(prior_value(PriorKind::Box, 15, len).unwrap(), EPSILON);
    }

    #[test]
    fn half_gaussian_at_mean() {
        let v = prior_value(PriorKind::HalfGaussian, 10, 10.0).unwrap();
        assert_relative_eq!(v, (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn linear_midpoint() {
        // l = 1.5 * len on the ramp -> 0.5
        let v = prior_value(PriorKind::LinearDecay, 15, 10.0).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn half_poisson_tail_ratio() {
        // past the plateau the ratio is len/l
        let len = 4.3;
        let plateau_end = 5;
        for l in plateau_end + 1..40 {
            let r = ratio_prior(PriorKind::HalfPoisson, l, len).unwrap();
            let direct = prior_value(PriorKind::HalfPoisson, l, len).unwrap();
            if direct > EPSILON {
                assert_relative_eq!(r, (len / l as f64).ln(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn run_length_recursion() {
        let s = StateId(3);
        let other = StateId(4);
        assert_eq!(run_length_update(None, s, 0), 1);
        assert_eq!(run_length_update(Some(other), s, 5), 1);
        let mut l = run_length_update(None, s, 0);
        l = run_length_update(Some(s), s, l);
        l = run_length_update(Some(s), s, l);
        assert_eq!(l, 3);
    }

    #[test]
    fn half_gaussian_ratio_example() {
        // len=10, l=2 -> e^(-4/100)/e^(-1/100) = e^(-0.03)
        let r = ratio_prior(PriorKind::HalfGaussian, 2, 10.0).unwrap();
        assert_relative_eq!(r, -0.03, epsilon = 1e-12);
    }

    #[test]
    fn telescoping_all_kinds() {
        for kind in [
            PriorKind::None,
            PriorKind::Box,
            PriorKind::LinearDecay,
            PriorKind::HalfPoisson,
            PriorKind::HalfGaussian,
        ] {
            for len in [1.0, 2.5, 10.0, 37.2] {
                let mut acc = 0.0;
                for l in 1..=200 {
                    acc += ratio_prior(kind, l, len).unwrap();
                    let direct = log_prior_value(kind, l, len).unwrap();
                    assert!(
                        (acc - direct).abs() < 1e-9,
                        "{kind:?} len={len} l={l}: {acc} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn non_positive_len_errors() {
        assert!(prior_value(PriorKind::Box, 1, 0.0).is_err());
        assert!(prior_value(PriorKind::HalfGaussian, 1, -3.0).is_err());
    }

    #[test]
    fn table_matches_direct_values() {
        let table = PriorTable::build(PriorKind::HalfGaussian, 6.0, 30).unwrap();
        for l in 1..=30 {
            assert_relative_eq!(
                table.log_value_capped(l),
                log_prior_value(PriorKind::HalfGaussian, l, 6.0).unwrap(),
                epsilon = 1e-12
            );
        }
        // past the cap the ratio is held constant
        let held = table.log_ratio(30);
        assert_relative_eq!(
            table.log_value_capped(35),
            table.log_value_capped(30) + 5.0 * held,
            epsilon = 1e-12
        );
    }

    proptest::proptest! {
        #[test]
        fn monotone_non_increasing(len in 1.0f64..200.0, l in 1usize..300) {
            for kind in [
                PriorKind::None,
                PriorKind::Box,
                PriorKind::LinearDecay,
                PriorKind::HalfPoisson,
                PriorKind::HalfGaussian,
            ] {
                let a = prior_value(kind, l, len).unwrap();
                let b = prior_value(kind, l + 1, len).unwrap();
                proptest::prop_assert!(b <= a + 1e-15);
                proptest::prop_assert!(a <= 1.0 && a >= EPSILON.min(1.0) * 0.999);
            }
        }
    }
}
