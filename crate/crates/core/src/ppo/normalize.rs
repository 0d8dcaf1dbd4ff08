//! Running observation normalization.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::sqrt;

const CLIP: f64 = 10.0;
const EPS: f64 = 1e-8;

/// Running mean/variance over observations (parallel-merge update), applied
/// as `clip((x − mean)/√(var + ε), ±10)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
}

impl ObsNormalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: EPS,
        }
    }

    pub fn update(&mut self, obs: &[f64]) {
        let dim = self.mean.len();
        let n = obs.len() / dim;
        if n == 0 {
            return;
        }
        let mut bm = vec![0.0; dim];
        for r in 0..n {
            for i in 0..dim {
                bm[i] += obs[r * dim + i];
            }
        }
        bm.iter_mut().for_each(|m| *m /= n as f64);
        let mut bv = vec![0.0; dim];
        for r in 0..n {
            for i in 0..dim {
                let d = obs[r * dim + i] - bm[i];
                bv[i] += d * d;
            }
        }
        bv.iter_mut().for_each(|v| *v /= n as f64);
        let bc = n as f64;
        let tot = self.count + bc;
        for i in 0..dim {
            let delta = bm[i] - self.mean[i];
            let m2 = self.var[i] * self.count + bv[i] * bc + delta * delta * self.count * bc / tot;
            self.mean[i] += delta * bc / tot;
            self.var[i] = m2 / tot;
        }
        self.count = tot;
    }

    pub fn apply(&self, obs: &[f64]) -> Vec<f64> {
        let dim = self.mean.len();
        obs.iter()
            .enumerate()
            .map(|(k, x)| {
                let i = k % dim;
                ((x - self.mean[i]) / sqrt(self.var[i] + EPS)).clamp(-CLIP, CLIP)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn incremental_update_matches_batch_moments() {
        let mut rng = Stream::new(3);
        let data: Vec<f64> = (0..600).map(|i| 2.0 * rng.normal() + (i % 2) as f64 * 5.0).collect();
        let mut n = ObsNormalizer::new(2);
        for chunk in data.chunks(60) {
            n.update(chunk);
        }
        for i in 0..2 {
            let col: Vec<f64> = data.iter().skip(i).step_by(2).copied().collect();
            let m = crate::stats::mean(&col);
            let v = crate::stats::std_pop(&col).powi(2);
            assert!((n.mean[i] - m).abs() < 1e-6);
            assert!((n.var[i] - v).abs() < 1e-5);
        }
        let out = n.apply(&data);
        assert!(out.iter().all(|x| x.abs() <= 10.0));
    }
}
