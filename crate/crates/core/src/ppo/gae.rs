use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

/// Generalized advantage estimation over one rollout.
///
/// `episode_ends[t]` cuts the recursion after step `t` (the reward at a
/// truncated episode end should already include any bootstrap term).
/// `last_value` bootstraps the step after the final transition.
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    episode_ends: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    debug_assert_eq!(values.len(), n);
    debug_assert_eq!(episode_ends.len(), n);
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 == n { last_value } else { values[t + 1] };
        let live = if episode_ends[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales advantages to mean 0, std 1 (population std, floored at 1e-8).
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = sqrt(var).max(1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use std::vec::Vec;

    /// Direct double sum `A_t = Σ_k (γλ)^k δ_{t+k}` within an episode.
    fn brute_force(r: &[f64], v: &[f64], ends: &[bool], last: f64, g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let delta: Vec<f64> = (0..n)
            .map(|t| {
                let nv = if ends[t] { 0.0 } else if t + 1 == n { last } else { v[t + 1] };
                r[t] + g * nv - v[t]
            })
            .collect();
        (0..n)
            .map(|t| {
                let mut s = 0.0;
                let mut w = 1.0;
                for k in t..n {
                    s += w * delta[k];
                    if ends[k] {
                        break;
                    }
                    w *= g * l;
                }
                s
            })
            .collect()
    }

    #[test]
    fn lambda_zero_gives_td_residuals() {
        let r = [1.0, -0.5, 2.0];
        let v = [0.3, 0.1, -0.2];
        let (a, ret) = compute_gae(&r, &v, &[false; 3], 0.7, 0.9, 0.0);
        let expected = [1.0 + 0.9 * 0.1 - 0.3, -0.5 + 0.9 * -0.2 - 0.1, 2.0 + 0.9 * 0.7 + 0.2];
        for i in 0..3 {
            assert!((a[i] - expected[i]).abs() < 1e-15);
            assert!((ret[i] - (a[i] + v[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn monte_carlo_reduction() {
        let r = [1.0, 2.0, 3.0, 4.0];
        let (a, _) = compute_gae(&r, &[0.0; 4], &[false; 4], 0.0, 1.0, 1.0);
        assert_eq!(a, vec![10.0, 9.0, 7.0, 4.0]);
    }

    #[test]
    fn matches_double_sum_on_random_instances() {
        let mut rng = Stream::new(8);
        for _ in 0..100 {
            let n = 5 + rng.below(16);
            let r: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let ends: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.15).collect();
            let last = rng.normal();
            let g = rng.uniform_in(0.8, 0.999);
            let l = rng.uniform_in(0.0, 1.0);
            let (a, _) = compute_gae(&r, &v, &ends, last, g, l);
            let b = brute_force(&r, &v, &ends, last, g, l);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalization_moments() {
        let mut rng = Stream::new(1);
        let mut a: Vec<f64> = (0..2048).map(|_| 3.0 + 5.0 * rng.normal()).collect();
        normalize_advantages(&mut a);
        let m = crate::stats::mean(&a);
        let s = crate::stats::std_pop(&a);
        assert!(m.abs() < 1e-10);
        assert!((s - 1.0).abs() < 1e-8);
    }
}
