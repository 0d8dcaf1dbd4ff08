//! Small summary statistics used by evaluation and analysis code.

use crate::math::sqrt;
use crate::rng::Stream;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn std_pop(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation (divides by `n - 1`).
pub fn std_sample(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Standard error of the mean.
pub fn std_err(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    std_sample(xs) / sqrt(xs.len() as f64)
}

/// Bootstrap estimate of the standard error of the mean.
pub fn bootstrap_std_err(xs: &[f64], resamples: usize, seed: u64) -> f64 {
    if xs.len() < 2 || resamples < 2 {
        return 0.0;
    }
    let mut rng = Stream::new(seed);
    let means: alloc::vec::Vec<f64> = (0..resamples)
        .map(|_| {
            let s: f64 = (0..xs.len()).map(|_| xs[rng.below(xs.len())]).sum();
            s / xs.len() as f64
        })
        .collect();
    std_sample(&means)
}

/// One-sided sign-test p-value: probability of at least `successes` out of
/// `trials` under a fair coin.
pub fn sign_test_p(successes: usize, trials: usize) -> f64 {
    let mut p = 0.0;
    for k in successes..=trials {
        p += binomial(trials, k) * crate::math::powi(0.5, trials as i32);
    }
    p
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}
