//! Return and scalarization arithmetic.

use super::LearnError;

/// `Σ_k γ^k r_k`, accumulated backwards.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, &r| r + gamma * acc)
}

/// Discounted sum of a segment of at most `n` rewards plus the discounted
/// bootstrap value. `bootstrap` is `None` when the segment ended in a
/// terminal state.
pub fn nstep_return(rewards: &[f64], bootstrap: Option<f64>, gamma: f64, n: usize) -> f64 {
    debug_assert!(rewards.len() <= n, "segment longer than n");
    let tail = bootstrap.unwrap_or(0.0) * gamma.powi(rewards.len() as i32);
    let mut total = 0.0;
    let mut discount = 1.0;
    for &r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    total + tail
}

/// Linear weighted sum of a reward vector.
pub fn scalarize(rewards: &[f64], weights: &[f64]) -> Result<f64, LearnError> {
    if rewards.len() != weights.len() {
        return Err(LearnError::WeightDimMismatch {
            objectives: rewards.len(),
            weights: weights.len(),
        });
    }
    Ok(rewards.iter().zip(weights).map(|(r, w)| r * w).sum())
}

/// Clamps a reward to `[-limit, limit]` when a limit is set.
pub fn clip(reward: f64, limit: Option<f64>) -> f64 {
    match limit {
        Some(c) => reward.clamp(-c, c),
        None => reward,
    }
}
