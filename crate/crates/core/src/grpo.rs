//! Group-relative advantages and the clipped, KL-penalized surrogate.
//!
//! The objective is a quantity to **maximize**:
//!
//! ```text
//! J = mean_i[ min(ρ_i A_i, clip(ρ_i, 1-ε, 1+ε) A_i) ] - β · mean_i[ k3_i ]
//! ρ_i  = exp(logp_new_i - logp_old_i)
//! A_i  = (r_i - mean(r)) / (popstd(r) + std_epsilon)
//! k3_i = exp(d_i) - d_i - 1,   d_i = logp_anchor_i - logp_new_i
//! ```
//!
//! Ratios are sequence-level. The KL anchor is `logp_old` unless the group
//! carries `logp_ref`. All sums run left to right over the group.

use crate::error::{Error, Result};
use crate::model::{GrpoConfig, RolloutGroup};
use serde::{Deserialize, Serialize};

/// Exponents are clamped to this magnitude before `exp`.
pub const EXP_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrpoTerms {
    pub advantages: Vec<f64>,
    pub ratios: Vec<f64>,
    pub surrogate_terms: Vec<f64>,
    pub kl_terms: Vec<f64>,
    pub objective: f64,
    /// Set when any exponent hit [`EXP_CLAMP`].
    pub exponent_clamped: bool,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub(crate) fn popstd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    var.sqrt()
}

/// Standardize rewards within the group.
///
/// A group whose rewards are all identical yields exactly zero advantages.
pub fn advantages(rewards: &[f64], std_epsilon: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::usage(format!(
            "advantages need at least 2 rewards, got {}",
            rewards.len()
        )));
    }
    if std_epsilon.is_nan() || std_epsilon < 0.0 || rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::usage("rewards must be finite and std_epsilon >= 0"));
    }
    let first = rewards[0];
    let sd = popstd(rewards);
    if sd == 0.0 || rewards.iter().all(|&r| r == first) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let m = mean(rewards);
    let denom = sd + std_epsilon;
    Ok(rewards.iter().map(|r| (r - m) / denom).collect())
}

/// `exp(x)` with `x` clamped to `±EXP_CLAMP`; the flag reports clamping.
pub fn clamped_exp(x: f64) -> (f64, bool) {
    let clamped = x.clamp(-EXP_CLAMP, EXP_CLAMP);
    (clamped.exp(), clamped != x)
}

/// Probability ratio π_new / π_old from log-probabilities.
pub fn ratio(logp_new: f64, logp_old: f64) -> f64 {
    clamped_exp(logp_new - logp_old).0
}

pub fn clipped_term(rho: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let clipped = rho.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    (rho * advantage).min(clipped * advantage)
}

/// Derivative of [`clipped_term`] with respect to `rho`.
///
/// Zero wherever the clipped branch is the strict minimum.
pub fn clipped_term_grad(rho: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let lo = 1.0 - clip_epsilon;
    let hi = 1.0 + clip_epsilon;
    if (lo..=hi).contains(&rho) {
        return advantage;
    }
    let clipped = rho.clamp(lo, hi);
    if rho * advantage < clipped * advantage {
        advantage
    } else {
        0.0
    }
}

/// k3 estimator of KL(new ‖ anchor); never negative.
pub fn kl_term(logp_new: f64, logp_anchor: f64) -> f64 {
    let d = (logp_anchor - logp_new).clamp(-EXP_CLAMP, EXP_CLAMP);
    // exp(d) - d - 1 computed as expm1(d) - d keeps precision for small d
    (d.exp_m1() - d).max(0.0)
}

pub fn grpo_objective(group: &RolloutGroup, config: &GrpoConfig) -> Result<GrpoTerms> {
    group.validate()?;
    config.validate()?;
    let advantages = advantages(&group.rewards, config.std_epsilon)?;
    let anchor = group.logp_ref.as_deref().unwrap_or(&group.logp_old);

    let mut exponent_clamped = false;
    let ratios: Vec<f64> = group
        .logp_new
        .iter()
        .zip(&group.logp_old)
        .map(|(&new, &old)| {
            let (r, c) = clamped_exp(new - old);
            exponent_clamped |= c;
            r
        })
        .collect();
    let surrogate_terms: Vec<f64> = ratios
        .iter()
        .zip(&advantages)
        .map(|(&rho, &a)| clipped_term(rho, a, config.clip_epsilon))
        .collect();
    let kl_terms: Vec<f64> = group
        .logp_new
        .iter()
        .zip(anchor)
        .map(|(&new, &anc)| {
            exponent_clamped |= (anc - new).abs() > EXP_CLAMP;
            kl_term(new, anc)
        })
        .collect();
    let objective = mean(&surrogate_terms) - config.kl_beta * mean(&kl_terms);

    Ok(GrpoTerms {
        advantages,
        ratios,
        surrogate_terms,
        kl_terms,
        objective,
        exponent_clamped,
    })
}
