//! Guarded feature-level normalization.
//!
//! The features of the hazy input are re-statisticized per channel toward
//! targets derived from the prompt's features. The mean target takes the
//! smaller of the two means when they share a sign and otherwise keeps the
//! input's mean. The std target takes the larger of the two stds unless the
//! prompt's std sits `alpha` or more cross-channel deviations above the
//! input's average std, in which case the input's std is kept.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stats::{affine_normalize, channel_stats_with_floor, plane_mean_std, ChannelStats, STD_FLOOR};
use crate::tensor::FeatureMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlnConfig {
    pub alpha: f64,
    pub eps: f64,
}

impl Default for FlnConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            eps: STD_FLOOR,
        }
    }
}

impl FlnConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() {
            return invalid("alpha must be finite");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return invalid("eps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanBranch {
    /// Means share a sign; the smaller one wins.
    Min,
    /// Signs differ or a mean is zero; the input mean is kept.
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdBranch {
    /// Prompt std within the guard; the larger std wins.
    Max,
    /// Prompt std beyond the guard; the input std is kept.
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrace {
    pub mean_prompt: f64,
    pub mean_input: f64,
    pub std_prompt: f64,
    pub std_input: f64,
    pub z_score: f64,
    pub mean_branch: MeanBranch,
    pub std_branch: StdBranch,
    pub mean_target: f64,
    pub std_target: f64,
}

/// Per-channel record of every decision made by [`fln`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationTrace {
    pub channels: Vec<ChannelTrace>,
}

impl AdaptationTrace {
    pub fn targets(&self) -> ChannelStats {
        ChannelStats {
            mean: self.channels.iter().map(|c| c.mean_target).collect(),
            std: self.channels.iter().map(|c| c.std_target).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.mean_target == c.mean_input && c.std_target == c.std_input)
    }
}

fn mean_rule(mu_p: f64, mu_x: f64) -> (f64, MeanBranch) {
    if mu_p * mu_x > 0.0 {
        (mu_p.min(mu_x), MeanBranch::Min)
    } else {
        (mu_x, MeanBranch::Keep)
    }
}

pub fn mean_adapt(mu_p: &[f64], mu_x: &[f64]) -> Result<Vec<f64>> {
    if mu_p.len() != mu_x.len() {
        return invalid(format!("mean vectors differ in length: {} vs {}", mu_p.len(), mu_x.len()));
    }
    Ok(mu_p.iter().zip(mu_x).map(|(&p, &x)| mean_rule(p, x).0).collect())
}

/// Guard statistics over the input's channel stds: their mean and their
/// population std floored at `eps` (a single channel has spread `eps`).
fn guard_stats(sigma_x: &[f64], eps: f64) -> (f64, f64) {
    if sigma_x.len() < 2 {
        return (sigma_x.iter().sum::<f64>() / sigma_x.len().max(1) as f64, eps);
    }
    let (m, s) = plane_mean_std(sigma_x);
    (m, s.max(eps))
}

fn std_rule(sigma_p: f64, sigma_x: f64, guard: (f64, f64), alpha: f64) -> (f64, f64, StdBranch) {
    let z = (sigma_p - guard.0) / guard.1;
    if z < alpha {
        (sigma_p.max(sigma_x), z, StdBranch::Max)
    } else {
        (sigma_x, z, StdBranch::Keep)
    }
}

pub fn std_adapt(sigma_p: &[f64], sigma_x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    std_adapt_with_eps(sigma_p, sigma_x, alpha, STD_FLOOR)
}

pub fn std_adapt_with_eps(sigma_p: &[f64], sigma_x: &[f64], alpha: f64, eps: f64) -> Result<Vec<f64>> {
    if sigma_p.len() != sigma_x.len() || sigma_x.is_empty() {
        return invalid(format!(
            "std vectors must be non-empty and equal in length: {} vs {}",
            sigma_p.len(),
            sigma_x.len()
        ));
    }
    let guard = guard_stats(sigma_x, eps);
    Ok(sigma_p
        .iter()
        .zip(sigma_x)
        .map(|(&p, &x)| std_rule(p, x, guard, alpha).0)
        .collect())
}

/// Computes the adaptation targets from prompt and input statistics.
pub fn adapt_stats(prompt: &ChannelStats, input: &ChannelStats, cfg: &FlnConfig) -> Result<AdaptationTrace> {
    cfg.validate()?;
    if prompt.channels() != input.channels() {
        return invalid(format!(
            "channel mismatch: prompt has {}, input has {}",
            prompt.channels(),
            input.channels()
        ));
    }
    let guard = guard_stats(&input.std, cfg.eps);
    let channels = (0..input.channels())
        .map(|i| {
            let (mean_target, mean_branch) = mean_rule(prompt.mean[i], input.mean[i]);
            let (std_target, z_score, std_branch) = std_rule(prompt.std[i], input.std[i], guard, cfg.alpha);
            ChannelTrace {
                mean_prompt: prompt.mean[i],
                mean_input: input.mean[i],
                std_prompt: prompt.std[i],
                std_input: input.std[i],
                z_score,
                mean_branch,
                std_branch,
                mean_target,
                std_target,
            }
        })
        .collect();
    Ok(AdaptationTrace { channels })
}

/// Feature-level normalization of `input` guided by `prompt`. Spatial sizes
/// may differ; only channel counts must agree.
pub fn fln(input: &FeatureMap, prompt: &FeatureMap, cfg: &FlnConfig) -> Result<(FeatureMap, AdaptationTrace)> {
    if input.channels() != prompt.channels() {
        return invalid(format!(
            "channel mismatch: input has {}, prompt has {}",
            input.channels(),
            prompt.channels()
        ));
    }
    let input_stats = channel_stats_with_floor(input, cfg.eps);
    let prompt_stats = channel_stats_with_floor(prompt, cfg.eps);
    let trace = adapt_stats(&prompt_stats, &input_stats, cfg)?;
    let out = affine_normalize(input, &input_stats, &trace.targets())?;
    Ok((out, trace))
}

/// Applies [`fln`] independently to every level.
pub fn fln_per_level(
    input: &[FeatureMap],
    prompt: &[FeatureMap],
    cfg: &FlnConfig,
) -> Result<(Vec<FeatureMap>, Vec<AdaptationTrace>)> {
    if input.len() != prompt.len() {
        return invalid(format!(
            "level count mismatch: input has {}, prompt has {}",
            input.len(),
            prompt.len()
        ));
    }
    input
        .iter()
        .zip(prompt)
        .enumerate()
        .map(|(level, (x, p))| {
            fln(x, p, cfg).map_err(|e| match e {
                crate::Error::InvalidInput(msg) => crate::Error::InvalidInput(format!("level {level}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::channel_stats;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::from_fn(c, h, w, |_, _, _| rng.gen_range(-1.0..1.0)).unwrap()
    }

    /// Rescales each channel of `base` to exact `(mean, std)` targets.
    fn with_stats(base: &FeatureMap, mean: &[f64], std: &[f64]) -> FeatureMap {
        let to = ChannelStats::new(mean.to_vec(), std.to_vec()).unwrap();
        affine_normalize(base, &channel_stats(base), &to).unwrap()
    }

    #[test]
    fn mean_rule_cases() {
        assert_eq!(mean_adapt(&[0.5], &[0.5]).unwrap(), vec![0.5]);
        assert_eq!(mean_adapt(&[0.2], &[0.5]).unwrap(), vec![0.2]);
        assert_eq!(mean_adapt(&[-0.1], &[0.3]).unwrap(), vec![0.3]);
        assert_eq!(mean_adapt(&[-0.4], &[-0.1]).unwrap(), vec![-0.4]);
        assert_eq!(mean_adapt(&[0.0], &[0.3]).unwrap(), vec![0.3]);
        assert!(mean_adapt(&[0.0, 1.0], &[0.3]).is_err());
    }

    #[test]
    fn std_rule_cases() {
        let sx = [0.8, 1.0, 1.2];
        let s = (0.08f64 / 3.0).sqrt();
        assert_abs_diff_eq!(s, 0.1633, epsilon = 1e-4);
        // z = 0.3 / s ~ 1.84 < 2
        assert_eq!(std_adapt(&[0.8, 1.3, 1.2], &sx, 2.0).unwrap()[1], 1.3);
        // z = 0.5 / s ~ 3.06 >= 2
        assert_eq!(std_adapt(&[0.8, 1.5, 1.2], &sx, 2.0).unwrap()[1], 1.0);
        assert_eq!(std_adapt(&sx, &sx, 2.0).unwrap(), sx.to_vec());
        assert!(std_adapt(&[1.0], &[1.0, 2.0], 2.0).is_err());
    }

    #[test]
    fn single_channel_guard_uses_floor() {
        // Cross-channel spread of one channel is eps: anything above the mean is rejected.
        assert_eq!(std_adapt(&[1.1], &[1.0], 2.0).unwrap(), vec![1.0]);
        assert_eq!(std_adapt(&[1.0 + 1e-7], &[1.0], 2.0).unwrap(), vec![1.0 + 1e-7]);
        assert_eq!(std_adapt(&[0.5], &[1.0], 2.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn fln_self_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_map(&mut rng, 4, 9, 7);
        let (out, trace) = fln(&x, &x, &FlnConfig::default()).unwrap();
        assert_eq!(out, x);
        assert!(trace.is_identity());
    }

    #[test]
    fn fln_adopts_prompt_stats_within_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = random_map(&mut rng, 3, 8, 8);
        let x = with_stats(&base, &[0.5, 0.6, 0.7], &[0.20, 0.25, 0.30]);
        // Guard threshold: mean 0.25 + 2 * 0.0408 = 0.3316.
        let p = with_stats(&random_map(&mut rng, 3, 5, 6), &[0.4, 0.5, 0.6], &[0.22, 0.28, 0.32]);
        let (out, trace) = fln(&x, &p, &FlnConfig::default()).unwrap();
        assert!(trace.channels.iter().all(|c| c.mean_branch == MeanBranch::Min && c.std_branch == StdBranch::Max));
        assert!(channel_stats(&out).max_abs_diff(&channel_stats(&p)) < 1e-9);
        assert_eq!((out.height(), out.width()), (8, 8));
    }

    #[test]
    fn fln_falls_back_for_out_of_distribution_prompt() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = with_stats(&random_map(&mut rng, 3, 8, 8), &[0.5, 0.6, 0.7], &[0.20, 0.25, 0.30]);
        let p = with_stats(&random_map(&mut rng, 3, 8, 8), &[-3.0, -2.0, -1.0], &[5.0, 6.0, 7.0]);
        let (out, trace) = fln(&x, &p, &FlnConfig::default()).unwrap();
        assert!(trace.channels.iter().all(|c| c.mean_branch == MeanBranch::Keep && c.std_branch == StdBranch::Keep));
        assert_eq!(out, x);
    }

    #[test]
    fn fln_channel_mismatch() {
        let x = FeatureMap::filled(3, 2, 2, 0.0).unwrap();
        let p = FeatureMap::filled(2, 2, 2, 0.0).unwrap();
        assert!(fln(&x, &p, &FlnConfig::default()).is_err());
    }

    #[test]
    fn per_level_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cfg = FlnConfig::default();
        let xs: Vec<FeatureMap> = (0..3)
            .map(|_| with_stats(&random_map(&mut rng, 3, 6, 6), &[0.5, 0.6, 0.7], &[0.20, 0.25, 0.30]))
            .collect();
        let (same, traces) = fln_per_level(&xs, &xs, &cfg).unwrap();
        assert_eq!(same, xs);
        assert!(traces.iter().all(AdaptationTrace::is_identity));

        let (one, _) = fln_per_level(&xs[..1], &xs[1..2], &cfg).unwrap();
        assert_eq!(one[0], fln(&xs[0], &xs[1], &cfg).unwrap().0);

        let good = with_stats(&random_map(&mut rng, 3, 6, 6), &[0.4, 0.5, 0.6], &[0.22, 0.28, 0.32]);
        let wild = with_stats(&random_map(&mut rng, 3, 6, 6), &[-1.0, -1.0, -1.0], &[9.0, 9.0, 9.0]);
        let ps = vec![good.clone(), good.clone(), wild];
        let (out, traces) = fln_per_level(&xs, &ps, &cfg).unwrap();
        assert!(!traces[0].is_identity() && !traces[1].is_identity());
        assert!(traces[2].is_identity());
        assert_eq!(out[2], xs[2]);

        assert!(fln_per_level(&xs, &ps[..2], &cfg).is_err());
    }

    proptest! {
        #[test]
        fn target_invariants(
            mp in proptest::collection::vec(-2.0f64..2.0, 3),
            mx in proptest::collection::vec(-2.0f64..2.0, 3),
            sp in proptest::collection::vec(1e-3f64..2.0, 3),
            sx in proptest::collection::vec(1e-3f64..2.0, 3),
        ) {
            let cfg = FlnConfig::default();
            let trace = adapt_stats(
                &ChannelStats::new(mp.clone(), sp.clone()).unwrap(),
                &ChannelStats::new(mx.clone(), sx.clone()).unwrap(),
                &cfg,
            ).unwrap();
            for (i, c) in trace.channels.iter().enumerate() {
                prop_assert!(c.mean_target.abs() <= mp[i].abs().max(mx[i].abs()));
                if mp[i] > 0.0 && mx[i] > 0.0 {
                    prop_assert!(c.mean_target <= mx[i]);
                }
                prop_assert!(c.std_target >= sx[i]);
                if c.z_score >= cfg.alpha {
                    prop_assert_eq!(c.std_target.to_bits(), sx[i].to_bits());
                }
            }
        }

        #[test]
        fn fln_is_deterministic(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_map(&mut rng, 3, 5, 5);
            let p = random_map(&mut rng, 3, 5, 5);
            let cfg = FlnConfig::default();
            prop_assert_eq!(fln(&x, &p, &cfg).unwrap(), fln(&x, &p, &cfg).unwrap());
        }
    }
}
