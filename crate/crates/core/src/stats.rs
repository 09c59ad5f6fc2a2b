//! Per-channel spatial statistics and the affine re-statistics kernel shared
//! by image-level and feature-level normalization.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::{FeatureMap, Planar};

/// Floor applied to every computed standard deviation.
pub const STD_FLOOR: f64 = 1e-6;

/// Per-channel mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != std.len() {
            return invalid(format!(
                "channel stats need equal non-zero lengths, got {} means and {} stds",
                mean.len(),
                std.len()
            ));
        }
        if mean.iter().chain(&std).any(|v| !v.is_finite()) {
            return invalid("channel stats must be finite");
        }
        if std.iter().any(|&s| s < 0.0) {
            return invalid("standard deviations must be non-negative");
        }
        Ok(Self { mean, std })
    }

    /// The same `(mean, std)` pair repeated over `channels` channels.
    pub fn uniform(channels: usize, mean: f64, std: f64) -> Result<Self> {
        Self::new(vec![mean; channels], vec![std; channels])
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn max_abs_diff(&self, other: &ChannelStats) -> f64 {
        self.mean
            .iter()
            .zip(&other.mean)
            .chain(self.std.iter().zip(&other.std))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Spatial mean and population standard deviation of every channel, with the
/// standard deviation floored at [`STD_FLOOR`].
pub fn channel_stats<T: Planar>(x: &T) -> ChannelStats {
    channel_stats_with_floor(x, STD_FLOOR)
}

pub fn channel_stats_with_floor<T: Planar>(x: &T, floor: f64) -> ChannelStats {
    let fm = x.planes();
    let (mean, std) = (0..fm.channels())
        .map(|c| {
            let (m, s) = plane_mean_std(fm.plane(c));
            (m, s.max(floor))
        })
        .unzip();
    ChannelStats { mean, std }
}

/// Two-pass mean and population standard deviation.
pub(crate) fn plane_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Maps every channel `i` of `x` through
/// `to.std[i] * (v - from.mean[i]) / from.std[i] + to.mean[i]`.
///
/// Channels whose source and target statistics are identical are copied
/// verbatim, so `affine_normalize(x, s, s) == x` holds bit-for-bit.
pub fn affine_normalize<T: Planar>(x: &T, from: &ChannelStats, to: &ChannelStats) -> Result<T> {
    let fm = x.planes();
    let c = fm.channels();
    if from.channels() != c || to.channels() != c {
        return invalid(format!(
            "channel count mismatch: tensor has {c}, source stats {}, target stats {}",
            from.channels(),
            to.channels()
        ));
    }
    if let Some(i) = from.std.iter().position(|&s| s.is_nan() || s <= 0.0) {
        return invalid(format!("source std of channel {i} is not positive"));
    }
    let mut out = fm.clone();
    for i in 0..c {
        let (fm_i, fs_i, tm_i, ts_i) = (from.mean[i], from.std[i], to.mean[i], to.std[i]);
        if fm_i == tm_i && fs_i == ts_i {
            continue;
        }
        let scale = ts_i / fs_i;
        for v in out.plane_mut(i) {
            *v = (*v - fm_i) * scale + tm_i;
        }
    }
    let out = FeatureMap::new(out.channels(), out.height(), out.width(), out.into_data())?;
    T::from_planes(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Image;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn map1(values: &[f64], h: usize, w: usize) -> FeatureMap {
        FeatureMap::new(1, h, w, values.to_vec()).unwrap()
    }

    #[test]
    fn stats_of_small_map() {
        let s = channel_stats(&map1(&[1.0, 2.0, 3.0, 4.0], 2, 2));
        assert_abs_diff_eq!(s.mean[0], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.std[0], 1.25f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.std[0], 1.118034, epsilon = 1e-6);
    }

    #[test]
    fn constant_channel_hits_floor() {
        let s = channel_stats(&map1(&[0.7; 9], 3, 3));
        assert_abs_diff_eq!(s.mean[0], 0.7, epsilon = 1e-12);
        assert_eq!(s.std[0], STD_FLOOR);
    }

    #[test]
    fn constant_rgb_channels() {
        let img = Image::filled(4, 3, [0.0, 0.5, 1.0]).unwrap();
        let s = channel_stats(&img);
        assert_eq!(s.mean, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn affine_identity_and_hand_values() {
        let x = map1(&[0.0, 1.0], 1, 2);
        let s = channel_stats(&x);
        assert_eq!(affine_normalize(&x, &s, &s).unwrap(), x);

        let from = ChannelStats::uniform(1, 0.5, 0.5).unwrap();
        let to = ChannelStats::uniform(1, 1.0, 1.0).unwrap();
        let y = affine_normalize(&x, &from, &to).unwrap();
        assert_abs_diff_eq!(y.data()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.data()[1], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn standardized_input_moves_to_target() {
        // Per channel values +-1 have mean 0, std 1.
        let x = FeatureMap::from_fn(3, 2, 2, |_, y, x| if (x + y) % 2 == 0 { 1.0 } else { -1.0 })
            .unwrap();
        let to = ChannelStats::uniform(3, 0.8, 0.1).unwrap();
        let y = affine_normalize(&x, &channel_stats(&x), &to).unwrap();
        assert!(channel_stats(&y).max_abs_diff(&to) < 1e-12);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let x = map1(&[0.0, 1.0], 1, 2);
        let s3 = ChannelStats::uniform(3, 0.0, 1.0).unwrap();
        assert!(affine_normalize(&x, &s3, &s3).is_err());
    }

    fn naive_stats(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mut sum = 0.0;
        for v in values {
            sum += v;
        }
        let mean = sum / n;
        let mut ss = 0.0;
        for v in values {
            ss += (v - mean).powi(2);
        }
        (mean, (ss / n).sqrt())
    }

    fn tensor_strategy() -> impl Strategy<Value = FeatureMap> {
        (1usize..4, 1usize..64, 1usize..64).prop_flat_map(|(c, h, w)| {
            proptest::collection::vec(-5.0f64..5.0, c * h * w)
                .prop_map(move |d| FeatureMap::new(c, h, w, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn stats_match_naive_oracle(x in tensor_strategy()) {
            let s = channel_stats(&x);
            for c in 0..x.channels() {
                let (m, sd) = naive_stats(x.plane(c));
                prop_assert!((s.mean[c] - m).abs() < 1e-7);
                prop_assert!((s.std[c] - sd.max(STD_FLOOR)).abs() < 1e-7);
            }
        }

        #[test]
        fn normalize_hits_target_stats(
            x in tensor_strategy(),
            tm in -2.0f64..2.0,
            ts in 1e-3f64..3.0,
        ) {
            let from = channel_stats(&x);
            // Only channels with real spread can be re-scaled to an arbitrary std.
            prop_assume!(from.std.iter().all(|&s| s > 1e-3));
            let to = ChannelStats::uniform(x.channels(), tm, ts).unwrap();
            let y = affine_normalize(&x, &from, &to).unwrap();
            prop_assert!(channel_stats(&y).max_abs_diff(&to) < 1e-5);
        }

        #[test]
        fn normalize_identity_is_exact(x in tensor_strategy()) {
            let s = channel_stats(&x);
            prop_assert_eq!(affine_normalize(&x, &s, &s).unwrap(), x);
        }

        #[test]
        fn normalize_commutes_with_affine_input(
            x in tensor_strategy(),
            a in 0.1f64..3.0,
            b in -1.0f64..1.0,
        ) {
            // normalize(a x + b) with stats of (a x + b) equals normalize(x) with stats of x.
            let from = channel_stats(&x);
            prop_assume!(from.std.iter().all(|&s| s > 1e-3));
            let to = ChannelStats::uniform(x.channels(), 0.3, 0.2).unwrap();
            let ax = x.map(|v| a * v + b).unwrap();
            let lhs = affine_normalize(&ax, &channel_stats(&ax), &to).unwrap();
            let rhs = affine_normalize(&x, &from, &to).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-9);
            // Direct per-sample evaluation of the affine map.
            for c in 0..x.channels() {
                let scale = to.std[c] / from.std[c];
                for (v, o) in x.plane(c).iter().zip(rhs.plane(c)) {
                    prop_assert!(((v - from.mean[c]) * scale + to.mean[c] - o).abs() < 1e-12);
                }
            }
        }
    }
}
