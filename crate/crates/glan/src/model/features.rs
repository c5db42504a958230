//! Static user feature vectors: log scaling, z-normalization against
//! training-split statistics, and a deterministic per-user fallback for
//! users without recorded features.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::TAU;

use crate::data::UserRecord;
use crate::numerics::{Real, Tensor};

/// Compress heavy-tailed counts while keeping sign: sign(x)·ln(1+|x|).
pub fn log_scale(x: f64) -> f64 {
    x.signum() * (1.0 + x.abs()).ln()
}

/// Per-dimension mean and standard deviation of log-scaled training
/// features. Width is the longest training feature vector; shorter vectors
/// count as zero in the missing trailing dimensions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn fit<'a>(features: impl Iterator<Item = &'a [f64]> + Clone) -> FeatureStats {
        let dims = features.clone().map(|f| f.len()).max().unwrap_or(0);
        if dims == 0 {
            return FeatureStats::default();
        }
        let mut sum = vec![0.0; dims];
        let mut sum_sq = vec![0.0; dims];
        let mut n = 0usize;
        for row in features {
            n += 1;
            for i in 0..dims {
                let v = log_scale(row.get(i).copied().unwrap_or(0.0));
                sum[i] += v;
                sum_sq[i] += v * v;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| (sq / n as f64 - m * m).max(0.0).sqrt().max(1e-6))
            .collect();
        FeatureStats { mean, std }
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    fn normalize(&self, raw: &[f64], out: &mut [f64]) {
        for i in 0..out.len().min(self.dims()) {
            let v = log_scale(raw.get(i).copied().unwrap_or(0.0));
            out[i] = (v - self.mean[i]) / self.std[i];
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Standard-normal row derived only from the seed and the user id, so a
/// featureless user gets the same vector in every run and every graph.
fn fallback_row(user_id: &str, seed: u64, out: &mut [f64]) {
    let mut state = seed ^ fnv1a(user_id.as_bytes());
    let mut next = || {
        // splitmix64: quick, stateless-friendly uniform stream.
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut i = 0;
    while i < out.len() {
        let u1: f64 = (1.0 - next()).max(f64::MIN_POSITIVE);
        let u2: f64 = next();
        let r = (-2.0 * u1.ln()).sqrt();
        out[i] = r * (TAU * u2).cos();
        if i + 1 < out.len() {
            out[i + 1] = r * (TAU * u2).sin();
        }
        i += 2;
    }
}

/// Build the n_users × d_u static feature matrix for `user_ids`. Users with
/// recorded features are log-scaled and z-normalized against `stats`
/// (padded or truncated to `d_u`); users without features — or any user when
/// no training features exist — get the deterministic fallback row.
pub fn user_feature_matrix<T: Real>(
    user_ids: &[String],
    records: &HashMap<&str, &UserRecord>,
    stats: &FeatureStats,
    d_u: usize,
    seed: u64,
) -> Tensor<T> {
    let mut data = vec![0.0f64; user_ids.len() * d_u];
    for (row, id) in user_ids.iter().enumerate() {
        let out = &mut data[row * d_u..(row + 1) * d_u];
        let raw = records.get(id.as_str()).and_then(|r| r.features.as_deref());
        match raw {
            Some(features) if stats.dims() > 0 => stats.normalize(features, out),
            _ => fallback_row(id, seed, out),
        }
    }
    Tensor::from_vec(
        vec![user_ids.len(), d_u],
        data.into_iter().map(T::from_f64).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_scale_is_odd_and_compresses() {
        assert_eq!(log_scale(0.0), 0.0);
        assert_eq!(log_scale(-5.0), -log_scale(5.0));
        assert!((log_scale(1.0) - 2.0f64.ln()).abs() < 1e-15);
        assert!(log_scale(1e6) < 15.0);
    }

    #[test]
    fn fit_matches_hand_statistics() {
        let rows: Vec<Vec<f64>> = vec![vec![0.0, 3.0], vec![0.0]];
        let stats = FeatureStats::fit(rows.iter().map(|r| r.as_slice()));
        assert_eq!(stats.dims(), 2);
        assert_eq!(stats.mean[0], 0.0);
        // Second dim: values ln(4) and 0 → mean ln(4)/2, std ln(4)/2.
        let half = 4.0f64.ln() / 2.0;
        assert!((stats.mean[1] - half).abs() < 1e-12);
        assert!((stats.std[1] - half).abs() < 1e-12);
        // Constant dimension gets the floor, not zero.
        assert_eq!(stats.std[0], 1e-6);
    }

    fn record(id: &str, features: Option<Vec<f64>>) -> UserRecord {
        UserRecord {
            id: id.to_string(),
            features,
        }
    }

    #[test]
    fn normalized_features_pad_and_truncate() {
        let train: Vec<Vec<f64>> = vec![vec![1.0, 10.0], vec![3.0, 0.0]];
        let stats = FeatureStats::fit(train.iter().map(|r| r.as_slice()));
        let rec = record("u", Some(vec![1.0, 10.0, 99.0]));
        let map: HashMap<&str, &UserRecord> = [("u", &rec)].into();
        let ids = vec!["u".to_string()];

        let wide: Tensor<f64> = user_feature_matrix(&ids, &map, &stats, 4, 7);
        // Third raw dim is beyond the stats width, fourth is padding.
        assert_eq!(wide.get2(0, 2), 0.0);
        assert_eq!(wide.get2(0, 3), 0.0);
        let narrow: Tensor<f64> = user_feature_matrix(&ids, &map, &stats, 1, 7);
        assert_eq!(narrow.get2(0, 0), wide.get2(0, 0));

        // z-scores of the training rows under their own stats sum to 0.
        let ra = record("a", Some(train[0].clone()));
        let rb = record("b", Some(train[1].clone()));
        let map: HashMap<&str, &UserRecord> = [("a", &ra), ("b", &rb)].into();
        let ids = vec!["a".to_string(), "b".to_string()];
        let z: Tensor<f64> = user_feature_matrix(&ids, &map, &stats, 2, 7);
        for col in 0..2 {
            assert!((z.get2(0, col) + z.get2(1, col)).abs() < 1e-9);
        }
    }

    #[test]
    fn fallback_rows_are_deterministic_and_user_specific() {
        let map = HashMap::new();
        let ids = vec!["alice".to_string(), "bob".to_string()];
        let a: Tensor<f64> = user_feature_matrix(&ids, &map, &FeatureStats::default(), 5, 42);
        let b: Tensor<f64> = user_feature_matrix(&ids, &map, &FeatureStats::default(), 5, 42);
        assert_eq!(a, b);
        assert_ne!(a.row(0), a.row(1));
        let other_seed: Tensor<f64> = user_feature_matrix(&ids, &map, &FeatureStats::default(), 5, 43);
        assert_ne!(a.row(0), other_seed.row(0));
        assert!(a.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn fallback_row_values_look_standard_normal() {
        let ids: Vec<String> = (0..200).map(|i| format!("user{i}")).collect();
        let m: Tensor<f64> = user_feature_matrix(&ids, &HashMap::new(), &FeatureStats::default(), 8, 1);
        let n = m.data().len() as f64;
        let mean: f64 = m.data().iter().sum::<f64>() / n;
        let var: f64 = m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.15, "var {var}");
    }
}
