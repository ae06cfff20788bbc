//! Control-noise generation.
//!
//! Noise for sample `m` of draw `k` comes from its own ChaCha8 stream keyed by
//! `(seed, k)` with stream id `m`, so a batch is bit-identical no matter how
//! sample generation is split across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ControlTrajectory, ControlVector, OutputVector};

/// How a sample's control sequence relates to the sampling mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// The mean itself with identically zero noise.
    Mean,
    /// Noise about the zero control sequence: `v = eps`.
    ZeroMean,
    /// Noise about the mean: `v = u + eps`.
    AboutMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianSamplerConfig {
    /// Per-channel standard deviation.
    pub std: Vec<f64>,
    /// Optional per-timestep standard deviations (`horizon` rows of `n_u`);
    /// overrides `std` when present.
    pub time_varying_std: Option<Vec<Vec<f64>>>,
    pub zero_mean_fraction: f64,
    pub include_mean_sample: bool,
    pub importance_sampling: bool,
    pub seed: u64,
}

impl Default for GaussianSamplerConfig {
    fn default() -> Self {
        Self {
            std: vec![0.2, 0.2],
            time_varying_std: None,
            zero_mean_fraction: 0.0,
            include_mean_sample: false,
            importance_sampling: true,
            seed: 0,
        }
    }
}

impl GaussianSamplerConfig {
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.std.is_empty() {
            out.push(("std".into(), "at least one channel is required".into()));
        }
        for (i, s) in self.std.iter().enumerate() {
            if !(*s > 0.0 && s.is_finite()) {
                out.push((format!("std[{i}]"), format!("must be positive, got {s}")));
            }
        }
        if let Some(rows) = &self.time_varying_std {
            for (t, row) in rows.iter().enumerate() {
                if row.len() != self.std.len() {
                    out.push((
                        format!("time_varying_std[{t}]"),
                        format!("expected {} channels, got {}", self.std.len(), row.len()),
                    ));
                }
                if let Some(c) = row.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
                    out.push((format!("time_varying_std[{t}][{c}]"), "must be positive".into()));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.zero_mean_fraction) {
            out.push((
                "zero_mean_fraction".into(),
                format!("must lie in [0, 1], got {}", self.zero_mean_fraction),
            ));
        }
        out
    }
}

/// `ceil(fraction * n)` without float noise pushing exact products up a step.
pub(crate) fn fraction_count(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    let c = (raw - 1e-9 * raw.max(1.0)).ceil().max(0.0) as usize;
    c.min(n)
}

/// `M × T × n_u` noise tensor plus per-sample bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBatch {
    num_samples: usize,
    horizon: usize,
    n_u: usize,
    noise: Vec<f32>,
    kinds: Vec<SampleKind>,
    importance: Vec<bool>,
    inv_var: Vec<f32>,
    mean: ControlTrajectory,
}

impl NoiseBatch {
    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn dt(&self) -> f32 {
        self.mean.dt()
    }

    /// The mean this batch was drawn about.
    pub fn mean(&self) -> &ControlTrajectory {
        &self.mean
    }

    pub fn kind(&self, m: usize) -> SampleKind {
        self.kinds[m]
    }

    pub fn kinds(&self) -> &[SampleKind] {
        &self.kinds
    }

    /// Whether the importance-sampling term applies to sample `m`.
    pub fn importance_enabled(&self, m: usize) -> bool {
        self.importance[m]
    }

    pub fn set_importance_enabled(&mut self, m: usize, enabled: bool) {
        self.importance[m] = enabled;
    }

    /// Raw noise `eps^m_t`.
    pub fn noise(&self, m: usize, t: usize) -> &[f32] {
        let base = (m * self.horizon + t) * self.n_u;
        &self.noise[base..base + self.n_u]
    }

    pub fn sample_noise(&self, m: usize) -> &[f32] {
        let len = self.horizon * self.n_u;
        &self.noise[m * len..(m + 1) * len]
    }

    /// Writes `v^m_t` for a system whose mean is `mean` into `out`.
    #[inline]
    pub fn sample_into(&self, mean: &[f32], m: usize, t: usize, out: &mut [f32]) {
        let eps = self.noise(m, t);
        let u = &mean[t * self.n_u..(t + 1) * self.n_u];
        match self.kinds[m] {
            SampleKind::ZeroMean => {
                for (o, ei) in out.iter_mut().zip(eps) {
                    *o = *ei;
                }
            }
            SampleKind::Mean | SampleKind::AboutMean => {
                for ((o, ui), ei) in out.iter_mut().zip(u).zip(eps) {
                    *o = ui + ei;
                }
            }
        }
    }

    /// `v^m_t` about the batch's own mean. The output argument exists for
    /// output-conditioned distributions; the Gaussian sampler ignores it.
    pub fn read_control_sample(&self, m: usize, t: usize, _y: Option<&OutputVector>) -> Result<ControlVector> {
        if m >= self.num_samples {
            return Err(Error::OutOfRange { what: "sample", index: m, limit: self.num_samples });
        }
        if t >= self.horizon {
            return Err(Error::OutOfRange { what: "timestep", index: t, limit: self.horizon });
        }
        let mut out = vec![0.0; self.n_u];
        self.sample_into(self.mean.as_slice(), m, t, &mut out);
        ControlVector::new(out)
    }

    /// Additive per-sample likelihood-ratio cost `lambda * sum_t u_t^T Sigma_t^-1 eps_t`
    /// for a system with mean `mean`. Zero for samples with the term disabled.
    pub fn importance_costs(&self, mean: &[f32], lambda: f32, enabled: bool) -> Vec<f64> {
        (0..self.num_samples)
            .map(|m| {
                if !enabled || !self.importance[m] {
                    return 0.0;
                }
                let eps = self.sample_noise(m);
                let sum: f64 = mean
                    .iter()
                    .zip(eps)
                    .zip(&self.inv_var)
                    .map(|((u, e), iv)| (u * iv * e) as f64)
                    .sum();
                lambda as f64 * sum
            })
            .collect()
    }
}

/// An extension point for control-sampling distributions.
pub trait SamplingDistribution: Send + Sync {
    /// Draws `num_samples` control sequences about `mean`. `draw` selects an
    /// independent, reproducible noise draw (one per optimizer iteration).
    fn generate_samples(&self, mean: &ControlTrajectory, num_samples: usize, draw: u64) -> Result<NoiseBatch>;

    /// Whether the importance-sampling cost term is applied.
    fn importance_sampling(&self) -> bool;
}

#[derive(Debug, Clone)]
pub struct GaussianSampler {
    config: GaussianSamplerConfig,
}

impl GaussianSampler {
    pub fn new(config: GaussianSamplerConfig) -> Result<Self> {
        if let Some((field, reason)) = config.violations().into_iter().next() {
            return Err(Error::InvalidArgument {
                name: "sampler",
                reason: format!("{field}: {reason}"),
            });
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &GaussianSamplerConfig {
        &self.config
    }

    fn std_at(&self, t: usize, c: usize) -> f32 {
        match &self.config.time_varying_std {
            Some(rows) => rows[t.min(rows.len() - 1)][c] as f32,
            None => self.config.std[c] as f32,
        }
    }

    fn stream(&self, draw: u64, m: usize) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.config.seed.to_le_bytes());
        key[8..16].copy_from_slice(&draw.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(m as u64);
        rng
    }

    /// `(first zero-mean index, zero-mean count)` for a batch of `num_samples`.
    pub fn zero_mean_range(&self, num_samples: usize) -> (usize, usize) {
        let start = usize::from(self.config.include_mean_sample).min(num_samples);
        let count = fraction_count(self.config.zero_mean_fraction, num_samples).min(num_samples - start);
        (start, count)
    }
}

impl SamplingDistribution for GaussianSampler {
    fn generate_samples(&self, mean: &ControlTrajectory, num_samples: usize, draw: u64) -> Result<NoiseBatch> {
        if num_samples == 0 {
            return Err(Error::invalid("num_samples", "must be at least 1"));
        }
        let n_u = mean.n_u();
        if n_u != self.config.std.len() {
            return Err(Error::DimensionMismatch {
                what: "sampler std",
                expected: n_u,
                actual: self.config.std.len(),
            });
        }
        let horizon = mean.horizon();
        let sigma: Vec<f32> = (0..horizon)
            .flat_map(|t| (0..n_u).map(move |c| (t, c)))
            .map(|(t, c)| self.std_at(t, c))
            .collect();
        let inv_var = sigma.iter().map(|s| 1.0 / (s * s)).collect();

        let (zm_start, zm_count) = self.zero_mean_range(num_samples);
        let kinds: Vec<SampleKind> = (0..num_samples)
            .map(|m| {
                if self.config.include_mean_sample && m == 0 {
                    SampleKind::Mean
                } else if m >= zm_start && m < zm_start + zm_count {
                    SampleKind::ZeroMean
                } else {
                    SampleKind::AboutMean
                }
            })
            .collect();

        let len = horizon * n_u;
        let mut noise = vec![0.0f32; num_samples * len];
        noise
            .par_chunks_mut(len)
            .zip(kinds.par_iter())
            .enumerate()
            .for_each(|(m, (chunk, kind))| {
                if *kind == SampleKind::Mean {
                    return;
                }
                let mut rng = self.stream(draw, m);
                for (e, s) in chunk.iter_mut().zip(&sigma) {
                    let z: f32 = StandardNormal.sample(&mut rng);
                    *e = s * z;
                }
            });

        let importance = kinds.iter().map(|k| *k == SampleKind::AboutMean).collect();
        Ok(NoiseBatch {
            num_samples,
            horizon,
            n_u,
            noise,
            kinds,
            importance,
            inv_var,
            mean: mean.clone(),
        })
    }

    fn importance_sampling(&self) -> bool {
        self.config.importance_sampling
    }
}

#[cfg(test)]
pub(crate) fn batch_from_noise(mean: ControlTrajectory, num_samples: usize, noise: Vec<f32>, sigma: f32) -> NoiseBatch {
    let horizon = mean.horizon();
    let n_u = mean.n_u();
    assert_eq!(noise.len(), num_samples * horizon * n_u);
    NoiseBatch {
        num_samples,
        horizon,
        n_u,
        noise,
        kinds: vec![SampleKind::AboutMean; num_samples],
        importance: vec![true; num_samples],
        inv_var: vec![1.0 / (sigma * sigma); horizon * n_u],
        mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampler(cfg: GaussianSamplerConfig) -> GaussianSampler {
        GaussianSampler::new(cfg).unwrap()
    }

    fn mean(horizon: usize, n_u: usize, value: f32) -> ControlTrajectory {
        ControlTrajectory::new(0.02, n_u, vec![value; horizon * n_u]).unwrap()
    }

    #[test]
    fn tiny_std_collapses_to_mean() {
        let s = sampler(GaussianSamplerConfig { std: vec![1e-12, 1e-12], ..Default::default() });
        let u = mean(10, 2, 0.7);
        let b = s.generate_samples(&u, 50, 0).unwrap();
        for m in 0..50 {
            for t in 0..10 {
                let v = b.read_control_sample(m, t, None).unwrap();
                assert!(v.as_slice().iter().all(|x| (x - 0.7).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn mean_sample_has_zero_noise() {
        let s = sampler(GaussianSamplerConfig { include_mean_sample: true, ..Default::default() });
        let u = ControlTrajectory::new(0.02, 2, (0..20).map(|i| i as f32 * 0.1).collect()).unwrap();
        let b = s.generate_samples(&u, 8, 3).unwrap();
        assert!(b.sample_noise(0).iter().all(|&e| e == 0.0));
        assert_eq!(b.kind(0), SampleKind::Mean);
        for t in 0..10 {
            assert_eq!(b.read_control_sample(0, t, None).unwrap().as_slice(), u.at(t));
        }
    }

    #[test]
    fn sample_statistics_match_distribution() {
        let s = sampler(GaussianSamplerConfig { std: vec![0.2], seed: 11, ..Default::default() });
        let u = mean(4, 1, 0.5);
        let m = 10_000;
        let b = s.generate_samples(&u, m, 0).unwrap();
        for t in 0..4 {
            let vals: Vec<f64> = (0..m).map(|i| b.read_control_sample(i, t, None).unwrap()[0] as f64).collect();
            let mu = vals.iter().sum::<f64>() / m as f64;
            let sd = (vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
            assert!((mu - 0.5).abs() < 0.01, "mean {mu}");
            assert!((0.19..=0.21).contains(&sd), "std {sd}");
        }
    }

    #[test]
    fn zero_mean_quota_and_mean_exclusion() {
        let cfg = GaussianSamplerConfig { zero_mean_fraction: 0.3, include_mean_sample: true, ..Default::default() };
        let s = sampler(cfg);
        let b = s.generate_samples(&mean(5, 2, 1.0), 10, 0).unwrap();
        let zm = b.kinds().iter().filter(|k| **k == SampleKind::ZeroMean).count();
        assert_eq!(zm, 3);
        assert_eq!(b.kind(0), SampleKind::Mean);
        assert_eq!(&b.kinds()[1..4], &[SampleKind::ZeroMean; 3]);
        // zero-mean samples are pure noise
        let v = b.read_control_sample(1, 2, None).unwrap();
        assert_eq!(v.as_slice(), b.noise(1, 2));
    }

    #[test]
    fn fraction_count_is_exact_ceiling() {
        assert_eq!(fraction_count(0.3, 10), 3);
        assert_eq!(fraction_count(0.1, 10), 1);
        assert_eq!(fraction_count(0.25, 10), 3);
        assert_eq!(fraction_count(0.0, 10), 0);
        assert_eq!(fraction_count(1.0, 7), 7);
        assert_eq!(fraction_count(1e-6, 7), 1);
    }

    #[test]
    fn read_is_pure_and_bounds_checked() {
        let s = sampler(GaussianSamplerConfig::default());
        let b = s.generate_samples(&mean(3, 2, 0.0), 4, 9).unwrap();
        assert_eq!(b.read_control_sample(2, 1, None).unwrap(), b.read_control_sample(2, 1, None).unwrap());
        assert!(b.read_control_sample(4, 0, None).is_err());
        assert!(b.read_control_sample(0, 3, None).is_err());
    }

    #[test]
    fn deterministic_and_draw_dependent() {
        let s = sampler(GaussianSamplerConfig { seed: 42, ..Default::default() });
        let u = mean(20, 2, 0.1);
        let a = s.generate_samples(&u, 64, 1).unwrap();
        let b = s.generate_samples(&u, 64, 1).unwrap();
        assert_eq!(a, b);
        let c = s.generate_samples(&u, 64, 2).unwrap();
        assert_ne!(a.sample_noise(5), c.sample_noise(5));
        // noise of sample m does not depend on batch size
        let d = s.generate_samples(&u, 8, 1).unwrap();
        assert_eq!(a.sample_noise(7), d.sample_noise(7));
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let s = sampler(GaussianSamplerConfig { seed: 5, ..Default::default() });
        let u = mean(30, 2, 0.0);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| s.generate_samples(&u, 257, 0).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn time_varying_std_is_used() {
        let s = sampler(GaussianSamplerConfig {
            std: vec![1.0],
            time_varying_std: Some(vec![vec![1e-6], vec![1.0]]),
            ..Default::default()
        });
        let b = s.generate_samples(&mean(2, 1, 0.0), 200, 0).unwrap();
        let max0 = (0..200).map(|m| b.noise(m, 0)[0].abs()).fold(0.0, f32::max);
        let max1 = (0..200).map(|m| b.noise(m, 1)[0].abs()).fold(0.0, f32::max);
        assert!(max0 < 1e-4 && max1 > 0.5);
    }

    #[test]
    fn importance_term() {
        let u = ControlTrajectory::new(0.1, 1, vec![1.0]).unwrap();
        let b = batch_from_noise(u.clone(), 2, vec![1.0, 0.0], 1.0);
        let adj = b.importance_costs(u.as_slice(), 1.0, true);
        assert_eq!(adj, vec![1.0, 0.0]);
        assert_eq!(b.importance_costs(u.as_slice(), 1.0, false), vec![0.0, 0.0]);
        let mut b2 = b.clone();
        b2.set_importance_enabled(0, false);
        assert_eq!(b2.importance_costs(u.as_slice(), 1.0, true), vec![0.0, 0.0]);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(GaussianSampler::new(GaussianSamplerConfig { std: vec![0.0, 1.0], ..Default::default() }).is_err());
        assert!(GaussianSampler::new(GaussianSamplerConfig { zero_mean_fraction: 1.5, ..Default::default() }).is_err());
    }
}
