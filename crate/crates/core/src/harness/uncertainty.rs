//! Seeded draws of kinetic uncertainty, measurement noise and the
//! methanogen knockdown. Every draw is a pure function of the base seed,
//! the run index and a stream tag, so runs can execute in any order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{KineticParams, OutputVector, N_OUTPUTS};

const STREAM_KINETICS: u64 = 1;
const STREAM_KNOCKDOWN: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Truncation of kinetic samples, relative to the nominal value.
pub const TRUNCATION: (f64, f64) = (0.05, 3.0);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for `(seed, index, stream)`.
pub fn derive_seed(seed: u64, index: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ index) ^ stream.rotate_left(32))
}

fn rng(seed: u64, index: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index, stream))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintyConfig {
    /// Relative standard deviation of the Haldane/Monod kinetic subset.
    pub kinetic_rel_std: f64,
    /// Relative noise standard deviation per output (`q_M`, ratio).
    pub noise_rel_std: [f64; N_OUTPUTS],
    pub n_runs: usize,
    pub seed: u64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self {
            kinetic_rel_std: 0.20,
            noise_rel_std: [0.05, 0.02],
            n_runs: 10,
            seed: 42,
        }
    }
}

impl UncertaintyConfig {
    pub fn none() -> Self {
        Self {
            kinetic_rel_std: 0.0,
            noise_rel_std: [0.0; N_OUTPUTS],
            n_runs: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnockdownConfig {
    pub enabled: bool,
    pub amplitude_mean: f64,
    /// Relative to `amplitude_mean`.
    pub amplitude_rel_std: f64,
    /// Full window length, ramps included, d.
    pub duration_mean: f64,
    pub duration_std_days: f64,
    /// Rise and fall time of the trapezoid, d.
    pub ramp_edges: f64,
}

impl Default for KnockdownConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            amplitude_mean: 0.60,
            amplitude_rel_std: 0.07,
            duration_mean: 7.0,
            duration_std_days: 1.0,
            ramp_edges: 1.0,
        }
    }
}

/// A sampled trapezoidal reduction of `mu_max2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnockdownWindow {
    pub center: f64,
    pub duration: f64,
    pub amplitude: f64,
    pub ramp: f64,
}

impl KnockdownWindow {
    pub fn start(&self) -> f64 {
        self.center - 0.5 * self.duration
    }

    pub fn end(&self) -> f64 {
        self.center + 0.5 * self.duration
    }

    /// Multiplicative factor on `mu_max2` at time `t`, in `[0, 1]`.
    pub fn factor(&self, t: f64) -> f64 {
        if self.duration <= 0.0 || self.amplitude <= 0.0 {
            return 1.0;
        }
        let (a, b) = (self.start(), self.end());
        if t <= a || t >= b {
            return 1.0;
        }
        let e = self.ramp.min(0.5 * self.duration);
        let depth = if e > 0.0 && t < a + e {
            (t - a) / e
        } else if e > 0.0 && t > b - e {
            (b - t) / e
        } else {
            1.0
        };
        1.0 - self.amplitude * depth
    }
}

/// Draw `(amplitude, duration)` for one run; the window is centered at
/// `center`.
pub fn sample_knockdown(cfg: &KnockdownConfig, center: f64, seed: u64, run_index: u64) -> KnockdownWindow {
    let mut r = rng(seed, run_index, STREAM_KNOCKDOWN);
    let za: f64 = r.sample(StandardNormal);
    let zd: f64 = r.sample(StandardNormal);
    let amplitude = (cfg.amplitude_mean * (1.0 + cfg.amplitude_rel_std * za)).clamp(0.0, 0.99);
    let duration = (cfg.duration_mean + cfg.duration_std_days * zd).max(0.0);
    KnockdownWindow {
        center,
        duration,
        amplitude,
        ramp: cfg.ramp_edges,
    }
}

/// Multiplicative knockdown factor for run `run_index` at time `t`.
pub fn knockdown_profile(cfg: &KnockdownConfig, center: f64, seed: u64, run_index: u64, t: f64) -> f64 {
    if !cfg.enabled {
        return 1.0;
    }
    sample_knockdown(cfg, center, seed, run_index).factor(t)
}

fn truncated_normal(r: &mut ChaCha8Rng, mean: f64, rel_std: f64) -> f64 {
    let d = Normal::new(mean, rel_std * mean.abs()).expect("finite std");
    let (lo, hi) = (TRUNCATION.0 * mean, TRUNCATION.1 * mean);
    loop {
        let v = d.sample(r);
        if v > lo && v < hi {
            return v;
        }
    }
}

/// Kinetic subset drawn from truncated Gaussians; other parameters are
/// returned unchanged.
pub fn sample_kinetics(base: &KineticParams, cfg: &UncertaintyConfig, run_index: u64) -> KineticParams {
    if cfg.kinetic_rel_std == 0.0 {
        return base.clone();
    }
    let mut r = rng(cfg.seed, run_index, STREAM_KINETICS);
    let theta = base.kinetic_subset().map(|v| truncated_normal(&mut r, v, cfg.kinetic_rel_std));
    base.with_kinetic_subset(theta)
}

/// Seed of the noise sequence of one run.
pub fn noise_seed(cfg: &UncertaintyConfig, run_index: u64) -> u64 {
    derive_seed(cfg.seed, run_index, STREAM_NOISE)
}

/// Relative Gaussian noise, clamped at zero; a pure function of
/// `(seed, t_index, channel)`.
pub fn apply_noise(y: OutputVector, rel_std: [f64; N_OUTPUTS], seed: u64, t_index: u64) -> OutputVector {
    if rel_std.iter().all(|s| *s == 0.0) {
        return y;
    }
    let mut r = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(t_index)));
    let mut a = y.as_array();
    for (v, s) in a.iter_mut().zip(rel_std) {
        let e: f64 = r.sample(StandardNormal);
        *v = (*v * (1.0 + s * e)).max(0.0);
    }
    OutputVector::from_array(a)
}

/// Everything random about one Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    pub run_index: u64,
    pub kinetics: [f64; 5],
    pub knockdown: Option<KnockdownWindow>,
    pub noise_seed: u64,
    pub noise_rel_std: [f64; N_OUTPUTS],
}

impl Realization {
    pub fn draw(
        base: &KineticParams,
        unc: &UncertaintyConfig,
        knockdown: Option<(&KnockdownConfig, f64)>,
        run_index: u64,
    ) -> Self {
        Self {
            run_index,
            kinetics: sample_kinetics(base, unc, run_index).kinetic_subset(),
            knockdown: knockdown
                .filter(|(k, _)| k.enabled)
                .map(|(k, c)| sample_knockdown(k, c, unc.seed, run_index)),
            noise_seed: noise_seed(unc, run_index),
            noise_rel_std: unc.noise_rel_std,
        }
    }

    /// Nominal realization: no parameter change, no noise, no knockdown.
    pub fn nominal(base: &KineticParams) -> Self {
        Self {
            run_index: 0,
            kinetics: base.kinetic_subset(),
            knockdown: None,
            noise_seed: 0,
            noise_rel_std: [0.0; N_OUTPUTS],
        }
    }

    /// SHA-256 over the exact bit patterns of every sampled quantity.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.run_index.to_le_bytes());
        for v in self.kinetics {
            h.update(v.to_bits().to_le_bytes());
        }
        match &self.knockdown {
            Some(k) => {
                h.update([1u8]);
                for v in [k.center, k.duration, k.amplitude, k.ramp] {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
            None => h.update([0u8]),
        }
        h.update(self.noise_seed.to_le_bytes());
        for v in self.noise_rel_std {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParameters;

    #[test]
    fn zero_std_returns_base() {
        let base = ModelParameters::default_set().kinetic_params();
        let mut cfg = UncertaintyConfig::default();
        cfg.kinetic_rel_std = 0.0;
        assert_eq!(sample_kinetics(&base, &cfg, 3), base);
        let y = OutputVector { qm: 20.0, ratio: 0.7 };
        assert_eq!(apply_noise(y, [0.0, 0.0], 9, 4), y);
    }

    #[test]
    fn draws_are_reproducible_and_distinct() {
        let base = ModelParameters::default_set().kinetic_params();
        let cfg = UncertaintyConfig::default();
        assert_eq!(sample_kinetics(&base, &cfg, 5), sample_kinetics(&base, &cfg, 5));
        assert_ne!(sample_kinetics(&base, &cfg, 5), sample_kinetics(&base, &cfg, 6));
        let k = KnockdownConfig::default();
        let a = Realization::draw(&base, &cfg, Some((&k, 21.0)), 2);
        let b = Realization::draw(&base, &cfg, Some((&k, 21.0)), 2);
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), Realization::draw(&base, &cfg, Some((&k, 21.0)), 3).hash());
    }

    #[test]
    fn trapezoid_shape() {
        let w = KnockdownWindow {
            center: 10.0,
            duration: 7.0,
            amplitude: 0.6,
            ramp: 1.0,
        };
        assert_eq!(w.factor(6.0), 1.0);
        assert!((w.factor(10.0) - 0.4).abs() < 1e-15);
        assert!((w.factor(7.0) - 0.7).abs() < 1e-12);
        assert!((w.factor(13.0) - 0.7).abs() < 1e-12);
        assert_eq!(w.factor(14.0), 1.0);
        let zero = KnockdownWindow { duration: 0.0, ..w };
        assert_eq!(zero.factor(10.0), 1.0);
    }
}
