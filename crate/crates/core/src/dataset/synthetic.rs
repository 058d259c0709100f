//! Synthetic received-signal-level series.
//!
//! The three presets are rough stand-ins for the weather classes. All share
//! the same fast oscillation; they differ only in short recurring episodes
//! where the oscillation pauses or slows down. A window that misses every
//! episode looks the same in all three classes, so short windows are
//! ambiguous and windows spanning an episode period are not. They make no
//! claim about real measurements.

use std::f64::consts::TAU;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub class_name: String,
    /// Series id; defaults to the class name.
    #[serde(default)]
    pub id: Option<String>,
    pub length: usize,
    /// dBm
    pub base_level: f64,
    #[serde(default)]
    pub trend: f64,
    /// (amplitude, period in timesteps)
    #[serde(default)]
    pub sinusoids: Vec<(f64, f64)>,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub carrier: Option<Carrier>,
    #[serde(default)]
    pub rng_seed: u64,
}

/// Oscillation whose phase normally advances `2π / period` per step. Every
/// `episode_every` steps, for `episode_length` steps, it advances at
/// `episode_speed` times that rate instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Carrier {
    pub amplitude: f64,
    pub period: f64,
    #[serde(default)]
    pub episode_every: usize,
    #[serde(default)]
    pub episode_length: usize,
    #[serde(default = "unit_speed")]
    pub episode_speed: f64,
}

fn unit_speed() -> f64 {
    1.0
}

impl Carrier {
    fn in_episode(&self, t: usize) -> bool {
        self.episode_every > 0 && (t + self.episode_every / 2) % self.episode_every < self.episode_length
    }

    /// Carrier values for `0..length`.
    pub fn samples(&self, length: usize) -> Vec<f64> {
        let step = TAU / self.period;
        let mut phase: f64 = 0.0;
        (0..length)
            .map(|t| {
                let v = self.amplitude * phase.sin();
                phase += if self.in_episode(t) { step * self.episode_speed } else { step };
                v
            })
            .collect()
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidConfig(format!("`{}`: length must be positive", self.class_name)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "`{}`: noise_std must be a finite non-negative number",
                self.class_name
            )));
        }
        if let Some(c) = &self.carrier {
            if !(c.period.is_finite() && c.period != 0.0 && c.amplitude.is_finite() && c.episode_speed.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "`{}`: carrier amplitude, period and speed must be finite with a non-zero period",
                    self.class_name
                )));
            }
            if c.episode_length > c.episode_every {
                return Err(Error::InvalidConfig(format!(
                    "`{}`: carrier episodes longer than their spacing",
                    self.class_name
                )));
            }
        }
        if self.sinusoids.iter().any(|&(_, period)| period == 0.0 || !period.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "`{}`: sinusoid periods must be finite and non-zero",
                self.class_name
            )));
        }
        Ok(())
    }
}

/// `base + trend·t + Σ amp·sin(2πt/period) + carrier(t) + N(0, noise_std)`, seeded.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.rng_seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let carrier = spec
        .carrier
        .map(|c| c.samples(spec.length))
        .unwrap_or_else(|| vec![0.0; spec.length]);
    let samples = (0..spec.length)
        .map(|t| {
            let t_f = t as f64;
            let periodic: f64 = spec
                .sinusoids
                .iter()
                .map(|&(amp, period)| amp * (TAU * t_f / period).sin())
                .sum();
            let eps = if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            spec.base_level + spec.trend * t_f + periodic + carrier[t] + eps
        })
        .collect();
    TimeSeries::new(
        spec.id.clone().unwrap_or_else(|| spec.class_name.clone()),
        spec.class_name.clone(),
        samples,
    )
}

/// The three default class recipes, with lengths matching the original
/// recordings (962, 137 and 122 timesteps).
pub fn preset_specs(seed: u64) -> Vec<SyntheticSpec> {
    let preset = |i: u64, class_name: &str, length, base_level, episode_length, episode_speed| SyntheticSpec {
        class_name: class_name.into(),
        id: None,
        length,
        base_level,
        trend: 0.0,
        sinusoids: Vec::new(),
        noise_std: 0.002,
        carrier: Some(Carrier {
            amplitude: 1.0,
            period: 8.0,
            episode_every: 32,
            episode_length,
            episode_speed,
        }),
        rng_seed: rng::derive_seed(seed, i),
    };
    vec![
        preset(0, "changeable_weather", 962, -78.0, 0, 1.0),
        preset(1, "weak_rain", 137, -86.0, 8, 0.0),
        preset(2, "moderate_rain", 122, -94.0, 8, 0.5),
    ]
}

pub fn default_corpus(seed: u64) -> Result<Vec<TimeSeries>> {
    preset_specs(seed).iter().map(generate_synthetic).collect()
}
