//! Pipeline configuration (TOML) and deterministic seeding.

use std::fs;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio_io::StftConfig;
use crate::error::{Error, Result};
use crate::prosody::F0Options;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Every random component draws from its own stream, keyed by a stable tag,
/// so adding or reordering components never shifts anyone else's draws.
pub fn seeded_rng(master_seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(master_seed ^ fnv1a64(tag.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioConfig {
    pub sample_rate: u32,
    pub frame_length: usize,
    pub hop_length: usize,
    pub fft_size: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub mel_floor: f64,
}

impl Default for AudioConfig {
    fn default() -> Self {
        AudioConfig {
            sample_rate: 16000,
            frame_length: 1024,
            hop_length: 256,
            fft_size: 1024,
            n_mels: 80,
            fmin: 0.0,
            fmax: 8000.0,
            mel_floor: 1e-10,
        }
    }
}

impl AudioConfig {
    pub fn stft(&self) -> Result<StftConfig> {
        StftConfig::new(self.frame_length, self.hop_length, self.fft_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct F0Config {
    pub min_hz: f64,
    pub max_hz: f64,
    pub frame_seconds: f64,
    pub hop_seconds: f64,
    pub voicing_threshold: f64,
    pub silence_rms: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        let o = F0Options::default();
        F0Config {
            min_hz: o.min_hz,
            max_hz: o.max_hz,
            frame_seconds: o.frame_seconds,
            hop_seconds: o.hop_seconds,
            voicing_threshold: o.voicing_threshold,
            silence_rms: o.silence_rms,
        }
    }
}

impl F0Config {
    pub fn options(&self) -> F0Options {
        F0Options {
            min_hz: self.min_hz,
            max_hz: self.max_hz,
            frame_seconds: self.frame_seconds,
            hop_seconds: self.hop_seconds,
            voicing_threshold: self.voicing_threshold,
            silence_rms: self.silence_rms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Width of the fused conditioning stream.
    pub latent_dim: usize,
    /// Default grid for fusion when no explicit frame count or rate is given.
    pub target_frame_rate: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { latent_dim: 384, target_frame_rate: 100.0, seed: 17 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantConfig {
    /// F0 quantization range (log-spaced bins).
    pub f0_lo_hz: f64,
    pub f0_hi_hz: f64,
    /// Energy bins run linearly from zero to this corpus percentile.
    pub energy_percentile: f64,
}

impl Default for QuantConfig {
    fn default() -> Self {
        QuantConfig {
            f0_lo_hz: 50.0,
            f0_hi_hz: 1100.0,
            energy_percentile: 99.0,
        }
    }
}

/// Where fitted state lives; commands take `--weights-dir` as an override.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub weights_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeConfig {
    /// Ridge strength relative to mean(diag(Gram)); the absolute lambda is
    /// lambda_rel * trace(Gram) / dim.
    pub lambda_rel: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig { lambda_rel: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub audio: AudioConfig,
    pub f0: F0Config,
    pub model: ModelConfig,
    pub quant: QuantConfig,
    pub ridge: RidgeConfig,
    pub paths: PathsConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn dump(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.audio;
        if a.sample_rate == 0 {
            return Err(Error::invalid("audio.sample_rate must be positive"));
        }
        a.stft()?;
        if a.n_mels < 13 {
            return Err(Error::invalid("audio.n_mels must be at least 13"));
        }
        let nyquist = a.sample_rate as f64 / 2.0;
        if !(a.fmin >= 0.0 && a.fmin < a.fmax && a.fmax <= nyquist) {
            return Err(Error::invalid("audio: need 0 <= fmin < fmax <= sample_rate/2"));
        }
        if !(a.mel_floor.is_finite() && a.mel_floor > 0.0) {
            return Err(Error::invalid("audio.mel_floor must be positive"));
        }
        let f = &self.f0;
        if !(f.min_hz > 0.0 && f.min_hz < f.max_hz && f.max_hz <= a.sample_rate as f64 / 4.0) {
            return Err(Error::invalid(
                "f0: need 0 < min_hz < max_hz <= sample_rate/4",
            ));
        }
        if !(f.frame_seconds > 0.0 && f.hop_seconds > 0.0) {
            return Err(Error::invalid("f0: frame_seconds and hop_seconds must be positive"));
        }
        if !(0.0..=1.0).contains(&f.voicing_threshold) {
            return Err(Error::invalid("f0.voicing_threshold must be in [0, 1]"));
        }
        if !(f.silence_rms >= 0.0 && f.silence_rms.is_finite()) {
            return Err(Error::invalid("f0.silence_rms must be non-negative"));
        }
        if self.model.latent_dim == 0 {
            return Err(Error::invalid("model.latent_dim must be positive"));
        }
        if !(self.model.target_frame_rate.is_finite() && self.model.target_frame_rate > 0.0) {
            return Err(Error::invalid("model.target_frame_rate must be positive"));
        }
        let q = &self.quant;
        if !(q.f0_lo_hz > 0.0 && q.f0_lo_hz < q.f0_hi_hz && q.f0_hi_hz.is_finite()) {
            return Err(Error::invalid("quant: need 0 < f0_lo_hz < f0_hi_hz"));
        }
        if !(50.0..=100.0).contains(&q.energy_percentile) {
            return Err(Error::invalid("quant.energy_percentile must be in [50, 100]"));
        }
        if !(self.ridge.lambda_rel.is_finite() && self.ridge.lambda_rel >= 0.0) {
            return Err(Error::invalid("ridge.lambda_rel must be non-negative"));
        }
        Ok(())
    }
}
