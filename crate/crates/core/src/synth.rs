//! Synthetic audio and feature generators for fixtures, tests, and the
//! benchmark workload. Everything is seeded; nothing here touches disk.

use ndarray::Array2;
use rand::Rng;

use crate::audio_io::AudioBuffer;
use crate::error::Result;
use crate::feature_store::FeatureSequence;

pub fn sine(sample_rate: u32, hz: f64, seconds: f64, amplitude: f64) -> Result<AudioBuffer> {
    let n = (sample_rate as f64 * seconds).round() as usize;
    let samples = (0..n)
        .map(|i| amplitude * (2.0 * std::f64::consts::PI * hz * i as f64 / sample_rate as f64).sin())
        .collect();
    AudioBuffer::new(samples, sample_rate)
}

pub fn silence(sample_rate: u32, seconds: f64) -> Result<AudioBuffer> {
    let n = (sample_rate as f64 * seconds).round() as usize;
    AudioBuffer::new(vec![0.0; n], sample_rate)
}

/// A sine with slow sinusoidal vibrato around `hz`, closer to a sung note
/// than a bare oscillator.
pub fn vibrato_sine(
    sample_rate: u32,
    hz: f64,
    seconds: f64,
    amplitude: f64,
    vibrato_hz: f64,
    vibrato_depth: f64,
) -> Result<AudioBuffer> {
    let n = (sample_rate as f64 * seconds).round() as usize;
    let sr = sample_rate as f64;
    let mut phase = 0.0;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let f = hz * (1.0 + vibrato_depth * (2.0 * std::f64::consts::PI * vibrato_hz * t).sin());
            phase += 2.0 * std::f64::consts::PI * f / sr;
            amplitude * phase.sin()
        })
        .collect();
    AudioBuffer::new(samples, sample_rate)
}

/// A sung-phrase stand-in: pitch glides exponentially from `hz0` to `hz1`
/// (vibrato on top) while a slow tremolo modulates the amplitude. Gives the
/// pitch tracker, quantizers, and energy path something to chew on.
#[allow(clippy::too_many_arguments)]
pub fn glide_sine(
    sample_rate: u32,
    hz0: f64,
    hz1: f64,
    seconds: f64,
    amplitude: f64,
    vibrato_hz: f64,
    vibrato_depth: f64,
    tremolo_hz: f64,
    tremolo_depth: f64,
) -> Result<AudioBuffer> {
    let n = (sample_rate as f64 * seconds).round() as usize;
    let sr = sample_rate as f64;
    let mut phase = 0.0;
    let two_pi = 2.0 * std::f64::consts::PI;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let x = if seconds > 0.0 { t / seconds } else { 0.0 };
            let f = hz0
                * (hz1 / hz0).powf(x)
                * (1.0 + vibrato_depth * (two_pi * vibrato_hz * t).sin());
            phase += two_pi * f / sr;
            let env = (1.0 + tremolo_depth * (two_pi * tremolo_hz * t).sin())
                / (1.0 + tremolo_depth);
            amplitude * env * phase.sin()
        })
        .collect();
    AudioBuffer::new(samples, sample_rate)
}

/// Uniform noise in [-1, 1), one value per cell.
pub fn random_features(
    n_frames: usize,
    dim: usize,
    frame_rate: f64,
    tag: &str,
    rng: &mut impl Rng,
) -> Result<FeatureSequence> {
    let mut data = Array2::zeros((n_frames, dim));
    for v in data.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    FeatureSequence::new(data, frame_rate, tag)
}

/// Slowly varying features: each dimension is a small sum of low-frequency
/// sinusoids with random phase and amplitude. Useful where resampling should
/// be nearly lossless, mirroring real encoder outputs.
pub fn smooth_features(
    n_frames: usize,
    dim: usize,
    frame_rate: f64,
    tag: &str,
    rng: &mut impl Rng,
) -> Result<FeatureSequence> {
    let mut data = Array2::zeros((n_frames, dim));
    for j in 0..dim {
        let harmonics: Vec<(f64, f64, f64)> = (1..=3)
            .map(|h| {
                (
                    h as f64,
                    rng.random_range(0.2..1.0),
                    rng.random_range(0.0..2.0 * std::f64::consts::PI),
                )
            })
            .collect();
        for t in 0..n_frames {
            let x = t as f64 / n_frames as f64;
            data[[t, j]] = harmonics
                .iter()
                .map(|(h, a, p)| a * (2.0 * std::f64::consts::PI * h * x + p).sin())
                .sum();
        }
    }
    FeatureSequence::new(data, frame_rate, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::seeded_rng;

    #[test]
    fn sine_has_expected_length_and_range() {
        let a = sine(16000, 440.0, 1.5, 0.5).unwrap();
        assert_eq!(a.len(), 24000);
        assert!(a.samples().iter().all(|s| s.abs() <= 0.5 + 1e-12));
    }

    #[test]
    fn vibrato_wobbles_the_pitch() {
        use crate::prosody::{extract_f0, F0Options};
        let a = vibrato_sine(16000, 220.0, 1.0, 0.5, 5.0, 0.02).unwrap();
        let f0 = extract_f0(&a, &F0Options::default()).unwrap();
        let voiced: Vec<f64> = f0.voiced_values().collect();
        assert!(!voiced.is_empty());
        let min = voiced.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = voiced.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(max > min + 1.0, "vibrato span {min}..{max}");
        assert!(min > 210.0 && max < 230.0);
    }

    #[test]
    fn glide_moves_the_pitch_and_the_level() {
        use crate::prosody::{extract_f0, F0Options};
        let a = glide_sine(16000, 180.0, 260.0, 1.2, 0.5, 5.0, 0.01, 0.8, 0.35).unwrap();
        assert!(a.samples().iter().all(|s| s.abs() <= 0.5 + 1e-12));
        let f0 = extract_f0(&a, &F0Options::default()).unwrap();
        let voiced: Vec<f64> = f0.voiced_values().collect();
        let early = voiced[voiced.len() / 10];
        let late = voiced[voiced.len() - 1 - voiced.len() / 10];
        assert!(early < 210.0 && late > 230.0, "glide endpoints {early} -> {late}");

        let half = a.len() / 2;
        let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        let (lo, hi) = (rms(&a.samples()[..half]), rms(&a.samples()[half..]));
        let swing = (lo - hi).abs() / lo.max(hi);
        assert!(swing > 0.05, "tremolo should move the level, swing {swing}");
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let mut r1 = seeded_rng(7, "synth");
        let mut r2 = seeded_rng(7, "synth");
        let a = random_features(10, 4, 50.0, "x", &mut r1).unwrap();
        let b = random_features(10, 4, 50.0, "x", &mut r2).unwrap();
        assert_eq!(a, b);
        let s1 = smooth_features(20, 3, 50.0, "y", &mut r1).unwrap();
        let s2 = smooth_features(20, 3, 50.0, "y", &mut r2).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn smooth_features_vary_slowly() {
        let mut rng = seeded_rng(8, "synth");
        let s = smooth_features(200, 4, 50.0, "y", &mut rng).unwrap();
        for j in 0..4 {
            for t in 1..200 {
                let step = (s.data()[[t, j]] - s.data()[[t - 1, j]]).abs();
                assert!(step < 0.2, "jump {step} at t={t}");
            }
        }
    }
}
