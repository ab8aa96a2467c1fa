//! WAV decoding/encoding and spectral analysis.
//!
//! Only mono integer PCM (16- or 24-bit) is accepted: the corpus this
//! pipeline targets is single-channel vocal recordings, and refusing other
//! layouts loudly beats resampling or downmixing silently.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::feature_store::FeatureSequence;

/// Mono audio at a fixed sample rate, samples normalized to [-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empty audio"));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("non-finite sample"));
        }
        Ok(AudioBuffer { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Pcm16,
    Pcm24,
}

const I16_SCALE: f64 = 32768.0;
const I24_SCALE: f64 = 8388608.0;

/// Parses a RIFF/WAVE byte stream. Rejects anything that is not mono
/// integer PCM at 16 or 24 bits. All sizes are validated against the actual
/// buffer length before use, so truncated or hostile input fails cleanly.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::format("not a RIFF/WAVE file"));
    }

    struct Fmt {
        channels: u16,
        sample_rate: u32,
        bits: u16,
    }
    let mut fmt: Option<Fmt> = None;
    let mut pos = 12usize;

    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| Error::format("chunk size overflow"))?;
        if body_end > bytes.len() {
            return Err(Error::format(format!(
                "truncated {} chunk: declares {size} bytes",
                String::from_utf8_lossy(id)
            )));
        }
        let body = &bytes[body_start..body_end];

        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::format("fmt chunk too short"));
                }
                let audio_format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                if audio_format != 1 {
                    return Err(Error::format(format!(
                        "unsupported encoding: format code {audio_format}, only integer PCM is supported"
                    )));
                }
                fmt = Some(Fmt {
                    channels: u16::from_le_bytes(body[2..4].try_into().unwrap()),
                    sample_rate: u32::from_le_bytes(body[4..8].try_into().unwrap()),
                    bits: u16::from_le_bytes(body[14..16].try_into().unwrap()),
                });
            }
            b"data" => {
                let fmt = fmt
                    .as_ref()
                    .ok_or_else(|| Error::format("data chunk before fmt chunk"))?;
                if fmt.channels != 1 {
                    return Err(Error::format(format!(
                        "unsupported channel count: {}, only mono is supported",
                        fmt.channels
                    )));
                }
                if fmt.sample_rate == 0 {
                    return Err(Error::format("sample rate must be positive"));
                }
                let samples = match fmt.bits {
                    16 => {
                        if body.len() % 2 != 0 {
                            return Err(Error::format("data chunk size not a multiple of sample size"));
                        }
                        body.chunks_exact(2)
                            .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f64 / I16_SCALE)
                            .collect()
                    }
                    24 => {
                        if body.len() % 3 != 0 {
                            return Err(Error::format("data chunk size not a multiple of sample size"));
                        }
                        body.chunks_exact(3)
                            .map(|c| {
                                let v = ((c[2] as i8 as i32) << 16) | ((c[1] as i32) << 8) | c[0] as i32;
                                v as f64 / I24_SCALE
                            })
                            .collect()
                    }
                    other => {
                        return Err(Error::format(format!(
                            "unsupported bit depth: {other}, only 16 and 24 are supported"
                        )))
                    }
                };
                return AudioBuffer::new(samples, fmt.sample_rate)
                    .map_err(|_| Error::format("empty audio"));
            }
            _ => {}
        }
        // Chunks are word-aligned: odd sizes are followed by a pad byte.
        pos = body_end + (size & 1);
    }

    Err(Error::format("no data chunk found"))
}

/// Serializes mono PCM. Samples are scaled, rounded to nearest, and clamped
/// to the integer range, so integers that came out of `decode_wav` survive a
/// round trip bit-exactly.
pub fn encode_wav(audio: &AudioBuffer, depth: BitDepth) -> Vec<u8> {
    let (bytes_per_sample, scale) = match depth {
        BitDepth::Pcm16 => (2usize, I16_SCALE),
        BitDepth::Pcm24 => (3usize, I24_SCALE),
    };
    let data_len = audio.len() * bytes_per_sample;
    let pad = data_len & 1;
    let mut out = Vec::with_capacity(44 + data_len + pad);

    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len + pad) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&audio.sample_rate().to_le_bytes());
    let byte_rate = audio.sample_rate() * bytes_per_sample as u32;
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&((bytes_per_sample * 8) as u16).to_le_bytes());

    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in audio.samples() {
        let v = (s * scale).round().clamp(-scale, scale - 1.0) as i32;
        match depth {
            BitDepth::Pcm16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            BitDepth::Pcm24 => out.extend_from_slice(&v.to_le_bytes()[..3]),
        }
    }
    if pad == 1 {
        out.push(0);
    }
    out
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let bytes = fs::read(path)?;
    decode_wav(&bytes)
}

pub fn write_wav(audio: &AudioBuffer, depth: BitDepth, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_wav(audio, depth))?;
    Ok(())
}

/// Short-time analysis parameters. Frames are taken without padding or
/// centering: frame t covers samples [t*hop, t*hop + frame_length).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub frame_length: usize,
    pub hop_length: usize,
    pub fft_size: usize,
}

impl StftConfig {
    pub fn new(frame_length: usize, hop_length: usize, fft_size: usize) -> Result<Self> {
        if frame_length == 0 || hop_length == 0 || fft_size == 0 {
            return Err(Error::invalid("stft sizes must be positive"));
        }
        if frame_length > fft_size {
            return Err(Error::invalid(format!(
                "frame length {frame_length} exceeds fft size {fft_size}"
            )));
        }
        Ok(StftConfig { frame_length, hop_length, fft_size })
    }

    /// 16 kHz analysis: 64 ms frames, 16 ms hop, so features land on a
    /// 62.5 fps grid.
    pub fn default_16k() -> Self {
        StftConfig { frame_length: 1024, hop_length: 256, fft_size: 1024 }
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.frame_length {
            0
        } else {
            1 + (n_samples - self.frame_length) / self.hop_length
        }
    }
}

/// Magnitude spectrogram: rows are frames, columns are the fft_size/2 + 1
/// non-negative frequency bins.
#[derive(Debug, Clone)]
pub struct SpectralFrames {
    magnitudes: Array2<f64>,
    frame_rate: f64,
    sample_rate: u32,
}

impl SpectralFrames {
    /// Wraps precomputed magnitudes (rows = frames). Entries must be
    /// non-negative and finite.
    pub fn from_magnitudes(magnitudes: Array2<f64>, frame_rate: f64, sample_rate: u32) -> Result<Self> {
        if magnitudes.nrows() == 0 || magnitudes.ncols() < 2 {
            return Err(Error::invalid("spectrogram needs frames and at least 2 bins"));
        }
        if magnitudes.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("magnitudes must be non-negative and finite"));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) || sample_rate == 0 {
            return Err(Error::invalid("rates must be positive"));
        }
        Ok(SpectralFrames { magnitudes, frame_rate, sample_rate })
    }

    pub fn magnitudes(&self) -> &Array2<f64> {
        &self.magnitudes
    }

    pub fn n_frames(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.magnitudes.ncols()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}

fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Windowed magnitude STFT (periodic Hann, zero-padded to fft_size).
pub fn stft_magnitudes(audio: &AudioBuffer, cfg: &StftConfig) -> Result<SpectralFrames> {
    let n_frames = cfg.n_frames(audio.len());
    if n_frames == 0 {
        return Err(Error::invalid(format!(
            "audio shorter than one analysis frame ({} < {} samples)",
            audio.len(),
            cfg.frame_length
        )));
    }
    let window = periodic_hann(cfg.frame_length);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);
    let n_bins = cfg.fft_size / 2 + 1;
    let mut mags = Array2::zeros((n_frames, n_bins));
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    for t in 0..n_frames {
        let start = t * cfg.hop_length;
        for (i, w) in window.iter().enumerate() {
            buf[i] = Complex::new(audio.samples()[start + i] * w, 0.0);
        }
        for slot in buf.iter_mut().skip(cfg.frame_length) {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process(&mut buf);
        for (k, slot) in buf.iter().take(n_bins).enumerate() {
            mags[[t, k]] = slot.norm();
        }
    }
    Ok(SpectralFrames {
        magnitudes: mags,
        frame_rate: audio.sample_rate() as f64 / cfg.hop_length as f64,
        sample_rate: audio.sample_rate(),
    })
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Centers of the `n_mels` triangular bands between fmin and fmax, in Hz.
pub fn mel_band_centers(n_mels: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let lo = hz_to_mel(fmin);
    let hi = hz_to_mel(fmax);
    (1..=n_mels)
        .map(|k| mel_to_hz(lo + (hi - lo) * k as f64 / (n_mels + 1) as f64))
        .collect()
}

fn mel_filterbank(n_mels: usize, n_bins: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Array2<f64> {
    let lo = hz_to_mel(fmin);
    let hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|k| mel_to_hz(lo + (hi - lo) * k as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / (2.0 * (n_bins - 1) as f64);
    let mut fb = Array2::zeros((n_mels, n_bins));
    for m in 0..n_mels {
        let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f <= c {
                (f - l) / (c - l)
            } else {
                (r - f) / (r - c)
            };
            if w > 0.0 {
                fb[[m, k]] = w;
            }
        }
    }
    fb
}

/// Natural-log mel spectrogram with unit-peak triangular filters. `floor`
/// clamps band energies away from zero before the log.
pub fn log_mel(
    frames: &SpectralFrames,
    n_mels: usize,
    fmin: f64,
    fmax: f64,
    floor: f64,
) -> Result<FeatureSequence> {
    if n_mels < 13 {
        return Err(Error::invalid(format!(
            "n_mels must be at least 13, got {n_mels}"
        )));
    }
    let nyquist = frames.sample_rate() as f64 / 2.0;
    if !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist) {
        return Err(Error::invalid(format!(
            "invalid mel frequency range [{fmin}, {fmax}] for sample rate {}",
            frames.sample_rate()
        )));
    }
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::invalid("mel floor must be positive"));
    }
    let fb = mel_filterbank(n_mels, frames.n_bins(), frames.sample_rate(), fmin, fmax);
    let mut out = frames.magnitudes().dot(&fb.t());
    out.mapv_inplace(|v| v.max(floor).ln());
    FeatureSequence::new(out, frames.frame_rate(), "logmel")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(sr: u32, hz: f64, seconds: f64, amp: f64) -> AudioBuffer {
        let n = (sr as f64 * seconds).round() as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * hz * i as f64 / sr as f64).sin())
            .collect();
        AudioBuffer::new(samples, sr).unwrap()
    }

    #[test]
    fn wav_16bit_round_trip_is_bit_exact() {
        let samples: Vec<f64> = (-10..10).map(|i| (i * 1000) as f64 / I16_SCALE).collect();
        let audio = AudioBuffer::new(samples, 16000).unwrap();
        let bytes = encode_wav(&audio, BitDepth::Pcm16);
        let back = decode_wav(&bytes).unwrap();
        assert_eq!(back, audio);
        let again = encode_wav(&back, BitDepth::Pcm16);
        assert_eq!(again, bytes);
    }

    #[test]
    fn wav_24bit_round_trip_is_bit_exact() {
        let samples: Vec<f64> = [-8388608i32, -1, 0, 1, 8388607, 123456, -654321]
            .iter()
            .map(|&v| v as f64 / I24_SCALE)
            .collect();
        let audio = AudioBuffer::new(samples, 44100).unwrap();
        let bytes = encode_wav(&audio, BitDepth::Pcm24);
        let back = decode_wav(&bytes).unwrap();
        assert_eq!(back, audio);
        // 7 samples * 3 bytes is odd, so the writer pads to word alignment.
        assert_eq!(bytes.len() % 2, 0);
    }

    #[test]
    fn writer_clamps_out_of_range_input() {
        let audio = AudioBuffer::new(vec![1.5, -1.5], 8000).unwrap();
        let back = decode_wav(&encode_wav(&audio, BitDepth::Pcm16)).unwrap();
        assert_eq!(back.samples()[0], (I16_SCALE - 1.0) / I16_SCALE);
        assert_eq!(back.samples()[1], -1.0);
    }

    #[test]
    fn rejects_stereo() {
        let audio = AudioBuffer::new(vec![0.1; 8], 8000).unwrap();
        let mut bytes = encode_wav(&audio, BitDepth::Pcm16);
        bytes[22] = 2; // channel count
        let err = decode_wav(&bytes).unwrap_err();
        assert!(err.to_string().contains("unsupported channel count: 2"), "{err}");
    }

    #[test]
    fn rejects_float_pcm() {
        let audio = AudioBuffer::new(vec![0.1; 8], 8000).unwrap();
        let mut bytes = encode_wav(&audio, BitDepth::Pcm16);
        bytes[20] = 3; // IEEE float format code
        let err = decode_wav(&bytes).unwrap_err();
        assert!(err.to_string().contains("unsupported encoding"), "{err}");
    }

    #[test]
    fn rejects_8bit() {
        let audio = AudioBuffer::new(vec![0.1; 8], 8000).unwrap();
        let mut bytes = encode_wav(&audio, BitDepth::Pcm16);
        bytes[34] = 8;
        let err = decode_wav(&bytes).unwrap_err();
        assert!(err.to_string().contains("unsupported bit depth: 8"), "{err}");
    }

    #[test]
    fn rejects_truncated_data_chunk() {
        let audio = AudioBuffer::new(vec![0.1; 100], 8000).unwrap();
        let mut bytes = encode_wav(&audio, BitDepth::Pcm16);
        bytes.truncate(bytes.len() - 50);
        let err = decode_wav(&bytes).unwrap_err();
        assert!(err.to_string().contains("truncated data chunk"), "{err}");
    }

    #[test]
    fn rejects_non_riff() {
        assert!(decode_wav(b"DSFFxxxx").is_err());
        assert!(decode_wav(b"").is_err());
    }

    #[test]
    fn skips_unknown_chunks() {
        let audio = AudioBuffer::new(vec![0.25; 4], 8000).unwrap();
        let bytes = encode_wav(&audio, BitDepth::Pcm16);
        // Splice a LIST chunk between fmt and data.
        let mut spliced = bytes[..36].to_vec();
        spliced.extend_from_slice(b"LIST");
        spliced.extend_from_slice(&3u32.to_le_bytes());
        spliced.extend_from_slice(b"abc\0"); // 3 bytes + pad
        spliced.extend_from_slice(&bytes[36..]);
        let riff_len = (spliced.len() - 8) as u32;
        spliced[4..8].copy_from_slice(&riff_len.to_le_bytes());
        let back = decode_wav(&spliced).unwrap();
        assert_eq!(back, audio);
    }

    #[test]
    fn frame_count_matches_hop_arithmetic() {
        let cfg = StftConfig::default_16k();
        assert_eq!(cfg.n_frames(16000), 1 + (16000 - 1024) / 256);
        assert_eq!(cfg.n_frames(16000), 59);
        assert_eq!(cfg.n_frames(1024), 1);
        assert_eq!(cfg.n_frames(1023), 0);
    }

    #[test]
    fn stft_frame_rate_is_sr_over_hop() {
        let audio = sine(16000, 440.0, 1.0, 0.5);
        let frames = stft_magnitudes(&audio, &StftConfig::default_16k()).unwrap();
        assert_eq!(frames.frame_rate(), 62.5);
        assert_eq!(frames.n_frames(), 59);
        assert_eq!(frames.n_bins(), 513);
    }

    #[test]
    fn sine_peaks_at_expected_fft_bin() {
        let audio = sine(16000, 440.0, 1.0, 0.5);
        let frames = stft_magnitudes(&audio, &StftConfig::default_16k()).unwrap();
        let row = frames.magnitudes().row(10);
        let peak = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        // 440 Hz / (16000/1024 Hz per bin) = 28.16
        assert_eq!(peak, 28);
    }

    #[test]
    fn bin_centered_sine_peaks_at_its_bin_in_every_frame() {
        // 32 * 16000/1024 = 500 Hz sits exactly on bin 32.
        let audio = sine(16000, 500.0, 0.5, 0.5);
        let frames = stft_magnitudes(&audio, &StftConfig::default_16k()).unwrap();
        for t in 0..frames.n_frames() {
            let row = frames.magnitudes().row(t);
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(peak, 32, "frame {t}");
        }
    }

    #[test]
    fn stft_is_positively_homogeneous() {
        let quiet = sine(16000, 440.0, 0.3, 0.2);
        let loud = AudioBuffer::new(
            quiet.samples().iter().map(|s| 3.0 * s).collect(),
            16000,
        )
        .unwrap();
        let cfg = StftConfig::default_16k();
        let a = stft_magnitudes(&quiet, &cfg).unwrap();
        let b = stft_magnitudes(&loud, &cfg).unwrap();
        let peak = a.magnitudes().iter().cloned().fold(0.0, f64::max);
        for (x, y) in a.magnitudes().iter().zip(b.magnitudes().iter()) {
            assert!((y - 3.0 * x).abs() < 1e-9 * peak.max(1.0));
        }
    }

    #[test]
    fn doubling_magnitudes_shifts_log_mel_by_ln2() {
        let audio = sine(16000, 440.0, 0.3, 0.2);
        let frames = stft_magnitudes(&audio, &StftConfig::default_16k()).unwrap();
        let doubled = SpectralFrames::from_magnitudes(
            frames.magnitudes().mapv(|v| 2.0 * v),
            frames.frame_rate(),
            frames.sample_rate(),
        )
        .unwrap();
        let a = log_mel(&frames, 80, 0.0, 8000.0, 1e-30).unwrap();
        let b = log_mel(&doubled, 80, 0.0, 8000.0, 1e-30).unwrap();
        for (x, y) in a.data().iter().zip(b.data().iter()) {
            if *x > -40.0 {
                // unclamped entries
                assert!((y - x - std::f64::consts::LN_2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mel_scale_anchor() {
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-9);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn sine_peaks_in_nearest_mel_band() {
        let audio = sine(16000, 440.0, 1.0, 0.5);
        let frames = stft_magnitudes(&audio, &StftConfig::default_16k()).unwrap();
        let mel = log_mel(&frames, 80, 0.0, 8000.0, 1e-10).unwrap();
        assert_eq!(mel.dim(), 80);
        assert_eq!(mel.frame_rate(), 62.5);
        assert_eq!(mel.source_tag(), "logmel");

        let centers = mel_band_centers(80, 0.0, 8000.0);
        let nearest = centers
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 440.0).abs().partial_cmp(&(b.1 - 440.0).abs()).unwrap()
            })
            .unwrap()
            .0;
        let row = mel.frame(10);
        let peak = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, nearest);
    }

    #[test]
    fn log_mel_validates_arguments() {
        let audio = sine(16000, 440.0, 0.2, 0.5);
        let frames = stft_magnitudes(&audio, &StftConfig::default_16k()).unwrap();
        assert!(log_mel(&frames, 12, 0.0, 8000.0, 1e-10).is_err());
        assert!(log_mel(&frames, 80, 0.0, 9000.0, 1e-10).is_err());
        assert!(log_mel(&frames, 80, 4000.0, 400.0, 1e-10).is_err());
        assert!(log_mel(&frames, 80, 0.0, 8000.0, 0.0).is_err());
    }

    #[test]
    fn silence_hits_the_floor() {
        let audio = AudioBuffer::new(vec![0.0; 4096], 16000).unwrap();
        let frames = stft_magnitudes(&audio, &StftConfig::default_16k()).unwrap();
        let mel = log_mel(&frames, 80, 0.0, 8000.0, 1e-10).unwrap();
        let expected = 1e-10f64.ln();
        assert!(mel.data().iter().all(|&v| (v - expected).abs() < 1e-12));
    }

    #[test]
    fn stft_rejects_short_audio() {
        let audio = AudioBuffer::new(vec![0.1; 512], 16000).unwrap();
        assert!(stft_magnitudes(&audio, &StftConfig::default_16k()).is_err());
    }
}
