//! Pitch and energy conditioning: F0 tracking, key transposition, 256-bin
//! quantization, and learned-table embedding lookups.

use ndarray::Array2;
use rand::Rng;

use crate::audio_io::{AudioBuffer, SpectralFrames};
use crate::error::{Error, Result};
use crate::feature_store::FeatureSequence;

/// Per-frame fundamental frequency in Hz. Unvoiced frames carry 0 and are
/// flagged in `voiced`.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub values: Vec<f64>,
    pub voiced: Vec<bool>,
    pub frame_rate: f64,
}

impl F0Track {
    pub fn new(values: Vec<f64>, voiced: Vec<bool>, frame_rate: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty F0 track"));
        }
        if values.len() != voiced.len() {
            return Err(Error::dims(
                format!("{} voicing flags", values.len()),
                format!("{}", voiced.len()),
            ));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::invalid("frame rate must be positive and finite"));
        }
        for (i, (&v, &vc)) in values.iter().zip(&voiced).enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("bad F0 value {v} at frame {i}")));
            }
            if vc && v <= 0.0 {
                return Err(Error::invalid(format!("voiced frame {i} has zero F0")));
            }
            if !vc && v != 0.0 {
                return Err(Error::invalid(format!(
                    "unvoiced frame {i} has nonzero F0 {v}"
                )));
            }
        }
        Ok(F0Track { values, voiced, frame_rate })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn voiced_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.voiced)
            .filter(|(_, &vc)| vc)
            .map(|(&v, _)| v)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct F0Options {
    pub min_hz: f64,
    pub max_hz: f64,
    pub frame_seconds: f64,
    pub hop_seconds: f64,
    /// Autocorrelation peak height below which a frame is unvoiced.
    pub voicing_threshold: f64,
    /// Frame RMS below which a frame is treated as silence.
    pub silence_rms: f64,
}

impl Default for F0Options {
    fn default() -> Self {
        F0Options {
            min_hz: 50.0,
            max_hz: 1100.0,
            frame_seconds: 0.040,
            hop_seconds: 0.016,
            voicing_threshold: 0.45,
            silence_rms: 1e-4,
        }
    }
}

/// A shorter-lag peak this close to the global maximum wins, which keeps the
/// tracker off subharmonics (octave-down errors).
const OCTAVE_PEAK_RATIO: f64 = 0.9;

/// Normalized-autocorrelation pitch tracker with parabolic peak refinement.
///
/// Each frame is scored by r(tau) = sum(x[i] x[i+tau]) / sqrt(E0 E1) over the
/// lag range implied by [min_hz, max_hz]. Among local maxima within
/// `OCTAVE_PEAK_RATIO` of the best score, the smallest lag wins; the lag is
/// then refined by fitting a parabola through the peak and its neighbors.
/// Frames are unvoiced when the peak is weak or the frame is near-silent.
pub fn extract_f0(audio: &AudioBuffer, opts: &F0Options) -> Result<F0Track> {
    let sr = audio.sample_rate() as f64;
    if !(opts.min_hz > 0.0 && opts.min_hz < opts.max_hz && opts.max_hz <= sr / 4.0) {
        return Err(Error::invalid(format!(
            "invalid F0 search range [{}, {}] at sample rate {sr}",
            opts.min_hz, opts.max_hz
        )));
    }
    if !(opts.frame_seconds > 0.0 && opts.hop_seconds > 0.0) {
        return Err(Error::invalid("frame and hop must be positive"));
    }
    let frame_len = ((opts.frame_seconds * sr).round() as usize).max(4);
    let hop = ((opts.hop_seconds * sr).round() as usize).max(1);
    if audio.len() < frame_len {
        return Err(Error::invalid(format!(
            "audio too short for pitch analysis ({} < {frame_len} samples)",
            audio.len()
        )));
    }
    let lag_min = ((sr / opts.max_hz).floor() as usize).max(2);
    let lag_max = ((sr / opts.min_hz).ceil() as usize).min(frame_len - 2);
    if lag_max < lag_min + 2 {
        return Err(Error::invalid(
            "F0 search range needs a longer analysis frame",
        ));
    }

    let n_frames = 1 + (audio.len() - frame_len) / hop;
    let mut values = vec![0.0; n_frames];
    let mut voiced = vec![false; n_frames];

    let mut prefix = vec![0.0; frame_len + 1];
    // r is indexed by lag; only [lag_min-1, lag_max+1] is filled.
    let mut r = vec![0.0; lag_max + 2];

    for t in 0..n_frames {
        let x = &audio.samples()[t * hop..t * hop + frame_len];
        for (i, &s) in x.iter().enumerate() {
            prefix[i + 1] = prefix[i] + s * s;
        }
        let total = prefix[frame_len];
        if (total / frame_len as f64).sqrt() < opts.silence_rms {
            continue;
        }

        for (tau, slot) in r.iter_mut().enumerate().take(lag_max + 2).skip(lag_min - 1) {
            let mut num = 0.0;
            for i in 0..frame_len - tau {
                num += x[i] * x[i + tau];
            }
            let e0 = prefix[frame_len - tau];
            let e1 = total - prefix[tau];
            *slot = if e0 > 0.0 && e1 > 0.0 {
                num / (e0 * e1).sqrt()
            } else {
                0.0
            };
        }

        let mut best = f64::NEG_INFINITY;
        for &v in &r[lag_min..=lag_max] {
            if v > best {
                best = v;
            }
        }
        if best < opts.voicing_threshold {
            continue;
        }

        let mut peak = None;
        for tau in lag_min..=lag_max {
            if r[tau] >= r[tau - 1] && r[tau] >= r[tau + 1] && r[tau] >= OCTAVE_PEAK_RATIO * best {
                peak = Some(tau);
                break;
            }
        }
        let tau = match peak {
            Some(tau) => tau,
            None => (lag_min..=lag_max)
                .max_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap())
                .unwrap(),
        };

        let (alpha, beta, gamma) = (r[tau - 1], r[tau], r[tau + 1]);
        let denom = alpha - 2.0 * beta + gamma;
        let delta = if denom.abs() > 1e-12 {
            (0.5 * (alpha - gamma) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let f0 = (sr / (tau as f64 + delta)).clamp(opts.min_hz, opts.max_hz);
        values[t] = f0;
        voiced[t] = true;
    }

    F0Track::new(values, voiced, sr / hop as f64)
}

/// Per-frame L2 norm of the magnitude spectrum, on the spectrogram's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrack {
    pub values: Vec<f64>,
    pub frame_rate: f64,
}

pub fn extract_energy(frames: &SpectralFrames) -> EnergyTrack {
    let values = frames
        .magnitudes()
        .rows()
        .into_iter()
        .map(|row| row.dot(&row).sqrt())
        .collect();
    EnergyTrack { values, frame_rate: frames.frame_rate() }
}

/// Nearest-rank percentile (q in percent). Used to pick quantization ranges
/// from a corpus.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("percentile of empty slice"));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::invalid(format!("percentile {q} out of [0, 100]")));
    }
    let mut sorted = values.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in percentile input"));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let rank = ((q / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantScale {
    /// Geometric spacing; lo must be positive. Used for F0.
    Log,
    /// Even spacing. Used for energy.
    Linear,
}

pub const QUANT_BINS: usize = 256;

/// One byte per frame: bin 0 is reserved for unvoiced/zero frames, bins
/// 1..=255 split [lo, hi]. Out-of-range positive values clamp to the edge
/// bins, so endpoints land exactly on 1 and 255.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    lo: f64,
    hi: f64,
    scale: QuantScale,
}

impl Quantizer {
    pub fn new(lo: f64, hi: f64, scale: QuantScale) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("bad quantizer range [{lo}, {hi}]")));
        }
        if scale == QuantScale::Log && lo <= 0.0 {
            return Err(Error::invalid("log-scale quantizer needs a positive lower bound"));
        }
        if scale == QuantScale::Linear && lo < 0.0 {
            return Err(Error::invalid("linear quantizer lower bound must be non-negative"));
        }
        Ok(Quantizer { lo, hi, scale })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn scale(&self) -> QuantScale {
        self.scale
    }

    fn warp(&self, v: f64) -> f64 {
        match self.scale {
            QuantScale::Log => v.ln(),
            QuantScale::Linear => v,
        }
    }

    /// Bin for a voiced/nonzero value. Zero (and anything below) maps to the
    /// reserved bin 0.
    pub fn bin(&self, v: f64) -> u8 {
        if v <= 0.0 || !v.is_finite() {
            return 0;
        }
        let v = v.clamp(self.lo, self.hi);
        let pos = (self.warp(v) - self.warp(self.lo)) / (self.warp(self.hi) - self.warp(self.lo));
        1 + (pos * 254.9999).floor() as u8
    }

    /// Center of a bin's interval (geometric center on the log scale,
    /// arithmetic on linear). Bin 0 has no value.
    pub fn dequantize(&self, bin: u8) -> Option<f64> {
        if bin == 0 {
            return None;
        }
        let span = self.warp(self.hi) - self.warp(self.lo);
        let pos = ((bin as f64 - 1.0) + 0.5) / 254.9999;
        let warped = self.warp(self.lo) + pos.min(1.0) * span;
        Some(match self.scale {
            QuantScale::Log => warped.exp(),
            QuantScale::Linear => warped,
        })
    }
}

/// Quantized prosody stream, one bin index per frame, remembering the
/// quantizer that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTrack {
    pub bins: Vec<u8>,
    pub frame_rate: f64,
    pub quantizer: Quantizer,
}

pub fn quantize_f0(track: &F0Track, q: &Quantizer) -> QuantizedTrack {
    let bins = track
        .values
        .iter()
        .zip(&track.voiced)
        .map(|(&v, &vc)| if vc { q.bin(v) } else { 0 })
        .collect();
    QuantizedTrack { bins, frame_rate: track.frame_rate, quantizer: *q }
}

pub fn quantize_energy(track: &EnergyTrack, q: &Quantizer) -> QuantizedTrack {
    let bins = track.values.iter().map(|&v| q.bin(v)).collect();
    QuantizedTrack { bins, frame_rate: track.frame_rate, quantizer: *q }
}

/// 256 x dim lookup table mapping bins to embedding vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    rows: Array2<f64>,
    tag: String,
}

impl EmbeddingTable {
    /// Seeded uniform init in [-0.1, 0.1].
    pub fn seeded(dim: usize, tag: impl Into<String>, rng: &mut impl Rng) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dim must be positive"));
        }
        let mut rows = Array2::zeros((QUANT_BINS, dim));
        for v in rows.iter_mut() {
            *v = rng.random_range(-0.1..0.1);
        }
        Ok(EmbeddingTable { rows, tag: tag.into() })
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn to_feature(&self) -> FeatureSequence {
        FeatureSequence::new(self.rows.clone(), 1.0, self.tag.clone())
            .expect("table is validated at construction")
    }

    pub fn from_feature(seq: &FeatureSequence) -> Result<Self> {
        if seq.n_frames() != QUANT_BINS {
            return Err(Error::dims(
                format!("{QUANT_BINS} embedding rows"),
                format!("{}", seq.n_frames()),
            ));
        }
        Ok(EmbeddingTable {
            rows: seq.data().clone(),
            tag: seq.source_tag().to_owned(),
        })
    }
}

/// Replaces each bin index with its table row. The time base is unchanged.
pub fn embed_quantized(track: &QuantizedTrack, table: &EmbeddingTable) -> Result<FeatureSequence> {
    if track.bins.is_empty() {
        return Err(Error::invalid("empty quantized track"));
    }
    let mut data = Array2::zeros((track.bins.len(), table.dim()));
    for (t, &b) in track.bins.iter().enumerate() {
        data.row_mut(t).assign(&table.rows.row(b as usize));
    }
    FeatureSequence::new(data, track.frame_rate, table.tag.clone())
}

/// Median F0 over the voiced frames of a set of tracks.
pub fn voiced_median(tracks: &[F0Track]) -> Result<f64> {
    let mut pool: Vec<f64> = tracks.iter().flat_map(|t| t.voiced_values()).collect();
    if pool.is_empty() {
        return Err(Error::invalid("cannot transpose unvoiced material: no voiced frames"));
    }
    pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = pool.len();
    Ok(if n % 2 == 1 {
        pool[n / 2]
    } else {
        0.5 * (pool[n / 2 - 1] + pool[n / 2])
    })
}

/// Ratio that moves the source's voiced median onto the target corpus median.
pub fn transposition_factor(source: &F0Track, target_corpus: &[F0Track]) -> Result<f64> {
    let src = voiced_median(std::slice::from_ref(source))?;
    let dst = voiced_median(target_corpus)
        .map_err(|_| Error::invalid("target corpus has no voiced frames"))?;
    Ok(dst / src)
}

/// Multiplies voiced F0 values by `factor`; unvoiced frames stay zero.
pub fn transpose_f0(track: &F0Track, factor: f64) -> Result<F0Track> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::invalid(format!(
            "transposition factor must be positive and finite, got {factor}"
        )));
    }
    let values = track
        .values
        .iter()
        .zip(&track.voiced)
        .map(|(&v, &vc)| if vc { v * factor } else { 0.0 })
        .collect();
    F0Track::new(values, track.voiced.clone(), track.frame_rate)
}

/// F0 tracks persist as a pair of 1-column DSFF sequences: the Hz values and
/// a parallel 0/1 voicing column.
pub fn f0_to_features(track: &F0Track) -> (FeatureSequence, FeatureSequence) {
    let n = track.len();
    let values = Array2::from_shape_fn((n, 1), |(i, _)| track.values[i]);
    let voicing = Array2::from_shape_fn((n, 1), |(i, _)| f64::from(track.voiced[i]));
    (
        FeatureSequence::new(values, track.frame_rate, "f0").expect("track is validated"),
        FeatureSequence::new(voicing, track.frame_rate, "f0:voicing").expect("track is validated"),
    )
}

pub fn f0_from_features(values: &FeatureSequence, voicing: &FeatureSequence) -> Result<F0Track> {
    if values.dim() != 1 || voicing.dim() != 1 {
        return Err(Error::format("F0 features must be 1-column sequences"));
    }
    if values.n_frames() != voicing.n_frames() {
        return Err(Error::dims(
            format!("{} voicing frames", values.n_frames()),
            format!("{}", voicing.n_frames()),
        ));
    }
    let voiced: Vec<bool> = voicing
        .data()
        .iter()
        .map(|&v| {
            if v == 0.0 {
                Ok(false)
            } else if v == 1.0 {
                Ok(true)
            } else {
                Err(Error::format(format!("voicing flag must be 0 or 1, got {v}")))
            }
        })
        .collect::<Result<_>>()?;
    F0Track::new(values.data().column(0).to_vec(), voiced, values.frame_rate())
}

/// Nearest-index resampling for F0 tracks (voicing is categorical, so
/// interpolating values across the voiced/unvoiced boundary is meaningless).
pub fn resample_track_nearest(track: &F0Track, n_frames: usize) -> Result<F0Track> {
    if n_frames == 0 {
        return Err(Error::invalid("target frame count must be positive"));
    }
    let t_src = track.len();
    let mut values = Vec::with_capacity(n_frames);
    let mut voiced = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let pos = if n_frames == 1 {
            0.0
        } else {
            t as f64 * (t_src - 1) as f64 / (n_frames - 1) as f64
        };
        let i = (pos.round() as usize).min(t_src - 1);
        values.push(track.values[i]);
        voiced.push(track.voiced[i]);
    }
    let rate = track.frame_rate * n_frames as f64 / t_src as f64;
    F0Track::new(values, voiced, rate)
}
