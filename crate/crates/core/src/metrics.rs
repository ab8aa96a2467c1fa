//! Objective conversion metrics: mel-cepstral distortion, F0 correlation and
//! RMSE, character error rate, and cosine speaker similarity.
//!
//! MCD here is computed from DCT-II cepstra of the log-mel frames (13
//! coefficients, c0 excluded). That keeps the metric's form without pulling
//! in a vocoder analysis stack, but the absolute dB values are not
//! comparable to MCD numbers produced by SPTK/WORLD tooling — only
//! differences and orderings are meaningful.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::feature_store::FeatureSequence;
use crate::prosody::F0Track;

/// Cepstral order: coefficients c0..c12 are computed, c1..c12 enter the
/// distance.
pub const CEPSTRAL_ORDER: usize = 13;

const MCD_SCALE: f64 = 10.0 / std::f64::consts::LN_10;

/// Rows 1..CEPSTRAL_ORDER of the orthonormal DCT-II matrix for length n.
fn dct_rows(n: usize) -> Array2<f64> {
    let mut m = Array2::zeros((CEPSTRAL_ORDER - 1, n));
    let norm = (2.0 / n as f64).sqrt();
    for k in 1..CEPSTRAL_ORDER {
        for j in 0..n {
            m[[k - 1, j]] =
                norm * (std::f64::consts::PI * (j as f64 + 0.5) * k as f64 / n as f64).cos();
        }
    }
    m
}

fn cepstra(seq: &FeatureSequence) -> Array2<f64> {
    let dct = dct_rows(seq.dim());
    seq.data().dot(&dct.t())
}

fn frame_distance(a: &Array2<f64>, i: usize, b: &Array2<f64>, j: usize) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.ncols() {
        let d = a[[i, k]] - b[[j, k]];
        acc += d * d;
    }
    acc.sqrt()
}

/// Mel-cepstral distortion in dB: mean over aligned frames of
/// (10/ln 10) * sqrt(2 * sum_{i=1..12} (dc_i)^2). With `use_dtw` the frames
/// are aligned by dynamic time warping on Euclidean cepstral distance;
/// otherwise the sequences must already have equal frame counts.
pub fn mcd(mel_a: &FeatureSequence, mel_b: &FeatureSequence, use_dtw: bool) -> Result<f64> {
    if mel_a.dim() != mel_b.dim() {
        return Err(Error::dims(
            format!("{} mel bands", mel_a.dim()),
            format!("{}", mel_b.dim()),
        ));
    }
    if mel_a.dim() < CEPSTRAL_ORDER {
        return Err(Error::invalid(format!(
            "mcd needs at least {CEPSTRAL_ORDER} mel bands, got {}",
            mel_a.dim()
        )));
    }
    let ca = cepstra(mel_a);
    let cb = cepstra(mel_b);
    let scale = MCD_SCALE * 2f64.sqrt();
    if !use_dtw {
        if ca.nrows() != cb.nrows() {
            return Err(Error::dims(
                format!("{} frames (or use dtw)", ca.nrows()),
                format!("{}", cb.nrows()),
            ));
        }
        let t = ca.nrows();
        let mut acc = 0.0;
        for i in 0..t {
            acc += frame_distance(&ca, i, &cb, i);
        }
        return Ok(scale * acc / t as f64);
    }

    // DTW over the full cost matrix with steps (1,1), (1,0), (0,1).
    let (ta, tb) = (ca.nrows(), cb.nrows());
    let mut cost = Array2::from_elem((ta, tb), f64::INFINITY);
    for i in 0..ta {
        for j in 0..tb {
            let d = frame_distance(&ca, i, &cb, j);
            let best_prev = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cost[[0, j - 1]],
                (_, 0) => cost[[i - 1, 0]],
                _ => cost[[i - 1, j - 1]].min(cost[[i - 1, j]]).min(cost[[i, j - 1]]),
            };
            cost[[i, j]] = d + best_prev;
        }
    }
    // Walk the path back to count its length.
    let (mut i, mut j) = (ta - 1, tb - 1);
    let mut len = 1usize;
    while i > 0 || j > 0 {
        let (ni, nj) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = cost[[i - 1, j - 1]];
                let up = cost[[i - 1, j]];
                let left = cost[[i, j - 1]];
                if diag <= up && diag <= left {
                    (i - 1, j - 1)
                } else if up <= left {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            }
        };
        i = ni;
        j = nj;
        len += 1;
    }
    Ok(scale * cost[[ta - 1, tb - 1]] / len as f64)
}

fn mutually_voiced(a: &F0Track, b: &F0Track) -> Result<Vec<(f64, f64)>> {
    if a.len() != b.len() {
        return Err(Error::dims(
            format!("{} frames", a.len()),
            format!("{}", b.len()),
        ));
    }
    Ok(a.values
        .iter()
        .zip(&a.voiced)
        .zip(b.values.iter().zip(&b.voiced))
        .filter(|((_, &va), (_, &vb))| va && vb)
        .map(|((&x, _), (&y, _))| (x, y))
        .collect())
}

/// Pearson correlation over frames voiced in both tracks.
pub fn f0_corr(a: &F0Track, b: &F0Track) -> Result<f64> {
    let pairs = mutually_voiced(a, b)?;
    if pairs.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 mutually voiced frames, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("zero variance over mutually voiced frames"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F0ErrorUnit {
    Hz,
    Cents,
}

impl fmt::Display for F0ErrorUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            F0ErrorUnit::Hz => write!(f, "hz"),
            F0ErrorUnit::Cents => write!(f, "cents"),
        }
    }
}

impl FromStr for F0ErrorUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hz" => Ok(F0ErrorUnit::Hz),
            "cents" => Ok(F0ErrorUnit::Cents),
            other => Err(Error::invalid(format!(
                "unknown F0 error unit {other:?}, expected hz or cents"
            ))),
        }
    }
}

/// RMSE over mutually voiced frames, in Hz or in cents
/// (1200 * log2(a/b) per frame).
pub fn f0_rmse(a: &F0Track, b: &F0Track, unit: F0ErrorUnit) -> Result<f64> {
    let pairs = mutually_voiced(a, b)?;
    if pairs.is_empty() {
        return Err(Error::invalid("no mutually voiced frames"));
    }
    let mut acc = 0.0;
    for (x, y) in &pairs {
        let e = match unit {
            F0ErrorUnit::Hz => x - y,
            F0ErrorUnit::Cents => 1200.0 * (x / y).log2(),
        };
        acc += e * e;
    }
    Ok((acc / pairs.len() as f64).sqrt())
}

/// Lowercases, strips punctuation, and collapses whitespace runs to single
/// spaces; what CER counts is exactly what this returns.
pub fn normalize_transcript(text: &str) -> String {
    let lowered: String = text.chars().flat_map(char::to_lowercase).collect();
    let stripped: String = lowered.chars().filter(|c| !is_punctuation(*c)).collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '，' | '。' | '！' | '？' | '、' | '；' | '：' | '「' | '」' | '『' | '』'
                | '（' | '）' | '《' | '》' | '“' | '”' | '‘' | '’' | '…' | '—' | '·'
                | '¿' | '¡'
        )
}

fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Character error rate: unit-cost edit distance between the normalized
/// transcripts, divided by the normalized reference length.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<char> = normalize_transcript(reference).chars().collect();
    let h: Vec<char> = normalize_transcript(hypothesis).chars().collect();
    if r.is_empty() {
        return Err(Error::invalid("empty reference after normalization"));
    }
    Ok(levenshtein(&r, &h) as f64 / r.len() as f64)
}

/// Cosine similarity between two embedding vectors.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims(format!("{} dims", a.len()), format!("{}", b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("empty vector"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("zero vector"));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// One evaluation row. Fields are optional because not every run has every
/// input (e.g. no transcripts, no speaker embeddings).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub mcd: Option<f64>,
    pub f0corr: Option<f64>,
    pub f0rmse: Option<f64>,
    pub f0rmse_unit: Option<F0ErrorUnit>,
    pub cer: Option<f64>,
    pub sim: Option<f64>,
    pub rtx: Option<f64>,
    pub rtf: Option<f64>,
}

impl MetricReport {
    pub fn csv_header() -> &'static str {
        "label,mcd_db,f0corr,f0rmse,f0rmse_unit,cer,sim,rtx,rtf"
    }

    pub fn csv_row(&self, label: &str) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.6}")).unwrap_or_default()
        }
        format!(
            "{label},{},{},{},{},{},{},{},{}",
            cell(self.mcd),
            cell(self.f0corr),
            cell(self.f0rmse),
            self.f0rmse_unit.map(|u| u.to_string()).unwrap_or_default(),
            cell(self.cer),
            cell(self.sim),
            cell(self.rtx),
            cell(self.rtf),
        )
    }

    /// Column-wise mean over the reports that carry each field.
    pub fn mean_of(reports: &[MetricReport]) -> MetricReport {
        fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
            let v: Vec<f64> = values.collect();
            if v.is_empty() {
                None
            } else {
                Some(v.iter().sum::<f64>() / v.len() as f64)
            }
        }
        MetricReport {
            mcd: mean(reports.iter().filter_map(|r| r.mcd)),
            f0corr: mean(reports.iter().filter_map(|r| r.f0corr)),
            f0rmse: mean(reports.iter().filter_map(|r| r.f0rmse)),
            f0rmse_unit: reports.iter().find_map(|r| r.f0rmse_unit),
            cer: mean(reports.iter().filter_map(|r| r.cer)),
            sim: mean(reports.iter().filter_map(|r| r.sim)),
            rtx: mean(reports.iter().filter_map(|r| r.rtx)),
            rtf: mean(reports.iter().filter_map(|r| r.rtf)),
        }
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(v) = self.mcd {
            parts.push(format!("MCD {v:.3} dB"));
        }
        if let Some(v) = self.f0corr {
            parts.push(format!("F0CORR {v:.3}"));
        }
        if let Some(v) = self.f0rmse {
            let unit = self.f0rmse_unit.unwrap_or(F0ErrorUnit::Hz);
            parts.push(format!("F0RMSE {v:.2} {unit}"));
        }
        if let Some(v) = self.cer {
            parts.push(format!("CER {:.1}%", v * 100.0));
        }
        if let Some(v) = self.sim {
            parts.push(format!("SIM {v:.3}"));
        }
        if let Some(v) = self.rtx {
            parts.push(format!("RTX {v:.1}"));
        }
        if let Some(v) = self.rtf {
            parts.push(format!("RTF {v:.3}"));
        }
        write!(f, "{}", parts.join("  "))
    }
}
