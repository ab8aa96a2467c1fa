//! Temporal alignment of multi-rate feature streams and their fusion into a
//! single latent sequence.
//!
//! Two alignment strategies are provided: parameter-free linear resampling
//! onto the target grid, and a single-head cross-attention that attends from
//! the target grid into the source sequence. Fusion is always additive over
//! per-source linear projections, which is algebraically the same map as a
//! single linear layer over the concatenated sources.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::feature_store::FeatureSequence;

/// Interpolation kernel for `resample_with`. Linear is the pipeline default
/// and the only kernel with exactness guarantees; the others exist for
/// benchmark comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleKernel {
    #[default]
    Linear,
    Nearest,
    /// Hann-windowed sinc, 8 taps per side. Can overshoot (no clamping).
    Sinc,
}

impl std::str::FromStr for ResampleKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ResampleKernel::Linear),
            "nearest" => Ok(ResampleKernel::Nearest),
            "sinc" => Ok(ResampleKernel::Sinc),
            other => Err(Error::invalid(format!(
                "unknown resample kernel {other:?}, expected linear, nearest, or sinc"
            ))),
        }
    }
}

/// Endpoint-aligned linear resampling to `n_frames` rows. Output frame t
/// reads position t*(T_src-1)/(T_out-1) of the source; when `n_frames`
/// equals the source length the data is copied bit-exactly. Every output
/// element is clamped into the interval spanned by its two source neighbors,
/// so the operation can never overshoot.
pub fn resample_time(seq: &FeatureSequence, n_frames: usize) -> Result<FeatureSequence> {
    resample_with(seq, n_frames, ResampleKernel::Linear)
}

pub fn resample_with(
    seq: &FeatureSequence,
    n_frames: usize,
    kernel: ResampleKernel,
) -> Result<FeatureSequence> {
    if n_frames == 0 {
        return Err(Error::invalid("target frame count must be positive"));
    }
    let t_src = seq.n_frames();
    let rate = seq.frame_rate() * n_frames as f64 / t_src as f64;
    if n_frames == t_src {
        return seq.clone().with_frame_rate(rate);
    }
    let d = seq.dim();
    let src = seq.data();
    let mut out = Array2::zeros((n_frames, d));
    for t in 0..n_frames {
        let pos = if n_frames == 1 {
            0.0
        } else {
            t as f64 * (t_src - 1) as f64 / (n_frames - 1) as f64
        };
        match kernel {
            ResampleKernel::Linear => {
                let i = (pos.floor() as usize).min(t_src - 1);
                let j = (i + 1).min(t_src - 1);
                let w = pos - i as f64;
                let (ra, rb) = (src.row(i), src.row(j));
                let mut ro = out.row_mut(t);
                // clamp guards against float overshoot at w near 0 or 1
                for ((o, &a), &b) in ro.iter_mut().zip(ra.iter()).zip(rb.iter()) {
                    let v = a + (b - a) * w;
                    *o = v.clamp(a.min(b), a.max(b));
                }
            }
            ResampleKernel::Nearest => {
                let i = (pos.round() as usize).min(t_src - 1);
                out.row_mut(t).assign(&src.row(i));
            }
            ResampleKernel::Sinc => {
                const TAPS: isize = 8;
                let center = pos.floor() as isize;
                let mut weight_sum = 0.0;
                let mut acc = vec![0.0; d];
                for i in center - TAPS + 1..=center + TAPS {
                    let x = pos - i as f64;
                    let sinc = if x == 0.0 {
                        1.0
                    } else {
                        let px = std::f64::consts::PI * x;
                        px.sin() / px
                    };
                    let window =
                        0.5 * (1.0 + (std::f64::consts::PI * x / TAPS as f64).cos());
                    let w = sinc * window;
                    let idx = i.clamp(0, t_src as isize - 1) as usize;
                    weight_sum += w;
                    for k in 0..d {
                        acc[k] += w * src[[idx, k]];
                    }
                }
                for k in 0..d {
                    out[[t, k]] = acc[k] / weight_sum;
                }
            }
        }
    }
    FeatureSequence::new(out, rate, seq.source_tag())
}

/// A dense layer with bias, persisted as a (d_in + 1) x d_out DSFF matrix
/// whose last row is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionWeights {
    matrix: Array2<f64>,
    bias: Array1<f64>,
    tag: String,
}

impl ProjectionWeights {
    pub fn new(matrix: Array2<f64>, bias: Array1<f64>, tag: impl Into<String>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::invalid("empty projection matrix"));
        }
        if bias.len() != matrix.ncols() {
            return Err(Error::dims(
                format!("bias of length {}", matrix.ncols()),
                format!("{}", bias.len()),
            ));
        }
        if matrix.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite projection weight"));
        }
        Ok(ProjectionWeights { matrix, bias, tag: tag.into() })
    }

    /// Gaussian init with std 1/sqrt(d_in) and zero bias, drawn from the
    /// caller's seeded stream.
    pub fn seeded(d_in: usize, d_out: usize, tag: impl Into<String>, rng: &mut impl Rng) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::invalid("projection dims must be positive"));
        }
        let normal = Normal::new(0.0, 1.0 / (d_in as f64).sqrt()).expect("std is positive");
        let mut matrix = Array2::zeros((d_in, d_out));
        for v in matrix.iter_mut() {
            *v = normal.sample(rng);
        }
        Ok(ProjectionWeights { matrix, bias: Array1::zeros(d_out), tag: tag.into() })
    }

    pub fn d_in(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn param_count(&self) -> usize {
        (self.d_in() + 1) * self.d_out()
    }

    pub fn to_feature(&self) -> FeatureSequence {
        let mut rows = Array2::zeros((self.d_in() + 1, self.d_out()));
        rows.slice_mut(ndarray::s![..self.d_in(), ..]).assign(&self.matrix);
        rows.row_mut(self.d_in()).assign(&self.bias);
        FeatureSequence::new(rows, 1.0, self.tag.clone()).expect("weights are finite")
    }

    pub fn from_feature(seq: &FeatureSequence) -> Result<Self> {
        if seq.n_frames() < 2 {
            return Err(Error::format("projection needs at least one weight row plus bias"));
        }
        let d_in = seq.n_frames() - 1;
        let matrix = seq.data().slice(ndarray::s![..d_in, ..]).to_owned();
        let bias = seq.data().row(d_in).to_owned();
        ProjectionWeights::new(matrix, bias, seq.source_tag())
    }
}

/// Applies the dense layer frame-wise: X W + b. Tag and time base carry over.
pub fn project(seq: &FeatureSequence, w: &ProjectionWeights) -> Result<FeatureSequence> {
    if seq.dim() != w.d_in() {
        return Err(Error::dims(
            format!("{} input dims for projection {:?}", w.d_in(), w.tag),
            format!("{}", seq.dim()),
        ));
    }
    let out = seq.data().dot(&w.matrix) + &w.bias;
    FeatureSequence::new(out, seq.frame_rate(), seq.source_tag())
}

/// Resamples every source onto a shared grid of `n_frames`, projects each
/// into the common width, and sums. Terms are added in source-tag order, so
/// the result is bitwise independent of argument order as long as tags are
/// distinct. The output frame rate is the mean of the resampled rates.
pub fn fuse_add(
    sources: &[FeatureSequence],
    weights: &[ProjectionWeights],
    n_frames: usize,
) -> Result<FeatureSequence> {
    if sources.is_empty() {
        return Err(Error::invalid("fusion needs at least one source"));
    }
    if sources.len() != weights.len() {
        return Err(Error::dims(
            format!("{} weight sets", sources.len()),
            format!("{}", weights.len()),
        ));
    }
    let d_out = weights[0].d_out();
    for w in weights {
        if w.d_out() != d_out {
            return Err(Error::dims(
                format!("projection width {d_out}"),
                format!("{} in {:?}", w.d_out(), w.tag),
            ));
        }
    }
    let mut order: Vec<usize> = (0..sources.len()).collect();
    order.sort_by(|&a, &b| sources[a].source_tag().cmp(sources[b].source_tag()));

    let mut sum = Array2::zeros((n_frames, d_out));
    let mut rates: Vec<f64> = Vec::with_capacity(sources.len());
    for &i in &order {
        let aligned = resample_time(&sources[i], n_frames)?;
        let projected = project(&aligned, &weights[i])?;
        sum += projected.data();
        rates.push(aligned.frame_rate());
    }
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rate = rates.iter().sum::<f64>() / rates.len() as f64;
    FeatureSequence::new(sum, rate, "fused")
}

/// Single-head cross-attention weights (no bias). The query side lives on
/// the target grid; keys and values come from the source sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttnWeights {
    wq: Array2<f64>,
    wk: Array2<f64>,
    wv: Array2<f64>,
    tag: String,
}

impl CrossAttnWeights {
    pub fn new(wq: Array2<f64>, wk: Array2<f64>, wv: Array2<f64>, tag: impl Into<String>) -> Result<Self> {
        if wq.ncols() == 0 || wq.nrows() == 0 || wv.ncols() == 0 {
            return Err(Error::invalid("empty attention weights"));
        }
        if wk.ncols() != wq.ncols() {
            return Err(Error::dims(
                format!("key width {}", wq.ncols()),
                format!("{}", wk.ncols()),
            ));
        }
        if wk.nrows() != wv.nrows() {
            return Err(Error::dims(
                format!("key/value input dim {}", wk.nrows()),
                format!("{}", wv.nrows()),
            ));
        }
        if wq.iter().chain(wk.iter()).chain(wv.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite attention weight"));
        }
        Ok(CrossAttnWeights { wq, wk, wv, tag: tag.into() })
    }

    pub fn seeded(
        d_query: usize,
        d_source: usize,
        d_attn: usize,
        d_out: usize,
        tag: impl Into<String>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if d_query == 0 || d_source == 0 || d_attn == 0 || d_out == 0 {
            return Err(Error::invalid("attention dims must be positive"));
        }
        let mut init = |d_in: usize, d_col: usize| {
            let normal = Normal::new(0.0, 1.0 / (d_in as f64).sqrt()).expect("std is positive");
            let mut m = Array2::zeros((d_in, d_col));
            for v in m.iter_mut() {
                *v = normal.sample(rng);
            }
            m
        };
        let wq = init(d_query, d_attn);
        let wk = init(d_source, d_attn);
        let wv = init(d_source, d_out);
        CrossAttnWeights::new(wq, wk, wv, tag)
    }

    pub fn d_query(&self) -> usize {
        self.wq.nrows()
    }

    pub fn d_source(&self) -> usize {
        self.wk.nrows()
    }

    pub fn d_attn(&self) -> usize {
        self.wq.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.wv.ncols()
    }

    /// Extra parameters this alignment path carries; resampling carries none.
    pub fn param_count(&self) -> usize {
        self.wq.len() + self.wk.len() + self.wv.len()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }
}

fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// The [T_query x T_source] attention matrix softmax(QK^T / sqrt(d)); every
/// row sums to 1.
pub fn attention_weights(
    queries: &FeatureSequence,
    source: &FeatureSequence,
    w: &CrossAttnWeights,
) -> Result<Array2<f64>> {
    if queries.dim() != w.d_query() {
        return Err(Error::dims(
            format!("{} query dims", w.d_query()),
            format!("{}", queries.dim()),
        ));
    }
    if source.dim() != w.d_source() {
        return Err(Error::dims(
            format!("{} source dims", w.d_source()),
            format!("{}", source.dim()),
        ));
    }
    let q = queries.data().dot(&w.wq);
    let k = source.data().dot(&w.wk);
    let mut scores = q.dot(&k.t());
    scores /= (w.d_attn() as f64).sqrt();
    softmax_rows(&mut scores);
    Ok(scores)
}

/// Attends from each query frame into the source sequence and returns the
/// attention-weighted values on the query grid: softmax(QK^T / sqrt(d)) V.
/// With zero query or key projections the attention is uniform and every
/// output frame is the mean projected source frame.
pub fn cross_attention_align(
    queries: &FeatureSequence,
    source: &FeatureSequence,
    w: &CrossAttnWeights,
) -> Result<FeatureSequence> {
    let attn = attention_weights(queries, source, w)?;
    let v = source.data().dot(&w.wv);
    let out = attn.dot(&v);
    FeatureSequence::new(out, queries.frame_rate(), source.source_tag())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::seeded_rng;
    use ndarray::{array, Axis};

    fn seq(data: Array2<f64>, rate: f64, tag: &str) -> FeatureSequence {
        FeatureSequence::new(data, rate, tag).unwrap()
    }

    fn random_seq(n: usize, d: usize, rate: f64, tag: &str, seed: u64) -> FeatureSequence {
        let mut rng = seeded_rng(seed, tag);
        let mut data = Array2::zeros((n, d));
        for v in data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        seq(data, rate, tag)
    }

    #[test]
    fn resample_to_same_length_is_bit_exact() {
        let s = random_seq(37, 5, 50.0, "a", 1);
        let r = resample_time(&s, 37).unwrap();
        assert_eq!(r.data(), s.data());
        assert_eq!(r.frame_rate(), 50.0);
    }

    #[test]
    fn resample_reproduces_affine_ramps_exactly() {
        let (t_src, d) = (7usize, 3usize);
        let alpha = [0.5, -1.25, 3.0];
        let beta = [1.0, 0.0, -2.0];
        let mut data = Array2::zeros((t_src, d));
        for t in 0..t_src {
            for j in 0..d {
                data[[t, j]] = alpha[j] * t as f64 + beta[j];
            }
        }
        let s = seq(data, 50.0, "ramp");
        for &t_out in &[1usize, 2, 3, 7, 13, 50] {
            let r = resample_time(&s, t_out).unwrap();
            for t in 0..t_out {
                let pos = if t_out == 1 {
                    0.0
                } else {
                    t as f64 * (t_src - 1) as f64 / (t_out - 1) as f64
                };
                for j in 0..d {
                    let expected = alpha[j] * pos + beta[j];
                    assert!(
                        (r.data()[[t, j]] - expected).abs() < 1e-9,
                        "t_out={t_out} t={t} j={j}"
                    );
                }
            }
        }
    }

    #[test]
    fn resample_never_overshoots() {
        let s = random_seq(23, 4, 50.0, "r", 2);
        let (lo, hi) = s
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        for &t_out in &[1usize, 5, 22, 24, 100, 311] {
            let r = resample_time(&s, t_out).unwrap();
            for &v in r.data().iter() {
                assert!(v >= lo && v <= hi);
            }
        }
    }

    #[test]
    fn resample_scales_frame_rate_by_length_ratio() {
        let s = random_seq(100, 2, 50.0, "r", 3);
        let r = resample_time(&s, 200).unwrap();
        assert!((r.frame_rate() - 100.0).abs() < 1e-12);
        assert!((r.duration_seconds() - s.duration_seconds()).abs() < 1e-12);
    }

    #[test]
    fn single_frame_target_takes_the_first_frame() {
        let s = seq(array![[1.0, 2.0], [5.0, 6.0], [9.0, 10.0]], 50.0, "a");
        let r = resample_time(&s, 1).unwrap();
        assert_eq!(r.data().row(0).to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn projection_applies_weights_and_bias() {
        let w = ProjectionWeights::new(
            array![[1.0, 0.0], [0.0, 2.0]],
            array![10.0, 20.0],
            "proj:a",
        )
        .unwrap();
        let s = seq(array![[1.0, 1.0], [2.0, 3.0]], 50.0, "a");
        let p = project(&s, &w).unwrap();
        assert_eq!(p.data(), &array![[11.0, 22.0], [12.0, 26.0]]);
        assert_eq!(p.frame_rate(), 50.0);
    }

    #[test]
    fn projection_round_trips_through_feature() {
        let mut rng = seeded_rng(5, "proj:x");
        let w = ProjectionWeights::seeded(6, 4, "proj:x", &mut rng).unwrap();
        let back = ProjectionWeights::from_feature(&w.to_feature()).unwrap();
        assert_eq!(back, w);
        assert_eq!(w.param_count(), 7 * 4);
    }

    #[test]
    fn projection_rejects_dim_mismatch() {
        let mut rng = seeded_rng(5, "proj:x");
        let w = ProjectionWeights::seeded(6, 4, "proj:x", &mut rng).unwrap();
        let s = random_seq(3, 5, 50.0, "x", 4);
        assert!(matches!(
            project(&s, &w),
            Err(crate::error::Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fuse_matches_block_concat_projection() {
        let mut rng = seeded_rng(11, "fuse");
        let sources = vec![
            random_seq(20, 3, 25.0, "a", 20),
            random_seq(40, 5, 50.0, "b", 21),
            random_seq(33, 2, 41.25, "c", 22),
        ];
        let weights: Vec<ProjectionWeights> = sources
            .iter()
            .map(|s| ProjectionWeights::seeded(s.dim(), 6, format!("proj:{}", s.source_tag()), &mut rng).unwrap())
            .collect();
        let t_out = 48;
        let fused = fuse_add(&sources, &weights, t_out).unwrap();

        // Oracle: concatenate the resampled sources and apply one stacked map.
        let resampled: Vec<FeatureSequence> =
            sources.iter().map(|s| resample_time(s, t_out).unwrap()).collect();
        for t in 0..t_out {
            for k in 0..6 {
                let mut acc = 0.0;
                for (s, w) in resampled.iter().zip(&weights) {
                    for j in 0..s.dim() {
                        acc += s.data()[[t, j]] * w.matrix()[[j, k]];
                    }
                    acc += w.bias()[k];
                }
                assert!((fused.data()[[t, k]] - acc).abs() <= 1e-6, "t={t} k={k}");
            }
        }
        assert_eq!(fused.source_tag(), "fused");
    }

    #[test]
    fn fuse_is_invariant_to_source_order() {
        let mut rng = seeded_rng(13, "fuse");
        let a = random_seq(10, 3, 25.0, "a", 30);
        let b = random_seq(20, 4, 50.0, "b", 31);
        let wa = ProjectionWeights::seeded(3, 5, "proj:a", &mut rng).unwrap();
        let wb = ProjectionWeights::seeded(4, 5, "proj:b", &mut rng).unwrap();
        let f1 = fuse_add(&[a.clone(), b.clone()], &[wa.clone(), wb.clone()], 15).unwrap();
        let f2 = fuse_add(&[b, a], &[wb, wa], 15).unwrap();
        assert_eq!(f1.data(), f2.data());
        assert_eq!(f1.frame_rate(), f2.frame_rate());
    }

    #[test]
    fn fuse_validates_widths() {
        let mut rng = seeded_rng(13, "fuse");
        let a = random_seq(10, 3, 25.0, "a", 30);
        let wa = ProjectionWeights::seeded(3, 5, "proj:a", &mut rng).unwrap();
        let wb = ProjectionWeights::seeded(3, 6, "proj:b", &mut rng).unwrap();
        assert!(fuse_add(&[a.clone(), a.clone()], &[wa.clone(), wb], 10).is_err());
        assert!(fuse_add(&[], &[], 10).is_err());
        assert!(fuse_add(&[a.clone()], &[wa.clone(), wa.clone()], 10).is_err());
    }

    #[test]
    fn zero_queries_give_uniform_attention() {
        let mut rng = seeded_rng(17, "attn");
        let kv = random_seq(9, 4, 50.0, "src", 40);
        let queries = seq(Array2::zeros((5, 3)), 100.0, "grid");
        let mut w = CrossAttnWeights::seeded(3, 4, 8, 6, "attn:src", &mut rng).unwrap();
        w.wq.fill(0.0);
        let out = cross_attention_align(&queries, &kv, &w).unwrap();
        let v = kv.data().dot(&w.wv);
        let mean = v.sum_axis(Axis(0)) / v.nrows() as f64;
        for t in 0..out.n_frames() {
            for (got, want) in out.frame(t).iter().zip(mean.iter()) {
                assert!((got - want).abs() < 1e-12);
            }
        }
        assert_eq!(out.frame_rate(), 100.0);
        assert_eq!(out.dim(), 6);
    }

    #[test]
    fn attention_output_lands_on_the_query_grid() {
        let mut rng = seeded_rng(19, "attn");
        let kv = random_seq(31, 7, 50.0, "src", 41);
        let q = random_seq(12, 5, 100.0, "grid", 42);
        let w = CrossAttnWeights::seeded(5, 7, 16, 6, "attn:src", &mut rng).unwrap();
        let out = cross_attention_align(&q, &kv, &w).unwrap();
        assert_eq!(out.n_frames(), 12);
        assert_eq!(out.dim(), 6);
        assert_eq!(out.source_tag(), "src");
        assert_eq!(w.param_count(), 5 * 16 + 7 * 16 + 7 * 6);
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = seeded_rng(23, "attn");
        let kv = random_seq(17, 6, 50.0, "src", 50);
        let q = random_seq(9, 4, 100.0, "grid", 51);
        let w = CrossAttnWeights::seeded(4, 6, 12, 5, "attn:src", &mut rng).unwrap();
        let attn = attention_weights(&q, &kv, &w).unwrap();
        assert_eq!(attn.nrows(), 9);
        assert_eq!(attn.ncols(), 17);
        for row in attn.rows() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "row sum {sum}");
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn attention_matches_a_naive_three_loop_oracle() {
        let mut rng = seeded_rng(29, "attn");
        let kv = random_seq(11, 5, 50.0, "src", 52);
        let q = random_seq(7, 3, 100.0, "grid", 53);
        let w = CrossAttnWeights::seeded(3, 5, 4, 6, "attn:src", &mut rng).unwrap();
        let out = cross_attention_align(&q, &kv, &w).unwrap();

        let matmul = |x: &Array2<f64>, y: &Array2<f64>| {
            let mut r = Array2::<f64>::zeros((x.nrows(), y.ncols()));
            for i in 0..x.nrows() {
                for j in 0..y.ncols() {
                    for k in 0..x.ncols() {
                        r[[i, j]] += x[[i, k]] * y[[k, j]];
                    }
                }
            }
            r
        };
        let qm = matmul(q.data(), &w.wq);
        let km = matmul(kv.data(), &w.wk);
        let vm = matmul(kv.data(), &w.wv);
        for t in 0..7 {
            let logits: Vec<f64> = (0..11)
                .map(|s| {
                    (0..4).map(|k| qm[[t, k]] * km[[s, k]]).sum::<f64>() / (4f64).sqrt()
                })
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for j in 0..6 {
                let want: f64 = (0..11).map(|s| exps[s] / z * vm[[s, j]]).sum();
                assert!((out.data()[[t, j]] - want).abs() < 1e-6, "t={t} j={j}");
            }
        }
    }

    #[test]
    fn single_frame_source_copies_its_value_row() {
        let mut rng = seeded_rng(31, "attn");
        let kv = random_seq(1, 4, 50.0, "src", 54);
        let q = random_seq(6, 3, 100.0, "grid", 55);
        let w = CrossAttnWeights::seeded(3, 4, 8, 5, "attn:src", &mut rng).unwrap();
        let out = cross_attention_align(&q, &kv, &w).unwrap();
        let v = kv.data().dot(&w.wv);
        for t in 0..6 {
            for (got, want) in out.frame(t).iter().zip(v.row(0).iter()) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nearest_kernel_snaps_and_sinc_interpolates() {
        let s = seq(array![[0.0], [1.0], [2.0], [3.0]], 50.0, "a");
        let near = resample_with(&s, 2, ResampleKernel::Nearest).unwrap();
        assert_eq!(near.data(), &array![[0.0], [3.0]]);
        // Sinc on a constant signal reproduces the constant anywhere.
        let flat = seq(Array2::from_elem((10, 2), 4.25), 50.0, "flat");
        let sinc = resample_with(&flat, 23, ResampleKernel::Sinc).unwrap();
        for &v in sinc.data().iter() {
            assert!((v - 4.25).abs() < 1e-9);
        }
        assert!("linear".parse::<ResampleKernel>().unwrap() == ResampleKernel::Linear);
        assert!("cubic".parse::<ResampleKernel>().is_err());
    }

    #[test]
    fn attention_validates_dims() {
        let mut rng = seeded_rng(19, "attn");
        let kv = random_seq(31, 7, 50.0, "src", 41);
        let q = random_seq(12, 5, 100.0, "grid", 42);
        let w = CrossAttnWeights::seeded(4, 7, 16, 6, "attn:src", &mut rng).unwrap();
        assert!(cross_attention_align(&q, &kv, &w).is_err());
        let w = CrossAttnWeights::seeded(5, 8, 16, 6, "attn:src", &mut rng).unwrap();
        assert!(cross_attention_align(&q, &kv, &w).is_err());
    }
}
