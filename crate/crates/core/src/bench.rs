//! RTX/RTF benchmarking of the two alignment strategies.
//!
//! RTX = training-audio seconds per wall second spent fitting (higher is
//! better); RTF = wall seconds per audio second of inference (lower is
//! better). Both paths run end to end: align/fuse, condition assembly,
//! decode (RTF) or ridge fit (RTX). Timings come from a monotonic clock,
//! the first pass is an untimed warm-up, and the reported time is the
//! median of the timed runs. Audio-duration accounting always comes from
//! workload metadata, never from timing.

use std::time::{Duration, Instant};

use ndarray::Array2;
use rayon::prelude::*;

use crate::align_fuse::{cross_attention_align, fuse_add, CrossAttnWeights, ProjectionWeights};
use crate::conditioning::{assemble_condition, Condition};
use crate::config::seeded_rng;
use crate::decoder::{decode, fit_ridge_relative, DecoderWeights, PairedDataset};
use crate::error::{Error, Result};
use crate::feature_store::FeatureSequence;
use crate::metrics::{mcd, MetricReport};
use crate::synth::{random_features, smooth_features};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignStrategy {
    Resampling,
    CrossAttention,
}

impl std::fmt::Display for AlignStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlignStrategy::Resampling => write!(f, "resampling"),
            AlignStrategy::CrossAttention => write!(f, "cross-attention"),
        }
    }
}

impl std::str::FromStr for AlignStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "resampling" | "resample" => Ok(AlignStrategy::Resampling),
            "cross-attention" | "cross_attention" | "xattn" => Ok(AlignStrategy::CrossAttention),
            other => Err(Error::invalid(format!(
                "unknown alignment strategy {other:?} (expected resampling or cross-attention)"
            ))),
        }
    }
}

/// Shape of a synthetic benchmark workload. `reference()` mirrors the
/// default comparison setup: 20 utterances of 10 s, three sources at
/// 25/50/50 frames per second with dims 512/1024/768, fused on a 100 fps
/// target grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub n_utterances: usize,
    pub utterance_seconds: f64,
    pub source_frame_rates: Vec<f64>,
    pub source_dims: Vec<usize>,
    pub target_frame_rate: f64,
    pub latent_dim: usize,
    pub attn_dim: usize,
    pub n_mels: usize,
    pub lambda_rel: f64,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn reference() -> Self {
        WorkloadSpec {
            n_utterances: 20,
            utterance_seconds: 10.0,
            source_frame_rates: vec![25.0, 50.0, 50.0],
            source_dims: vec![512, 1024, 768],
            target_frame_rate: 100.0,
            latent_dim: 384,
            attn_dim: 384,
            n_mels: 80,
            lambda_rel: 1e-3,
            seed: 17,
        }
    }

    /// A small workload for quick runs and tests; same structure, far fewer
    /// frames.
    pub fn small(seed: u64) -> Self {
        WorkloadSpec {
            n_utterances: 4,
            utterance_seconds: 2.0,
            source_frame_rates: vec![25.0, 50.0, 50.0],
            source_dims: vec![48, 64, 56],
            target_frame_rate: 100.0,
            latent_dim: 32,
            attn_dim: 32,
            n_mels: 20,
            lambda_rel: 1e-3,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_utterances == 0 {
            return Err(Error::invalid("workload needs at least one utterance"));
        }
        if !(self.utterance_seconds > 0.0) || !self.utterance_seconds.is_finite() {
            return Err(Error::invalid("utterance duration must be positive"));
        }
        if self.source_frame_rates.is_empty()
            || self.source_frame_rates.len() != self.source_dims.len()
        {
            return Err(Error::invalid(
                "source frame rates and dims must be nonempty and of equal length",
            ));
        }
        if self.source_frame_rates.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::invalid("source frame rates must be positive"));
        }
        if self.source_dims.iter().any(|d| *d == 0) {
            return Err(Error::invalid("source dims must be positive"));
        }
        if !(self.target_frame_rate > 0.0) || !self.target_frame_rate.is_finite() {
            return Err(Error::invalid("target frame rate must be positive"));
        }
        if self.latent_dim == 0 || self.attn_dim == 0 {
            return Err(Error::invalid("latent and attention dims must be positive"));
        }
        if self.n_mels < crate::metrics::CEPSTRAL_ORDER {
            return Err(Error::invalid(format!(
                "workload needs at least {} mel bands for quality scoring",
                crate::metrics::CEPSTRAL_ORDER
            )));
        }
        if !(self.lambda_rel > 0.0) {
            return Err(Error::invalid("lambda_rel must be positive"));
        }
        let frames = (self.utterance_seconds * self.target_frame_rate).round();
        if frames < 2.0 {
            return Err(Error::invalid(
                "workload too short: fewer than two target frames per utterance",
            ));
        }
        Ok(())
    }
}

/// What was measured, recorded from input metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadDesc {
    pub n_utterances: usize,
    pub total_duration_seconds: f64,
    pub source_dims: Vec<usize>,
    pub source_frame_rates: Vec<f64>,
    pub target_frame_rate: f64,
}

#[derive(Debug, Clone)]
pub struct BenchUtterance {
    pub sources: Vec<FeatureSequence>,
    pub mel_target: FeatureSequence,
    pub f0_embedding: FeatureSequence,
    pub energy_embedding: FeatureSequence,
    pub speaker: FeatureSequence,
    pub duration_seconds: f64,
}

/// A fully materialized workload: synthetic features plus every weight both
/// strategies need, all seeded. The same workload instance is reused across
/// strategies so comparisons see identical inputs.
#[derive(Debug, Clone)]
pub struct BenchWorkload {
    pub spec: WorkloadSpec,
    pub utterances: Vec<BenchUtterance>,
    pub projections: Vec<ProjectionWeights>,
    pub attentions: Vec<CrossAttnWeights>,
    pub condenc: ProjectionWeights,
    pub decoder: DecoderWeights,
}

impl BenchWorkload {
    pub fn generate(spec: &WorkloadSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.latent_dim;
        let t_target = (spec.utterance_seconds * spec.target_frame_rate).round() as usize;

        let mut wrng = seeded_rng(spec.seed, "bench:weights");
        let mut projections = Vec::with_capacity(spec.source_dims.len());
        let mut attentions = Vec::with_capacity(spec.source_dims.len());
        for (i, &dim) in spec.source_dims.iter().enumerate() {
            let tag = format!("src{i}");
            projections.push(ProjectionWeights::seeded(dim, d, &tag, &mut wrng)?);
            attentions.push(CrossAttnWeights::seeded(d, dim, spec.attn_dim, d, &tag, &mut wrng)?);
        }
        let condenc = ProjectionWeights::seeded(d, d, "condenc", &mut wrng)?;
        let decoder = {
            let w = ProjectionWeights::seeded(d, spec.n_mels, "dec", &mut wrng)?;
            DecoderWeights::new(w.matrix().clone(), w.bias().clone(), 0.0)?
        };

        let mut frng = seeded_rng(spec.seed, "bench:features");
        let mut utterances = Vec::with_capacity(spec.n_utterances);
        for u in 0..spec.n_utterances {
            let mut sources = Vec::with_capacity(spec.source_dims.len());
            for (i, (&dim, &rate)) in spec.source_dims.iter().zip(&spec.source_frame_rates).enumerate() {
                let t_src = (spec.utterance_seconds * rate).round().max(2.0) as usize;
                sources.push(random_features(t_src, dim, rate, &format!("src{i}"), &mut frng)?);
            }
            // Target mel loosely tracks the sources so the ridge fit has
            // structure to find; smooth drift plus a cheap echo of each
            // source's leading dims.
            let mut mel = smooth_features(
                t_target,
                spec.n_mels,
                spec.target_frame_rate,
                "mel",
                &mut frng,
            )?
            .into_data();
            for src in &sources {
                let k = src.dim().min(4);
                let t_src = src.n_frames();
                for t in 0..t_target {
                    let pos = if t_target == 1 {
                        0.0
                    } else {
                        t as f64 * (t_src - 1) as f64 / (t_target - 1) as f64
                    };
                    let j = pos.round() as usize;
                    for c in 0..k {
                        mel[[t, c % spec.n_mels]] += 0.1 * src.data()[[j, c]];
                    }
                }
            }
            let mel_target = FeatureSequence::new(mel, spec.target_frame_rate, "mel")?;

            let f0_embedding =
                smooth_features(t_target, d, spec.target_frame_rate, "embed:f0", &mut frng)?;
            let energy_embedding =
                smooth_features(t_target, d, spec.target_frame_rate, "embed:energy", &mut frng)?;
            let mut spk_row = random_features(1, d, spec.target_frame_rate, "speaker", &mut frng)?;
            spk_row = FeatureSequence::new(
                Array2::from_shape_fn((t_target, d), |(_, j)| spk_row.data()[[0, j]]),
                spec.target_frame_rate,
                "speaker",
            )?;
            let _ = u;
            utterances.push(BenchUtterance {
                sources,
                mel_target,
                f0_embedding,
                energy_embedding,
                speaker: spk_row,
                duration_seconds: spec.utterance_seconds,
            });
        }

        Ok(BenchWorkload {
            spec: spec.clone(),
            utterances,
            projections,
            attentions,
            condenc,
            decoder,
        })
    }

    pub fn total_duration_seconds(&self) -> f64 {
        self.utterances.iter().map(|u| u.duration_seconds).sum()
    }

    pub fn desc(&self) -> WorkloadDesc {
        WorkloadDesc {
            n_utterances: self.utterances.len(),
            total_duration_seconds: self.total_duration_seconds(),
            source_dims: self.spec.source_dims.clone(),
            source_frame_rates: self.spec.source_frame_rates.clone(),
            target_frame_rate: self.spec.target_frame_rate,
        }
    }

    /// Learned parameters a strategy adds on top of the shared pipeline.
    /// Resampling is parameter-free; cross-attention brings its projection
    /// triples.
    pub fn extra_parameters(&self, strategy: AlignStrategy) -> usize {
        match strategy {
            AlignStrategy::Resampling => 0,
            AlignStrategy::CrossAttention => {
                self.attentions.iter().map(|a| a.param_count()).sum()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    /// Timed runs entering the median; the warm-up pass is extra.
    pub runs: usize,
    /// Time utterances on per-utterance clocks across threads instead of one
    /// sequential wall clock.
    pub parallel: bool,
    /// Artificial per-pass delay, for testing the harness itself.
    pub injected_delay_seconds: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            runs: 3,
            parallel: false,
            injected_delay_seconds: 0.0,
        }
    }
}

impl BenchOptions {
    pub fn validate(&self) -> Result<()> {
        if self.runs < 3 {
            return Err(Error::invalid(format!(
                "medians need at least 3 timed runs, got {}",
                self.runs
            )));
        }
        if !(self.injected_delay_seconds >= 0.0) {
            return Err(Error::invalid("injected delay must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub strategy: AlignStrategy,
    /// Training-audio seconds per wall second; present for training runs.
    pub rtx: Option<f64>,
    /// Wall seconds per audio second; present for inference runs.
    pub rtf: Option<f64>,
    /// Median wall time of the timed runs, in seconds.
    pub wall_seconds: f64,
    pub runs: usize,
    pub extra_parameters: usize,
    pub workload: WorkloadDesc,
}

fn build_condition(
    w: &BenchWorkload,
    utt: &BenchUtterance,
    strategy: AlignStrategy,
) -> Result<Condition> {
    let t = utt.mel_target.n_frames();
    let semantic = match strategy {
        AlignStrategy::Resampling => fuse_add(&utt.sources, &w.projections, t)?,
        AlignStrategy::CrossAttention => {
            // Queries come from what the target grid already knows: the
            // prosody embeddings plus the speaker frames.
            let q = utt.f0_embedding.data() + utt.energy_embedding.data() + utt.speaker.data();
            let queries = FeatureSequence::new(q, w.spec.target_frame_rate, "query")?;
            let mut sum: Option<Array2<f64>> = None;
            for (src, attn) in utt.sources.iter().zip(&w.attentions) {
                let aligned = cross_attention_align(&queries, src, attn)?;
                sum = Some(match sum {
                    None => aligned.into_data(),
                    Some(acc) => acc + aligned.data(),
                });
            }
            FeatureSequence::new(sum.expect("workload has sources"), w.spec.target_frame_rate, "fused")?
        }
    };
    assemble_condition(
        &semantic,
        &utt.f0_embedding,
        &utt.energy_embedding,
        &utt.speaker,
        &w.condenc,
    )
}

fn inject_delay(opts: &BenchOptions) {
    if opts.injected_delay_seconds > 0.0 {
        std::thread::sleep(Duration::from_secs_f64(opts.injected_delay_seconds));
    }
}

fn convert_one(w: &BenchWorkload, utt: &BenchUtterance, strategy: AlignStrategy) -> Result<f64> {
    let cond = build_condition(w, utt, strategy)?;
    let out = decode(&cond, &w.decoder)?;
    Ok(out.data()[[out.n_frames() - 1, 0]])
}

fn conversion_pass(
    w: &BenchWorkload,
    strategy: AlignStrategy,
    opts: &BenchOptions,
) -> Result<Duration> {
    if opts.parallel {
        let per_utt: Vec<Result<Duration>> = w
            .utterances
            .par_iter()
            .map(|utt| {
                let clock = Instant::now();
                let keep = convert_one(w, utt, strategy)?;
                std::hint::black_box(keep);
                Ok(clock.elapsed())
            })
            .collect();
        let mut total = Duration::ZERO;
        for d in per_utt {
            total += d?;
        }
        let clock = Instant::now();
        inject_delay(opts);
        Ok(total + clock.elapsed())
    } else {
        let clock = Instant::now();
        for utt in &w.utterances {
            let keep = convert_one(w, utt, strategy)?;
            std::hint::black_box(keep);
        }
        inject_delay(opts);
        Ok(clock.elapsed())
    }
}

fn training_pass(
    w: &BenchWorkload,
    strategy: AlignStrategy,
    opts: &BenchOptions,
) -> Result<(Duration, DecoderWeights)> {
    let prep = |utt: &BenchUtterance| -> Result<(Condition, FeatureSequence)> {
        Ok((build_condition(w, utt, strategy)?, utt.mel_target.clone()))
    };
    if opts.parallel {
        let per_utt: Vec<Result<(Duration, (Condition, FeatureSequence))>> = w
            .utterances
            .par_iter()
            .map(|utt| {
                let clock = Instant::now();
                let pair = prep(utt)?;
                Ok((clock.elapsed(), pair))
            })
            .collect();
        let mut total = Duration::ZERO;
        let mut pairs = Vec::with_capacity(w.utterances.len());
        for r in per_utt {
            let (d, pair) = r?;
            total += d;
            pairs.push(pair);
        }
        let clock = Instant::now();
        let fitted = fit_ridge_relative(&PairedDataset::new(pairs)?, w.spec.lambda_rel)?;
        inject_delay(opts);
        Ok((total + clock.elapsed(), fitted))
    } else {
        let clock = Instant::now();
        let pairs: Result<Vec<_>> = w.utterances.iter().map(prep).collect();
        let fitted = fit_ridge_relative(&PairedDataset::new(pairs?)?, w.spec.lambda_rel)?;
        inject_delay(opts);
        Ok((clock.elapsed(), fitted))
    }
}

fn median_seconds(mut times: Vec<Duration>) -> f64 {
    times.sort();
    let n = times.len();
    if n % 2 == 1 {
        times[n / 2].as_secs_f64()
    } else {
        (times[n / 2 - 1].as_secs_f64() + times[n / 2].as_secs_f64()) / 2.0
    }
}

/// Times the full conversion path (align/fuse, condition assembly, decode)
/// and reports wall seconds per audio second.
pub fn measure_rtf(
    w: &BenchWorkload,
    strategy: AlignStrategy,
    opts: &BenchOptions,
) -> Result<BenchReport> {
    opts.validate()?;
    if w.utterances.is_empty() {
        return Err(Error::invalid("empty workload"));
    }
    let d_infer = w.total_duration_seconds();
    conversion_pass(w, strategy, opts)?; // warm-up, discarded
    let mut times = Vec::with_capacity(opts.runs);
    for _ in 0..opts.runs {
        times.push(conversion_pass(w, strategy, opts)?);
    }
    let wall = median_seconds(times);
    Ok(BenchReport {
        strategy,
        rtx: None,
        rtf: Some(wall / d_infer),
        wall_seconds: wall,
        runs: opts.runs,
        extra_parameters: w.extra_parameters(strategy),
        workload: w.desc(),
    })
}

/// Times one full decoder fit (feature prep via the strategy plus the ridge
/// solve) and reports training-audio seconds per wall second. Also returns
/// the decoder fitted in the last timed pass so quality can be scored
/// without redoing the work.
pub fn measure_rtx(
    w: &BenchWorkload,
    strategy: AlignStrategy,
    opts: &BenchOptions,
) -> Result<(BenchReport, DecoderWeights)> {
    opts.validate()?;
    if w.utterances.is_empty() {
        return Err(Error::invalid("empty workload"));
    }
    let d_train = w.total_duration_seconds();
    training_pass(w, strategy, opts)?; // warm-up, discarded
    let mut times = Vec::with_capacity(opts.runs);
    let mut fitted = None;
    for _ in 0..opts.runs {
        let (t, weights) = training_pass(w, strategy, opts)?;
        times.push(t);
        fitted = Some(weights);
    }
    let wall = median_seconds(times);
    let report = BenchReport {
        strategy,
        rtx: Some(d_train / wall),
        rtf: None,
        wall_seconds: wall,
        runs: opts.runs,
        extra_parameters: w.extra_parameters(strategy),
        workload: w.desc(),
    };
    Ok((report, fitted.expect("at least three timed runs")))
}

#[derive(Debug, Clone)]
pub struct StrategyOutcome {
    pub strategy: AlignStrategy,
    pub rtf: BenchReport,
    pub rtx: BenchReport,
    /// Mean conversion quality over the workload using the decoder fitted by
    /// this strategy's training pass; carries rtx/rtf too.
    pub quality: MetricReport,
}

#[derive(Debug, Clone)]
pub struct AlignmentComparison {
    pub resampling: StrategyOutcome,
    pub cross_attention: StrategyOutcome,
}

impl AlignmentComparison {
    pub fn outcomes(&self) -> [&StrategyOutcome; 2] {
        [&self.resampling, &self.cross_attention]
    }

    /// MCD(cross-attention) − MCD(resampling); positive means resampling
    /// converted more accurately.
    pub fn mcd_delta(&self) -> Option<f64> {
        Some(self.cross_attention.quality.mcd? - self.resampling.quality.mcd?)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:<16} {:>10} {:>10} {:>10} {:>14}\n",
            "strategy", "rtx", "rtf", "mcd_db", "extra_params"
        ));
        for o in self.outcomes() {
            s.push_str(&format!(
                "{:<16} {:>10.2} {:>10.4} {:>10.4} {:>14}\n",
                o.strategy.to_string(),
                o.rtx.rtx.unwrap_or(f64::NAN),
                o.rtf.rtf.unwrap_or(f64::NAN),
                o.quality.mcd.unwrap_or(f64::NAN),
                o.rtf.extra_parameters,
            ));
        }
        s
    }

    pub fn csv(&self) -> String {
        let mut s = String::from(
            "strategy,rtx,rtf,wall_train_s,wall_infer_s,mcd_db,extra_params,n_utterances,total_duration_s\n",
        );
        for o in self.outcomes() {
            s.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{:.3}\n",
                o.strategy,
                o.rtx.rtx.unwrap_or(f64::NAN),
                o.rtf.rtf.unwrap_or(f64::NAN),
                o.rtx.wall_seconds,
                o.rtf.wall_seconds,
                o.quality.mcd.unwrap_or(f64::NAN),
                o.rtf.extra_parameters,
                o.rtf.workload.n_utterances,
                o.rtf.workload.total_duration_seconds,
            ));
        }
        s
    }
}

fn score_strategy(
    w: &BenchWorkload,
    strategy: AlignStrategy,
    opts: &BenchOptions,
) -> Result<StrategyOutcome> {
    let rtf = measure_rtf(w, strategy, opts)?;
    let (rtx, fitted) = measure_rtx(w, strategy, opts)?;
    let mut mcds = Vec::with_capacity(w.utterances.len());
    for utt in &w.utterances {
        let cond = build_condition(w, utt, strategy)?;
        let decoded = decode(&cond, &fitted)?;
        mcds.push(mcd(&decoded, &utt.mel_target, false)?);
    }
    let quality = MetricReport {
        mcd: Some(mcds.iter().sum::<f64>() / mcds.len() as f64),
        rtx: rtx.rtx,
        rtf: rtf.rtf,
        ..MetricReport::default()
    };
    Ok(StrategyOutcome {
        strategy,
        rtf,
        rtx,
        quality,
    })
}

/// Runs both strategies over one identical generated workload and reports
/// efficiency plus conversion quality side by side.
pub fn compare_alignment(spec: &WorkloadSpec, opts: &BenchOptions) -> Result<AlignmentComparison> {
    let w = BenchWorkload::generate(spec)?;
    Ok(AlignmentComparison {
        resampling: score_strategy(&w, AlignStrategy::Resampling, opts)?,
        cross_attention: score_strategy(&w, AlignStrategy::CrossAttention, opts)?,
    })
}
