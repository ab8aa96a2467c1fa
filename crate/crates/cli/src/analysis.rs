//! Per-utterance analysis and condition assembly shared by fit and convert.

use std::path::Path;

use dsff_core::align_fuse::{fuse_add, resample_time, ProjectionWeights};
use dsff_core::audio_io::{log_mel, read_wav, stft_magnitudes, AudioBuffer};
use dsff_core::conditioning::{assemble_condition, speaker_frames, Condition, SpeakerTable};
use dsff_core::config::PipelineConfig;
use dsff_core::error::{Error, Result};
use dsff_core::feature_store::{read_feature, FeatureSequence};
use dsff_core::prosody::{
    embed_quantized, extract_energy, extract_f0, quantize_energy, quantize_f0, EmbeddingTable,
    EnergyTrack, F0Track, Quantizer,
};

use crate::weights::Weights;

pub struct Analysis {
    pub mel: FeatureSequence,
    pub f0: F0Track,
    pub energy: EnergyTrack,
}

pub fn read_audio_checked(path: &Path, cfg: &PipelineConfig) -> Result<AudioBuffer> {
    let audio = read_wav(path)?;
    if audio.sample_rate() != cfg.audio.sample_rate {
        return Err(Error::invalid(format!(
            "{}: sample rate {} does not match configured {}",
            path.display(),
            audio.sample_rate(),
            cfg.audio.sample_rate
        )));
    }
    Ok(audio)
}

pub fn analyze_audio(path: &Path, cfg: &PipelineConfig) -> Result<Analysis> {
    let audio = read_audio_checked(path, cfg)?;
    let frames = stft_magnitudes(&audio, &cfg.audio.stft()?)?;
    let mel = log_mel(
        &frames,
        cfg.audio.n_mels,
        cfg.audio.fmin,
        cfg.audio.fmax,
        cfg.audio.mel_floor,
    )?;
    let energy = extract_energy(&frames);
    let f0 = extract_f0(&audio, &cfg.f0.options())?;
    Ok(Analysis { mel, f0, energy })
}

pub fn read_sources(paths: &[std::path::PathBuf]) -> Result<Vec<FeatureSequence>> {
    let mut sources = Vec::with_capacity(paths.len());
    for p in paths {
        sources.push(read_feature(p)?);
    }
    for (i, a) in sources.iter().enumerate() {
        for b in &sources[i + 1..] {
            if a.source_tag() == b.source_tag() {
                return Err(Error::invalid(format!(
                    "duplicate source tag {:?} within one utterance",
                    a.source_tag()
                )));
            }
        }
    }
    Ok(sources)
}

pub fn projection_for<'a>(
    projections: &'a [ProjectionWeights],
    tag: &str,
) -> Result<&'a ProjectionWeights> {
    projections.iter().find(|p| p.tag() == tag).ok_or_else(|| {
        Error::invalid(format!(
            "no projection fitted for source tag {tag:?} (have: {})",
            projections.iter().map(|p| p.tag()).collect::<Vec<_>>().join(", ")
        ))
    })
}

/// Everything needed to turn analyzed parts into a condition stream.
pub struct Conditioner<'a> {
    pub projections: &'a [ProjectionWeights],
    pub condenc: &'a ProjectionWeights,
    pub f0_table: &'a EmbeddingTable,
    pub energy_table: &'a EmbeddingTable,
    pub speakers: &'a SpeakerTable,
    pub f0_quant: &'a Quantizer,
    pub energy_quant: &'a Quantizer,
}

impl Conditioner<'_> {
    pub fn assemble(
        &self,
        sources: &[FeatureSequence],
        f0: &F0Track,
        energy: &EnergyTrack,
        speaker: &str,
        n_frames: usize,
        frame_rate: f64,
    ) -> Result<Condition> {
        let projs: Vec<ProjectionWeights> = sources
            .iter()
            .map(|s| projection_for(self.projections, s.source_tag()).cloned())
            .collect::<Result<_>>()?;
        let semantic = fuse_add(sources, &projs, n_frames)?;
        let f0_emb = resample_time(
            &embed_quantized(&quantize_f0(f0, self.f0_quant), self.f0_table)?,
            n_frames,
        )?;
        let energy_emb = resample_time(
            &embed_quantized(&quantize_energy(energy, self.energy_quant), self.energy_table)?,
            n_frames,
        )?;
        let spk = speaker_frames(self.speakers, speaker, n_frames, frame_rate)?;
        assemble_condition(&semantic, &f0_emb, &energy_emb, &spk, self.condenc)
    }
}

impl Weights {
    pub fn conditioner(&self) -> Conditioner<'_> {
        Conditioner {
            projections: &self.projections,
            condenc: &self.condenc,
            f0_table: &self.f0_table,
            energy_table: &self.energy_table,
            speakers: &self.speakers,
            f0_quant: &self.f0_quant,
            energy_quant: &self.energy_quant,
        }
    }
}
