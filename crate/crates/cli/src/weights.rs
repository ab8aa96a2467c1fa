//! On-disk layout of a fitted weights directory.
//!
//! ```text
//! weights/
//!   config.toml              effective config the fit ran with
//!   proj_<tag>.dsff          one projection per source tag
//!   condenc.dsff             condition encoder
//!   embed_f0.dsff            256-row F0 bin embedding table
//!   embed_energy.dsff        256-row energy bin embedding table
//!   speakers.dsff            speaker embedding rows
//!   speakers.names.txt       row order of speakers.dsff, one name per line
//!   speaker_f0_medians.txt   name|median_hz per speaker
//!   quantizers.txt           name|scale|lo|hi per quantizer
//!   decoder.dsff             fitted ridge decoder
//! ```
//!
//! Filenames only aid discovery; the tag inside each DSFF file is
//! authoritative.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dsff_core::align_fuse::ProjectionWeights;
use dsff_core::conditioning::SpeakerTable;
use dsff_core::config::PipelineConfig;
use dsff_core::decoder::DecoderWeights;
use dsff_core::error::{Error, Result};
use dsff_core::feature_store::{read_feature, write_feature};
use dsff_core::prosody::{EmbeddingTable, QuantScale, Quantizer};

pub struct Weights {
    /// Sorted by source tag; fusion order.
    pub projections: Vec<ProjectionWeights>,
    pub condenc: ProjectionWeights,
    pub f0_table: EmbeddingTable,
    pub energy_table: EmbeddingTable,
    pub speakers: SpeakerTable,
    /// Per-speaker voiced-F0 medians from the training corpus.
    pub medians: BTreeMap<String, f64>,
    pub f0_quant: Quantizer,
    pub energy_quant: Quantizer,
    pub decoder: DecoderWeights,
}

fn sanitize(tag: &str) -> String {
    tag.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn scale_name(s: QuantScale) -> &'static str {
    match s {
        QuantScale::Linear => "linear",
        QuantScale::Log => "log",
    }
}

fn parse_scale(s: &str) -> Result<QuantScale> {
    match s {
        "linear" => Ok(QuantScale::Linear),
        "log" => Ok(QuantScale::Log),
        other => Err(Error::format(format!("unknown quantizer scale {other:?}"))),
    }
}

impl Weights {
    pub fn save(&self, dir: &Path, cfg: &PipelineConfig) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), cfg.dump())?;
        for p in &self.projections {
            write_feature(&p.to_feature(), dir.join(format!("proj_{}.dsff", sanitize(p.tag()))))?;
        }
        write_feature(&self.condenc.to_feature(), dir.join("condenc.dsff"))?;
        write_feature(&self.f0_table.to_feature(), dir.join("embed_f0.dsff"))?;
        write_feature(&self.energy_table.to_feature(), dir.join("embed_energy.dsff"))?;
        self.speakers
            .save(dir.join("speakers.dsff"), dir.join("speakers.names.txt"))?;
        let mut medians = String::new();
        for (name, hz) in &self.medians {
            medians.push_str(&format!("{name}|{hz}\n"));
        }
        std::fs::write(dir.join("speaker_f0_medians.txt"), medians)?;
        let quants = format!(
            "f0|{}|{}|{}\nenergy|{}|{}|{}\n",
            scale_name(self.f0_quant.scale()),
            self.f0_quant.lo(),
            self.f0_quant.hi(),
            scale_name(self.energy_quant.scale()),
            self.energy_quant.lo(),
            self.energy_quant.hi(),
        );
        std::fs::write(dir.join("quantizers.txt"), quants)?;
        write_feature(&self.decoder.to_feature(), dir.join("decoder.dsff"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut projections = load_projections(dir)?;
        if projections.is_empty() {
            return Err(Error::format(format!(
                "{}: no proj_*.dsff files; run fit first",
                dir.display()
            )));
        }
        projections.sort_by(|a, b| a.tag().cmp(b.tag()));
        let condenc = ProjectionWeights::from_feature(&read_feature(dir.join("condenc.dsff"))?)?;
        let f0_table = EmbeddingTable::from_feature(&read_feature(dir.join("embed_f0.dsff"))?)?;
        let energy_table =
            EmbeddingTable::from_feature(&read_feature(dir.join("embed_energy.dsff"))?)?;
        let speakers =
            SpeakerTable::load(dir.join("speakers.dsff"), dir.join("speakers.names.txt"))?;
        let medians = parse_medians(&std::fs::read_to_string(dir.join("speaker_f0_medians.txt"))?)?;
        let (f0_quant, energy_quant) =
            parse_quantizers(&std::fs::read_to_string(dir.join("quantizers.txt"))?)?;
        let decoder = DecoderWeights::from_feature(&read_feature(dir.join("decoder.dsff"))?)?;
        Ok(Weights {
            projections,
            condenc,
            f0_table,
            energy_table,
            speakers,
            medians,
            f0_quant,
            energy_quant,
            decoder,
        })
    }

}

/// All proj_*.dsff files in `dir`, unsorted.
pub fn load_projections(dir: &Path) -> Result<Vec<ProjectionWeights>> {
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("proj_") && n.ends_with(".dsff"))
        })
        .collect();
    paths.sort();
    for p in paths {
        out.push(ProjectionWeights::from_feature(&read_feature(&p)?)?);
    }
    Ok(out)
}

fn parse_medians(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (name, hz) = line.split_once('|').ok_or_else(|| {
            Error::format(format!("speaker_f0_medians.txt line {}: missing '|'", i + 1))
        })?;
        let hz: f64 = hz.trim().parse().map_err(|_| {
            Error::format(format!("speaker_f0_medians.txt line {}: bad number {hz:?}", i + 1))
        })?;
        out.insert(name.trim().to_owned(), hz);
    }
    if out.is_empty() {
        return Err(Error::format("speaker_f0_medians.txt lists no speakers"));
    }
    Ok(out)
}

fn parse_quantizers(text: &str) -> Result<(Quantizer, Quantizer)> {
    let mut f0 = None;
    let mut energy = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('|').collect();
        if parts.len() != 4 {
            return Err(Error::format(format!(
                "quantizers.txt line {}: expected name|scale|lo|hi",
                i + 1
            )));
        }
        let bad = |what: &str| Error::format(format!("quantizers.txt line {}: bad {what}", i + 1));
        let scale = parse_scale(parts[1])?;
        let lo: f64 = parts[2].parse().map_err(|_| bad("lo"))?;
        let hi: f64 = parts[3].parse().map_err(|_| bad("hi"))?;
        let q = Quantizer::new(lo, hi, scale)?;
        match parts[0] {
            "f0" => f0 = Some(q),
            "energy" => energy = Some(q),
            other => return Err(Error::format(format!("unknown quantizer {other:?}"))),
        }
    }
    match (f0, energy) {
        (Some(f), Some(e)) => Ok((f, e)),
        _ => Err(Error::format("quantizers.txt must define both f0 and energy")),
    }
}
