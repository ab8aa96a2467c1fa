use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use dsff_core::align_fuse::{fuse_add, ProjectionWeights};
use dsff_core::audio_io::{write_wav, BitDepth};
use dsff_core::bench::{compare_alignment, BenchOptions, WorkloadSpec};
use dsff_core::conditioning::SpeakerTable;
use dsff_core::config::{seeded_rng, PipelineConfig};
use dsff_core::decoder::{decode, fit_ridge_relative, PairedDataset};
use dsff_core::error::{Error, Result};
use dsff_core::feature_store::{read_feature, write_feature, FeatureSequence};
use dsff_core::manifest::{load_convert_manifest, load_eval_manifest, load_train_manifest};
use dsff_core::metrics::{cer, cosine_sim, f0_corr, f0_rmse, mcd, F0ErrorUnit, MetricReport};
use dsff_core::prosody::{
    f0_to_features, percentile, transpose_f0, voiced_median, EmbeddingTable, EnergyTrack, F0Track,
    QuantScale, Quantizer,
};
use dsff_core::synth::{glide_sine, smooth_features};

use crate::analysis::{analyze_audio, projection_for, read_sources, Conditioner};
use crate::weights::{load_projections, Weights};
use crate::{
    BenchArgs, ConvertArgs, EvaluateArgs, ExtractProsodyArgs, FitArgs, FuseArgs, GenFixturesArgs,
};

const FIXTURE_PITCHES: [f64; 6] = [220.0, 147.0, 262.0, 175.0, 196.0, 294.0];

/// `--weights-dir` wins; otherwise the config's paths.weights_dir.
fn weights_dir_from(arg: &Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf> {
    resolve_weights_dir(arg, cfg).ok_or_else(|| {
        Error::invalid("no weights directory: pass --weights-dir or set paths.weights_dir")
    })
}

fn resolve_weights_dir(arg: &Option<PathBuf>, cfg: &PipelineConfig) -> Option<PathBuf> {
    arg.clone().or_else(|| {
        if cfg.paths.weights_dir.is_empty() {
            None
        } else {
            Some(PathBuf::from(&cfg.paths.weights_dir))
        }
    })
}

pub fn gen_fixtures(args: &GenFixturesArgs, cfg: &PipelineConfig) -> Result<()> {
    if args.utterances == 0 || args.speakers == 0 {
        return Err(Error::invalid("need at least one utterance and one speaker"));
    }
    if args.speakers > args.utterances {
        return Err(Error::invalid("more speakers than utterances"));
    }
    if !(args.seconds >= 0.5) {
        return Err(Error::invalid("fixtures shorter than 0.5 s are not useful"));
    }
    let sr = cfg.audio.sample_rate;
    let wav_dir = args.out.join("wav");
    let feat_dir = args.out.join("feat");
    std::fs::create_dir_all(&wav_dir)?;
    std::fs::create_dir_all(&feat_dir)?;

    let mut rng = seeded_rng(cfg.model.seed, "fixtures");
    let mut train = String::new();
    let mut convert = String::new();
    use rand::Rng;
    for i in 0..args.utterances {
        let label = format!("utt{i:03}");
        let speaker = format!("spk{}", i % args.speakers);
        let base = FIXTURE_PITCHES[(i % args.speakers) % FIXTURE_PITCHES.len()];
        let pitch = base * 2f64.powf(rng.random_range(-0.15..0.15));
        let span = rng.random_range(0.15..0.25)
            * if rng.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 };
        let (hz0, hz1) = (pitch * 2f64.powf(-span), pitch * 2f64.powf(span));
        let amp = 0.3 + rng.random_range(0.0..0.15);
        let vib_hz = 4.5 + rng.random_range(0.0..2.0);
        let trem_hz = rng.random_range(0.5..1.2);
        let trem_depth = rng.random_range(0.25..0.4);
        let audio =
            glide_sine(sr, hz0, hz1, args.seconds, amp, vib_hz, 0.01, trem_hz, trem_depth)?;
        write_wav(&audio, BitDepth::Pcm16, wav_dir.join(format!("{label}.wav")))?;

        for (tag, rate, dim) in [("enc_a", 25.0, 12usize), ("enc_b", 50.0, 16)] {
            let frames = ((args.seconds * rate).round() as usize).max(2);
            let feat = smooth_features(frames, dim, rate, tag, &mut rng)?;
            write_feature(&feat, feat_dir.join(format!("{label}.{tag}.dsff")))?;
        }
        let srcs = format!("feat/{label}.enc_a.dsff;feat/{label}.enc_b.dsff");
        train.push_str(&format!("{label}|{speaker}|wav/{label}.wav|{srcs}\n"));
        let target = format!("spk{}", (i + 1) % args.speakers);
        convert.push_str(&format!("{label}|wav/{label}.wav|{target}|{srcs}\n"));
    }
    std::fs::write(args.out.join("train.list"), &train)?;
    std::fs::write(args.out.join("convert.list"), &convert)?;
    println!(
        "wrote {} utterances x {:.1} s across {} speakers under {}",
        args.utterances,
        args.seconds,
        args.speakers,
        args.out.display()
    );
    Ok(())
}

fn stem_path(stem: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", stem.display()))
}

pub fn extract_prosody(args: &ExtractProsodyArgs, cfg: &PipelineConfig) -> Result<()> {
    let a = analyze_audio(&args.audio, cfg)?;
    if let Some(parent) = args.out_stem.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let (f0_vals, f0_voicing) = f0_to_features(&a.f0);
    write_feature(&f0_vals, stem_path(&args.out_stem, ".f0.dsff"))?;
    write_feature(&f0_voicing, stem_path(&args.out_stem, ".f0.voicing.dsff"))?;
    let energy = FeatureSequence::new(
        Array2::from_shape_fn((a.energy.values.len(), 1), |(i, _)| a.energy.values[i]),
        a.energy.frame_rate,
        "energy",
    )?;
    write_feature(&energy, stem_path(&args.out_stem, ".energy.dsff"))?;
    write_feature(&a.mel, stem_path(&args.out_stem, ".mel.dsff"))?;
    let voiced = a.f0.voiced.iter().filter(|v| **v).count();
    println!(
        "{}: {} frames, {} voiced -> {}.{{f0,f0.voicing,energy,mel}}.dsff",
        args.audio.display(),
        a.f0.len(),
        voiced,
        args.out_stem.display()
    );
    Ok(())
}

pub fn fuse(args: &FuseArgs, cfg: &PipelineConfig) -> Result<()> {
    let sources = read_sources(&args.sources)?;
    let n_frames = match (args.frames, args.rate) {
        (Some(n), _) => n,
        (None, rate) => {
            let rate = rate.unwrap_or(cfg.model.target_frame_rate);
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::invalid("target rate must be positive"));
            }
            ((sources[0].duration_seconds() * rate).round() as usize).max(1)
        }
    };
    let weights_dir = resolve_weights_dir(&args.weights_dir, cfg);
    let stored = match &weights_dir {
        Some(dir) => load_projections(dir)?,
        None => Vec::new(),
    };
    let projections: Vec<ProjectionWeights> = sources
        .iter()
        .map(|s| {
            if weights_dir.is_some() {
                projection_for(&stored, s.source_tag()).cloned()
            } else {
                let mut rng = seeded_rng(cfg.model.seed, &format!("proj:{}", s.source_tag()));
                ProjectionWeights::seeded(s.dim(), cfg.model.latent_dim, s.source_tag(), &mut rng)
            }
        })
        .collect::<Result<_>>()?;
    let fused = fuse_add(&sources, &projections, n_frames)?;
    write_feature(&fused, &args.out)?;
    println!(
        "fused {} sources -> {} ({} frames x {} dims at {:.3} fps)",
        sources.len(),
        args.out.display(),
        fused.n_frames(),
        fused.dim(),
        fused.frame_rate()
    );
    Ok(())
}

struct PreppedUtterance {
    label: String,
    speaker: String,
    mel: FeatureSequence,
    f0: F0Track,
    energy: EnergyTrack,
    sources: Vec<FeatureSequence>,
}

pub fn fit(args: &FitArgs, cfg: &PipelineConfig) -> Result<()> {
    let records = load_train_manifest(&args.manifest)?;
    let lambda_rel = args.lambda_rel.unwrap_or(cfg.ridge.lambda_rel);
    if !(lambda_rel >= 0.0) {
        return Err(Error::invalid("lambda_rel must be non-negative"));
    }

    let prepped: Result<Vec<PreppedUtterance>> = records
        .par_iter()
        .map(|r| {
            let a = analyze_audio(&r.audio, cfg)?;
            let sources = read_sources(&r.sources)?;
            Ok(PreppedUtterance {
                label: r.label.clone(),
                speaker: r.speaker.clone(),
                mel: a.mel,
                f0: a.f0,
                energy: a.energy,
                sources,
            })
        })
        .collect();
    let prepped = prepped?;

    // Source tags and dims must agree across the corpus.
    let mut dims: BTreeMap<String, usize> = BTreeMap::new();
    for p in &prepped {
        for s in &p.sources {
            match dims.get(s.source_tag()) {
                Some(&d) if d != s.dim() => {
                    return Err(Error::dims(
                        format!("{} dims for source {:?}", d, s.source_tag()),
                        format!("{} in {}", s.dim(), p.label),
                    ));
                }
                _ => {
                    dims.insert(s.source_tag().to_owned(), s.dim());
                }
            }
        }
    }
    for p in &prepped {
        if p.sources.len() != dims.len() {
            return Err(Error::invalid(format!(
                "{}: carries {} sources, corpus defines {} tags ({})",
                p.label,
                p.sources.len(),
                dims.len(),
                dims.keys().cloned().collect::<Vec<_>>().join(", ")
            )));
        }
    }

    // Corpus statistics: per-speaker voiced-F0 medians, energy scale.
    let mut by_speaker: BTreeMap<String, Vec<F0Track>> = BTreeMap::new();
    let mut all_energy = Vec::new();
    for p in &prepped {
        by_speaker.entry(p.speaker.clone()).or_default().push(p.f0.clone());
        all_energy.extend_from_slice(&p.energy.values);
    }
    let mut medians = BTreeMap::new();
    for (name, tracks) in &by_speaker {
        let m = voiced_median(tracks)
            .map_err(|e| Error::invalid(format!("speaker {name}: {e}")))?;
        medians.insert(name.clone(), m);
    }
    let energy_hi = percentile(&all_energy, cfg.quant.energy_percentile)?.max(1e-9);
    let f0_quant = Quantizer::new(cfg.quant.f0_lo_hz, cfg.quant.f0_hi_hz, QuantScale::Log)?;
    let energy_quant = Quantizer::new(0.0, energy_hi, QuantScale::Linear)?;

    // Seeded weight init, one stream per component.
    let d = cfg.model.latent_dim;
    let seed = cfg.model.seed;
    let projections: Vec<ProjectionWeights> = dims
        .iter()
        .map(|(tag, &d_in)| {
            let mut rng = seeded_rng(seed, &format!("proj:{tag}"));
            ProjectionWeights::seeded(d_in, d, tag, &mut rng)
        })
        .collect::<Result<_>>()?;
    let condenc = ProjectionWeights::seeded(d, d, "condenc", &mut seeded_rng(seed, "condenc"))?;
    let f0_table = EmbeddingTable::seeded(d, "embed:f0", &mut seeded_rng(seed, "embed:f0"))?;
    let energy_table =
        EmbeddingTable::seeded(d, "embed:energy", &mut seeded_rng(seed, "embed:energy"))?;
    let names: Vec<String> = medians.keys().cloned().collect();
    let speakers = SpeakerTable::seeded(&names, d, &mut seeded_rng(seed, "speakers"))?;

    let conditioner = Conditioner {
        projections: &projections,
        condenc: &condenc,
        f0_table: &f0_table,
        energy_table: &energy_table,
        speakers: &speakers,
        f0_quant: &f0_quant,
        energy_quant: &energy_quant,
    };
    let pairs: Result<Vec<_>> = prepped
        .par_iter()
        .map(|p| {
            let cond = conditioner.assemble(
                &p.sources,
                &p.f0,
                &p.energy,
                &p.speaker,
                p.mel.n_frames(),
                p.mel.frame_rate(),
            )?;
            Ok((cond, p.mel.clone()))
        })
        .collect();
    let dataset = PairedDataset::new(pairs?)?;
    let decoder = fit_ridge_relative(&dataset, lambda_rel)?;

    let weights = Weights {
        projections,
        condenc,
        f0_table,
        energy_table,
        speakers,
        medians,
        f0_quant,
        energy_quant,
        decoder,
    };
    let dir = weights_dir_from(&args.weights_dir, cfg)?;
    weights.save(&dir, cfg)?;
    println!(
        "fitted {} utterances ({} frames, {} source tags, {} speakers) -> {}",
        prepped.len(),
        dataset.total_frames(),
        dims.len(),
        names.len(),
        dir.display()
    );
    Ok(())
}

pub fn convert(args: &ConvertArgs, cfg: &PipelineConfig) -> Result<()> {
    let records = load_convert_manifest(&args.manifest)?;
    let weights = Weights::load(&weights_dir_from(&args.weights_dir, cfg)?)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let conditioner = weights.conditioner();

    let lines: Result<Vec<String>> = records
        .par_iter()
        .map(|r| {
            let a = analyze_audio(&r.audio, cfg)?;
            let sources = read_sources(&r.sources)?;
            let target_median = *weights
                .medians
                .get(&r.target_speaker)
                .ok_or_else(|| Error::UnknownSpeaker(r.target_speaker.clone()))?;
            let source_median = voiced_median(std::slice::from_ref(&a.f0))
                .map_err(|e| Error::invalid(format!("{}: {e}", r.label)))?;
            let factor = target_median / source_median;
            let moved = transpose_f0(&a.f0, factor)?;
            let cond = conditioner.assemble(
                &sources,
                &moved,
                &a.energy,
                &r.target_speaker,
                a.mel.n_frames(),
                a.mel.frame_rate(),
            )?;
            let mel_out = decode(&cond, &weights.decoder)?;
            let mel_path = args.out_dir.join(format!("{}.mel.dsff", r.label));
            write_feature(&mel_out, &mel_path)?;
            let (vals, voicing) = f0_to_features(&moved);
            write_feature(&vals, args.out_dir.join(format!("{}.f0.dsff", r.label)))?;
            write_feature(&voicing, args.out_dir.join(format!("{}.f0.voicing.dsff", r.label)))?;
            Ok(format!(
                "{} -> {} (target {}, transposition x{:.4})",
                r.label,
                mel_path.display(),
                r.target_speaker,
                factor
            ))
        })
        .collect();
    for line in lines? {
        println!("{line}");
    }
    Ok(())
}

fn equalize_frames(
    a: FeatureSequence,
    b: FeatureSequence,
) -> Result<(FeatureSequence, FeatureSequence)> {
    use dsff_core::align_fuse::resample_time;
    if a.n_frames() == b.n_frames() {
        Ok((a, b))
    } else if a.n_frames() > b.n_frames() {
        let n = b.n_frames();
        Ok((resample_time(&a, n)?, b))
    } else {
        let n = a.n_frames();
        let b = resample_time(&b, n)?;
        Ok((a, b))
    }
}

fn track_from_values(seq: &FeatureSequence, path: &Path) -> Result<F0Track> {
    if seq.dim() != 1 {
        return Err(Error::invalid(format!(
            "{}: F0 files are 1-column, got {} columns",
            path.display(),
            seq.dim()
        )));
    }
    let values: Vec<f64> = seq.data().column(0).to_vec();
    if values.iter().any(|v| *v < 0.0) {
        return Err(Error::invalid(format!(
            "{}: negative F0 value",
            path.display()
        )));
    }
    let voiced: Vec<bool> = values.iter().map(|v| *v > 0.0).collect();
    F0Track::new(values, voiced, seq.frame_rate())
}

fn equalize_tracks(a: F0Track, b: F0Track) -> Result<(F0Track, F0Track)> {
    use dsff_core::prosody::resample_track_nearest;
    if a.len() == b.len() {
        Ok((a, b))
    } else if a.len() > b.len() {
        let n = b.len();
        Ok((resample_track_nearest(&a, n)?, b))
    } else {
        let n = a.len();
        let b = resample_track_nearest(&b, n)?;
        Ok((a, b))
    }
}

fn embedding_vector(seq: &FeatureSequence, path: &Path) -> Result<Vec<f64>> {
    if seq.n_frames() != 1 {
        return Err(Error::invalid(format!(
            "{}: speaker embeddings are single-frame files, got {} frames",
            path.display(),
            seq.n_frames()
        )));
    }
    Ok(seq.frame(0).to_vec())
}

pub fn evaluate(args: &EvaluateArgs, _cfg: &PipelineConfig) -> Result<()> {
    let records = load_eval_manifest(&args.manifest)?;
    let unit: F0ErrorUnit = args.f0_unit.parse()?;

    let rows: Result<Vec<(String, MetricReport)>> = records
        .par_iter()
        .map(|r| {
            let mut m = MetricReport::default();
            if let (Some(c), Some(rf)) = (&r.converted_mel, &r.reference_mel) {
                let (a, b) = equalize_frames(read_feature(c)?, read_feature(rf)?)?;
                m.mcd = Some(mcd(&a, &b, args.dtw)?);
            }
            if let (Some(c), Some(rf)) = (&r.converted_f0, &r.reference_f0) {
                let a = track_from_values(&read_feature(c)?, c)?;
                let b = track_from_values(&read_feature(rf)?, rf)?;
                let (a, b) = equalize_tracks(a, b)?;
                m.f0corr = Some(f0_corr(&a, &b)?);
                m.f0rmse = Some(f0_rmse(&a, &b, unit)?);
                m.f0rmse_unit = Some(unit);
            }
            if let (Some(h), Some(rf)) = (&r.hyp_transcript, &r.ref_transcript) {
                let hyp = std::fs::read_to_string(h)?;
                let reference = std::fs::read_to_string(rf)?;
                m.cer = Some(cer(&reference, &hyp)?);
            }
            if let (Some(c), Some(rf)) = (&r.converted_embedding, &r.reference_embedding) {
                let a = embedding_vector(&read_feature(c)?, c)?;
                let b = embedding_vector(&read_feature(rf)?, rf)?;
                m.sim = Some(cosine_sim(&a, &b)?);
            }
            Ok((r.label.clone(), m))
        })
        .collect();
    let rows = rows?;

    let mut csv = String::from(MetricReport::csv_header());
    csv.push('\n');
    for (label, m) in &rows {
        csv.push_str(&m.csv_row(label));
        csv.push('\n');
        println!("{label}: {m}");
    }
    let reports: Vec<MetricReport> = rows.iter().map(|(_, m)| m.clone()).collect();
    let mean = MetricReport::mean_of(&reports);
    csv.push_str(&mean.csv_row("mean"));
    csv.push('\n');
    println!("mean: {mean}");
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&args.out, csv)?;
    println!("report -> {}", args.out.display());
    Ok(())
}

pub fn bench(args: &BenchArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut spec = if args.quick {
        WorkloadSpec::small(cfg.model.seed)
    } else {
        WorkloadSpec::reference()
    };
    spec.seed = cfg.model.seed;
    spec.lambda_rel = cfg.ridge.lambda_rel;
    let opts = BenchOptions {
        runs: args.runs,
        parallel: args.parallel,
        injected_delay_seconds: 0.0,
    };
    let cmp = compare_alignment(&spec, &opts)?;
    print!("{}", cmp.table());
    if let Some(delta) = cmp.mcd_delta() {
        println!("mcd delta (cross-attention - resampling): {delta:+.4} dB");
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, cmp.csv())?;
        println!("csv -> {}", path.display());
    }
    Ok(())
}
