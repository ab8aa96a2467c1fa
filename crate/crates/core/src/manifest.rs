//! Manifest parsing for batch commands.
//!
//! All manifests are UTF-8 text, one record per line, fields separated by
//! `|`. Blank lines and lines starting with `#` are skipped. Error messages
//! carry 1-based physical line numbers.
//!
//! Formats:
//! - train:   `label|speaker|audio.wav|src_a.dsff;src_b.dsff;...`
//! - convert: `label|audio.wav|target_speaker|src_a.dsff;src_b.dsff;...`
//! - eval:    `label|conv_mel|ref_mel|conv_f0|ref_f0|hyp_txt|ref_txt|conv_emb|ref_emb`
//!   where every field after `label` may be empty, but paired fields must be
//!   given together (you cannot score MCD with only one mel).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainRecord {
    pub label: String,
    pub speaker: String,
    pub audio: PathBuf,
    pub sources: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvertRecord {
    pub label: String,
    pub audio: PathBuf,
    pub target_speaker: String,
    pub sources: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvalRecord {
    pub label: String,
    pub converted_mel: Option<PathBuf>,
    pub reference_mel: Option<PathBuf>,
    pub converted_f0: Option<PathBuf>,
    pub reference_f0: Option<PathBuf>,
    pub hyp_transcript: Option<PathBuf>,
    pub ref_transcript: Option<PathBuf>,
    pub converted_embedding: Option<PathBuf>,
    pub reference_embedding: Option<PathBuf>,
}

/// Lines worth parsing, with their physical 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn split_fields<'a>(line: &'a str, expected: usize, lineno: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('|').map(str::trim).collect();
    if fields.len() != expected {
        return Err(Error::format(format!(
            "line {lineno}: expected {expected} |-separated fields, found {}",
            fields.len()
        )));
    }
    Ok(fields)
}

fn required<'a>(field: &'a str, name: &str, lineno: usize) -> Result<&'a str> {
    if field.is_empty() {
        Err(Error::format(format!("line {lineno}: empty {name} field")))
    } else {
        Ok(field)
    }
}

/// Labels become output file names and CSV cells, so keep them tame.
fn checked_label(field: &str, lineno: usize) -> Result<String> {
    let label = required(field, "label", lineno)?;
    if !label
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        || label.starts_with('.')
    {
        return Err(Error::format(format!(
            "line {lineno}: label {label:?} may only contain alphanumerics, '-', '_', '.' and must not start with '.'"
        )));
    }
    Ok(label.to_owned())
}

fn source_list(field: &str, lineno: usize) -> Result<Vec<PathBuf>> {
    let sources: Vec<PathBuf> = field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect();
    if sources.is_empty() {
        return Err(Error::format(format!(
            "line {lineno}: record lists no source feature files"
        )));
    }
    Ok(sources)
}

fn check_unique_labels<'a>(labels: impl Iterator<Item = (usize, &'a str)>) -> Result<()> {
    let mut seen = HashSet::new();
    for (lineno, label) in labels {
        if !seen.insert(label.to_owned()) {
            return Err(Error::format(format!(
                "line {lineno}: duplicate label {label:?}; output names would collide"
            )));
        }
    }
    Ok(())
}

pub fn parse_train_manifest(text: &str) -> Result<Vec<TrainRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in records(text) {
        let f = split_fields(line, 4, lineno)?;
        out.push(TrainRecord {
            label: checked_label(f[0], lineno)?,
            speaker: required(f[1], "speaker", lineno)?.to_owned(),
            audio: PathBuf::from(required(f[2], "audio path", lineno)?),
            sources: source_list(f[3], lineno)?,
        });
    }
    if out.is_empty() {
        return Err(Error::format("manifest contains no records"));
    }
    check_unique_labels(out.iter().enumerate().map(|(i, r)| (i + 1, r.label.as_str())))?;
    Ok(out)
}

pub fn parse_convert_manifest(text: &str) -> Result<Vec<ConvertRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in records(text) {
        let f = split_fields(line, 4, lineno)?;
        out.push(ConvertRecord {
            label: checked_label(f[0], lineno)?,
            audio: PathBuf::from(required(f[1], "audio path", lineno)?),
            target_speaker: required(f[2], "target speaker", lineno)?.to_owned(),
            sources: source_list(f[3], lineno)?,
        });
    }
    if out.is_empty() {
        return Err(Error::format("manifest contains no records"));
    }
    check_unique_labels(out.iter().enumerate().map(|(i, r)| (i + 1, r.label.as_str())))?;
    Ok(out)
}

fn optional_pair(
    a: &str,
    b: &str,
    what: (&str, &str),
    lineno: usize,
) -> Result<(Option<PathBuf>, Option<PathBuf>)> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Ok((None, None)),
        (false, false) => Ok((Some(PathBuf::from(a)), Some(PathBuf::from(b)))),
        (false, true) => Err(Error::format(format!(
            "line {lineno}: {} given without {}",
            what.0, what.1
        ))),
        (true, false) => Err(Error::format(format!(
            "line {lineno}: {} given without {}",
            what.1, what.0
        ))),
    }
}

pub fn parse_eval_manifest(text: &str) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in records(text) {
        let f = split_fields(line, 9, lineno)?;
        let label = checked_label(f[0], lineno)?;
        let (converted_mel, reference_mel) =
            optional_pair(f[1], f[2], ("converted mel", "reference mel"), lineno)?;
        let (converted_f0, reference_f0) =
            optional_pair(f[3], f[4], ("converted F0", "reference F0"), lineno)?;
        let (hyp_transcript, ref_transcript) = optional_pair(
            f[5],
            f[6],
            ("hypothesis transcript", "reference transcript"),
            lineno,
        )?;
        let (converted_embedding, reference_embedding) = optional_pair(
            f[7],
            f[8],
            ("converted embedding", "reference embedding"),
            lineno,
        )?;
        if converted_mel.is_none()
            && converted_f0.is_none()
            && hyp_transcript.is_none()
            && converted_embedding.is_none()
        {
            return Err(Error::format(format!(
                "line {lineno}: record requests no metrics at all"
            )));
        }
        out.push(EvalRecord {
            label,
            converted_mel,
            reference_mel,
            converted_f0,
            reference_f0,
            hyp_transcript,
            ref_transcript,
            converted_embedding,
            reference_embedding,
        });
    }
    if out.is_empty() {
        return Err(Error::format("manifest contains no records"));
    }
    check_unique_labels(out.iter().enumerate().map(|(i, r)| (i + 1, r.label.as_str())))?;
    Ok(out)
}

/// Resolve a manifest-relative path: absolute paths pass through, relative
/// ones are joined onto the manifest's parent directory.
pub fn resolve_path(manifest: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}

pub fn load_train_manifest(path: &Path) -> Result<Vec<TrainRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut recs = parse_train_manifest(&text)?;
    for r in &mut recs {
        r.audio = resolve_path(path, &r.audio);
        for s in &mut r.sources {
            *s = resolve_path(path, s);
        }
    }
    Ok(recs)
}

pub fn load_convert_manifest(path: &Path) -> Result<Vec<ConvertRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut recs = parse_convert_manifest(&text)?;
    for r in &mut recs {
        r.audio = resolve_path(path, &r.audio);
        for s in &mut r.sources {
            *s = resolve_path(path, s);
        }
    }
    Ok(recs)
}

pub fn load_eval_manifest(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut recs = parse_eval_manifest(&text)?;
    for r in &mut recs {
        for field in [
            &mut r.converted_mel,
            &mut r.reference_mel,
            &mut r.converted_f0,
            &mut r.reference_f0,
            &mut r.hyp_transcript,
            &mut r.ref_transcript,
            &mut r.converted_embedding,
            &mut r.reference_embedding,
        ] {
            if let Some(p) = field {
                *p = resolve_path(path, p);
            }
        }
    }
    Ok(recs)
}
