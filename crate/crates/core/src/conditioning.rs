//! Speaker identity conditioning and the final conditioning encoder.
//!
//! The condition stream is the elementwise sum of the fused semantic
//! features, the two prosody embeddings, and the speaker embedding repeated
//! across time, pushed through one dense encoder layer.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::align_fuse::{project, ProjectionWeights};
use crate::error::{Error, Result};
use crate::feature_store::FeatureSequence;

/// Fixed lookup table of speaker embeddings, addressed by name.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerTable {
    rows: Array2<f64>,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl SpeakerTable {
    pub fn new(rows: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::invalid("speaker table needs at least one speaker"));
        }
        if rows.nrows() != names.len() {
            return Err(Error::dims(
                format!("{} embedding rows", names.len()),
                format!("{}", rows.nrows()),
            ));
        }
        if rows.ncols() == 0 {
            return Err(Error::invalid("speaker embedding dim must be positive"));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite speaker embedding"));
        }
        let mut index = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::invalid("empty speaker name"));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate speaker name: {name}")));
            }
        }
        Ok(SpeakerTable { rows, names, index })
    }

    /// Seeded uniform init in [-0.1, 0.1], one row per name.
    pub fn seeded(names: &[String], dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("speaker embedding dim must be positive"));
        }
        let mut rows = Array2::zeros((names.len(), dim));
        for v in rows.iter_mut() {
            *v = rng.random_range(-0.1..0.1);
        }
        SpeakerTable::new(rows, names.to_vec())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lookup(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownSpeaker(name.to_owned()))
    }

    pub fn embedding(&self, name: &str) -> Result<ArrayView1<'_, f64>> {
        Ok(self.rows.row(self.lookup(name)?))
    }

    /// Embeddings go into one DSFF file, names into a text sidecar with one
    /// name per line (DSFF has a single tag slot, not per-row labels).
    pub fn save(&self, table_path: impl AsRef<Path>, names_path: impl AsRef<Path>) -> Result<()> {
        let feature = FeatureSequence::new(self.rows.clone(), 1.0, "speakers")?;
        crate::feature_store::write_feature(&feature, table_path)?;
        fs::write(names_path, self.names.join("\n") + "\n")?;
        Ok(())
    }

    pub fn load(table_path: impl AsRef<Path>, names_path: impl AsRef<Path>) -> Result<Self> {
        let feature = crate::feature_store::read_feature(table_path)?;
        let names: Vec<String> = fs::read_to_string(names_path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        SpeakerTable::new(feature.data().clone(), names)
    }
}

/// The speaker's embedding repeated for `n_frames` rows on the given grid.
pub fn speaker_frames(
    table: &SpeakerTable,
    name: &str,
    n_frames: usize,
    frame_rate: f64,
) -> Result<FeatureSequence> {
    if n_frames == 0 {
        return Err(Error::invalid("frame count must be positive"));
    }
    let row = table.embedding(name)?;
    let mut data = Array2::zeros((n_frames, table.dim()));
    for mut out in data.rows_mut() {
        out.assign(&row);
    }
    FeatureSequence::new(data, frame_rate, "speaker")
}

/// The assembled conditioning stream: one row per target frame, used as the
/// decoder input.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    data: Array2<f64>,
    frame_rate: f64,
}

impl Condition {
    pub fn new(data: Array2<f64>, frame_rate: f64) -> Result<Self> {
        let seq = FeatureSequence::new(data, frame_rate, "condition")?;
        Ok(Condition { frame_rate: seq.frame_rate(), data: seq.into_data() })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn to_feature(&self) -> FeatureSequence {
        FeatureSequence::new(self.data.clone(), self.frame_rate, "condition")
            .expect("validated at construction")
    }
}

/// Sums the four aligned streams and applies the conditioning encoder (one
/// dense layer). All inputs must share the same frame count and width, which
/// is also the encoder's input width.
pub fn assemble_condition(
    semantic: &FeatureSequence,
    f0_embedding: &FeatureSequence,
    energy_embedding: &FeatureSequence,
    speaker: &FeatureSequence,
    encoder: &ProjectionWeights,
) -> Result<Condition> {
    let t = semantic.n_frames();
    let d = semantic.dim();
    for (label, s) in [
        ("f0 embedding", f0_embedding),
        ("energy embedding", energy_embedding),
        ("speaker frames", speaker),
    ] {
        if s.n_frames() != t || s.dim() != d {
            return Err(Error::dims(
                format!("{t} x {d} (matching the semantic stream)"),
                format!("{} x {} in {label}", s.n_frames(), s.dim()),
            ));
        }
    }
    let mut sum = semantic.data().clone();
    sum += f0_embedding.data();
    sum += energy_embedding.data();
    sum += speaker.data();
    let summed = FeatureSequence::new(sum, semantic.frame_rate(), "condition")?;
    let encoded = project(&summed, encoder)?;
    Condition::new(encoded.into_data(), semantic.frame_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::seeded_rng;
    use ndarray::array;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lookup_finds_rows_by_name() {
        let table = SpeakerTable::new(
            array![[1.0, 2.0], [3.0, 4.0]],
            names(&["ada", "grace"]),
        )
        .unwrap();
        assert_eq!(table.lookup("grace").unwrap(), 1);
        assert_eq!(table.embedding("ada").unwrap().to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn unknown_speaker_is_an_error() {
        let table = SpeakerTable::new(array![[1.0]], names(&["ada"])).unwrap();
        let err = table.lookup("nobody").unwrap_err();
        assert_eq!(err.to_string(), "speaker not in table: nobody");
    }

    #[test]
    fn duplicate_names_are_rejected() {
        assert!(SpeakerTable::new(Array2::zeros((2, 3)), names(&["a", "a"])).is_err());
    }

    #[test]
    fn table_survives_save_and_load() {
        let mut rng = seeded_rng(3, "speakers");
        let table = SpeakerTable::seeded(&names(&["ada", "grace", "joan"]), 5, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let t_path = dir.path().join("speakers.dsff");
        let n_path = dir.path().join("speakers.txt");
        table.save(&t_path, &n_path).unwrap();
        let back = SpeakerTable::load(&t_path, &n_path).unwrap();
        assert_eq!(back.names(), table.names());
        // Disk payloads are f32; loaded values are the f32 rounding of the
        // originals, nothing worse.
        for (a, b) in table.embedding("grace").unwrap().iter().zip(back.embedding("grace").unwrap()) {
            assert_eq!(*b, (*a as f32) as f64);
        }
    }

    #[test]
    fn speaker_frames_repeats_the_embedding() {
        let table = SpeakerTable::new(array![[1.0, -2.0]], names(&["ada"])).unwrap();
        let frames = speaker_frames(&table, "ada", 4, 62.5).unwrap();
        assert_eq!(frames.n_frames(), 4);
        assert_eq!(frames.frame_rate(), 62.5);
        assert_eq!(frames.source_tag(), "speaker");
        for t in 0..4 {
            assert_eq!(frames.frame(t).to_vec(), vec![1.0, -2.0]);
        }
    }

    #[test]
    fn assemble_sums_then_encodes() {
        let d = 3;
        let t = 2;
        let ones = FeatureSequence::new(Array2::ones((t, d)), 50.0, "x").unwrap();
        let twos = FeatureSequence::new(Array2::from_elem((t, d), 2.0), 50.0, "x").unwrap();
        // Identity encoder with zero bias: output should be the plain sum.
        let eye = Array2::from_shape_fn((d, d), |(i, j)| if i == j { 1.0 } else { 0.0 });
        let enc = ProjectionWeights::new(eye, ndarray::Array1::zeros(d), "condenc").unwrap();
        let cond = assemble_condition(&ones, &ones, &twos, &twos, &enc).unwrap();
        assert_eq!(cond.n_frames(), t);
        assert_eq!(cond.dim(), d);
        assert!(cond.data().iter().all(|&v| v == 6.0));
        assert_eq!(cond.frame_rate(), 50.0);
    }

    #[test]
    fn assemble_is_symmetric_and_linear_in_its_streams() {
        let mut rng = seeded_rng(2, "condenc");
        let (t, d) = (4, 5);
        let mk = |seed: u64| {
            let mut r = seeded_rng(seed, "stream");
            FeatureSequence::new(
                Array2::from_shape_fn((t, d), |_| rand::Rng::random_range(&mut r, -1.0..1.0)),
                50.0,
                "s",
            )
            .unwrap()
        };
        let (a, b, c, s) = (mk(1), mk(2), mk(3), mk(4));
        let enc = ProjectionWeights::seeded(d, d, "condenc", &mut rng).unwrap();
        let c1 = assemble_condition(&a, &b, &c, &s, &enc).unwrap();
        let c2 = assemble_condition(&s, &c, &b, &a, &enc).unwrap();
        for (x, y) in c1.data().iter().zip(c2.data().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        // Shifting one stream by delta moves the output by delta * matrix.
        let delta = mk(5);
        let shifted = FeatureSequence::new(a.data() + delta.data(), 50.0, "s").unwrap();
        let c3 = assemble_condition(&shifted, &b, &c, &s, &enc).unwrap();
        let moved = c3.data() - c1.data();
        let want = delta.data().dot(enc.matrix());
        for (x, y) in moved.iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn assemble_rejects_misaligned_streams() {
        let d = 3;
        let a = FeatureSequence::new(Array2::ones((2, d)), 50.0, "x").unwrap();
        let b = FeatureSequence::new(Array2::ones((3, d)), 50.0, "x").unwrap();
        let mut rng = seeded_rng(1, "condenc");
        let enc = ProjectionWeights::seeded(d, d, "condenc", &mut rng).unwrap();
        assert!(assemble_condition(&a, &b, &a, &a, &enc).is_err());
        let c = FeatureSequence::new(Array2::ones((2, d + 1)), 50.0, "x").unwrap();
        assert!(assemble_condition(&a, &a, &c, &a, &enc).is_err());
    }
}
